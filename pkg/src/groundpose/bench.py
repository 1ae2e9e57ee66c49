"""Benchmark harnesses: stability histograms, noise sweeps, timing, RANSAC.

Every harness is deterministic for a given seed. Instance ``i`` of a run with
base seed ``s`` is ``generate_instance(s + i)`` and its seed is written to the
records, so any row can be replayed on its own.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import backend, solvers
from .errors import DegenerateConfigurationError, InvalidInputError, ParseError
from .metrics import best_candidate, solution_errors
from .robust import RansacConfig, pixel_homographies, ransac_arrays
from .synth import InstanceConfig, generate_instance, perturb

CSV_VERSION = 1
FOCAL_MODE = {"2pt": "calibrated", "fhf": "fhf", "hf": "hf", "f1hf2": "f1hf2"}
SUCCESS_TOL = 1e-6
FAILURE_LOG10 = -3.0


def _log10(x: float) -> float:
    if x == 0.0:
        return -20.0
    return math.log10(x) if math.isfinite(x) else math.inf


def _solve_instance(kind, inst, normalize=True):
    n = solvers.SAMPLE_SIZE[kind]
    try:
        return solvers.solve_array(kind, inst.x1[:n], inst.x2[:n], inst.R1, inst.R2,
                                   *inst.focals, normalize=normalize)
    except DegenerateConfigurationError:
        return np.empty((0, 8))


# -- stability -----------------------------------------------------------------


@dataclass
class StabilityResult:
    kind: str
    seed: int
    records: list[dict]

    @property
    def log10_h(self) -> np.ndarray:
        return np.array([r["log10_h"] for r in self.records])

    @property
    def log10_f(self) -> np.ndarray:
        return np.array([r["log10_f"] for r in self.records])

    @property
    def success_rate(self) -> float:
        return float(np.mean([r["found"] for r in self.records]))

    @property
    def failure_rate(self) -> float:
        return float(np.mean(self.log10_h > FAILURE_LOG10))

    @property
    def max_candidates(self) -> int:
        return max(r["n_candidates"] for r in self.records)

    def summary(self) -> dict:
        lh = self.log10_h
        return {
            "kind": self.kind,
            "n": len(self.records),
            "median_log10_h": float(np.median(lh)),
            "median_log10_f": float(np.median(self.log10_f)),
            "q90_log10_h": float(np.quantile(lh, 0.9)),
            "success_rate": self.success_rate,
            "failure_rate": self.failure_rate,
            "max_candidates": self.max_candidates,
        }


def stability_histogram(kind: str, n: int = 10_000, seed: int = 0,
                        normalize: bool = True) -> StabilityResult:
    """Noise-free round trip: log10 error of the best candidate per instance.

    ``log10_f`` is the focal error of the unknown focal(s) (``-20`` stands in
    for an exact zero and for the calibrated case).
    """
    solvers.check_kind(kind)
    cfg = InstanceConfig(n_planar=3, focal_mode=FOCAL_MODE[kind])
    records = []
    for i in range(n):
        inst = generate_instance(seed + i, cfg)
        rows = _solve_instance(kind, inst, normalize)
        j, _ = best_candidate(inst, rows, kind)
        if j is None:
            eh = ef = math.inf
        else:
            e = solution_errors(inst, rows[j], kind)
            eh = e.e_H
            ef = e.e_f if e.e_f is not None else 0.0
        records.append({
            "seed": seed + i,
            "log10_h": _log10(eh),
            "log10_f": _log10(ef),
            "n_candidates": len(rows),
            "found": int(eh < SUCCESS_TOL),
        })
    return StabilityResult(kind, seed, records)


# -- noise sweep -----------------------------------------------------------------


@dataclass
class NoiseSweepResult:
    kind: str
    seed: int
    sigmas: list[float]
    records: list[dict]

    def medians(self) -> list[dict]:
        out = []
        for s in self.sigmas:
            rs = [r for r in self.records if r["sigma"] == s]
            row = {"sigma": s}
            for key in ("e_R", "e_t", "e_f"):
                vals = [r[key] for r in rs if r[key] is not None]
                row[key] = float(np.median(vals)) if vals else math.nan
            out.append(row)
        return out


def noise_sweep(kind: str, sigmas: Sequence[float], n: int = 1000, seed: int = 0) -> NoiseSweepResult:
    """Errors of the closest-to-ground-truth candidate per noise level.

    The same ``n`` scenes are reused at every level; level ``k`` adds noise
    drawn from the stream ``(instance seed, k)``. Instances without any
    candidate record ``pi`` for the angles and ``inf`` for the focal error.
    """
    solvers.check_kind(kind)
    sigmas = [float(s) for s in sigmas]
    if any(s < 0 for s in sigmas):
        raise InvalidInputError("noise levels must be non-negative")
    cfg = InstanceConfig(n_planar=3, focal_mode=FOCAL_MODE[kind])
    base = [generate_instance(seed + i, cfg) for i in range(n)]
    records = []
    for k, sigma in enumerate(sigmas):
        for inst in base:
            noisy = perturb(inst, sigma, seed=[inst.seed, k])
            rows = _solve_instance(kind, noisy)
            j, _ = best_candidate(inst, rows, kind)
            if j is None:
                rec = {"e_R": math.pi, "e_t": math.pi,
                       "e_f": None if kind == "2pt" else math.inf}
            else:
                e = solution_errors(inst, rows[j], kind)
                rec = {"e_R": e.e_R, "e_t": e.e_t, "e_f": e.e_f}
            records.append({"seed": inst.seed, "sigma": sigma, **rec})
    return NoiseSweepResult(kind, seed, sigmas, records)


# -- timing ---------------------------------------------------------------------


@dataclass
class SpeedResult:
    kind: str
    backend: str
    n: int
    mean_us: float
    median_us: float
    p95_us: float


def _kernel_call(kind, K):
    if kind == "2pt":
        return lambda a: K.calibrated_kernel(a[0], a[1], a[2], a[3])
    if kind == "fhf":
        return lambda a: K.fhf_kernel(a[0], a[1], a[2], a[3])
    if kind == "hf":
        return lambda a: K.hf_kernel(a[0], a[1], a[2], a[3], a[4])
    return lambda a: K.f1hf2_kernel(a[0], a[1], a[2], a[3])


def _kernel_inputs(kind, inst):
    m = solvers.SAMPLE_SIZE[kind]
    x1, x2 = inst.x1[:m], inst.x2[:m]
    if kind == "2pt":
        x1, x2, s = x1 / inst.focals[0], x2 / inst.focals[1], 1.0
    else:
        s = solvers.normalization_scale(x1, x2)
        x1, x2 = x1 / s, x2 / s
    c = np.ascontiguousarray
    return (c(x1), c(x2), c(inst.R1), c(inst.R2), inst.focals[0] / s)


def _safe_call(kind, K):
    call = _kernel_call(kind, K)

    def safe(a):
        try:
            call(a)
        except DegenerateConfigurationError:
            pass
    return safe


def _batch_mean(safe, inputs) -> float:
    clock = time.perf_counter
    t0 = clock()
    for a in inputs:
        safe(a)
    return (clock() - t0) / len(inputs)


def speed_bench(kind: str, n: int = 10_000, seed: int = 0, backend_name: Optional[str] = None,
                warmup: int = 200, repeats: int = 5) -> SpeedResult:
    """Per-hypothesis solver time.

    Inputs are generated and normalised up front; only the kernel call is
    timed. The mean is the fastest of ``repeats`` batched passes divided by
    ``n`` (the usual timeit convention, which discards scheduler noise);
    median and p95 come from one pass timing each call.
    """
    return speed_compare((kind,), n, seed, backend_name, warmup, repeats)[kind]


def speed_compare(kinds: Sequence[str], n: int = 10_000, seed: int = 0,
                  backend_name: Optional[str] = None, warmup: int = 200,
                  repeats: int = 5) -> dict:
    """:func:`speed_bench` for several solvers with their passes interleaved,
    so slow drift of the machine affects all of them alike."""
    K = backend.get(backend_name) if backend_name else backend.kernels()
    name = backend_name or backend.name()
    calls, inputs = {}, {}
    for kind in kinds:
        solvers.check_kind(kind)
        cfg = InstanceConfig(n_planar=3, focal_mode=FOCAL_MODE[kind])
        inputs[kind] = [_kernel_inputs(kind, generate_instance(seed + i, cfg)) for i in range(n)]
        calls[kind] = _safe_call(kind, K)
        for a in inputs[kind][:warmup]:
            calls[kind](a)
    best = {kind: math.inf for kind in kinds}
    for _ in range(max(1, repeats)):
        for kind in kinds:
            best[kind] = min(best[kind], _batch_mean(calls[kind], inputs[kind]))
    clock = time.perf_counter
    out = {}
    for kind in kinds:
        safe = calls[kind]
        per = np.empty(n)
        for i, a in enumerate(inputs[kind]):
            t = clock()
            safe(a)
            per[i] = clock() - t
        out[kind] = SpeedResult(kind, name, n, best[kind] * 1e6, float(np.median(per)) * 1e6,
                                float(np.quantile(per, 0.95)) * 1e6)
    return out


# -- RANSAC ----------------------------------------------------------------------

RANSAC_WORKLOAD = InstanceConfig(n_planar=100, n_nonplanar=30, outlier_fraction=0.2,
                                 sigma=0.5, focal_mode="fhf")
CALIBRATION_SEED = 1_000_000


def calibrate_threshold(config: InstanceConfig = RANSAC_WORKLOAD, quantile: float = 0.99,
                        n: int = 200, seed: int = CALIBRATION_SEED) -> float:
    """Inlier threshold that the ground-truth model meets on ``quantile`` of
    true inliers, measured on ``n`` instances (disjoint seeds from the test runs)."""
    K = backend.kernels()
    errs = []
    for i in range(n):
        inst = generate_instance(seed + i, config)
        row = np.array([[*inst.gt_homography.as_vector(), *inst.focals, 0.0]])
        e = K.transfer_errors(pixel_homographies(row, inst.R1, inst.R2), inst.x1, inst.x2)[0]
        errs.append(e[inst.inlier_mask])
    return float(np.quantile(np.concatenate(errs), quantile))


def ransac_bench(kind: str = "fhf", trials: int = 100, seed: int = 0,
                 config: InstanceConfig = RANSAC_WORKLOAD, threshold: Optional[float] = None,
                 iterations: int = 200) -> list[dict]:
    """Paired RANSAC runs with the consistency check on and off.

    Trial ``i`` uses scene seed ``seed + i`` and sample seed ``i`` for both
    runs. ``recall`` is the share of true floor inliers in the returned set.
    """
    solvers.check_kind(kind)
    if FOCAL_MODE[kind] != config.focal_mode:
        config = replace(config, focal_mode=FOCAL_MODE[kind])
    tau = calibrate_threshold(config) if threshold is None else threshold
    out = []
    for i in range(trials):
        inst = generate_instance(seed + i, config)
        true = inst.inlier_mask
        row = {"seed": seed + i, "threshold": tau}
        for tag, check in (("on", True), ("off", False)):
            rc = RansacConfig(max_iterations=iterations, threshold=tau, seed=i,
                              consistency_check=check)
            r = ransac_arrays(inst.x1, inst.x2, inst.R1, inst.R2, kind, rc, *inst.focals)
            row[f"recall_{tag}"] = float((r.inlier_mask & true).sum() / true.sum())
            row[f"false_{tag}"] = int((r.inlier_mask & ~true).sum())
            row[f"scored_{tag}"] = r.scored
            row[f"skipped_{tag}"] = r.skipped
            row[f"time_{tag}"] = r.wall_time
            row[f"h_{tag}"] = r.best.h.as_vector()
        row["same_model"] = int(np.array_equal(row.pop("h_on"), row.pop("h_off")))
        out.append(row)
    return out


# -- CSV -------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _parse(s: str):
    if s == "":
        return None
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def emit_csv(records: Iterable[dict], experiment: str, meta: Optional[dict] = None,
             columns: Optional[Sequence[str]] = None) -> str:
    """CSV text with a versioned comment line, then a header row."""
    records = list(records)
    if columns is None:
        columns = list(records[0]) if records else []
    buf = io.StringIO()
    head = [f"groundpose-csv v{CSV_VERSION}", f"experiment={experiment}"]
    head += [f"{k}={_fmt(v)}" for k, v in (meta or {}).items()]
    buf.write("# " + " ".join(head) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in records:
        w.writerow([_fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def parse_csv(text: str) -> tuple[dict, list[dict]]:
    """Inverse of :func:`emit_csv`: returns ``(meta, records)``."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# groundpose-csv v"):
        raise ParseError("missing groundpose-csv header comment", 1)
    parts = lines[0][2:].split()
    try:
        version = int(parts[1][1:])
    except (IndexError, ValueError):
        raise ParseError("malformed version tag", 1) from None
    if version != CSV_VERSION:
        raise ParseError(f"unsupported CSV version {version}", 1)
    meta = {}
    for p in parts[2:]:
        k, _, v = p.partition("=")
        meta[k] = _parse(v)
    reader = csv.reader(lines[1:])
    try:
        columns = next(reader)
    except StopIteration:
        raise ParseError("missing column header", 2) from None
    records = []
    for lineno, row in enumerate(reader, start=3):
        if len(row) != len(columns):
            raise ParseError(f"expected {len(columns)} fields, got {len(row)}", lineno)
        records.append({c: _parse(v) for c, v in zip(columns, row)})
    return meta, records


def write_csv(path, records, experiment, meta=None, columns=None) -> Path:
    path = Path(path)
    path.write_text(emit_csv(records, experiment, meta, columns), encoding="utf-8")
    return path


def read_csv(path) -> tuple[dict, list[dict]]:
    return parse_csv(Path(path).read_text(encoding="utf-8"))
