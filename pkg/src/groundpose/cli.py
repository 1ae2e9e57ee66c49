"""Command-line front end.

Every subcommand takes ``--solver``, ``--seed``, ``--out`` and ``--backend``.
Exit status is 0 on success, 1 on a library error and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import backend, bench, pipeline
from .errors import GroundPoseError
from .robust import RansacConfig
from .solvers import KINDS
from .synth import InstanceConfig, generate_instance


def _grid(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty noise grid")
    return vals


def _common(p: argparse.ArgumentParser, solver_default: str = "fhf", out_default: str = "out.csv"):
    p.add_argument("--solver", choices=KINDS, default=solver_default,
                   help=f"minimal solver (default: {solver_default})")
    p.add_argument("--seed", type=int, default=0, help="base random seed (default: 0)")
    p.add_argument("--out", type=Path, default=Path(out_default),
                   help=f"output path (default: {out_default})")
    p.add_argument("--backend", choices=("compiled", "python"), default=None,
                   help="kernel backend (default: compiled if built, else python)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="groundpose",
        description="Gravity-aligned floor homography solvers: benchmarks and trajectories.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stability", help="noise-free error histogram (CSV, one row per instance)")
    _common(p, out_default="stability.csv")
    p.add_argument("--n", type=int, default=10_000, help="number of instances (default: 10000)")
    p.add_argument("--no-normalize", action="store_true", help="skip coordinate normalisation")

    p = sub.add_parser("noise", help="error vs pixel noise (CSV, one row per instance and level)")
    _common(p, out_default="noise.csv")
    p.add_argument("--n", type=int, default=1000, help="instances per level (default: 1000)")
    p.add_argument("--sigma-grid", type=_grid, default=_grid("0,0.25,0.5,1,1.5,2"),
                   help="comma-separated noise levels in px (default: 0,0.25,0.5,1,1.5,2)")

    p = sub.add_parser("speed", help="per-hypothesis solver time (CSV, one row)")
    _common(p, out_default="speed.csv")
    p.add_argument("--n", type=int, default=10_000, help="number of instances (default: 10000)")

    p = sub.add_parser("ransac-bench", help="paired RANSAC runs with and without the consistency check")
    _common(p, out_default="ransac.csv")
    p.add_argument("--n", type=int, default=100, help="number of trials (default: 100)")
    p.add_argument("--iters", type=int, default=200, help="RANSAC iterations (default: 200)")
    p.add_argument("--threshold", type=float, default=None,
                   help="inlier threshold in px (default: calibrated on held-out scenes)")
    p.add_argument("--sigma", type=float, default=0.5, help="pixel noise in px (default: 0.5)")

    p = sub.add_parser("trajectory", help="robust pairwise estimation and chaining over a sequence")
    _common(p, out_default="trajectory.json")
    p.add_argument("--input", type=Path, default=None,
                   help="JSON-lines frame file (default: a synthetic sequence from --seed)")
    p.add_argument("--iters", type=int, default=200, help="RANSAC iterations per pair (default: 200)")
    p.add_argument("--threshold", type=float, default=2.0, help="inlier threshold in px (default: 2)")
    p.add_argument("--focal", type=float, default=None,
                   help="known focal for 2pt/hf (default: gt_focal from the data)")
    p.add_argument("--stride", type=int, default=1, help="frame pairing stride (default: 1)")
    p.add_argument("--no-scale", action="store_true", help="chain with unit translations")
    p.add_argument("--errors-out", type=Path, default=None,
                   help="per-frame error CSV (default: --out with a .csv suffix)")

    p = sub.add_parser("gen", help="emit a synthetic sequence (JSON lines) or instance (JSON)")
    _common(p, out_default="sequence.jsonl")
    p.add_argument("--kind", choices=("sequence", "instance"), default="sequence",
                   help="what to generate (default: sequence)")
    p.add_argument("--frames", type=int, default=50, help="sequence length (default: 50)")
    p.add_argument("--sigma", type=float, default=0.5, help="pixel noise in px (default: 0.5)")
    p.add_argument("--outlier-fraction", type=float, default=0.2,
                   help="share of scrambled keypoints (default: 0.2)")
    p.add_argument("--focal", type=float, default=500.0, help="sequence focal in px (default: 500)")
    return ap


def _stability(a):
    r = bench.stability_histogram(a.solver, a.n, a.seed, normalize=not a.no_normalize)
    meta = {"solver": a.solver, "seed": a.seed, "n": a.n, "backend": backend.name()}
    bench.write_csv(a.out, r.records, "stability", meta)
    return r.summary()


def _noise(a):
    r = bench.noise_sweep(a.solver, a.sigma_grid, a.n, a.seed)
    meta = {"solver": a.solver, "seed": a.seed, "n": a.n}
    bench.write_csv(a.out, r.records, "noise", meta, ["seed", "sigma", "e_R", "e_t", "e_f"])
    return {"medians": r.medians()}


def _speed(a):
    r = bench.speed_bench(a.solver, a.n, a.seed)
    row = dict(r.__dict__)
    bench.write_csv(a.out, [row], "speed", {"seed": a.seed})
    return row


def _ransac(a):
    cfg = InstanceConfig(**{**bench.RANSAC_WORKLOAD.__dict__, "sigma": a.sigma})
    rows = bench.ransac_bench(a.solver, a.n, a.seed, cfg, a.threshold, a.iters)
    bench.write_csv(a.out, rows, "ransac", {"solver": a.solver, "seed": a.seed, "sigma": a.sigma})
    n = len(rows)
    return {
        "trials": n,
        "threshold": rows[0]["threshold"] if rows else None,
        "recall_ge_95_on": sum(r["recall_on"] >= 0.95 for r in rows) / max(n, 1),
        "fewer_scored": sum(r["scored_on"] < r["scored_off"] for r in rows),
        "time_on": sum(r["time_on"] for r in rows),
        "time_off": sum(r["time_off"] for r in rows),
    }


def _trajectory(a):
    if a.input is not None:
        frames = pipeline.ingest(a.input)
    else:
        frames = pipeline.generate_sequence(a.seed).frames
    cfg = RansacConfig(max_iterations=a.iters, threshold=a.threshold, seed=a.seed)
    pairs = pipeline.estimate_sequence(frames, a.solver, cfg, a.stride, a.focal)
    traj = pipeline.chain_trajectory(pairs, frames, scale=not a.no_scale)
    a.out.write_text(traj.to_json(), encoding="utf-8")
    rows = pipeline.frame_errors(traj, frames, pairs)
    err_path = a.errors_out or a.out.with_suffix(".csv")
    bench.write_csv(err_path, rows, "trajectory", {"solver": a.solver, "seed": a.seed},
                    ["frame", "e_R", "e_t", "e_pos", "e_f"])
    e_R = [r["e_R"] for r in rows if r["e_R"] is not None]
    return {"frames": len(frames), "gaps": len(traj.gaps),
            "mean_e_R": sum(e_R) / len(e_R) if e_R else None, "errors": str(err_path)}


def _gen(a):
    if a.kind == "instance":
        inst = generate_instance(a.seed, InstanceConfig(sigma=a.sigma))
        a.out.write_text(inst.to_json() + "\n", encoding="utf-8")
        return {"instance": str(a.out)}
    seq = pipeline.generate_sequence(a.seed, a.frames, a.focal, a.sigma, a.outlier_fraction)
    pipeline.write_jsonl(seq.frames, a.out)
    return {"frames": len(seq.frames), "cluster_ids": sorted(seq.cluster_ids)}


COMMANDS = {
    "stability": _stability,
    "noise": _noise,
    "speed": _speed,
    "ransac-bench": _ransac,
    "trajectory": _trajectory,
    "gen": _gen,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with backend.using(args.backend or backend.name()):
            summary = COMMANDS[args.command](args)
    except (GroundPoseError, ValueError, OSError) as exc:
        print(f"groundpose {args.command}: error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, default=str))
    return 0


if __name__ == "__main__":
    sys.exit(main())
