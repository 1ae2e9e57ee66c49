import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groundpose import bench
from groundpose.errors import InvalidInputError, ParseError

cell = st.one_of(
    st.none(),
    st.integers(-10**12, 10**12),
    st.floats(allow_nan=False),
)
keys = st.lists(st.from_regex(r"[a-z][a-z0-9_]{0,8}", fullmatch=True), min_size=1, max_size=5,
                unique=True)


@st.composite
def tables(draw):
    cols = draw(keys)
    rows = draw(st.lists(st.fixed_dictionaries({c: cell for c in cols}), max_size=20))
    return cols, rows


@settings(max_examples=200, deadline=None)
@given(tables(), st.integers(0, 2**31))
def test_csv_round_trip(table, seed):
    cols, rows = table
    text = bench.emit_csv(rows, "demo", {"seed": seed, "solver": "fhf"}, cols)
    meta, back = bench.parse_csv(text)
    assert meta == {"experiment": "demo", "seed": seed, "solver": "fhf"}
    assert back == rows
    assert bench.emit_csv(back, "demo", {"seed": seed, "solver": "fhf"}, cols) == text


def test_csv_header_and_version():
    text = bench.emit_csv([{"a": 1}], "x")
    assert text.splitlines()[0] == "# groundpose-csv v1 experiment=x"
    assert text.splitlines()[1] == "a"
    with pytest.raises(ParseError, match="line 1"):
        bench.parse_csv("a,b\n1,2\n")
    with pytest.raises(ParseError, match="version"):
        bench.parse_csv("# groundpose-csv v9 experiment=x\na\n1\n")


def test_csv_ragged_row_reports_line():
    with pytest.raises(ParseError, match="line 4"):
        bench.parse_csv("# groundpose-csv v1 experiment=x\na,b\n1,2\n3\n")


def test_csv_file_round_trip(tmp_path):
    rows = [{"seed": 1, "e": 0.5, "f": None}, {"seed": 2, "e": math.inf, "f": 3}]
    p = bench.write_csv(tmp_path / "o.csv", rows, "t", {"seed": 0})
    assert bench.read_csv(p) == ({"experiment": "t", "seed": 0}, rows)


class TestStability:
    def test_row_count_and_seeds(self):
        r = bench.stability_histogram("fhf", n=50, seed=100)
        assert len(r.records) == 50
        assert [x["seed"] for x in r.records] == list(range(100, 150))

    def test_deterministic(self):
        a = bench.stability_histogram("hf", n=30, seed=5)
        b = bench.stability_histogram("hf", n=30, seed=5)
        assert a.records == b.records

    @pytest.mark.parametrize("kind", ["fhf", "hf", "f1hf2"])
    def test_small_run_targets(self, kind):
        s = bench.stability_histogram(kind, n=200).summary()
        assert s["median_log10_h"] < -6
        assert s["failure_rate"] < 0.01

    def test_calibrated_focal_column(self):
        r = bench.stability_histogram("2pt", n=20)
        assert all(x["log10_f"] == -20 for x in r.records)
        # rows keep the h4 > 0 member of the sign pair
        assert r.max_candidates == 1


class TestNoiseSweep:
    def test_zero_level_matches_stability(self):
        # sigma = 0 solves the very same instances
        sweep = bench.noise_sweep("fhf", [0.0], n=101, seed=3)
        stab = bench.stability_histogram("fhf", n=101, seed=3)
        for a, b in zip(sweep.records, stab.records):
            assert a["seed"] == b["seed"]
            assert bench._log10(a["e_f"]) == b["log10_f"]
        med = sweep.medians()[0]
        assert math.log10(med["e_f"]) == pytest.approx(np.median(stab.log10_f))

    def test_levels_and_seeds(self):
        sweep = bench.noise_sweep("f1hf2", [0.0, 1.0], n=20, seed=0)
        assert len(sweep.records) == 40
        assert {r["sigma"] for r in sweep.records} == {0.0, 1.0}
        assert all("seed" in r for r in sweep.records)

    def test_error_grows_with_noise(self):
        med = bench.noise_sweep("hf", [0.0, 0.5, 2.0], n=200).medians()
        e = [m["e_R"] for m in med]
        assert e[0] < e[1] < e[2]

    def test_negative_sigma(self):
        with pytest.raises(InvalidInputError):
            bench.noise_sweep("fhf", [-1.0], n=2)


class TestSpeed:
    def test_fields(self):
        r = bench.speed_bench("hf", n=200, warmup=20, repeats=2)
        assert r.kind == "hf" and r.n == 200
        assert 0 < r.median_us <= r.p95_us
        assert r.mean_us > 0

    def test_calibrated_fastest(self):
        res = bench.speed_compare(("2pt", "fhf", "hf", "f1hf2"), n=2000)
        assert all(res["2pt"].mean_us < res[k].mean_us for k in ("fhf", "hf", "f1hf2"))

    def test_repeatable_mean(self):
        a = bench.speed_bench("fhf", n=3000).mean_us
        b = bench.speed_bench("fhf", n=3000).mean_us
        assert abs(a - b) / min(a, b) < 0.2


class TestRansacBench:
    def test_paired_fields(self):
        rows = bench.ransac_bench("fhf", trials=3, threshold=4.0)
        assert len(rows) == 3
        for r in rows:
            assert r["scored_on"] < r["scored_off"]
            assert 0.0 <= r["recall_on"] <= 1.0
            assert r["threshold"] == 4.0

    def test_calibrated_threshold_positive_and_stable(self):
        a = bench.calibrate_threshold(n=20)
        assert a > 0 and a == bench.calibrate_threshold(n=20)
