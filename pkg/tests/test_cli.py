import csv
import io
import math
import os
import subprocess
import sys
from pathlib import Path

import pytest

from diamondbc.cli import CSV_HEADER, main


def run_cli(args, env_extra=None):
    env = dict(os.environ)
    env.pop("DIAMONDBC_SEED", None)
    if env_extra:
        env.update(env_extra)
    proc = subprocess.run(
        [sys.executable, "-m", "diamondbc.cli", *args],
        capture_output=True, text=True, env=env,
    )
    return proc


class TestPoint:
    def test_df_passthrough(self):
        proc = run_cli(["point", "--scheme", "df", "--metric", "throughput",
                        "--ps-db", "0", "--pr-db", "0"])
        assert proc.returncode == 0
        header, row = proc.stdout.strip().splitlines()
        assert header == CSV_HEADER
        fields = row.split(",")
        assert fields[2] == "df"
        from diamondbc.channel import PowerConfig
        from diamondbc.schemes import df_throughput

        assert float(fields[5]) == pytest.approx(
            df_throughput(PowerConfig(1.0, 1.0)).value_nats, abs=1e-9
        )

    def test_invalid_scheme_exits_2(self):
        proc = run_cli(["point", "--scheme", "bogus", "--ps-db", "0", "--pr-db", "0"])
        assert proc.returncode == 2
        assert "usage" in proc.stderr.lower()

    def test_layers_inf_for_df_rejected(self):
        proc = run_cli(["point", "--scheme", "df", "--metric", "expected",
                        "--layers", "inf", "--ps-db", "0", "--pr-db", "0"])
        assert proc.returncode == 2

    def test_cf_expected_meets_cutset_at_60db(self):
        proc = run_cli(["point", "--scheme", "cf", "--metric", "expected",
                        "--layers", "inf", "--ps-db", "0", "--pr-db", "60"])
        assert proc.returncode == 0
        value = float(proc.stdout.strip().splitlines()[1].split(",")[5])
        from diamondbc import bounds
        from diamondbc.channel import PowerConfig

        cut = bounds.cutset_expected_rate(PowerConfig.from_db(0.0, 60.0)).value_nats
        assert abs(value - cut) <= 0.02 * cut

    def test_cache_dir_round_trip(self, tmp_path):
        cache = tmp_path / "cache"
        args = ["point", "--scheme", "af", "--ps-db", "0", "--pr-db", "10",
                "--table-method", "monte-carlo", "--samples", "300000",
                "--cache-dir", str(cache)]
        first = run_cli(args)
        assert first.returncode == 0
        assert any(p.suffix == ".dbcg" for p in cache.iterdir())
        second = run_cli(args)
        assert second.stdout == first.stdout


class TestBoundsCommand:
    def test_emits_four_rows(self):
        proc = run_cli(["bounds", "--ps-db", "0", "--pr-db", "10"])
        assert proc.returncode == 0
        lines = proc.stdout.strip().splitlines()
        assert lines[0] == CSV_HEADER
        tags = [line.split(",")[2] for line in lines[1:]]
        assert tags == ["cutset", "rc", "cutset", "dfub"]


class TestSweep:
    def test_schema_and_sorting(self, tmp_path):
        out = tmp_path / "s.csv"
        code = main([
            "sweep", "--metric", "throughput", "--ps-db", "0", "--pr-db", "0:20:10",
            "--schemes", "df,daf", "--bounds", "cutset", "--out", str(out),
        ])
        assert code == 0
        text = out.read_text().splitlines()
        assert text[0] == CSV_HEADER
        rows = list(csv.DictReader(io.StringIO("\n".join(text))))
        assert len(rows) == 9
        key = [(float(r["pr_db"]), r["scheme"]) for r in rows]
        order = {"df": 0, "daf": 2, "cutset": 4}
        assert key == sorted(key, key=lambda q: (q[0], order[q[1]]))
        for r in rows:
            assert float(r["value_nats"]) >= 0.0

    def test_bounds_only_sweep(self, tmp_path):
        out = tmp_path / "b.csv"
        code = main([
            "sweep", "--metric", "throughput", "--ps-db", "0", "--pr-db", "0:10:5",
            "--bounds", "cutset,rc", "--out", str(out),
        ])
        assert code == 0
        rows = out.read_text().strip().splitlines()[1:]
        assert all(r.split(",")[2] in ("cutset", "rc") for r in rows)

    def test_byte_identical_and_parallelism_invariant(self, tmp_path):
        args = ["sweep", "--metric", "throughput", "--ps-db", "0",
                "--pr-db", "0:12:6", "--schemes", "df,af", "--bounds", "cutset"]
        outs = []
        for name, jobs in (("a.csv", "1"), ("b.csv", "1"), ("c.csv", "2")):
            out = tmp_path / name
            proc = run_cli(args + ["--out", str(out), "--jobs", jobs],
                           env_extra={"DIAMONDBC_SEED": "0x5EED"})
            assert proc.returncode == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_seed_changes_mc_backed_rows(self, tmp_path):
        rows = []
        for seed in ("1", "2"):
            out = tmp_path / f"seed{seed}.csv"
            code = main([
                "sweep", "--metric", "throughput", "--ps-db", "0", "--pr-db", "20",
                "--schemes", "cf", "--out", str(out), "--seed", seed,
            ])
            assert code == 0
            rows.append(out.read_text())
        assert rows[0] != rows[1]

    def test_svg_rendering(self, tmp_path):
        out = tmp_path / "s.csv"
        svg = tmp_path / "s.svg"
        code = main([
            "sweep", "--metric", "throughput", "--ps-db", "0", "--pr-db", "0:10:10",
            "--schemes", "df", "--bounds", "cutset", "--out", str(out),
            "--plot", str(svg),
        ])
        assert code == 0
        blob = svg.read_text()
        assert blob.startswith("<?xml")
        assert 'width="960' in blob and 'height="600' in blob

    def test_rc_with_expected_rejected(self, tmp_path):
        proc = run_cli([
            "sweep", "--metric", "expected", "--layers", "inf", "--ps-db", "0",
            "--pr-db", "0", "--schemes", "af", "--bounds", "rc",
            "--out", str(tmp_path / "x.csv"),
        ])
        assert proc.returncode == 2


class TestValidate:
    def test_alamouti_suite(self):
        proc = run_cli(["validate", "--suite", "alamouti", "--samples", "100000"])
        assert proc.returncode == 0
        assert "[PASS] alamouti-equivalence" in proc.stdout

    def test_bounds_suite_quick(self):
        proc = run_cli(["validate", "--suite", "bounds", "--samples", "100000"])
        assert proc.returncode == 0
        assert "cutset-expected-closed-vs-quadrature" in proc.stdout
        assert "dominance" in proc.stdout


def test_numeric_failure_exits_3(monkeypatch):
    import diamondbc.cli as cli
    from diamondbc.schemes import BoundaryNotFoundError

    def boom(*args, **kwargs):
        raise BoundaryNotFoundError("no sign change for the s0 boundary")

    monkeypatch.setattr(cli, "df_throughput", boom)
    code = main(["point", "--scheme", "df", "--metric", "throughput",
                 "--ps-db", "0", "--pr-db", "0"])
    assert code == 3


def test_env_seed_round_trip(tmp_path):
    out1 = tmp_path / "e1.csv"
    out2 = tmp_path / "e2.csv"
    args = ["sweep", "--metric", "throughput", "--ps-db", "0", "--pr-db", "14",
            "--schemes", "cf"]
    p1 = run_cli(args + ["--out", str(out1)], env_extra={"DIAMONDBC_SEED": "777"})
    p2 = run_cli(args + ["--out", str(out2), "--seed", "777"])
    assert p1.returncode == 0 and p2.returncode == 0
    assert out1.read_bytes() == out2.read_bytes()
