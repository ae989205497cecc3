import csv
import json
import math
import os

import pytest

from lorentz_lab.cli import main


def _write_table(path, disks):
    with open(path, "w") as fh:
        json.dump({"disks": disks}, fh)
    return str(path)


SINGLE = [{"center": [0.5, 0.5], "radius": 0.4}]
OVERLAP = [
    {"center": [0.0, 0.0], "radius": 0.3},
    {"center": [0.1, 0.1], "radius": 0.3},
]


class TestCorridorCheck:
    def test_default_table_exits_zero(self, capsys):
        assert main(["corridor-check"]) == 0
        out = capsys.readouterr().out
        assert "finite: true" in out

    def test_corridor_exits_two(self, tmp_path, capsys):
        table = _write_table(tmp_path / "t.json", SINGLE)
        assert main(["corridor-check", "--table", table]) == 2
        out = capsys.readouterr().out
        assert "(1, 0)" in out
        gap = float(out.split("open_corridor_gap_width:")[1].strip())
        assert gap == pytest.approx(0.2, abs=1e-12)

    def test_overlap_exits_one(self, tmp_path, capsys):
        table = _write_table(tmp_path / "t.json", OVERLAP)
        assert main(["corridor-check", "--table", table]) == 1
        assert "overlap" in capsys.readouterr().err


class TestSimulate:
    def test_row_count_and_header(self, tmp_path):
        out = tmp_path / "run"
        assert main(["simulate", "--n", "10", "--seed", "5", "--out", str(out)]) == 0
        rows = list(csv.reader(open(out / "trajectory.csv")))
        assert rows[0] == ["k", "I_k", "S_k.x", "S_k.y", "free_path"]
        assert len(rows) == 11

    def test_reruns_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            main(["simulate", "--n", "200", "--seed", "9", "--out", str(out)])
        assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()

    def test_free_path_below_bound(self, tmp_path, table):
        out = tmp_path / "run"
        main(["simulate", "--n", "2000", "--seed", "1", "--out", str(out)])
        rows = list(csv.DictReader(open(out / "trajectory.csv")))
        bound = table.horizon.max_free_path_bound
        assert all(float(r["free_path"]) <= bound for r in rows)


class TestEstimate:
    ARGS = [
        "--M", "128", "--n-max", "256", "--checkpoints", "64,256",
        "--returns-k", "4,16", "--returns-M", "2000", "--seed", "3",
    ]

    def test_emits_all_outputs(self, tmp_path):
        out = tmp_path / "est"
        assert main(["estimate", *self.ARGS, "--out", str(out)]) == 0
        for name in ("ensemble.csv", "returns.csv", "sigma2.csv", "manifest.json"):
            assert (out / name).exists()

    def test_workers_byte_identical(self, tmp_path):
        outs = []
        for w in ("1", "4", "8"):
            out = tmp_path / f"w{w}"
            main(["estimate", *self.ARGS, "--out", str(out), "--workers", w])
            outs.append(out)
        names = ["ensemble.csv", "returns.csv", "sigma2.csv", "manifest.json"]
        for name in names:
            blobs = {(o / name).read_bytes() for o in outs}
            assert len(blobs) == 1, f"{name} differs across worker counts"

    def test_manifest_digest_tracks_table(self, tmp_path):
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        main(["estimate", *self.ARGS, "--out", str(out1)])
        table = _write_table(
            tmp_path / "t.json",
            [
                {"center": [0.0, 0.0], "radius": 0.4},
                {"center": [0.5, 0.5], "radius": 0.29},
            ],
        )
        main(["estimate", *self.ARGS, "--out", str(out2), "--table", table])
        d1 = json.load(open(out1 / "manifest.json"))
        d2 = json.load(open(out2 / "manifest.json"))
        assert d1["table_digest"] != d2["table_digest"]

    def test_config_document(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        out = tmp_path / "cfgout"
        json.dump(
            {
                "M": 128,
                "n_max": 128,
                "checkpoints": [32, 128],
                "returns_k": [4, 8],
                "returns_M": 500,
                "seed": 12,
                "out": str(out),
            },
            open(cfg, "w"),
        )
        assert main(["estimate", "--config", str(cfg)]) == 0
        manifest = json.load(open(out / "manifest.json"))
        assert manifest["M"] == 128
        assert manifest["seed"] == 12


class TestConstants:
    def test_planted_identity_sigma_single_disk(self, tmp_path, capsys):
        out = tmp_path / "c"
        table = _write_table(tmp_path / "t.json", [{"center": [0.5, 0.5], "radius": 0.25}])
        assert main(
            ["constants", "--table", table, "--sigma2", "1,0,1", "--out", str(out)]
        ) == 0
        rows = {r["name"]: float(r["value"]) for r in csv.DictReader(open(out / "constants.csv"))}
        assert rows["c0"] == pytest.approx(1.0 / math.pi, rel=1e-12)
        assert rows["c1"] == pytest.approx(rows["c0"] / 2, rel=1e-15)
        assert rows["c"] > 0

    def test_reads_sigma2_from_estimate_output(self, tmp_path):
        est = tmp_path / "est"
        main(["estimate", *TestEstimate.ARGS, "--out", str(est)])
        out = tmp_path / "c"
        assert main(
            ["constants", "--sigma2-file", str(est / "sigma2.csv"), "--out", str(out)]
        ) == 0
        rows = {r["name"]: float(r["value"]) for r in csv.DictReader(open(out / "constants.csv"))}
        assert rows["c1"] == pytest.approx(rows["c0"] / 2, rel=1e-15)
        assert rows["I_quad"] == pytest.approx(rows["I_closed"], abs=1e-8)


class TestBaselineWalk:
    def test_outputs_and_sigma_magnitude(self, tmp_path):
        out = tmp_path / "walk"
        assert main(
            [
                "baseline-walk", "--M", "400", "--n-max", "1024",
                "--checkpoints", "256,1024", "--returns-k", "8,32",
                "--returns-M", "4000", "--seed", "2", "--out", str(out),
            ]
        ) == 0
        row = next(csv.DictReader(open(out / "sigma2.csv")))
        assert float(row["sxx"]) == pytest.approx(0.4, abs=0.05)
        assert float(row["syy"]) == pytest.approx(0.4, abs=0.05)
        manifest = json.load(open(out / "manifest.json"))
        assert manifest["table_digest"] == "lazy-walk"
        assert manifest["table"] is None


class TestThreadsEnvFallback:
    def test_env_variable_used(self, tmp_path, monkeypatch):
        out = tmp_path / "env"
        monkeypatch.setenv("LORENTZ_LAB_THREADS", "1")
        assert main(["estimate", *TestEstimate.ARGS, "--out", str(out)]) == 0
        assert (out / "ensemble.csv").exists()
