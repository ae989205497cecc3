"""Experiment runner: corridor checks, trajectory dumps, ensemble runs and
constants reports, with reproducibility manifests.

Subcommands: corridor-check, simulate, estimate, constants, baseline-walk.
All numeric output is CSV with one header row, 17 significant digits; every
output directory gets a manifest.json sufficient to reproduce the run byte
for byte (worker count is deliberately absent: results never depend on it).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import OverlapError
from .estimators import (
    estimate_sigma2_empirical,
    return_probability,
    run_ensemble,
    DiffusionMatrix,
)
from .constants import integral_J, theoretical_constants
from .geometry import BilliardTable, default_table, load_table
from .walks import LazyLatticeWalk
from .dynamics import trajectory


def _fmt(x) -> str:
    return f"{float(x):.17g}"


DEFAULT_CHECKPOINTS = [2**k for k in range(6, 13)]
DEFAULT_RETURNS_K = [8, 16, 32, 50, 71, 100, 141, 200, 283, 400, 500]


@dataclass
class RunConfig:
    """Resolved configuration of one run; persisted inside the manifest."""

    table: BilliardTable | None = None
    source: str = "billiard"  # or "lazy-walk"
    mode: str = "strict"
    init: str = "stationary"
    M: int = 256
    n_max: int = 4096
    checkpoints: list[int] = field(default_factory=lambda: list(DEFAULT_CHECKPOINTS))
    returns_k: list[int] = field(default_factory=lambda: list(DEFAULT_RETURNS_K))
    returns_M: int = 20000
    n: int = 1000  # simulate
    seed: int = 1
    workers: int | None = None
    out: str = "runs/out"

    def validate(self):
        if self.mode not in ("strict", "permissive"):
            raise ValueError(f"mode must be strict|permissive, got {self.mode}")
        if self.init not in ("stationary", "uniform-q"):
            raise ValueError(f"init must be stationary|uniform-q, got {self.init}")
        cps = self.checkpoints
        if sorted(set(cps)) != list(cps) or (cps and cps[-1] > self.n_max):
            raise ValueError("checkpoints must be sorted, unique and <= n_max")

    def manifest(self, outputs: list[str]) -> dict:
        table_spec = self.table.to_dict() if self.table is not None else None
        digest = (
            self.table.digest() if self.table is not None else LazyLatticeWalk().digest()
        )
        return {
            "code_version": __version__,
            "source": self.source,
            "table": table_spec,
            "table_digest": digest,
            "mode": self.mode,
            "init": self.init,
            "M": self.M,
            "n_max": self.n_max,
            "checkpoints": list(self.checkpoints),
            "returns_k": list(self.returns_k),
            "returns_M": self.returns_M,
            "n": self.n,
            "seed": self.seed,
            "outputs": outputs,
        }


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ValueError("config document must be a JSON object")
    return raw


def _resolve(args) -> RunConfig:
    raw = _load_config(getattr(args, "config", None))
    cfg = RunConfig()
    if "table" in raw:
        cfg.table = BilliardTable.from_dict(raw["table"])
    elif "table_file" in raw:
        cfg.table = load_table(raw["table_file"])
    for key in ("mode", "init", "M", "n_max", "checkpoints", "returns_k",
                "returns_M", "n", "seed", "workers", "out"):
        if key in raw:
            setattr(cfg, key, raw[key])
    # CLI flags override the config document
    for key in ("mode", "init", "M", "n_max", "n", "seed", "workers", "out"):
        val = getattr(args, key.replace("-", "_"), None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "checkpoints", None):
        cfg.checkpoints = [int(v) for v in args.checkpoints.split(",")]
    if getattr(args, "returns_k", None):
        cfg.returns_k = [int(v) for v in args.returns_k.split(",")]
    if getattr(args, "returns_M", None) is not None:
        cfg.returns_M = args.returns_M
    if getattr(args, "table", None):
        cfg.table = load_table(args.table)
    if cfg.table is None:
        cfg.table = default_table()
    if cfg.workers is None:
        env = os.environ.get("LORENTZ_LAB_THREADS")
        cfg.workers = int(env) if env else None
    cfg.validate()
    return cfg


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _write_manifest(cfg: RunConfig, outputs: list[str]):
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.manifest(outputs), fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def cmd_corridor_check(args) -> int:
    try:
        cfg = _resolve(args)
        report = cfg.table.horizon
    except (OverlapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"finite: {str(report.finite).lower()}")
    print(f"directions_checked: {report.directions_checked}")
    if report.finite:
        print(f"max_free_path_bound: {_fmt(report.max_free_path_bound)}")
        return 0
    p, q = report.open_corridor.direction
    print(f"open_corridor_direction: ({p}, {q})")
    print(f"open_corridor_gap_width: {_fmt(report.open_corridor.gap_width)}")
    return 2


def cmd_simulate(args) -> int:
    cfg = _resolve(args)
    tr = trajectory(cfg.table, cfg.n, cfg.seed, init=cfg.init, mode=cfg.mode)
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, "trajectory.csv")
    rows = [
        (k + 1, int(tr.obstacles[k]), int(tr.cells[k, 0]), int(tr.cells[k, 1]),
         _fmt(tr.free_paths[k]))
        for k in range(tr.n)
    ]
    _write_csv(path, ["k", "I_k", "S_k.x", "S_k.y", "free_path"], rows)
    _write_manifest(cfg, ["trajectory.csv"])
    print(f"wrote {path} ({tr.n} collisions)")
    return 0


def _estimate_outputs(cfg: RunConfig, source) -> int:
    summary, s_samples = run_ensemble(
        source, cfg.M, cfg.n_max, cfg.checkpoints, cfg.seed,
        workers=cfg.workers, init=cfg.init,
    )
    sigma2 = estimate_sigma2_empirical(s_samples[:, -1, :], int(summary.checkpoints[-1]))
    curve = return_probability(
        source, cfg.returns_k, cfg.returns_M, seed=cfg.seed + 1,
        workers=cfg.workers, init=cfg.init,
    )
    os.makedirs(cfg.out, exist_ok=True)
    _write_csv(
        os.path.join(cfg.out, "ensemble.csv"),
        ["n", "mean_V", "var_V", "stderr_mean", "stderr_var"],
        [
            (int(n), _fmt(m), _fmt(v), _fmt(sm), _fmt(sv))
            for n, m, v, sm, sv in zip(
                summary.checkpoints, summary.mean_V, summary.var_V,
                summary.stderr_mean, summary.stderr_var,
            )
        ],
    )
    _write_csv(
        os.path.join(cfg.out, "returns.csv"),
        ["k", "p_hat", "ci"],
        [
            (int(k), _fmt(p), _fmt(ci))
            for k, p, ci in zip(curve.ks, curve.p_hat, curve.ci_halfwidth)
        ],
    )
    s = sigma2.sigma2
    se = sigma2.stderr
    _write_csv(
        os.path.join(cfg.out, "sigma2.csv"),
        ["method", "sxx", "sxy", "syy", "stderr_xx", "stderr_xy", "stderr_yy",
         "sqrt_det"],
        [(sigma2.method, _fmt(s[0, 0]), _fmt(s[0, 1]), _fmt(s[1, 1]),
          _fmt(se[0, 0]), _fmt(se[0, 1]), _fmt(se[1, 1]), _fmt(sigma2.sqrt_det))],
    )
    _write_manifest(cfg, ["ensemble.csv", "returns.csv", "sigma2.csv"])
    print(
        f"wrote ensemble.csv returns.csv sigma2.csv manifest.json to {cfg.out} "
        f"(M={cfg.M}, n_max={cfg.n_max}, sqrt_det={sigma2.sqrt_det:.6g})"
    )
    return 0


def cmd_estimate(args) -> int:
    cfg = _resolve(args)
    return _estimate_outputs(cfg, cfg.table)


def cmd_baseline_walk(args) -> int:
    cfg = _resolve(args)
    cfg.source = "lazy-walk"
    cfg.table = None
    return _estimate_outputs(cfg, LazyLatticeWalk())


def _sigma2_from_args(args, cfg) -> DiffusionMatrix:
    if getattr(args, "sigma2", None):
        sxx, sxy, syy = (float(v) for v in args.sigma2.split(","))
        return DiffusionMatrix(
            sigma2=np.array([[sxx, sxy], [sxy, syy]]),
            stderr=np.zeros((2, 2)),
            method="literal",
        )
    path = getattr(args, "sigma2_file", None)
    if path is None:
        path = os.path.join(cfg.out, "sigma2.csv")
    with open(path, "r", encoding="utf-8") as fh:
        row = list(csv.DictReader(fh))[0]
    return DiffusionMatrix(
        sigma2=np.array(
            [
                [float(row["sxx"]), float(row["sxy"])],
                [float(row["sxy"]), float(row["syy"])],
            ]
        ),
        stderr=np.array(
            [
                [float(row["stderr_xx"]), float(row["stderr_xy"])],
                [float(row["stderr_xy"]), float(row["stderr_yy"])],
            ]
        ),
        method=row["method"],
    )


def cmd_constants(args) -> int:
    cfg = _resolve(args)
    sigma2 = _sigma2_from_args(args, cfg)
    target = getattr(args, "j_target", None) or 1e-6
    report = theoretical_constants(cfg.table, sigma2, integral_J("cubature", target))
    os.makedirs(cfg.out, exist_ok=True)
    rows = [
        ("c0", _fmt(report.c0), _fmt(report.c0_err)),
        ("c1", _fmt(report.c1), _fmt(report.c1_err)),
        ("J", _fmt(report.J), _fmt(report.J_err)),
        ("c", _fmt(report.c), _fmt(report.c_err)),
        ("I_quad", _fmt(report.I_quad), "0"),
        ("I_closed", _fmt(report.I_closed), "0"),
        ("sqrt_det_sigma2", _fmt(report.sqrt_det), "0"),
    ]
    _write_csv(os.path.join(cfg.out, "constants.csv"), ["name", "value", "error"], rows)
    text = [
        f"constants report ({report.notes})",
        f"  c0 = {_fmt(report.c0)} +- {_fmt(report.c0_err)}",
        f"  c1 = c0/2 = {_fmt(report.c1)} +- {_fmt(report.c1_err)}",
        f"  J  = {_fmt(report.J)} +- {_fmt(report.J_err)}",
        f"  c  = c0^2 (1 + 2J - pi^2/6) = {_fmt(report.c)} +- {_fmt(report.c_err)}",
        f"  I  = {_fmt(report.I_quad)} (closed form {_fmt(report.I_closed)})",
    ]
    with open(os.path.join(cfg.out, "constants.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(text) + "\n")
    _write_manifest(cfg, ["constants.csv", "constants.txt"])
    print("\n".join(text))
    return 0


def _add_common(p):
    p.add_argument("--config", help="JSON config document")
    p.add_argument("--table", help="table spec file (JSON)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--init", choices=["stationary", "uniform-q"])
    p.add_argument("--mode", choices=["strict", "permissive"])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="lorentz-lab",
        description="Periodic Lorentz gas: simulation, self-intersection "
        "statistics and asymptotic constants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("corridor-check", help="decide finite horizon")
    _add_common(p)
    p.set_defaults(func=cmd_corridor_check)

    p = sub.add_parser("simulate", help="dump one trajectory as CSV")
    _add_common(p)
    p.add_argument("--n", type=int, help="number of collisions")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="ensemble statistics and diffusion matrix")
    _add_common(p)
    p.add_argument("--M", type=int, dest="M")
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--checkpoints", help="comma-separated collision counts")
    p.add_argument("--returns-k", dest="returns_k", help="comma-separated lags")
    p.add_argument("--returns-M", dest="returns_M", type=int)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("constants", help="theoretical constants report")
    _add_common(p)
    p.add_argument("--sigma2", help="literal sxx,sxy,syy")
    p.add_argument("--sigma2-file", dest="sigma2_file", help="sigma2.csv path")
    p.add_argument("--j-target", dest="j_target", type=float)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("baseline-walk", help="estimate on the lazy lattice walk")
    _add_common(p)
    p.add_argument("--M", type=int, dest="M")
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--checkpoints", help="comma-separated collision counts")
    p.add_argument("--returns-k", dest="returns_k", help="comma-separated lags")
    p.add_argument("--returns-M", dest="returns_M", type=int)
    p.set_defaults(func=cmd_baseline_walk)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
