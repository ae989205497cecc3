"""Ensemble statistics: E[V_n], Var(V_n), the diffusion matrix and return
probabilities, plus fits of the asymptotic constants.

Every estimator accepts either a BilliardTable or the LazyLatticeWalk
baseline as its trajectory source. Work is split into a fixed number of
chunks regardless of the worker count and reduced in index order, so output
is bit-identical for any `workers` at a fixed seed.
"""

from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .dynamics import _cell_cap, _raise_status
from .errors import DegenerateMatrix, InsufficientData
from .rng import stream_seed
from .walks import LazyLatticeWalk

log = logging.getLogger(__name__)

_Z95 = 1.959963984540054
_ENSEMBLE_CHUNKS = 512
_RETURN_CHUNKS = 2048


@contextmanager
def _thread_count(workers):
    import numba

    if workers is None:
        yield
        return
    prev = numba.get_num_threads()
    numba.set_num_threads(max(1, min(int(workers), numba.config.NUMBA_NUM_THREADS)))
    try:
        yield
    finally:
        numba.set_num_threads(prev)


def _derived_seeds(master: int, m: int) -> np.ndarray:
    """Vectorized mirror of rng.stream_seed for trajectory indices 0..m-1."""
    with np.errstate(over="ignore"):
        x = np.arange(m, dtype=np.uint64) + np.uint64(0x9E3779B97F4A7C15)
        x ^= x >> np.uint64(30)
        x *= np.uint64(0xBF58476D1CE4E5B9)
        x ^= x >> np.uint64(27)
        x *= np.uint64(0x94D049BB133111EB)
        x ^= x >> np.uint64(31)
        return np.uint64(master) ^ x


@dataclass(frozen=True)
class DiffusionMatrix:
    """Per-collision asymptotic covariance of the cell label S_k."""

    sigma2: np.ndarray
    stderr: np.ndarray
    method: str
    cutoff_warning: bool = False

    def __post_init__(self):
        s = np.asarray(self.sigma2, dtype=np.float64)
        if s.shape != (2, 2) or abs(s[0, 1] - s[1, 0]) > 1e-12:
            raise DegenerateMatrix("sigma2 must be a symmetric 2x2 matrix")
        ev = np.linalg.eigvalsh(s)
        if ev[0] <= 0.0:
            raise DegenerateMatrix(
                f"sigma2 not positive definite (eigenvalues {ev}); "
                "increase M or the checkpoint"
            )

    @property
    def sqrt_det(self) -> float:
        return float(math.sqrt(np.linalg.det(self.sigma2)))


@dataclass(frozen=True)
class EnsembleSummary:
    checkpoints: np.ndarray
    mean_V: np.ndarray
    var_V: np.ndarray
    stderr_mean: np.ndarray
    stderr_var: np.ndarray
    M: int
    n_max: int
    seed: int
    table_hash: str
    grazing_retries: int = 0

    def __post_init__(self):
        c = len(self.checkpoints)
        if not (len(self.mean_V) == len(self.var_V) == len(self.stderr_mean)
                == len(self.stderr_var) == c):
            raise ValueError("inconsistent summary lengths")
        if np.any(np.asarray(self.var_V) < 0):
            raise ValueError("negative variance")


@dataclass(frozen=True)
class ReturnCurve:
    ks: np.ndarray
    p_hat: np.ndarray
    ci_halfwidth: np.ndarray
    M: int
    seed: int


@dataclass(frozen=True)
class ConstantFit:
    c0_hat: float
    c0_band: float
    c_hat: float
    c_band: float
    window: np.ndarray
    mean_ratio: np.ndarray
    var_ratio: np.ndarray
    drift_flag: bool
    notes: str = ""


def _checkpoint_array(checkpoints, n_max):
    cps = np.asarray(sorted(int(c) for c in checkpoints), dtype=np.int64)
    if len(cps) == 0:
        raise ValueError("need at least one checkpoint")
    if len(np.unique(cps)) != len(cps) or cps[0] < 1 or cps[-1] > n_max:
        raise ValueError("checkpoints must be unique and lie in [1, n_max]")
    return cps


def run_ensemble(
    source,
    M: int,
    n_max: int,
    checkpoints,
    seed: int,
    workers: int | None = None,
    init: str = "stationary",
    trajectory_seeds=None,
):
    """M independent trajectories; sample mean/variance of V_n at checkpoints.

    Returns (EnsembleSummary, s_samples) where s_samples[j, c] is trajectory
    j's cell label at checkpoint c (retained for diffusion estimates).
    `trajectory_seeds` overrides the per-trajectory seed derivation (test
    hook; normal use derives them from `seed`).
    """
    if M < 2:
        raise ValueError("M must be >= 2")
    cps = _checkpoint_array(checkpoints, n_max)
    n_c = len(cps)
    if trajectory_seeds is None:
        seeds = _derived_seeds(seed, M)
    else:
        seeds = np.asarray(trajectory_seeds, dtype=np.uint64)
        if seeds.shape != (M,):
            raise ValueError("trajectory_seeds must have shape (M,)")
    out_v = np.zeros((M, n_c), np.int64)
    out_sx = np.zeros((M, n_c), np.int64)
    out_sy = np.zeros((M, n_c), np.int64)
    n_chunks = min(M, _ENSEMBLE_CHUNKS)
    stat = np.zeros(n_chunks, np.int64)
    grazing = 0
    with _thread_count(workers):
        if isinstance(source, LazyLatticeWalk):
            K._ensemble_walk(seeds, n_max, cps, n_chunks, out_v, out_sx, out_sy, stat)
            digest = source.digest()
        else:
            graz = np.zeros(n_chunks, np.int64)
            init_mode = {"stationary": K.INIT_STATIONARY,
                         "uniform-q": K.INIT_UNIFORM_Q}[init]
            cap = _cell_cap(source, "strict", None)
            K._ensemble_billiard(
                source.centers[:, 0], source.centers[:, 1], source.radii,
                np.cumsum(source.radii) / source.radii.sum(),
                seeds, n_max, cps, init_mode, cap, n_chunks,
                out_v, out_sx, out_sy, stat, graz,
            )
            grazing = int(graz.sum())
            digest = source.digest()
    bad = stat[stat != 0]
    if len(bad):
        _raise_status(int(bad[0]))

    v = out_v.astype(np.float64)
    mean_v = v.mean(axis=0)
    var_v = v.var(axis=0, ddof=1)
    stderr_mean = np.sqrt(var_v / M)
    # variance error bars from sqrt(M) batch means over fixed index blocks
    n_b = max(2, int(math.isqrt(M)))
    if M // n_b >= 2:
        usable = (M // n_b) * n_b
        batches = v[:usable].reshape(n_b, usable // n_b, n_c)
        bvar = batches.var(axis=1, ddof=1)
        stderr_var = bvar.std(axis=0, ddof=1) / math.sqrt(n_b)
    else:
        # too few trajectories to batch: normal-theory fallback
        stderr_var = var_v * math.sqrt(2.0 / max(M - 1, 1))
    summary = EnsembleSummary(
        checkpoints=cps,
        mean_V=mean_v,
        var_V=var_v,
        stderr_mean=stderr_mean,
        stderr_var=stderr_var,
        M=M,
        n_max=n_max,
        seed=seed,
        table_hash=digest,
        grazing_retries=grazing,
    )
    s_samples = np.stack([out_sx, out_sy], axis=-1)
    return summary, s_samples


def estimate_sigma2_empirical(s_samples, n: int) -> DiffusionMatrix:
    """Diffusion matrix from endpoint spread: cov(S_n)/n over trajectories,
    with jackknife standard errors."""
    s = np.asarray(s_samples, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] != 2:
        raise ValueError("expected (M, 2) samples of S_n")
    m = s.shape[0]
    if m < 100:
        raise ValueError("need at least 100 trajectories")
    tot = s.sum(axis=0)
    q = s.T @ s
    mean = tot / m
    sig_full = (q / m - np.outer(mean, mean)) / n
    # leave-one-out estimates in closed form
    m1 = m - 1
    mean_j = (tot[None, :] - s) / m1  # (M, 2)
    q_j = q[None, :, :] - s[:, :, None] * s[:, None, :]  # (M, 2, 2)
    sig_j = (q_j / m1 - mean_j[:, :, None] * mean_j[:, None, :]) / n
    sig_bar = sig_j.mean(axis=0)
    stderr = np.sqrt((m1 / m) * ((sig_j - sig_bar) ** 2).sum(axis=0))
    return DiffusionMatrix(sigma2=sig_full, stderr=stderr, method="empirical")


def estimate_sigma2_greenkubo(
    source,
    burn_in: int = 1000,
    lag_cutoff: int = 64,
    n_steps: int = 1_000_000,
    seed: int = 0,
    batches: int = 16,
    init: str = "stationary",
) -> DiffusionMatrix:
    """Diffusion matrix as the summed autocovariance of displacement steps,
    truncated at `lag_cutoff` (justified by exponential decorrelation).

    Standard errors come from `batches` contiguous block estimates; warns
    when the terminal autocovariance is not yet negligible against lag zero.
    """
    if lag_cutoff < 0 or lag_cutoff * 50 > n_steps:
        raise ValueError("need lag_cutoff << n_steps")
    if n_steps // batches <= lag_cutoff:
        raise ValueError("batch blocks must be longer than the lag cutoff")
    xi = np.empty((n_steps, 2), np.int64)
    if isinstance(source, LazyLatticeWalk):
        st = K._walk_displacement_steps(
            np.uint64(stream_seed(seed, 0)), n_steps, burn_in, xi
        )
    else:
        cap = _cell_cap(source, "strict", None)
        init_mode = {"stationary": K.INIT_STATIONARY,
                     "uniform-q": K.INIT_UNIFORM_Q}[init]
        st = K._displacement_steps(
            source.centers[:, 0], source.centers[:, 1], source.radii,
            np.cumsum(source.radii) / source.radii.sum(),
            np.uint64(stream_seed(seed, 0)), n_steps, burn_in, init_mode, cap, xi,
        )
    _raise_status(int(st))

    def gk(block: np.ndarray):
        # all lag autocovariances at once via FFT (linear, zero padded)
        x = block.astype(np.float64)
        x -= x.mean(axis=0)
        n = x.shape[0]
        size = 1
        while size < 2 * n:
            size *= 2
        spec = [np.fft.rfft(x[:, a], n=size) for a in range(2)]
        counts = n - np.arange(lag_cutoff + 1, dtype=np.float64)
        cc = np.empty((lag_cutoff + 1, 2, 2))
        for a in range(2):
            for b in range(2):
                raw = np.fft.irfft(np.conj(spec[a]) * spec[b], n=size)
                cc[:, a, b] = raw[: lag_cutoff + 1] / counts
        total = cc[0] + (cc[1:] + cc[1:].transpose(0, 2, 1)).sum(axis=0)
        return total, cc[0], cc[lag_cutoff]

    sigma2, c0, c_last = gk(xi)
    cutoff_warning = bool(
        np.abs(c_last).max() > 1e-3 * np.abs(c0).max()
    )
    if cutoff_warning:
        log.warning(
            "autocovariance at the lag cutoff is %.3g of lag 0; "
            "increase lag_cutoff", np.abs(c_last).max() / np.abs(c0).max(),
        )
    blen = n_steps // batches
    ests = np.array([gk(xi[b * blen:(b + 1) * blen])[0] for b in range(batches)])
    stderr = ests.std(axis=0, ddof=1) / math.sqrt(batches)
    sym = 0.5 * (sigma2 + sigma2.T)
    return DiffusionMatrix(
        sigma2=sym, stderr=stderr, method="green-kubo", cutoff_warning=cutoff_warning
    )


def return_probability(
    source,
    k_list,
    M: int,
    seed: int,
    workers: int | None = None,
    init: str = "stationary",
) -> ReturnCurve:
    """p_hat(k): fraction of M fresh trajectories back at the initial
    (obstacle, cell) site at collision k; Wilson 95% intervals."""
    ks = np.asarray(sorted(int(k) for k in k_list), dtype=np.int64)
    if len(ks) == 0 or ks[0] < 1 or len(np.unique(ks)) != len(ks):
        raise ValueError("k_list must be unique positive lags")
    seeds = _derived_seeds(seed, M)
    n_chunks = min(M, _RETURN_CHUNKS)
    hits = np.zeros((n_chunks, len(ks)), np.int64)
    with _thread_count(workers):
        if isinstance(source, LazyLatticeWalk):
            K._returns_walk(seeds, ks, n_chunks, hits)
        else:
            stat = np.zeros(n_chunks, np.int64)
            init_mode = {"stationary": K.INIT_STATIONARY,
                         "uniform-q": K.INIT_UNIFORM_Q}[init]
            cap = _cell_cap(source, "strict", None)
            K._returns_billiard(
                source.centers[:, 0], source.centers[:, 1], source.radii,
                np.cumsum(source.radii) / source.radii.sum(),
                seeds, ks, init_mode, cap, n_chunks, hits, stat,
            )
            bad = stat[stat != 0]
            if len(bad):
                _raise_status(int(bad[0]))
    count = hits.sum(axis=0)
    p = count / M
    z2 = _Z95 * _Z95
    denom = 1.0 + z2 / M
    half = _Z95 * np.sqrt(p * (1.0 - p) / M + z2 / (4.0 * M * M)) / denom
    return ReturnCurve(ks=ks, p_hat=p, ci_halfwidth=half, M=M, seed=seed)


def _weighted(values, errors):
    values = np.asarray(values, dtype=np.float64)
    errors = np.asarray(errors, dtype=np.float64)
    if np.any(errors <= 0):
        return float(values.mean()), 0.0
    w = 1.0 / errors**2
    return float((w * values).sum() / w.sum()), float(1.0 / math.sqrt(w.sum()))


def fit_constants(summary: EnsembleSummary, sigma2: DiffusionMatrix | None = None) -> ConstantFit:
    """Asymptotic constants from the checkpoint curves.

    c0_hat averages mean_V(n)/(n ln n) and c_hat averages var_V(n)/n^2 over
    the top decade of checkpoints (inverse-variance weights); the full
    var_V(n)/n^2 sequence is returned with a monotone-drift flag as the trend
    diagnostic.
    """
    cps = np.asarray(summary.checkpoints, dtype=np.float64)
    if len(cps) < 4 or cps[-1] / cps[0] < 100.0:
        raise InsufficientData(
            "need >= 4 checkpoints spanning >= 2 decades to fit constants"
        )
    nlogn = cps * np.log(cps)
    mean_ratio = np.asarray(summary.mean_V) / nlogn
    var_ratio = np.asarray(summary.var_V) / cps**2
    window = cps >= cps[-1] / 10.0
    c0_hat, c0_band = _weighted(
        mean_ratio[window], np.asarray(summary.stderr_mean)[window] / nlogn[window]
    )
    c_hat, c_band = _weighted(
        var_ratio[window], np.asarray(summary.stderr_var)[window] / cps[window] ** 2
    )
    diffs = np.diff(var_ratio)
    drift = bool(len(diffs) > 0 and (np.all(diffs > 0) or np.all(diffs < 0)))
    notes = ""
    if sigma2 is not None:
        notes = f"sqrt_det_sigma2={sigma2.sqrt_det:.10g} ({sigma2.method})"
    return ConstantFit(
        c0_hat=c0_hat,
        c0_band=c0_band,
        c_hat=c_hat,
        c_band=c_band,
        window=summary.checkpoints[window],
        mean_ratio=mean_ratio,
        var_ratio=var_ratio,
        drift_flag=drift,
        notes=notes,
    )
