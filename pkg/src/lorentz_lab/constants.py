"""Analytic constants behind the self-intersection asymptotics.

The mean grows like c0 * n log n and the variance like c * n^2 with

    c0 = sum_i |dO_i|^2 / ((sum_i |dO_i|)^2 * pi * sqrt(det Sigma^2)),
    c1 = c0 / 2,
    c  = c0^2 * (1 + 2 J - pi^2/6),

where J is a simplex integral with integrable singularities along the three
edges where two coordinates vanish. J is evaluated here by two independent
routes (adaptive cubature after a collapsing transform, and importance-
sampled Monte Carlo on the raw simplex); the dilogarithm and two closed-form
integrals serve as exact oracles for the machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import _kernels as K
from .errors import (
    DegenerateMatrix,
    DomainError,
    MethodDisagreement,
    QuadratureNonConvergence,
)

PI2_6 = math.pi**2 / 6.0
PI2_12 = math.pi**2 / 12.0

# c > 0 forces J above this (the variance constant is a nondegenerate limit)
J_LOWER_BOUND = (PI2_6 - 1.0) / 2.0


def _li2_series(y: float) -> float:
    # |y| <= 1/2: the defining series, geometric tail below 1e-18
    total = 0.0
    p = y
    k = 1
    while abs(p) / (k * k) > 1e-18:
        total += p / (k * k)
        p *= y
        k += 1
    return total


def li2(x: float) -> float:
    """Dilogarithm sum_{k>=1} x^k / k^2 on [-1, 1], absolute error < 1e-14.

    Direct series for |x| <= 1/2; the Euler reflection
    Li2(x) + Li2(1-x) = pi^2/6 - ln(x) ln(1-x) for x in (1/2, 1); the square
    identity Li2(x) = Li2(x^2)/2 - Li2(-x) for x in (-1, -1/2).
    """
    if not isinstance(x, (int, float)) or math.isnan(x):
        raise DomainError(f"li2 argument must be a real number, got {x!r}")
    if x < -1.0 or x > 1.0:
        raise DomainError(f"li2 is evaluated on [-1, 1] only, got {x}")
    if x == 1.0:
        return PI2_6
    if x == -1.0:
        return -PI2_12
    if x < -0.5:
        return 0.5 * li2(x * x) - li2(-x)
    if x <= 0.5:
        return _li2_series(x)
    return PI2_6 - math.log(x) * math.log1p(-x) - _li2_series(1.0 - x)


def integral_I() -> tuple[float, float]:
    """The log-weighted moment integral on [1/2, 1].

    Returns (quadrature value, closed form pi^2/12 + 1/4 - (3/2) ln 2); the
    integrand vanishes at u = 1 but carries a log endpoint, handled by the
    adaptive subdivision of the quadrature.
    """
    closed = PI2_12 + 0.25 - 1.5 * math.log(2.0)

    def f(u):
        return (1.0 - u) ** 2 / u * math.log(u / (1.0 - u))

    val, err = integrate.quad(f, 0.5, 1.0, epsabs=1e-12, epsrel=1e-12, limit=200)
    if not math.isfinite(val) or err > 1e-9:
        raise QuadratureNonConvergence(f"integral_I error estimate {err}")
    return val, closed


def integral_simplex_check() -> float:
    """Engine self-test: the ordered-simplex integral of (1-s)/(r s) over
    0 <= u <= r <= s <= 1, which collapses (u analytic, then r = s*rho) to a
    regular integrand with exact value 1/2."""

    def f(rho, s):
        return (1.0 - s) / s * s  # jacobian of r = s*rho cancels the 1/s

    val, err = integrate.dblquad(f, 0.0, 1.0, 0.0, 1.0, epsabs=1e-11)
    if not math.isfinite(val) or err > 1e-8:
        raise QuadratureNonConvergence(f"simplex check error estimate {err}")
    return val


def integral_simplex_check_mc(n_samples: int = 10**7, seed: int = 0):
    """Monte-Carlo oracle for the same integral: sampling in the collapsed
    coordinates (importance matched to the 1/(rs) blowup) evaluates the raw
    integrand with its singularities. Returns (estimate, stderr)."""
    rng = np.random.default_rng(seed)
    total = 0.0
    total_sq = 0.0
    used = 0
    chunk = 2_000_000
    remaining = n_samples
    while remaining > 0:
        m = min(chunk, remaining)
        remaining -= m
        s = rng.random(m)
        r = s * rng.random(m)
        u = r * rng.random(m)
        ok = (r > 0) & (s > 0)  # exact zeros are a measure-zero artifact
        f = (1.0 - s[ok]) / (r[ok] * s[ok])
        w = f * (s[ok] * r[ok])
        total += float(w.sum())
        total_sq += float((w * w).sum())
        used += int(ok.sum())
        del u
    mean = total / used
    var = max(total_sq / used - mean * mean, 0.0)
    return mean, math.sqrt(var / used)


def _j_cubature(target_err: float) -> tuple[float, float]:
    """J by adaptive cubature after the collapsing transform.

    Scaling out s = u+v+w contributes the exact factor 1/2 and leaves a
    triangle integral with 1/r singularities at the three vertices; a
    threefold symmetry reduction plus the vertex collapse (a, b) =
    (t xi, t (1 - xi)) yields a bounded integrand on [0, 1/2] x [0, 1]:

        J = 3 * int_0^{1/2} dxi int_0^1 dtau T / (1 - tau T g),
        g = 1 - xi (1 - xi),  T = 1 / (2 - xi).
    """

    def f(tau, xi):
        g = 1.0 - xi * (1.0 - xi)
        big_t = 1.0 / (2.0 - xi)
        return big_t / (1.0 - tau * big_t * g)

    val, err = integrate.dblquad(
        f, 0.0, 0.5, 0.0, 1.0, epsabs=target_err / 6.0, epsrel=1e-13
    )
    j = 3.0 * val
    j_err = 3.0 * err
    if not math.isfinite(j) or j_err > target_err:
        raise QuadratureNonConvergence(f"J cubature error estimate {j_err}")
    return j, j_err


def _j_monte_carlo(target_err: float, seed: int) -> tuple[float, float]:
    """J by importance-sampled Monte Carlo on the raw simplex.

    The proposal mixes the uniform law with an edge-collapsed component, so
    weights are bounded (uniform sampling alone has log-divergent variance).
    Sample count is chosen from a pilot run to hit the requested stderr.
    """
    n_chunks = 512
    master = np.uint64(seed & ((1 << 64) - 1))

    def run(n_total):
        sums = np.zeros(n_chunks, np.float64)
        sumsq = np.zeros(n_chunks, np.float64)
        K._j_mc(master, n_total, n_chunks, sums, sumsq)
        mean = sums.sum() / n_total
        var = max(sumsq.sum() / n_total - mean * mean, 0.0)
        return mean, math.sqrt(var / n_total)

    _pilot_mean, pilot_err = run(200_000)
    pilot_sd = pilot_err * math.sqrt(200_000.0)
    n_needed = int(min(max((pilot_sd / target_err) ** 2 * 1.2, 1e6), 4e9))
    return run(n_needed)


def integral_J(
    method: str = "cubature", target_err: float = 1e-6, seed: int = 0
) -> tuple[float, float]:
    """The edge-singular simplex integral J; returns (J, err)."""
    if method == "cubature":
        if target_err < 1e-6:
            raise ValueError("cubature target_err must be >= 1e-6")
        return _j_cubature(target_err)
    if method == "monte-carlo":
        if target_err < 1e-4:
            raise ValueError("monte-carlo target_err must be >= 1e-4")
        return _j_monte_carlo(target_err, seed)
    raise ValueError(f"unknown method {method!r}")


def check_J_methods(target_err: float = 1e-4, seed: int = 0):
    """Cross-validate the two J routes; raises MethodDisagreement beyond
    3 combined errors. Returns ((J_cub, err), (J_mc, err))."""
    cub = integral_J("cubature", max(target_err * 0.01, 1e-6))
    mc = integral_J("monte-carlo", target_err, seed)
    combined = math.hypot(cub[1], mc[1])
    if abs(cub[0] - mc[0]) > 3.0 * combined:
        raise MethodDisagreement(
            f"J cubature {cub[0]:.8f} vs MC {mc[0]:.8f} "
            f"differ beyond 3 * {combined:.2g}"
        )
    return cub, mc


def j_integrand(u: float, v: float, w: float) -> float:
    """The raw integrand (useful as a spot oracle; 6 at the centroid)."""
    if u + v + w > 1.0:
        return 0.0
    return (1.0 - (u + v + w)) / (u * v + u * w + v * w)


def perimeter_factor(table) -> float:
    """sum |dO_i|^2 / (sum |dO_i|)^2; scale invariant, 1 for a single disk."""
    p = np.array([d.perimeter for d in table.disks])
    return float((p**2).sum() / p.sum() ** 2)


@dataclass(frozen=True)
class ConstantsReport:
    """The theoretical constants with first-order error bands.

    Invariants: c1 == c0/2 exactly, c == c0^2 (1 + 2J - pi^2/6), c > 0.
    """

    c0: float
    c0_err: float
    c1: float
    c1_err: float
    J: float
    J_err: float
    c: float
    c_err: float
    I_quad: float
    I_closed: float
    sqrt_det: float
    notes: str

    def __post_init__(self):
        if self.c1 != self.c0 / 2.0:
            raise ValueError("c1 must equal c0/2")
        expected = self.c0**2 * (1.0 + 2.0 * self.J - PI2_6)
        if abs(self.c - expected) > 1e-12 * max(abs(expected), 1.0):
            raise ValueError("c must equal c0^2 (1 + 2J - pi^2/6)")
        if self.c <= 0.0:
            raise ValueError("variance constant must be positive")


def theoretical_constants(table, sigma2, j_value=None) -> ConstantsReport:
    """Assemble c0, c1, c from the table's perimeters, an estimated diffusion
    matrix and J (computed by cubature when not supplied).

    Error bands propagate the sigma2 standard errors and the J error to
    first order.
    """
    s = np.asarray(sigma2.sigma2, dtype=np.float64)
    det = float(np.linalg.det(s))
    if det <= 0.0:
        raise DegenerateMatrix("sigma2 must have positive determinant")
    if j_value is None:
        j_value = integral_J("cubature", 1e-6)
    j, j_err = j_value
    factor = perimeter_factor(table)
    sqrt_det = math.sqrt(det)
    c0 = factor / (math.pi * sqrt_det)
    se = np.asarray(sigma2.stderr, dtype=np.float64)
    det_err = math.sqrt(
        (s[1, 1] * se[0, 0]) ** 2
        + (s[0, 0] * se[1, 1]) ** 2
        + (2.0 * s[0, 1] * se[0, 1]) ** 2
    )
    c0_err = c0 * det_err / (2.0 * det)
    bracket = 1.0 + 2.0 * j - PI2_6
    c = c0**2 * bracket
    c_err = math.sqrt(
        (2.0 * c0 * bracket * c0_err) ** 2 + (2.0 * c0**2 * j_err) ** 2
    )
    i_quad, i_closed = integral_I()
    return ConstantsReport(
        c0=c0,
        c0_err=c0_err,
        c1=c0 / 2.0,
        c1_err=c0_err / 2.0,
        J=j,
        J_err=j_err,
        c=c,
        c_err=c_err,
        I_quad=i_quad,
        I_closed=i_closed,
        sqrt_det=sqrt_det,
        notes=f"sigma2 method={sigma2.method}",
    )
