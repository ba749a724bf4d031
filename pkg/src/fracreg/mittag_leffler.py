"""Two-parameter Mittag-Leffler evaluation on the nonnegative real axis.

Evaluates ``E(beta, gamma; z) = sum_k z^k / Gamma(beta*k + gamma)`` for
``z >= 0`` together with the exact antiderivatives of the Volterra kernel
``s^(beta-1) * E(beta, beta; lam * s^beta)`` that the mild solver needs, and
the empirical calibration of the exponential growth envelopes used both by
the test suite and by the instability-demo nonlinearity.

Evaluation strategy
-------------------
All series terms are nonnegative for ``z >= 0``, so there is no cancellation
and double precision suffices everywhere:

* ``x = z**(1/beta) <= SERIES_SWITCH_X``: the power series, summed with
  compensated (Kahan) accumulation.  The term ratio
  ``t_{k+1}/t_k = z * Gamma(beta*k+gamma) / Gamma(beta*k+beta+gamma)``
  is strictly decreasing in ``k``, so once it drops below 1 the tail is
  bounded by a geometric series; summation stops when that bound meets the
  tolerance.
* ``x > SERIES_SWITCH_X``: the large-argument expansion
  ``(1/beta) * z^((1-gamma)/beta) * exp(x) - sum_{k=1}^{K} z^(-k)/Gamma(gamma - beta*k)``
  with ``K = ASYMPTOTIC_TERMS`` corrections.  Correction terms whose Gamma
  argument sits on a pole vanish (reciprocal Gamma).  For ``beta == 2``
  exactly, the reflected exponential ``exp(-x)`` branch is added, which makes
  the ``cosh``/``sinh`` cases exact.  The two branches agree to ~1e-15
  relative at the switchover (checked by the continuity test).

Only real ``z >= 0`` is supported; the solver never needs anything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, rgamma

from .errors import DomainError, NonConvergence

# Series/asymptotic switchover in x = z**(1/beta).  The series still
# converges beyond this point but needs ever more terms, while the
# asymptotic remainder is already below 1e-15 relative here.
SERIES_SWITCH_X = 25.0

# Hard cap on series terms; exceeding it raises instead of truncating.
SERIES_TERM_CAP = 10_000

# Correction depth of the large-argument expansion.
ASYMPTOTIC_TERMS = 5

# Internal relative accuracy target for the dispatcher.
_REL_TOL = 1e-13


@dataclass(frozen=True)
class MLQuery:
    """Validated argument triple for a Mittag-Leffler evaluation.

    ``beta`` must lie in (0, 2], ``gamma`` must be positive and ``z``
    nonnegative (negative arguments never occur in this problem: the
    function is only ever evaluated at ``lam * t**beta``).
    """

    beta: float
    gamma: float
    z: float

    def __post_init__(self):
        if not (0.0 < self.beta <= 2.0) or math.isnan(self.beta):
            raise DomainError(f"beta must be in (0, 2], got {self.beta}")
        if not (self.gamma > 0.0) or math.isinf(self.gamma):
            raise DomainError(f"gamma must be positive, got {self.gamma}")
        if not (self.z >= 0.0) or math.isinf(self.z):
            raise DomainError(f"z must be finite and >= 0, got {self.z}")


@dataclass(frozen=True)
class MLValue:
    """Evaluation result with a truncation-error estimate.

    ``est_abs_err`` bounds the truncation error of whichever branch
    produced the value (series tail bound, or first omitted asymptotic
    correction); floating-point rounding adds at most a few ulps on top
    because all quantities are positive.
    """

    value: float
    est_abs_err: float


def _series_term0(gamma: float) -> float:
    return math.exp(-math.lgamma(gamma))


def ml_series(beta: float, gamma: float, z: float, tol: float) -> MLValue:
    """Power-series evaluation with a rigorous geometric tail bound.

    Terms are summed with Kahan compensation until the bound
    ``t_{k+1} / (1 - r_{k+1})`` on the remaining tail drops below ``tol``
    (``r`` is the next term ratio, strictly decreasing in ``k``).  Raises
    :class:`NonConvergence` if ``SERIES_TERM_CAP`` terms do not suffice,
    which signals that ``z`` belongs to the asymptotic branch.
    """
    MLQuery(beta, gamma, z)
    if not tol > 0.0:
        raise DomainError(f"tol must be positive, got {tol}")
    if z == 0.0:
        return MLValue(_series_term0(gamma), 0.0)

    lnz = math.log(z)
    total = 0.0
    comp = 0.0  # Kahan compensation
    for k in range(SERIES_TERM_CAP):
        arg = k * lnz - math.lgamma(beta * k + gamma)
        if arg > 709.0:  # term overflows double: series mode is hopeless here
            raise NonConvergence(
                f"series term overflow for E({beta},{gamma}) at z={z}; "
                "z too large for series mode",
                k,
            )
        term = math.exp(arg)
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t

        t_next = math.exp(min((k + 1) * lnz - math.lgamma(beta * (k + 1) + gamma), 709.0))
        r_next = z * math.exp(
            math.lgamma(beta * (k + 1) + gamma) - math.lgamma(beta * (k + 2) + gamma)
        )
        if r_next < 1.0:
            tail = t_next / (1.0 - r_next)
            if tail <= tol:
                return MLValue(total, tail)
    raise NonConvergence(
        f"series for E({beta},{gamma}) at z={z} needs more than "
        f"{SERIES_TERM_CAP} terms for tol={tol}; use the asymptotic branch",
        SERIES_TERM_CAP,
    )


def _asymptotic_scalar(beta: float, gamma: float, z: float) -> MLValue:
    x = z ** (1.0 / beta)
    main = math.exp(x + (1.0 - gamma) / beta * math.log(z) - math.log(beta))
    if beta == 2.0:
        # Reflected branch: exactly present for beta = 2 (cosh/sinh family).
        main += x ** (1.0 - gamma) * math.cos(math.pi * (1.0 - gamma)) * math.exp(-x) / beta
    corr = 0.0
    for k in range(1, ASYMPTOTIC_TERMS + 1):
        corr += float(rgamma(gamma - beta * k)) * z ** (-k)
    err = abs(float(rgamma(gamma - beta * (ASYMPTOTIC_TERMS + 1)))) * z ** (
        -(ASYMPTOTIC_TERMS + 1)
    ) + main * (x + 2.0) * 1e-16
    return MLValue(main - corr, err)


def _magnitude_guess(beta: float, gamma: float, z: float) -> float:
    """Crude lower-order estimate of E(beta,gamma;z), used to set the
    absolute series tolerance from the relative target."""
    first = _series_term0(gamma)
    if z == 0.0:
        return first
    x = z ** (1.0 / beta)
    arg = x + (1.0 - gamma) / beta * math.log(z) - math.log(beta)
    if arg > 700.0:
        return math.inf
    return max(first, math.exp(arg))


def ml(beta: float, gamma: float, z: float) -> MLValue:
    """Evaluate ``E(beta, gamma; z)``, dispatching between branches.

    Relative accuracy is ~1e-13 in exact arithmetic terms; the identity
    test grid (exp, cosh, (e^z-1)/z) holds it to better than 1e-10.
    """
    MLQuery(beta, gamma, z)
    if z == 0.0:
        return MLValue(_series_term0(gamma), 0.0)
    if z ** (1.0 / beta) <= SERIES_SWITCH_X:
        tol = _REL_TOL * _magnitude_guess(beta, gamma, z)
        return ml_series(beta, gamma, z, tol)
    return _asymptotic_scalar(beta, gamma, z)


def ml_values(beta: float, gamma: float, z) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized :func:`ml` over an array of nonnegative arguments.

    Returns ``(values, est_abs_errs)`` with the shape of ``z``.  The series
    lanes are driven together: the largest argument converges last, so its
    tail bound terminates the shared term loop.
    """
    z = np.asarray(z, dtype=float)
    MLQuery(beta, gamma, 0.0)  # validates beta/gamma
    if z.size and (np.any(z < 0) or not np.all(np.isfinite(z))):
        raise DomainError("all z must be finite and >= 0")
    flat = z.ravel()
    vals = np.empty_like(flat)
    errs = np.empty_like(flat)

    x = flat ** (1.0 / beta)
    ser = x <= SERIES_SWITCH_X
    if np.any(ser):
        v, e = _series_vec(beta, gamma, flat[ser])
        vals[ser] = v
        errs[ser] = e
    if np.any(~ser):
        v, e = _asymptotic_vec(beta, gamma, flat[~ser])
        vals[~ser] = v
        errs[~ser] = e
    return vals.reshape(z.shape), errs.reshape(z.shape)


def _magnitude_guess_vec(beta: float, gamma: float, z: np.ndarray) -> np.ndarray:
    first = _series_term0(gamma)
    pos = z > 0.0
    zz = np.where(pos, z, 1.0)
    arg = zz ** (1.0 / beta) + (1.0 - gamma) / beta * np.log(zz) - math.log(beta)
    return np.where(pos, np.maximum(first, np.exp(np.minimum(arg, 700.0))), first)


def _series_vec(beta: float, gamma: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = z.size
    total = np.full(n, _series_term0(gamma))
    comp = np.zeros(n)
    if n == 0:
        return total, np.zeros(n)
    pos = z > 0.0
    if not np.any(pos):
        return total, np.zeros(n)
    lnz = np.where(pos, np.log(np.where(pos, z, 1.0)), -np.inf)
    tol = _REL_TOL * _magnitude_guess_vec(beta, gamma, z)

    lg = gammaln(beta * np.arange(SERIES_TERM_CAP + 2) + gamma)
    for k in range(1, SERIES_TERM_CAP):
        term = np.where(pos, np.exp(k * lnz - lg[k]), 0.0)
        y = term - comp
        t = total + y
        comp = (t - total) - y
        total = t

        # All terms keep being added until the slowest lane (largest z)
        # meets its bound, so the final tail bound is valid lane-by-lane.
        r_next = z * math.exp(lg[k + 1] - lg[k + 2])
        t_next = np.where(pos, np.exp((k + 1) * lnz - lg[k + 1]), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(r_next < 1.0, t_next / (1.0 - r_next), np.inf)
        if np.all(~pos | ((r_next < 1.0) & (tail <= tol))):
            return total, np.where(pos, tail, 0.0)
    raise NonConvergence(
        f"vectorized series for E({beta},{gamma}) exceeded {SERIES_TERM_CAP} terms",
        SERIES_TERM_CAP,
    )


def _asymptotic_vec(beta: float, gamma: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = z ** (1.0 / beta)
    main = np.exp(x + (1.0 - gamma) / beta * np.log(z) - math.log(beta))
    if beta == 2.0:
        main = main + x ** (1.0 - gamma) * math.cos(math.pi * (1.0 - gamma)) * np.exp(-x) / beta
    corr = np.zeros_like(z)
    for k in range(1, ASYMPTOTIC_TERMS + 1):
        corr += float(rgamma(gamma - beta * k)) * z ** (-float(k))
    err = abs(float(rgamma(gamma - beta * (ASYMPTOTIC_TERMS + 1)))) * z ** (
        -float(ASYMPTOTIC_TERMS + 1)
    ) + main * (x + 2.0) * 1e-16
    return main - corr, err


# ---------------------------------------------------------------------------
# Exact antiderivatives of the Volterra kernel
# ---------------------------------------------------------------------------


def kernel_primitive(beta: float, lam: float, s: float) -> float:
    """Exact integral of the Volterra kernel from 0 to ``s``.

    ``int_0^s tau^(beta-1) E(beta, beta; lam tau^beta) dtau
    = s^beta * E(beta, beta+1; lam s^beta)`` (termwise integration of the
    series).  Equals ``s^beta / Gamma(beta+1)`` at ``lam = 0`` and 0 at
    ``s = 0``.
    """
    if not (1.0 < beta < 2.0):
        raise DomainError(f"kernel_primitive requires beta in (1, 2), got {beta}")
    if lam < 0 or s < 0:
        raise DomainError("lam and s must be >= 0")
    if s == 0.0:
        return 0.0
    return s**beta * ml(beta, beta + 1.0, lam * s**beta).value


def kernel_double_primitive(beta: float, lam: float, s: float) -> float:
    """Integral of :func:`kernel_primitive` from 0 to ``s``.

    Equals ``s^(beta+1) * E(beta, beta+2; lam s^beta)``; needed for the
    first moment of the kernel in piecewise-linear product integration.
    """
    if not (1.0 < beta < 2.0):
        raise DomainError(f"kernel_double_primitive requires beta in (1, 2), got {beta}")
    if lam < 0 or s < 0:
        raise DomainError("lam and s must be >= 0")
    if s == 0.0:
        return 0.0
    return s ** (beta + 1.0) * ml(beta, beta + 2.0, lam * s**beta).value


# ---------------------------------------------------------------------------
# Exponential growth envelopes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GrowthConstants:
    """Empirical envelope constants for the three kernel growth bounds.

    ``C1``, ``C2``, ``C3`` are the suprema over a reference (lam, t) grid of

    * ``E(beta,1; lam t^beta) / exp(lam^(1/beta) t)``
    * ``t E(beta,2; lam t^beta) / ((1 + lam^(-1/beta)) exp(lam^(1/beta) t))``
    * ``t^(beta-1) E(beta,beta; lam t^beta) / exp(lam^(1/beta) t)``

    respectively.  ``C3`` also scales the contraction nonlinearity used by
    the instability demo.
    """

    beta: float
    a: float
    C1: float
    C2: float
    C3: float


def growth_ratio_grids(
    beta: float, lams: np.ndarray, ts: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """The three normalized growth ratios on the tensor grid lams x ts.

    Rows index ``lams``, columns ``ts``.  Requires ``beta`` in (1, 2):
    for ``beta <= 1`` the third ratio is unbounded as ``t -> 0`` and the
    envelope in this form does not exist.
    """
    if not (1.0 < beta < 2.0):
        raise DomainError(f"growth ratios require beta in (1, 2), got {beta}")
    lams = np.asarray(lams, dtype=float)
    ts = np.asarray(ts, dtype=float)
    if np.any(lams <= 0):
        raise DomainError("eigenvalues must be positive")
    if np.any(ts < 0):
        raise DomainError("times must be >= 0")

    z = lams[:, None] * ts[None, :] ** beta
    damp = np.exp(-(lams[:, None] ** (1.0 / beta)) * ts[None, :])

    e1, _ = ml_values(beta, 1.0, z)
    e2, _ = ml_values(beta, 2.0, z)
    e3, _ = ml_values(beta, beta, z)

    r1 = e1 * damp
    r2 = ts[None, :] * e2 * damp / (1.0 + lams[:, None] ** (-1.0 / beta))
    r3 = ts[None, :] ** (beta - 1.0) * e3 * damp
    return r1, r2, r3


def calibrate_growth_constants(
    beta: float, a: float, lam_max: int = 400, n_t: int = 201, headroom: float = 1.005
) -> GrowthConstants:
    """Empirical suprema of the growth ratios over a reference grid.

    The reference grid is all integer eigenvalues up to ``lam_max`` crossed
    with ``n_t`` uniform times in [0, a].  The constants are never quoted in
    closed form anywhere; they exist, and this pins usable values.  The
    ``headroom`` factor covers the residual grid-refinement error so the
    constants keep dominating the ratios between reference points (the
    ratios plateau in t for large lam, so 0.5% is generous).
    """
    if a <= 0:
        raise DomainError(f"horizon a must be positive, got {a}")
    if headroom < 1.0:
        raise DomainError("headroom must be >= 1")
    lams = np.arange(1, lam_max + 1, dtype=float)
    ts = np.linspace(0.0, a, n_t)
    r1, r2, r3 = growth_ratio_grids(beta, lams, ts)
    return GrowthConstants(
        beta,
        a,
        float(r1.max()) * headroom,
        float(r2.max()) * headroom,
        float(r3.max()) * headroom,
    )
