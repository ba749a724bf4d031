"""Independent high-precision references used only by the tests.

Everything here is deliberately dumb and slow: straight series summation in
mpmath working precision, and adaptive quadrature.  None of it shares code
with the package under test.
"""

from __future__ import annotations

import mpmath as mp


def ml_reference(beta: float, gamma: float, z: float, dps: int = 60) -> float:
    """Mittag-Leffler value by raw series summation at high precision."""
    with mp.workdps(dps):
        b, g, zz = mp.mpf(beta), mp.mpf(gamma), mp.mpf(z)
        s = mp.mpf(0)
        k = 0
        while True:
            t = zz**k / mp.gamma(b * k + g)
            s += t
            if k > 8 and abs(t) < abs(s) * mp.mpf(10) ** (-dps + 8):
                break
            k += 1
            if k > 100_000:
                raise RuntimeError("oracle series did not terminate")
        return float(s)


def volterra_reference(beta: float, lam: float, t: float, g, dps: int = 30) -> float:
    """Adaptive quadrature of int_0^t (t-eta)^(b-1) E(b,b; lam (t-eta)^b) g(eta) deta."""
    with mp.workdps(dps):
        b, L, T = mp.mpf(beta), mp.mpf(lam), mp.mpf(t)

        def integrand(eta):
            s = T - eta
            if s <= 0:
                return mp.mpf(0)
            zz = L * s**b
            acc = mp.mpf(0)
            k = 0
            while True:
                term = zz**k / mp.gamma(b * k + b)
                acc += term
                if k > 8 and abs(term) < abs(acc) * mp.mpf(10) ** (-dps + 6):
                    break
                k += 1
            return s ** (b - 1) * acc * mp.mpf(g(float(eta)))

        return float(mp.quad(integrand, [0, T]))


def kernel_primitive_reference(beta: float, lam: float, s: float, dps: int = 40) -> float:
    """Adaptive quadrature of the Volterra kernel tau^(beta-1) E(beta,beta; lam tau^beta)."""
    with mp.workdps(dps):
        b, L = mp.mpf(beta), mp.mpf(lam)

        def kernel(tau):
            if tau <= 0:
                return mp.mpf(0)
            acc = mp.mpf(0)
            k = 0
            zz = L * tau**b
            while True:
                t = zz**k / mp.gamma(b * k + b)
                acc += t
                if k > 8 and abs(t) < abs(acc) * mp.mpf(10) ** (-dps + 6):
                    break
                k += 1
            return tau ** (b - 1) * acc

        return float(mp.quad(kernel, [0, mp.mpf(s)]))
