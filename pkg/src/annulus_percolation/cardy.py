"""Closed-form circuit-free probability for the annulus of modulus q = e^a:

    P(N) = sqrt(3) * eta(tau) eta(6 tau)^2 / (eta(3 tau) eta(2 tau)^2),
    tau = -i a / (2 pi),

with eta Dedekind's function.  This is the fourth cross-validation route next
to the exit PDE, the kernel series, and the Monte Carlo estimators.
"""

from __future__ import annotations

import cmath

from .elliptic import SQRT3, DomainError, ModulusParam, dedekind_eta

# below this Im(tau) every eta argument is routed through eta(-1/tau) to keep
# the product nome small for thin annuli (a -> 0-)
_IM_SWITCH = 1.0


def _eta_stable(arg: complex) -> complex:
    if arg.imag < _IM_SWITCH:
        return dedekind_eta(-1.0 / arg) / cmath.sqrt(-1j * arg)
    return dedekind_eta(arg)


def cardy_pn(m: ModulusParam) -> float:
    """P(no wrapping circuit) for critical percolation in A_{e^a}."""
    if not m.a < 0.0:
        raise DomainError("cardy_pn needs a < 0")
    tau = m.tau_cardy
    val = SQRT3 * _eta_stable(tau) * _eta_stable(6 * tau) ** 2 \
        / (_eta_stable(3 * tau) * _eta_stable(2 * tau) ** 2)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"eta quotient came out non-real: {val}")
    return float(val.real)
