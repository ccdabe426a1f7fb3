"""Elliptic special-function layer.

Everything downstream (drift of the interface diffusion, annulus kernels,
the eta-quotient closed form) reduces to four ingredients implemented here:
the log-derivative of Jacobi theta_1, the Weierstrass zeta function on
rectangular lattices, the quasi-period constants eta_1/eta_2/eta_3, and
Dedekind's eta.

Fixed conventions:

* lattices are rectangular: half-periods omega1 > 0 real, omega2 positive
  imaginary; basic periods (2*omega1, 2*omega2);
* theta_1 is used in the unit-periodic variable v, i.e. the series
  theta1(v|tau) = 2 * sum (-1)^n qn^{(n+1/2)^2} sin((2n+1) pi v) with
  nome qn = exp(i pi tau);
* the annulus normalization is omega1 = pi, omega2 = -i*a (a = log q < 0),
  which makes the drift nome equal to the annulus modulus: qn = e^a = q.

All functions are pure; identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

PI = math.pi
SQRT3 = math.sqrt(3.0)

# |nome| above this switches theta evaluation to the tau -> -1/tau form; at the
# switch point both series shrink geometrically with ratio <= e^{-pi}.
MODULAR_SWITCH = math.exp(-PI)
_SERIES_TOL = 1e-16


class DomainError(ValueError):
    """Argument outside the mathematical domain of the operation."""


class LatticePointError(ValueError):
    """Evaluation point collides with a lattice point (pole of zeta)."""


# ----------------------------------------------------------------------------
# parameter containers


@dataclass(frozen=True)
class ModulusParam:
    """Annulus modulus in log form, a = log q < 0."""

    a: float

    def __post_init__(self):
        if not (math.isfinite(self.a) and self.a < 0.0):
            raise DomainError(f"log-modulus must be finite and negative, got {self.a}")

    @property
    def q(self) -> float:
        return math.exp(self.a)

    @property
    def tau_drift(self) -> complex:
        # nome exp(i pi tau) = e^a = q
        return complex(0.0, -self.a / PI)

    @property
    def tau_cardy(self) -> complex:
        return complex(0.0, -self.a / (2.0 * PI))


@dataclass(frozen=True)
class ThetaParams:
    """Modular parameter with its nome and a series cutoff.

    truncation_order is the smallest N with |nome|^{(N+1/2)^2} < 1e-16, so the
    working accuracy is uniform in tau rather than tied to a fixed term count.
    """

    tau: complex
    nome: complex
    truncation_order: int


def _order_for(abs_nome: float, tol: float = _SERIES_TOL) -> int:
    if abs_nome <= 0.0:
        return 1
    n = math.sqrt(max(math.log(tol) / math.log(abs_nome), 0.25)) - 0.5
    return max(1, int(math.ceil(n)) + 1)


def theta_params(tau: complex, tol: float = _SERIES_TOL) -> ThetaParams:
    tau = complex(tau)
    if tau.imag <= 0.0:
        raise DomainError(f"modular parameter needs Im(tau) > 0, got {tau}")
    nome = cmath.exp(1j * PI * tau)
    return ThetaParams(tau, nome, _order_for(abs(nome), tol))


@dataclass(frozen=True)
class LatticePeriods:
    """Half-periods and quasi-period constants of a rectangular lattice.

    eta2 is fixed from eta1 by the Legendre relation in the orientation
    eta1*omega2 - eta2*omega1 = +i*pi/2 (Im(omega2/omega1) > 0).
    """

    omega1: float
    omega2: complex
    eta1: float
    eta2: complex
    eta3: complex


def _eta1_series(omega1: float, t: float) -> float:
    # eta1 = -(pi^2 / (12 omega1)) * theta1'''(0|tau) / theta1'(0|tau), tau = i t
    q = math.exp(-PI * t)
    n_terms = _order_for(q) + 2
    s1 = 0.0
    s3 = 0.0
    sign = 1.0
    qp = 1.0
    for n in range(n_terms + 1):
        k = 2 * n + 1
        s1 += sign * k * qp
        s3 += sign * k ** 3 * qp
        sign = -sign
        qp *= q ** (2 * (n + 1))
    return PI ** 2 * s3 / (12.0 * omega1 * s1)


def lattice_periods(omega1: float, omega2: complex) -> LatticePeriods:
    """Build LatticePeriods for a rectangular lattice, computing eta constants."""
    omega2 = complex(omega2)
    if not (omega1 > 0.0 and math.isfinite(omega1)):
        raise DomainError("omega1 must be a positive real number")
    if abs(omega2.real) > 1e-14 * abs(omega2) or omega2.imag <= 0.0:
        raise DomainError("omega2 must be purely imaginary with positive imaginary part")
    s = omega2.imag
    t = s / omega1
    if t >= 1.0:
        eta1 = _eta1_series(omega1, t)
        eta2 = (eta1 * omega2 - 0.5j * PI) / omega1
    else:
        # swap to the i-rotated lattice (2s, 2i*omega1): zeta(i z; i L) = -i zeta(z; L),
        # so its eta1 equals i * eta2 of the original lattice
        eta2 = -1j * _eta1_series(s, 1.0 / t)
        eta1 = ((0.5j * PI + eta2 * omega1) / omega2).real
    return LatticePeriods(omega1, omega2, float(eta1), eta2, eta1 + eta2)


# ----------------------------------------------------------------------------
# theta_1 log-derivative, real unit-periodic argument


def _logderiv_direct(v, t, n_terms):
    """d/dv log theta1(v | i t) by the sine/cosine series ratio. Vectorizable in v."""
    q = math.exp(-PI * t)
    num = 0.0 * v
    den = 0.0 * v
    sign = 1.0
    qp = 1.0
    for n in range(n_terms + 1):
        k = 2 * n + 1
        num = num + sign * k * qp * np.cos(k * PI * v)
        den = den + sign * qp * np.sin(k * PI * v)
        sign = -sign
        qp *= q ** (2 * (n + 1))
    return PI * num / den


def _logderiv_modular(v, t):
    """Same quantity through tau -> -1/tau, stable for small t.

    With c = pi/t the transformed sinh/cosh series is summed after factoring
    out its dominant exponential, so no term overflows for v in (0,1):
      T(v) = c * (N/D - 2v),
      N = sum (-1)^n (2n+1) [e^{-c n(n+1-2v)} + e^{-c(n(n+1+2v)+2v)}],
      D = sum (-1)^n       [e^{-c n(n+1-2v)} - e^{-c(n(n+1+2v)+2v)}].
    """
    c = PI / t
    n_terms = int(math.ceil(1.0 + math.sqrt(42.0 / c))) + 1
    num = 0.0 * v
    den = 0.0 * v
    sign = 1.0
    for n in range(n_terms + 1):
        ea = np.exp(-c * n * (n + 1.0 - 2.0 * v))
        eb = np.exp(-c * (n * (n + 1.0 + 2.0 * v) + 2.0 * v))
        num = num + sign * (2 * n + 1) * (ea + eb)
        den = den + sign * (ea - eb)
        sign = -sign
    return c * (num / den - 2.0 * v)


def theta1_logderiv(v: float, theta: ThetaParams) -> float:
    """d/dv log theta1(v | tau) for v in (0,1), tau on the imaginary axis.

    Uses the defining sine series for |nome| <= e^{-pi} and the modular
    transformation beyond it; the two branches agree in the overlap band.
    """
    if abs(theta.tau.real) > 1e-13:
        raise DomainError("theta1_logderiv requires purely imaginary tau")
    if not 0.0 < v < 1.0:
        raise DomainError(f"v must lie strictly inside (0,1), got {v}")
    t = theta.tau.imag
    if abs(theta.nome) <= MODULAR_SWITCH:
        return float(_logderiv_direct(v, t, theta.truncation_order))
    return float(_logderiv_modular(v, t))


# ----------------------------------------------------------------------------
# drift of the interface diffusion


def drift(nu: float, m: ModulusParam) -> float:
    """Drift b(nu, a) = (1/pi) * d/dv log theta1(v | -ia/pi) at v = nu/(2 pi).

    The evaluation is symmetry-reduced to nu <= pi, making the antisymmetry
    b(2 pi - nu, a) = -b(nu, a) exact at the bit level.
    """
    if not 0.0 < nu < 2.0 * PI:
        raise DomainError(f"nu must lie strictly inside (0, 2 pi), got {nu}")
    if nu == PI:
        return 0.0
    if nu > PI:
        return -drift(2.0 * PI - nu, m)
    return theta1_logderiv(nu / (2.0 * PI), theta_params(m.tau_drift)) / PI


def drift_profile(nu, a: float):
    """Vectorized drift over an array of angles at fixed log-modulus a.

    Identical branch structure to `drift` (Lambert-series form of the same
    ratio for the large-|a| branch); agreement is pinned by tests.
    """
    if a >= 0.0:
        raise DomainError("log-modulus a must be negative")
    nu = np.asarray(nu, dtype=float)
    red = np.minimum(nu, 2.0 * PI - nu)
    sign = np.where(nu <= PI, 1.0, -1.0)
    if a <= -PI:
        q2 = math.exp(2.0 * a)
        b = 1.0 / np.tan(0.5 * red)
        qp = q2
        for k in range(1, 8):
            b = b + 4.0 * qp / (1.0 - qp) * np.sin(k * red)
            qp *= q2
    else:
        t = -a / PI
        b = _logderiv_modular(red / (2.0 * PI), t) / PI
    return sign * b


# ----------------------------------------------------------------------------
# Weierstrass zeta via theta_1 (z-argument convention internally)


def _theta1_ratio_z(z: complex, t: float) -> complex:
    """theta1'/theta1 in the z-convention (zeros at pi m + i pi t n), t >= 1."""
    n_shift = round(z.imag / (PI * t))
    z = z - 1j * PI * t * n_shift
    z = z - PI * round(z.real / PI)
    q = math.exp(-PI * t)
    n_terms = _order_for(q) + 2
    num = 0j
    den = 0j
    sign = 1.0
    qp = 1.0
    for n in range(n_terms + 1):
        k = 2 * n + 1
        num += sign * k * qp * cmath.cos(k * z)
        den += sign * qp * cmath.sin(k * z)
        sign = -sign
        qp *= q ** (2 * (n + 1))
    return num / den - 2j * n_shift


def _theta1_logderiv_z(z: complex, t: float) -> complex:
    if t >= 1.0:
        return _theta1_ratio_z(z, t)
    # theta1(z|tau) = -i(-i tau'')^{1/2} e^{i tau'' z^2/pi} theta1(tau'' z|tau''),
    # tau'' = -1/tau, hence L(z|tau) = 2 i tau'' z / pi + tau'' L(tau'' z | tau'')
    tpp = 1.0 / t
    return 2j * (1j * tpp) * z / PI + (1j * tpp) * _theta1_ratio_z(1j * tpp * z, tpp)


def weierstrass_zeta(z: complex, periods: LatticePeriods, pole_tol: float = 1e-10) -> complex:
    """Weierstrass zeta(z; 2 omega1, 2 omega2) through its theta representation.

    zeta(z) = eta1 z / omega1 + (pi / 2 omega1) * theta1'/theta1(pi z / 2 omega1),
    with quasi-periodicity in both periods exact by construction (the omega2
    increment reproduces 2*eta2 through the Legendre relation).
    """
    z = complex(z)
    w1 = periods.omega1
    s = periods.omega2.imag
    zr = z - 2.0 * w1 * round(z.real / (2.0 * w1)) - 2j * s * round(z.imag / (2.0 * s))
    if abs(zr) < pole_tol:
        raise LatticePointError(f"z = {z} is within {pole_tol} of a lattice point")
    t = s / w1
    return periods.eta1 * z / w1 + (PI / (2.0 * w1)) * _theta1_logderiv_z(PI * z / (2.0 * w1), t)


def zeta3(z: complex, periods: LatticePeriods) -> complex:
    """eta3 - zeta(omega3 - z), the inner-boundary companion of zeta."""
    w3 = periods.omega1 + periods.omega2
    return periods.eta3 - weierstrass_zeta(w3 - z, periods)


def eta1_from_periods(periods: LatticePeriods) -> float:
    """Recompute eta1 = zeta(omega1) from the theta-series derivative identity."""
    t = periods.omega2.imag / periods.omega1
    if t >= 1.0:
        return _eta1_series(periods.omega1, t)
    eta2 = -1j * _eta1_series(periods.omega2.imag, 1.0 / t)
    return float(((0.5j * PI + eta2 * periods.omega1) / periods.omega2).real)


def zeta_lattice_sum(z: complex, periods: LatticePeriods, radius: int = 200,
                     refine: bool = True) -> complex:
    """Brute-force oracle: the defining lattice sum of zeta, truncated at
    |m|,|n| <= radius, with compensated (fsum) accumulation.

    The symmetric box cancels the O(1/w^3) parts exactly; `refine` removes the
    remaining O(1/radius^2) tail by Richardson extrapolation from radius/2.
    Slow; used for validation only.
    """
    z = complex(z)

    def box_sum(r):
        mm, nn = np.meshgrid(np.arange(-r, r + 1), np.arange(-r, r + 1), indexing="ij")
        keep = (mm != 0) | (nn != 0)
        w = 2.0 * periods.omega1 * mm[keep] + 2.0 * periods.omega2 * nn[keep]
        terms = 1.0 / (z - w) + 1.0 / w + z / (w * w)
        return complex(math.fsum(terms.real), math.fsum(terms.imag)) + 1.0 / z

    s = box_sum(radius)
    if not refine:
        return s
    return s + (s - box_sum(radius // 2)) / 3.0


# ----------------------------------------------------------------------------
# Dedekind eta


def dedekind_eta(tau: complex, tol: float = 1e-18) -> complex:
    """eta(tau) = qh^{1/24} prod_{n>=1} (1 - qh^n), qh = exp(2 pi i tau)."""
    tau = complex(tau)
    if tau.imag <= 0.0:
        raise DomainError(f"Dedekind eta needs Im(tau) > 0, got {tau}")
    qh = cmath.exp(2j * PI * tau)
    prod = 1.0 + 0j
    qp = qh
    while abs(qp) >= tol:
        prod *= 1.0 - qp
        qp *= qh
    return cmath.exp(1j * PI * tau / 12.0) * prod
