"""Dirichlet analysis on the round annulus A_q = {z : q < |z| < 1}.

Two independent routes to the harmonic extension of circle boundary data:

* `villat_extension` -- quadrature of the elliptic kernels (zeta on the outer
  circle, its inner-boundary companion zeta3 on the inner one);
* `dirichlet_series`  -- a Laurent-mode solve (r^k / r^{-k} pairs plus the
  log|z| mode), used as the oracle for the first route.

Plus `vector_field_V`, the holomorphic field with a simple pole at a marked
outer-boundary point x and a zero at a second point y, which drives the hull
growth; `villat_residuals` measures its defining properties numerically.

Coordinates: w = -i log z maps the annulus to the rectangle
[0, 2 pi] x [0, |a|] (outer circle -> Im w = 0, inner -> Im w = |a|), where
the kernels are elliptic functions on the lattice (2 pi, 2 i |a|).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .elliptic import (
    PI,
    DomainError,
    ModulusParam,
    lattice_periods,
    weierstrass_zeta,
    zeta3,
)


class CompatibilityError(ValueError):
    """Boundary data means differ: no single-valued harmonic extension."""


class BoundaryDistanceError(ValueError):
    """Evaluation point too close to a boundary circle for the quadrature."""


class EvaluationPoleError(ValueError):
    """Evaluation point coincides with the pole of the requested field."""


class AnnulusDomain:
    """Annulus of modulus q = e^a with the package lattice normalization
    omega1 = pi, omega2 = -i a."""

    def __init__(self, m: ModulusParam):
        self.m = m
        self.periods = lattice_periods(PI, complex(0.0, -m.a))
        self._chi = None

    @property
    def q(self) -> float:
        return self.m.q

    @property
    def abs_a(self) -> float:
        return -self.m.a

    @property
    def eta1(self) -> float:
        return self.periods.eta1

    @property
    def eta2(self) -> complex:
        return self.periods.eta2

    def chi_table(self) -> np.ndarray:
        """chi_k = q^{2k} / (1 - q^{2k}), truncated so the regularized kernels
        are accurate to ~1e-17 throughout the closed annulus band."""
        if self._chi is None:
            k_max = min(40000, max(8, int(math.ceil(42.0 / self.abs_a))))
            k = np.arange(1, k_max + 1, dtype=float)
            q2k = np.exp(2.0 * self.m.a * k)
            self._chi = q2k / (1.0 - q2k)
        return self._chi


def _zeta_reg(dom: AnnulusDomain, u: np.ndarray) -> np.ndarray:
    """zeta(u) - (1/2) cot(u/2): analytic for |Im u| < 2|a| (Fourier form)."""
    chi = dom.chi_table()
    k = np.arange(1, chi.size + 1, dtype=float)
    series = (chi * np.sin(np.multiply.outer(u, k))).sum(axis=-1)
    return dom.eta1 * u / PI + 2.0 * series


def _zeta3_reg(dom: AnnulusDomain, x: np.ndarray) -> np.ndarray:
    """zeta3(x + omega2) + (1/2) tan(x/2): analytic for |Im x| < 2|a|."""
    chi = dom.chi_table()
    k = np.arange(1, chi.size + 1, dtype=float)
    sgn = np.where((np.arange(1, chi.size + 1) % 2) == 0, 1.0, -1.0)
    series = (sgn * chi * np.sin(np.multiply.outer(x, k))).sum(axis=-1)
    return dom.eta2 + dom.eta1 * x / PI + 2.0 * series


# ----------------------------------------------------------------------------
# boundary data


@dataclass(frozen=True)
class BoundaryData:
    """Samples of the outer (phi) and inner (psi) boundary values on the
    uniform angle grid theta_j = 2 pi j / n.

    Compatibility (mean phi == mean psi) is required by the elliptic-kernel
    route and enforced there; the Laurent route accepts incompatible data and
    absorbs the gap into its log|z| mode.
    """

    phi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        if self.phi.shape != self.psi.shape or self.phi.ndim != 1:
            raise ValueError("phi and psi must be equal-length 1-d sample arrays")

    @property
    def n_samples(self) -> int:
        return self.phi.size

    @classmethod
    def from_functions(cls, phi, psi, n: int = 2048) -> "BoundaryData":
        theta = 2.0 * PI * np.arange(n) / n
        return cls(np.asarray(phi(theta), dtype=float), np.asarray(psi(theta), dtype=float))

    def mean_gap(self) -> float:
        return abs(float(self.phi.mean()) - float(self.psi.mean()))


def _trig_eval(coeffs: np.ndarray, n: int, theta: float) -> float:
    """Evaluate the trig interpolant of n samples from their rfft at theta."""
    k = np.arange(coeffs.size)
    w = np.full(coeffs.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    return float(np.real(coeffs * w * np.exp(1j * k * theta)).sum() / n)


class VillatExtension:
    """Holomorphic extension of compatible boundary data by elliptic-kernel
    quadrature; Im is normalized to vanish at z = sqrt(q).

    The kernels are split into periodic singular parts (cot) handled in closed
    form and regular parts integrated by the uniform trapezoid rule, which
    keeps the rule spectrally accurate and gives exact (principal-value plus
    jump) boundary evaluation on both circles.
    """

    def __init__(self, bd: BoundaryData, dom: AnnulusDomain, n_override: int | None = None,
                 quad_tol: float = 1e-9, mean_tol: float = 1e-12):
        scale = max(1.0, np.abs(bd.phi).max(), np.abs(bd.psi).max())
        if bd.mean_gap() > mean_tol * scale:
            raise CompatibilityError(
                f"boundary means differ by {bd.mean_gap():.3e}; the kernel route needs "
                "mean(phi) == mean(psi)")
        self.bd = bd
        self.dom = dom
        self.quad_tol = quad_tol
        n = bd.n_samples
        self.theta = 2.0 * PI * np.arange(n) / n
        self.phi_hat = np.fft.rfft(bd.phi)
        self.psi_hat = np.fft.rfft(bd.psi)
        k = np.arange(self.phi_hat.size)
        self.dphi = np.fft.irfft(1j * k * self.phi_hat, n)
        self.dpsi = np.fft.irfft(1j * k * self.psi_hat, n)
        self.data_scale = scale
        self._im_const = None

    # -- kernel integrals ----------------------------------------------------

    def _outer_integral(self, w: complex, on_boundary: bool) -> complex:
        """integral phi(theta) zeta(w - theta) dtheta (PV on the circle)."""
        bd, dom = self.bd, self.dom
        n = bd.n_samples
        dtheta = 2.0 * PI / n
        u = w - self.theta
        smooth = (bd.phi * _zeta_reg(dom, u)).sum() * dtheta
        theta_star = w.real % (2.0 * PI)
        p_star = _trig_eval(self.phi_hat, n, theta_star)
        num = bd.phi - p_star
        arg = 0.5 * (w - self.theta)
        if on_boundary:
            vals = np.empty(n, dtype=complex)
            delta = np.angle(np.exp(1j * (w.real - self.theta)))
            hit = np.abs(delta) < 1e-9
            vals[~hit] = num[~hit] * 0.5 / np.tan(arg[~hit])
            if hit.any():
                vals[hit] = -_trig_eval(1j * np.arange(self.phi_hat.size) * self.phi_hat,
                                        n, theta_star)
            return smooth + vals.sum() * dtheta  # PV: closed-form cot integral is 0
        return smooth + (num * 0.5 / np.tan(arg)).sum() * dtheta + p_star * (-1j * PI)

    def _inner_integral(self, w: complex, on_boundary: bool) -> complex:
        """integral psi(theta) zeta3(w - theta - pi) dtheta (PV on the circle)."""
        bd, dom = self.bd, self.dom
        n = bd.n_samples
        dtheta = 2.0 * PI / n
        w2 = complex(0.0, dom.abs_a)
        x = w - self.theta - PI - w2
        smooth = (bd.psi * _zeta3_reg(dom, x)).sum() * dtheta
        theta_star = w.real % (2.0 * PI)
        p_star = _trig_eval(self.psi_hat, n, theta_star)
        num = bd.psi - p_star
        arg = 0.5 * (w - self.theta - w2)
        if on_boundary:
            vals = np.empty(n, dtype=complex)
            delta = np.angle(np.exp(1j * (w.real - self.theta)))
            hit = np.abs(delta) < 1e-9
            vals[~hit] = num[~hit] * 0.5 / np.tan(arg[~hit])
            if hit.any():
                vals[hit] = -_trig_eval(1j * np.arange(self.psi_hat.size) * self.psi_hat,
                                        n, theta_star)
            return smooth + vals.sum() * dtheta  # PV again
        # Im(w - omega2) < 0 in the interior: the cot closed form is +i pi
        return smooth + (num * 0.5 / np.tan(arg)).sum() * dtheta + p_star * (1j * PI)

    def _raw(self, z: complex) -> complex:
        z = complex(z)
        dom = self.dom
        r = abs(z)
        if not (dom.q * (1.0 - 1e-9) <= r <= 1.0 + 1e-9):
            raise DomainError(f"|z| = {r} outside the annulus [{dom.q}, 1]")
        w = complex(cmath.phase(z) % (2.0 * PI), -math.log(r))
        d_out = w.imag
        d_in = dom.abs_a - w.imag
        on_outer = d_out < 1e-12
        on_inner = d_in < 1e-12
        if not (on_outer or on_inner):
            n = self.bd.n_samples
            d = min(d_out, d_in)
            est = 16.0 * PI * self.data_scale * (1.0 + n / 8.0) * math.exp(-n * d)
            if est > self.quad_tol:
                raise BoundaryDistanceError(
                    f"quadrature error bound {est:.2e} exceeds {self.quad_tol:.1e} at "
                    f"distance {d:.2e} from the boundary (n = {n})")
        out = (1j / PI) * (self._outer_integral(w, on_outer) - self._inner_integral(w, on_inner))
        if on_outer:
            out += _trig_eval(self.phi_hat, self.bd.n_samples, w.real)
        if on_inner:
            out += _trig_eval(self.psi_hat, self.bd.n_samples, w.real)
        return out

    def at(self, z: complex) -> complex:
        if self._im_const is None:
            self._im_const = 0.0
            self._im_const = self._raw(math.sqrt(self.dom.q)).imag
        return self._raw(z) - 1j * self._im_const


def villat_extension(bd: BoundaryData, dom: AnnulusDomain, z: complex) -> complex:
    """Holomorphic extension Omega(z) of compatible boundary data.

    Re Omega recovers phi on |z| = 1 and psi on |z| = q; Im Omega is fixed by
    Im Omega(sqrt(q)) = 0. Raises BoundaryDistanceError in the sliver where
    the quadrature bound fails, CompatibilityError for mismatched means.
    """
    return VillatExtension(bd, dom).at(z)


# ----------------------------------------------------------------------------
# Laurent-mode oracle


def dirichlet_series(bd: BoundaryData, dom: AnnulusDomain, z: complex) -> float:
    """Harmonic extension via the Laurent basis {r^k e^{ik th}, r^-k e^{ik th},
    log r, 1}; per-frequency 2x2 solves in the overflow-free combination
    (q/r)^k.  Compatibility is not required: the mean gap goes into log r."""
    z = complex(z)
    r = abs(z)
    if not (dom.q * (1.0 - 1e-9) <= r <= 1.0 + 1e-9):
        raise DomainError(f"|z| = {r} outside the annulus [{dom.q}, 1]")
    theta = cmath.phase(z)
    n = bd.n_samples
    q = dom.q
    a = dom.m.a
    phi_hat = np.fft.rfft(bd.phi) / n
    psi_hat = np.fft.rfft(bd.psi) / n
    a0 = phi_hat[0].real
    b0 = (psi_hat[0].real - phi_hat[0].real) / a
    w = np.full(phi_hat.size, 2.0)
    w[0] = 1.0
    if n % 2 == 0:
        w[-1] = 1.0
    k = np.arange(1, phi_hat.size)
    e = w[1:] * phi_hat[1:]
    f = w[1:] * psi_hat[1:]
    qk = q ** k
    beta = (f - e * qk) * qk / (1.0 - qk ** 2)       # r^-k coefficient, scaled safely below
    beta_rmk = (f - e * qk) * (q / r) ** k / (1.0 - qk ** 2)
    alpha_rk = (e - beta) * r ** k
    modes = np.real((alpha_rk + beta_rmk) * np.exp(1j * k * theta)).sum()
    return float(a0 + b0 * math.log(r) + modes)


# ----------------------------------------------------------------------------
# the boundary vector field


def _v_batch(x: complex, y: complex, dom: AnnulusDomain, zs: np.ndarray,
             n_quad: int = 256, pole_tol: float = 1e-11) -> np.ndarray:
    """V_{x,y} at an array of annulus points (shared quadrature setup).

    V(z) = 2 i z [zeta(w - th_x) - zeta(th_y - th_x)]
         - 2 i z (1/2pi) integral [zeta3(w - th) - zeta3(th_y - th)] dth,
    all elliptic functions on the lattice (2 pi, 2 i |a|), w = -i log z.
    The zeta3 integrals are done by trapezoid quadrature of the regular part;
    the two periodic singular (tan) parts cancel in closed form, which also
    realizes the continuous extension on the inner circle.
    """
    x = complex(x)
    y = complex(y)
    if abs(abs(x) - 1.0) > 1e-12 or abs(abs(y) - 1.0) > 1e-12:
        raise DomainError("x and y must lie on the unit circle")
    th_x = cmath.phase(x) % (2.0 * PI)
    th_y = cmath.phase(y) % (2.0 * PI)
    if abs(cmath.exp(1j * th_x) - cmath.exp(1j * th_y)) < 1e-12:
        raise DomainError("marked points x and y must be distinct")
    per = dom.periods
    w2 = complex(0.0, dom.abs_a)
    nodes = 2.0 * PI * (np.arange(n_quad) + 0.5) / n_quad
    y_mean = _zeta3_reg(dom, th_y - nodes - w2).mean()
    zeta_const = weierstrass_zeta(complex(th_y - th_x), per)

    out = np.empty(zs.size, dtype=complex)
    for i, z in enumerate(np.asarray(zs, dtype=complex).ravel()):
        r = abs(z)
        w = complex(cmath.phase(z) % (2.0 * PI), -math.log(r))
        u0 = w - th_x
        # distance of z from the marked pole x, measured in the w-lattice
        ur = complex(u0.real - 2.0 * PI * round(u0.real / (2.0 * PI)), u0.imag)
        if abs(ur) < pole_tol:
            raise EvaluationPoleError(f"z = {z} coincides with the pole at x")
        term1 = weierstrass_zeta(u0, per) - zeta_const
        integral = _zeta3_reg(dom, w - nodes - w2).mean() - y_mean
        out[i] = 2j * z * term1 - 2j * z * integral
    return out


def vector_field_V(x: complex, y: complex, dom: AnnulusDomain, z: complex,
                   n_quad: int = 256) -> complex:
    """The holomorphic field V_{x,y}(z) on the closed annulus (minus x)."""
    return complex(_v_batch(x, y, dom, np.array([z]), n_quad)[0])


def _v_reflected(x, y, dom, z, n_quad=256):
    """Schwarz continuation across |z| = 1 (Re(V/z) = 0 there)."""
    zin = 1.0 / np.conj(z)
    return -z ** 2 * np.conj(_v_batch(x, y, dom, np.asarray(zin), n_quad))


def villat_residuals(dom: AnnulusDomain, x: complex, y: complex,
                     n_quad: int = 256) -> dict:
    """Numerical residuals of the defining properties of V_{x,y}.

    Keys: holomorphic (small-loop Cauchy integral), continuity (jump across a
    1e-9 boundary approach), outer_vanishing (Re(V/z) on the unit circle away
    from x), inner_constancy (spread of Re(V/z) on |z|=q), zero_at_y (|V(y)|),
    residue (contour residue at x vs -2x^2).  The measured inner constant is
    reported alongside (not asserted to a value).
    """
    q = dom.q
    th_x = cmath.phase(complex(x)) % (2.0 * PI)

    # simple pole at x with residue -2 x^2: full circle around x, using the
    # Schwarz reflection for the arc outside the annulus
    rad = 1e-2
    alpha = 2.0 * PI * (np.arange(512) + 0.5) / 512
    zc = x + rad * np.exp(1j * alpha)
    inside = np.abs(zc) <= 1.0
    vals = np.empty(zc.size, dtype=complex)
    vals[inside] = _v_batch(x, y, dom, zc[inside], n_quad)
    vals[~inside] = _v_reflected(x, y, dom, zc[~inside], n_quad)
    residue = rad * (vals * np.exp(1j * alpha)).mean()
    r_res = abs(residue - (-2.0 * x ** 2))

    # V(y) = 0
    r_zero = abs(_v_batch(x, y, dom, np.array([y]), n_quad)[0])

    # Re(V/z) = 0 on the unit circle away from x
    ang = (th_x + np.linspace(0.25, 2.0 * PI - 0.25, 64)) % (2.0 * PI)
    zs = np.exp(1j * ang)
    r_outer = np.abs(np.real(_v_batch(x, y, dom, zs, n_quad) / zs)).max()

    # Re(V/z) constant on the inner circle
    zi = q * np.exp(1j * 2.0 * PI * (np.arange(64) + 0.37) / 64)
    vi = np.real(_v_batch(x, y, dom, zi, n_quad) / zi)
    inner_const = float(vi.mean())
    r_inner = float(np.abs(vi - inner_const).max())

    # holomorphy: Cauchy integral over a small interior loop
    zc0 = math.sqrt(q) * cmath.exp(1j * (th_x + PI))
    rho = 0.25 * min(1.0 - math.sqrt(q), math.sqrt(q) - q)
    loop = zc0 + rho * np.exp(1j * alpha)
    vloop = _v_batch(x, y, dom, loop, n_quad)
    scale = max(1.0, np.abs(vloop).max())
    r_holo = abs(rho * (vloop * np.exp(1j * alpha)).mean()) / scale

    # continuous boundary extension (away from x)
    zb = cmath.exp(1j * (th_x + PI))
    vb = _v_batch(x, y, dom, np.array([zb, (1.0 - 1e-9) * zb, q * zb, (q + 1e-9 * q) * zb]), n_quad)
    r_cont = max(abs(vb[0] - vb[1]), abs(vb[2] - vb[3]))

    return {
        "holomorphic": float(r_holo),
        "continuity": float(r_cont),
        "outer_vanishing": float(r_outer),
        "inner_constancy": float(r_inner),
        "zero_at_y": float(r_zero),
        "residue": float(r_res),
        "inner_constant_value": inner_const,
    }
