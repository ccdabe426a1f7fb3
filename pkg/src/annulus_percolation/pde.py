"""Finite differences for the crossing equation

    3 u_nunu + b(nu, a) u_nu + u_a = 0

marched in decreasing a from a terminal layer u == data at a = -delta
(justified by uniform crossing bounds as a -> 0-).  Boundary dressings:

* F   -- crossing probability: nu in (0, 2 pi), absorbing at both ends,
         terminal 1;
* W_n -- nested-crossing recursion: nu in (0, 2 pi), absorbing at 0 with
         Dirichlet data equal to the previous W's trace at the reflecting
         boundary 2 pi (mirror renewal), reflecting at 2 pi, terminal 0.
         c_n(a0) is W_n's reflecting-boundary trace at a0; chaining the
         solves realizes the n-fold kernel convolution without forming the
         kernel;
* G   -- crossing-parity function behind the no-circuit probability:
         nu in (0, 2 pi), reflecting at 2 pi, terminal 1, and the renewal
         condition G(0, a) = -G(2 pi, a) at the absorbing end (one more
         alternating crossing flips the sign; the mirror restart lands at the
         reflecting wall).  P(N)(e^a) = G at the reflecting wall; G resums
         the alternating series 1 - 2 W_1 + 2 W_2 - ... in a single march.

Scheme: node-centered grid offset half a cell from the boundaries,
Crank-Nicolson on the diffusion (implicit-Euler Rannacher start to damp the
terminal-corner discontinuity), implicit advection -- upwinded where the
near-boundary drift is capped at 2/(h/2), central where the cell Peclet
number allows (which keeps the measured convergence order above 1.5).
Reflecting boundaries use a mirrored ghost node, matching the odd extension
of the drift; the nonlocal renewal condition is folded into the implicit
solve by a Sherman-Morrison bordered tridiagonal step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .elliptic import PI, ModulusParam, drift_profile


class PdeInstabilityError(RuntimeError):
    """Computed values left the admissible range: scheme went unstable."""


@dataclass(frozen=True)
class GridSpec:
    """Discretization: interior node count, most negative a, terminal offset
    delta below 0, and the a-step magnitude."""

    nu_points: int = 800
    a_start: float = -5.0
    terminal_offset: float = 1e-3
    da: float = 2e-4

    def __post_init__(self):
        if self.nu_points < 8:
            raise ValueError("need at least 8 nu nodes")
        if not (self.terminal_offset > 0.0 and self.da > 0.0):
            raise ValueError("terminal_offset and da must be positive")
        if self.a_start >= -self.terminal_offset:
            raise ValueError("a_start must lie below the terminal layer")


@dataclass
class GridField:
    """Solution layers on (nu, a) nodes (a decimated to <= ~400 layers);
    `slices` holds exact layers captured at requested a values."""

    nu: np.ndarray
    a: np.ndarray
    values: np.ndarray            # shape (len(a), len(nu))
    bc_descriptor: str
    slices: dict = field(default_factory=dict)

    def slice_at(self, a: float) -> np.ndarray:
        if a in self.slices:
            return self.slices[a]
        idx = np.searchsorted(-self.a, -a)  # self.a is decreasing
        idx = min(max(idx, 1), self.a.size - 1)
        a0, a1 = self.a[idx - 1], self.a[idx]
        lam = (a - a0) / (a1 - a0)
        return (1.0 - lam) * self.values[idx - 1] + lam * self.values[idx]

    def value_at(self, nu: float, a: float) -> float:
        return float(np.interp(nu, self.nu, self.slice_at(a)))


def _assemble_advection(b: np.ndarray, h: float, left: str, right: str):
    """Tridiagonal advection coefficients (lo, di, up) plus the ghost-column
    weight on the left boundary value (Dirichlet/renewal).

    Hybrid differencing: first-order upwind where |b| h >= 6 (the capped
    singular zone hugging the walls), second-order central elsewhere.
    Ghosts: value-type u_{-1} = 2 g - u_0, Neumann u_{-1} = u_0.
    """
    n = b.size
    lo = np.zeros(n)
    di = np.zeros(n)
    up = np.zeros(n)
    central = np.abs(b) * h < 6.0
    pos = b >= 0.0

    c = central
    up[c] += b[c] / (2.0 * h)
    lo[c] += -b[c] / (2.0 * h)
    uw = ~central & pos
    di[uw] += -b[uw] / h
    up[uw] += b[uw] / h
    dw = ~central & ~pos
    di[dw] += b[dw] / h
    lo[dw] += -b[dw] / h

    g_left = 0.0
    ghost_l = lo[0]  # weight that the stencil puts on u_{-1}
    lo[0] = 0.0
    if ghost_l != 0.0:
        if left == "neumann":
            di[0] += ghost_l
        else:
            di[0] -= ghost_l
            g_left = 2.0 * ghost_l
    ghost_r = up[-1]
    up[-1] = 0.0
    if ghost_r != 0.0:
        if right == "dirichlet":
            di[-1] -= ghost_r
        else:
            di[-1] += ghost_r
    return lo, di, up, g_left


def _apply_tridiag(lo, di, up, u):
    out = di * u
    out[1:] += lo[1:] * u[:-1]
    out[:-1] += up[:-1] * u[1:]
    return out


def _right_trace(u):
    # even-quadratic extrapolation to the reflecting wall
    return (9.0 * u[-1] - u[-2]) / 8.0


@dataclass
class _MarchResult:
    a_steps: np.ndarray       # every computed level, terminal layer first
    trace_left: np.ndarray    # quadratic boundary extrapolations per level
    trace_right: np.ndarray
    field: GridField


def _march(length: float, left: str, right: str, terminal: float,
           g: GridSpec, a_target: float, left_data: np.ndarray | None = None,
           record_at: tuple = (), label: str = "",
           value_range: tuple = (0.0, 1.0),
           bound_slack: float = 1e-6) -> _MarchResult:
    """March the backward equation from a = -delta down to a_target.

    left is 'dirichlet' (optionally with per-level values in left_data),
    'neumann', or 'renewal' (value tied to minus the right-wall trace at the
    same level); right is 'dirichlet' or 'neumann'.
    """
    n = g.nu_points
    h = length / n
    nu = (np.arange(n) + 0.5) * h
    delta = g.terminal_offset
    span = -a_target - delta
    n_steps = max(1, int(math.ceil(span / g.da)))
    ds = span / n_steps
    cap = 4.0 / h

    # diffusion operator 3 D2 with ghost folding (boundary-value weight apart)
    coef = 3.0 / h ** 2
    dlo = np.full(n, coef)
    ddi = np.full(n, -2.0 * coef)
    dup = np.full(n, coef)
    dlo[0] = 0.0
    dup[-1] = 0.0
    if left == "neumann":
        ddi[0] = -coef
        dg_left = 0.0
    else:
        ddi[0] = -3.0 * coef
        dg_left = 2.0 * coef     # weight on the left boundary value
    if right == "dirichlet":
        ddi[-1] = -3.0 * coef
    else:
        ddi[-1] = -coef

    u = np.full(n, float(terminal))
    a_now = -delta
    a_levels = [a_now]
    tl = [(9.0 * u[0] - u[1]) / 8.0]
    tr = [_right_trace(u)]
    stride = max(1, n_steps // 400)
    kept_a = [a_now]
    kept = [u.copy()]
    pending = sorted(record_at)          # most negative popped last
    captured: dict = {}
    ab = np.empty((3, n))
    lo_bound, hi_bound = value_range

    # implicit-Euler startup long enough that Crank-Nicolson inherits data
    # smooth at the terminal-corner scale and stays inside the value range
    n_rannacher = 32

    for k in range(n_steps):
        a_old = a_now
        a_new = -delta - (k + 1) * ds
        theta_d = 1.0 if k < n_rannacher else 0.5
        b = np.clip(drift_profile(nu, 0.5 * (a_old + a_new)), -cap, cap)
        alo, adi, aup, ag_l = _assemble_advection(b, h, left, right)
        if left == "dirichlet" and left_data is not None:
            gl_old = left_data[k]
            gl_new = left_data[k + 1]
        elif left == "renewal":
            gl_old = -_right_trace(u)
            gl_new = 0.0             # handled implicitly below
        else:
            gl_old = gl_new = 0.0

        u_old = u
        rhs = u_old + ds * (1.0 - theta_d) * _apply_tridiag(dlo, ddi, dup, u_old)
        rhs[0] += ds * ((1.0 - theta_d) * dg_left * gl_old
                        + (theta_d * dg_left + ag_l) * gl_new)
        # the right boundary is never inhomogeneous in this artifact

        lo = -ds * (theta_d * dlo + alo)
        di = 1.0 - ds * (theta_d * ddi + adi)
        up = -ds * (theta_d * dup + aup)
        ab[0, 1:] = up[:-1]
        ab[1, :] = di
        ab[2, :-1] = lo[1:]
        u = solve_banded((1, 1), ab, rhs)
        if left == "renewal":
            # implicit renewal value g = -(9 u_{n-1} - u_{n-2})/8 couples row 0
            # to the far wall: Sherman-Morrison on the bordered tridiagonal
            w = ds * (theta_d * dg_left + ag_l)
            q = np.zeros(n)
            q[-1] = w * 9.0 / 8.0
            q[-2] = -w / 8.0
            e0 = np.zeros(n)
            e0[0] = 1.0
            y = solve_banded((1, 1), ab, e0)
            u = u - y * (q @ u) / (1.0 + q @ y)
        a_now = a_new

        lo_v = float(u.min())
        hi_v = float(u.max())
        if lo_v < lo_bound - bound_slack or hi_v > hi_bound + bound_slack:
            raise PdeInstabilityError(
                f"{label or 'march'}: values [{lo_v:.3e}, {hi_v:.3e}] outside "
                f"[{lo_bound:g}-{bound_slack:g}, {hi_bound:g}+{bound_slack:g}] "
                f"at a = {a_now:.6f} (step {k + 1}/{n_steps})")

        a_levels.append(a_now)
        tl.append((9.0 * u[0] - u[1]) / 8.0)
        tr.append(_right_trace(u))
        while pending and a_now <= pending[-1] <= a_old:
            a_req = pending.pop()
            lam = (a_req - a_old) / (a_now - a_old)
            captured[a_req] = (1.0 - lam) * u_old + lam * u
        if (k + 1) % stride == 0 or k == n_steps - 1:
            kept_a.append(a_now)
            kept.append(u.copy())

    fld = GridField(nu, np.array(kept_a), np.array(kept), label, captured)
    return _MarchResult(np.array(a_levels), np.array(tl), np.array(tr), fld)


# ----------------------------------------------------------------------------
# public solves


def solve_crossing_F(m: ModulusParam, g: GridSpec,
                     record_at: tuple = ()) -> GridField:
    """Crossing probability F on (0, 2 pi) down to g.a_start.

    F(nu, m.a) is the probability of the two-colour crossing pattern for
    boundary points (1, e^{i nu}) in the annulus of modulus e^{m.a}.
    """
    if not g.a_start <= m.a <= -g.terminal_offset:
        raise ValueError("modulus a outside the marched range")
    rec = tuple(set(record_at) | {m.a})
    res = _march(2.0 * PI, "dirichlet", "dirichlet", 1.0, g, g.a_start,
                 record_at=rec, label="F-problem")
    return res.field


@dataclass
class ExitProblemResult:
    field: GridField
    pn: float
    a_grid: np.ndarray
    pn_curve: np.ndarray

    def pn_at(self, a: float) -> float:
        return float(np.interp(-a, -self.a_grid, self.pn_curve))


def solve_exit_H(m: ModulusParam, g: GridSpec) -> ExitProblemResult:
    """No-circuit probability P(N) via the crossing-parity exit problem.

    Solves the parity function G on (0, 2 pi): terminal 1, reflecting
    (Neumann) at 2 pi, renewal condition G(0, a) = -G(2 pi, a) at the
    absorbing wall -- each completed crossing flips the sign and restarts the
    walk at the mirror image, so G resums 1 - 2 W_1 + 2 W_2 - ... in one
    march.  P(N)(e^a) is the reflecting-wall trace of G at a.  G takes values
    in [-1, 1] (negative near the absorbing wall).
    """
    if not g.a_start <= m.a <= -g.terminal_offset:
        raise ValueError("modulus a outside the marched range")
    res = _march(2.0 * PI, "renewal", "neumann", 1.0, g, g.a_start,
                 label="exit-parity-problem", value_range=(-1.0, 1.0))
    curve = res.trace_right
    pn = float(np.interp(-m.a, -res.a_steps, curve))
    return ExitProblemResult(res.field, pn, res.a_steps, curve)


@dataclass
class CnRecursionResult:
    a_grid: np.ndarray
    curves: np.ndarray          # shape (n_max, len(a_grid)); row i-1 is c_i(a)

    def cn_at(self, a: float) -> np.ndarray:
        out = np.empty(self.curves.shape[0])
        for i in range(self.curves.shape[0]):
            out[i] = np.interp(-a, -self.a_grid, self.curves[i])
        return out


def solve_cn_recursion(m: ModulusParam, g: GridSpec, n_max: int) -> CnRecursionResult:
    """Crossing-count tail probabilities c_1..c_n_max as functions of a.

    W_0 == 1; each W_n is a fresh march whose absorbing-boundary Dirichlet
    data is the previous trace at the reflecting boundary, evaluated level by
    level on the shared step grid."""
    if not 1 <= n_max <= 10:
        raise ValueError("n_max must be in 1..10")
    if not g.a_start <= m.a <= -g.terminal_offset:
        raise ValueError("modulus a outside the marched range")
    span = -g.a_start - g.terminal_offset
    n_steps = max(1, int(math.ceil(span / g.da)))
    curves = []
    a_grid = None
    data = np.ones(n_steps + 1)  # trace of W_0 at the reflecting boundary
    for n in range(1, n_max + 1):
        res = _march(2.0 * PI, "dirichlet", "neumann", 0.0, g, g.a_start,
                     left_data=data, label=f"W{n}-problem")
        curves.append(res.trace_right)
        a_grid = res.a_steps
        data = res.trace_right
    return CnRecursionResult(a_grid, np.array(curves))
