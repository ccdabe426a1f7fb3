"""Monte Carlo for the interface diffusion on the half-strip.

The angle nu of the hull tip follows

    d nu = -sqrt(6) dB + b(nu, a) da,      b = (1/pi) (theta'/theta)(nu/2pi, -ia/pi),

run in the log-modulus a from a0 < 0 up to 0.  kappa is hard-fixed at 6 (the
locality value); exposing it would misuse a locality-only reduction.

Boundary handling is renewal-at-mirror: hitting the absorbing boundary
(within eps_hit) increments the crossing counter M, flips which boundary is
absorbing, and restarts at eps_restart from the just-hit boundary.  By the
nu <-> 2 pi - nu symmetry of the law this is equivalent to instantaneous
reflection at the far boundary.  The non-absorbing boundary reflects.

Estimators: c_n = P(M >= n), the no-circuit probability as the mean parity
sign, and the per-circuit probabilities through the alternating tail sum.
Trajectories draw their Gaussians from per-pair Philox streams keyed by
(stream index << 64) | seed, so every estimate is reproducible and
trajectories are independent; aggregation is order-independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .elliptic import PI

SQRT6 = math.sqrt(6.0)


class CostCapError(RuntimeError):
    """Requested run exceeds the configured step budget."""


class NonMonotoneSequenceError(ValueError):
    """Crossing-count sequence fails c_{n+1} <= c_n."""


@dataclass(frozen=True)
class SdeConfig:
    """Step and boundary parameters of the Euler scheme.

    Defaults resolve the 2/nu drift scale at the hit threshold; the step is
    additionally shrunk so |b| h <= min(nu, 2 pi - nu)/4 near the boundaries.
    """

    step: float = 1e-4
    eps_hit: float = 1e-4
    eps_restart: float = 1e-3
    seed: int = 0
    antithetic: bool = True
    cost_cap: float = 5e10

    def __post_init__(self):
        if not (0.0 < self.eps_hit <= self.eps_restart < 0.1):
            raise ValueError("need 0 < eps_hit <= eps_restart << 1")
        if not self.step > 0.0:
            raise ValueError("step must be positive")


@dataclass(frozen=True)
class HalfStripState:
    """Point of the half-strip walk: angle, log-modulus clock, crossing count,
    and which boundary (0 -> nu=0, 1 -> nu=2 pi) currently absorbs."""

    nu: float
    a: float
    crossings: int = 0
    orientation: int = 0


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n: int
    seed: int


# ----------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def _drift_nb(nu: float, a: float) -> float:
    # mirror-reduced drift; same two series branches as elliptic.drift_profile
    s = 1.0
    if nu > PI:
        nu = 2.0 * PI - nu
        s = -1.0
    if a <= -PI:
        q2 = math.exp(2.0 * a)
        b = 1.0 / math.tan(0.5 * nu)
        qp = q2
        for k in range(1, 8):
            b += 4.0 * qp / (1.0 - qp) * math.sin(k * nu)
            qp *= q2
        return s * b
    t = -a / PI
    c = PI / t
    v = nu / (2.0 * PI)
    num = 0.0
    den = 0.0
    sg = 1.0
    for n in range(7):
        ea = math.exp(-c * n * (n + 1.0 - 2.0 * v))
        eb = math.exp(-c * (n * (n + 1.0 + 2.0 * v) + 2.0 * v))
        num += sg * (2 * n + 1) * (ea + eb)
        den += sg * (ea - eb)
        sg = -sg
    return s * c * (num / den - 2.0 * v) / PI


@njit(cache=True)
def _step_nb(nu, a, g, step):
    """One Euler-Maruyama update with the adaptive near-boundary shrink."""
    b = _drift_nb(nu, a)
    h = step
    if -a < h:
        h = -a
    dist = min(nu, 2.0 * PI - nu)
    ab = abs(b)
    if ab > 0.0 and dist / (4.0 * ab) < h:
        h = dist / (4.0 * ab)
    nu_new = nu - SQRT6 * math.sqrt(h) * g + b * h
    return nu_new, a + h


@njit(cache=True)
def _run_nb(nu, a, m, orient, normals, idx, step, eps_hit, eps_restart):
    """Advance one trajectory until a = 0 or the normal buffer runs out.

    Returns (nu, a, m, orient, idx, done)."""
    n_buf = normals.shape[0]
    while a < 0.0:
        if idx >= n_buf:
            return nu, a, m, orient, idx, False
        nu, a = _step_nb(nu, a, normals[idx], step)
        idx += 1
        if orient == 0:
            if nu <= eps_hit:
                m += 1
                orient = 1
                nu = eps_restart
            elif nu >= 2.0 * PI:
                nu = 4.0 * PI - nu
        else:
            if nu >= 2.0 * PI - eps_hit:
                m += 1
                orient = 0
                nu = 2.0 * PI - eps_restart
            elif nu <= 0.0:
                nu = -nu
        # keep nu strictly interior so the drift stays finite; the clamp sits
        # far below eps_hit and the drift there is overwhelmingly repelling
        if nu < 1e-12:
            nu = 1e-12
        elif nu > 2.0 * PI - 1e-12:
            nu = 2.0 * PI - 1e-12
    return nu, a, m, orient, idx, True


# ----------------------------------------------------------------------------
# python layer


def _stream(seed: int, stream_id: int) -> np.random.Generator:
    # splittable counter scheme: 128-bit Philox key = (stream << 64) | seed
    key = ((stream_id & 0xFFFFFFFFFFFFFFFF) << 64) | (seed & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def sde_step(s: HalfStripState, gaussian: float, cfg: SdeConfig) -> HalfStripState:
    """Single Euler update of an interior state (no boundary bookkeeping)."""
    nu, a = _step_nb(s.nu, s.a, gaussian, cfg.step)
    return HalfStripState(nu, a, s.crossings, s.orientation)


def _run_full(a0: float, cfg: SdeConfig, stream_id: int, negate: bool,
              nu_start: float | None) -> tuple[int, int]:
    """One complete trajectory; re-runs with a longer buffer on exhaustion."""
    n_buf = int(1.5 * (-a0) / cfg.step) + 8192
    while True:
        gen = _stream(cfg.seed, stream_id)
        normals = gen.standard_normal(n_buf)
        if negate:
            normals = -normals
        nu0 = 2.0 * PI - cfg.eps_restart if nu_start is None else nu_start
        nu, a, m, orient, idx, done = _run_nb(
            nu0, a0, 0, 0, normals, 0, cfg.step, cfg.eps_hit, cfg.eps_restart)
        if done:
            return m, 1 - 2 * (m % 2)
        n_buf *= 4


def simulate_trajectory(a0: float, cfg: SdeConfig,
                        nu_start: float | None = None) -> tuple[int, int]:
    """Run one trajectory from a0 to 0; returns (M, epsilon).

    M counts absorptions (alternating down/up crossings), epsilon = +1 if M is
    even (the last visited boundary half-line is the top one), else -1.
    nu_start overrides the standard start 2 pi - eps_restart (diagnostics).
    """
    if not a0 < 0.0:
        raise ValueError("a0 must be negative")
    return _run_full(a0, cfg, 0, False, nu_start)


def _simulate_ms(a0: float, n_samples: int, cfg: SdeConfig,
                 nu_start: float | None = None) -> np.ndarray:
    exp_steps = n_samples * ((-a0) / cfg.step + 200.0)
    if exp_steps > cfg.cost_cap:
        raise CostCapError(
            f"~{exp_steps:.2e} Euler steps requested, cap is {cfg.cost_cap:.2e}")
    ms = np.empty(n_samples, dtype=np.int64)
    if cfg.antithetic:
        if n_samples % 2:
            raise ValueError("antithetic sampling needs an even sample count")
        for pair in range(n_samples // 2):
            ms[2 * pair], _ = _run_full(a0, cfg, pair, False, nu_start)
            ms[2 * pair + 1], _ = _run_full(a0, cfg, pair, True, nu_start)
    else:
        for i in range(n_samples):
            ms[i], _ = _run_full(a0, cfg, i, False, nu_start)
    return ms


def _mc_estimate(values: np.ndarray, cfg: SdeConfig) -> McEstimate:
    """Mean and standard error; antithetic pairs are collapsed to pair means
    so the error bar reflects independent units."""
    if cfg.antithetic:
        units = 0.5 * (values[0::2] + values[1::2])
    else:
        units = values
    n = units.size
    se = float(units.std(ddof=1) / math.sqrt(n)) if n > 1 else float("inf")
    return McEstimate(float(values.mean()), se, int(values.size), cfg.seed)


@dataclass(frozen=True)
class CircuitEstimates:
    """Monte Carlo estimates of the crossing counts: c_n = P(M >= n), the
    no-circuit probability pn = E[epsilon], and the per-circuit pb_n."""

    a0: float
    c: tuple
    pn: McEstimate
    pb: tuple
    m_histogram: tuple
    n_samples: int
    seed: int


def estimate_circuit_probs(a0: float, n_max: int, n_samples: int,
                           cfg: SdeConfig) -> CircuitEstimates:
    """Simulate n_samples trajectories and estimate c_1..c_n_max, P(N), P(B_i).

    pb_i is the alternating tail sum of the empirical c sequence; it is
    accumulated per sample as (-1)^{M-i} 1_{M>=i}, which is algebraically the
    same quantity and gives an honest error bar.
    """
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    if not a0 < 0.0:
        raise ValueError("a0 must be negative")
    ms = _simulate_ms(a0, n_samples, cfg)
    eps = 1.0 - 2.0 * (ms % 2)
    c_list = tuple(_mc_estimate((ms >= n).astype(float), cfg)
                   for n in range(1, n_max + 1))
    pn = _mc_estimate(eps, cfg)
    pb_list = []
    for i in range(1, n_max + 1):
        x = np.where(ms >= i, 1.0, 0.0) * np.where((ms - i) % 2 == 0, 1.0, -1.0)
        pb_list.append(_mc_estimate(x, cfg))
    hist = np.bincount(ms)
    return CircuitEstimates(a0, c_list, pn, tuple(pb_list),
                            tuple(int(h) for h in hist), n_samples, cfg.seed)


# ----------------------------------------------------------------------------
# series inversion


@dataclass(frozen=True)
class CircuitLaw:
    """P(N) and P(B_i) recovered from a crossing-count sequence, with the
    truncation remainder bound 2 * c_K."""

    pn: float
    pb: np.ndarray
    truncation_bound: float

    def partition_defect(self) -> float:
        """1 - P(N) - 2 sum P(B_i): the mass lost to truncation."""
        return float(1.0 - self.pn - 2.0 * self.pb.sum())


def invert_cn(c, monotone_tol: float = 1e-9) -> CircuitLaw:
    """Invert c_n = P(at least n alternating crossings) into the circuit law.

    Input is (c_0 = 1, c_1, ..., c_K), non-increasing in [0, 1] with
    exponential decay assumed.  P(B_i) = c_i + 2 sum_{n>=1} (-1)^n c_{n+i}
    via the backward recurrence S_i = c_i - S_{i+1}, P(B_i) = 2 S_i - c_i
    (B_0 = N).  The alternating remainder is bounded by 2 c_K.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise ValueError("need a 1-d sequence (c_0, c_1, ..., c_K)")
    if abs(c[0] - 1.0) > 1e-12:
        raise ValueError(f"c_0 must be 1, got {c[0]}")
    if np.any(c < -1e-15) or np.any(c > 1.0 + 1e-12):
        raise NonMonotoneSequenceError("values must lie in [0, 1]")
    if np.any(np.diff(c) > monotone_tol):
        raise NonMonotoneSequenceError("sequence must be non-increasing")
    s = np.empty_like(c)
    s[-1] = c[-1]
    for i in range(c.size - 2, -1, -1):
        s[i] = c[i] - s[i + 1]
    p = 2.0 * s - c
    return CircuitLaw(float(p[0]), p[1:], float(2.0 * c[-1]))


def apply_shift_operator(p) -> np.ndarray:
    """Forward map (Id + 2J + 2J^2 + ...) from (P(N), P(B_1), ...) back to
    (c_0, c_1, ...); the round-trip inverse of invert_cn on truncated input."""
    p = np.asarray(p, dtype=float)
    tail = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    return p + 2.0 * tail
