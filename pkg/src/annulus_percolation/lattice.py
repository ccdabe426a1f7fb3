"""Critical site percolation on a triangular-lattice annulus.

Sites of the triangular lattice (axial coordinates, spacing `mesh` relative
to the outer radius 1) with q < |site| < 1 are coloured blue/yellow with
probability 1/2.  A cluster *wraps* when its winding lift around the inner
hole is inconsistent, detected by a weighted union-find that carries winding
offsets across a fixed cut ray (no geometry beyond the ray).  Wrapping
clusters are radially nested, so ordering them by maximum site radius gives
the outermost-to-innermost colour sequence.

Per-sample hard checks (a violation raises, failing the build):
  * consecutive wrapping-cluster colours alternate;
  * no wrap <=> a blue and a yellow inner-to-outer crossing both exist;
  * nesting: each inner wrap's max radius is strictly below the outer's.

Chordal boundary conditions force the outer arc (1, e^{i nu}) blue and
(e^{i nu}, 1) yellow for the two-sided crossing probability estimator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .diffusion import McEstimate

BLUE = 0
YELLOW = 1

_MAX_WRAPS = 256


class LatticeBuildError(ValueError):
    """Mesh/modulus combination fails to produce a usable discrete annulus."""


class InvariantViolation(RuntimeError):
    """A per-sample structural assertion (alternation/duality/nesting) fired."""


@dataclass(frozen=True)
class LatticeAnnulus:
    """Discrete annulus: kept sites, 6-neighbour adjacency (-1 = absent),
    winding increments per directed edge, and boundary tags."""

    mesh: float
    q: float
    xy: np.ndarray          # (n, 2) site positions
    radius: np.ndarray      # (n,)
    angle: np.ndarray       # (n,) in [0, 2 pi)
    neighbors: np.ndarray   # (n, 6) int32
    wind: np.ndarray        # (n, 6) int8, cut-ray crossing of edge i -> nb
    is_outer: np.ndarray    # (n,) bool
    is_inner: np.ndarray

    @property
    def n_sites(self) -> int:
        return self.radius.size


def build_annulus(q: float, mesh: float) -> LatticeAnnulus:
    """Carve the triangular lattice to q < |site| < 1 and wire adjacency."""
    if not (0.0 < q < 1.0 and 0.0 < mesh < 0.5):
        raise LatticeBuildError(f"need 0 < q < 1 and small mesh, got q={q}, mesh={mesh}")
    ey = mesh * math.sqrt(3.0) / 2.0
    j_max = int(math.floor(1.0 / ey)) + 1
    ii = []
    jj = []
    for j in range(-j_max, j_max + 1):
        y = j * ey
        half = math.sqrt(max(1.0 - y * y, 0.0)) / mesh + 1.0
        i_lo = int(math.floor(-half - 0.5 * j))
        i_hi = int(math.ceil(half - 0.5 * j))
        for i in range(i_lo, i_hi + 1):
            ii.append(i)
            jj.append(j)
    ii = np.array(ii, dtype=np.int64)
    jj = np.array(jj, dtype=np.int64)
    x = mesh * (ii + 0.5 * jj)
    y = ey * jj
    r = np.hypot(x, y)
    keep = (r > q) & (r < 1.0)
    ii, jj, x, y, r = ii[keep], jj[keep], x[keep], y[keep], r[keep]
    n = ii.size
    if n == 0:
        raise LatticeBuildError("no sites fall inside the annulus")
    index = {(int(a), int(b)): k for k, (a, b) in enumerate(zip(ii, jj))}
    steps = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1))
    nbr = np.full((n, 6), -1, dtype=np.int32)
    wind = np.zeros((n, 6), dtype=np.int8)
    angle = np.mod(np.arctan2(y, x), 2.0 * math.pi)
    is_outer = np.zeros(n, dtype=bool)
    is_inner = np.zeros(n, dtype=bool)
    for k in range(n):
        a_k = angle[k]
        for d, (di, dj) in enumerate(steps):
            key = (int(ii[k] + di), int(jj[k] + dj))
            m = index.get(key)
            if m is None:
                gx = mesh * (key[0] + 0.5 * key[1])
                gy = ey * key[1]
                gr = math.hypot(gx, gy)
                if gr >= 1.0:
                    is_outer[k] = True
                else:
                    is_inner[k] = True
                continue
            nbr[k, d] = m
            gap = angle[m] - a_k
            if gap > math.pi:
                wind[k, d] = -1     # crossed the positive-x cut clockwise
            elif gap < -math.pi:
                wind[k, d] = 1
    if not is_outer.any() or not is_inner.any():
        raise LatticeBuildError("a boundary circle has no discrete approximation")
    lat = LatticeAnnulus(mesh, q, np.column_stack([x, y]), r, angle,
                         nbr, wind, is_outer, is_inner)
    if not _connected(lat):
        raise LatticeBuildError("site set is not a connected discrete annulus")
    return lat


def _connected(lat: LatticeAnnulus) -> bool:
    n = lat.n_sites
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        k = stack.pop()
        for m in lat.neighbors[k]:
            if m >= 0 and not seen[m]:
                seen[m] = True
                count += 1
                stack.append(int(m))
    return count == n


# ----------------------------------------------------------------------------
# colourings


@dataclass(frozen=True)
class Coloring:
    colors: np.ndarray              # uint8 per site, BLUE/YELLOW
    boundary_condition: tuple       # ("free",) or ("chordal", nu)


def chordal_masks(lat: LatticeAnnulus, nu: float):
    """Forced outer-boundary sites: arc (1, e^{i nu}) blue, rest yellow."""
    blue = lat.is_outer & (lat.angle > 0.0) & (lat.angle < nu)
    yellow = lat.is_outer & ~blue
    return blue, yellow


def sample_coloring(lat: LatticeAnnulus, bc, rng: np.random.Generator) -> Coloring:
    """Fair iid colours; chordal conditions overwrite the forced outer arcs."""
    colors = rng.integers(0, 2, lat.n_sites, dtype=np.uint8)
    if bc[0] == "chordal":
        blue, yellow = chordal_masks(lat, bc[1])
        colors[blue] = BLUE
        colors[yellow] = YELLOW
    elif bc[0] != "free":
        raise ValueError(f"unknown boundary condition {bc!r}")
    return Coloring(colors, bc)


# ----------------------------------------------------------------------------
# union-find with winding offsets


@njit(cache=True, inline="always")
def _find_pot(parent, pot, i):
    """Root of i and its winding potential to the root, with path compression
    that keeps the potentials consistent."""
    ri = i
    wi = 0
    while parent[ri] != ri:
        wi += pot[ri]
        ri = parent[ri]
    node = i
    w = wi
    while parent[node] != ri:
        nxt = parent[node]
        p = pot[node]
        parent[node] = ri
        pot[node] = w
        w -= p
        node = nxt
    return ri, wi


@njit(cache=True)
def _classify(colors, neighbors, wind, radius, is_inner, is_outer,
              parent, pot, maxr, flags, wrap_roots, wrap_maxr, wrap_colors):
    """One-sample classification.

    Returns (n_wrap, outermost_color, alt_ok, nest_ok, blue_cross, yellow_cross).
    Scratch arrays are caller-owned so repeated samples stay allocation-free.
    flags bits per root: 1 wraps, 2 touches inner, 4 touches outer.
    """
    n = colors.size
    for i in range(n):
        parent[i] = i
        pot[i] = 0
        maxr[i] = radius[i]
        flags[i] = 0
        if is_inner[i]:
            flags[i] |= 2
        if is_outer[i]:
            flags[i] |= 4

    for i in range(n):
        for d in range(6):
            j = neighbors[i, d]
            if j < 0 or j < i:      # each undirected edge once
                continue
            if colors[i] != colors[j]:
                continue
            ri, wi = _find_pot(parent, pot, i)
            rj, wj = _find_pot(parent, pot, j)
            d_ij = wind[i, d]
            if ri == rj:
                if wj != wi + d_ij:
                    flags[ri] |= 1          # inconsistent lift: wraps
                continue
            # attach rj under ri, preserving W(j) = W(i) + d_ij
            parent[rj] = ri
            pot[rj] = wi + d_ij - wj
            if maxr[rj] > maxr[ri]:
                maxr[ri] = maxr[rj]
            flags[ri] |= flags[rj]

    # final sweep: compress to roots, collect wraps and crossings
    blue_cross = False
    yellow_cross = False
    n_wrap = 0
    for i in range(n):
        if parent[i] == i:
            f = flags[i]
            if (f & 6) == 6:
                if colors[i] == 0:
                    blue_cross = True
                else:
                    yellow_cross = True
            if f & 1:
                if n_wrap < wrap_roots.size:
                    wrap_roots[n_wrap] = i
                    wrap_maxr[n_wrap] = maxr[i]
                    wrap_colors[n_wrap] = colors[i]
                n_wrap += 1

    # order outermost first by maximum radius (insertion sort; n_wrap is tiny)
    for s in range(1, n_wrap):
        kr = wrap_maxr[s]
        kc = wrap_colors[s]
        kk = wrap_roots[s]
        t = s - 1
        while t >= 0 and wrap_maxr[t] < kr:
            wrap_maxr[t + 1] = wrap_maxr[t]
            wrap_colors[t + 1] = wrap_colors[t]
            wrap_roots[t + 1] = wrap_roots[t]
            t -= 1
        wrap_maxr[t + 1] = kr
        wrap_colors[t + 1] = kc
        wrap_roots[t + 1] = kk

    alt_ok = True
    nest_ok = True
    for s in range(1, n_wrap):
        if wrap_colors[s] == wrap_colors[s - 1]:
            alt_ok = False
        if not wrap_maxr[s] < wrap_maxr[s - 1]:
            nest_ok = False
    outermost = wrap_colors[0] if n_wrap > 0 else -1
    return n_wrap, outermost, alt_ok, nest_ok, blue_cross, yellow_cross


@njit(cache=True)
def _crossing_F(colors, neighbors, is_inner, arc_blue, arc_yellow, parent):
    """Both-crossings event under chordal conditions: a blue cluster joining
    the blue arc to the inner circle and a yellow one joining the yellow arc."""
    n = colors.size
    for i in range(n):
        parent[i] = i
    for i in range(n):
        for d in range(6):
            j = neighbors[i, d]
            if j < 0 or j < i or colors[i] != colors[j]:
                continue
            ri = i
            while parent[ri] != ri:
                parent[ri] = parent[parent[ri]]
                ri = parent[ri]
            rj = j
            while parent[rj] != rj:
                parent[rj] = parent[parent[rj]]
                rj = parent[rj]
            if ri != rj:
                parent[rj] = ri
    blue_ok = False
    yellow_ok = False
    touch_inner = np.zeros(n, dtype=np.uint8)
    touch_arc = np.zeros(n, dtype=np.uint8)
    for i in range(n):
        ri = i
        while parent[ri] != ri:
            ri = parent[ri]
        if is_inner[i]:
            touch_inner[ri] = 1
        if arc_blue[i] and colors[i] == 0:
            touch_arc[ri] |= 1
        if arc_yellow[i] and colors[i] == 1:
            touch_arc[ri] |= 2
    for i in range(n):
        if parent[i] == i and touch_inner[i]:
            if colors[i] == 0 and (touch_arc[i] & 1):
                blue_ok = True
            if colors[i] == 1 and (touch_arc[i] & 2):
                yellow_ok = True
    return blue_ok and yellow_ok


class _Scratch:
    def __init__(self, n):
        self.parent = np.empty(n, dtype=np.int64)
        self.pot = np.empty(n, dtype=np.int64)
        self.maxr = np.empty(n, dtype=np.float64)
        self.flags = np.empty(n, dtype=np.uint8)
        self.wrap_roots = np.empty(_MAX_WRAPS, dtype=np.int64)
        self.wrap_maxr = np.empty(_MAX_WRAPS, dtype=np.float64)
        self.wrap_colors = np.empty(_MAX_WRAPS, dtype=np.int64)


@dataclass(frozen=True)
class CircuitProfile:
    n_wrap: int
    colors: tuple   # outermost first


def _classify_checked(lat: LatticeAnnulus, colors: np.ndarray, scratch: _Scratch):
    out = _classify(colors, lat.neighbors, lat.wind, lat.radius,
                    lat.is_inner, lat.is_outer, scratch.parent, scratch.pot,
                    scratch.maxr, scratch.flags, scratch.wrap_roots,
                    scratch.wrap_maxr, scratch.wrap_colors)
    n_wrap, outermost, alt_ok, nest_ok, blue_cross, yellow_cross = out
    if n_wrap > _MAX_WRAPS:
        raise InvariantViolation(f"more than {_MAX_WRAPS} wrapping clusters")
    if not alt_ok:
        raise InvariantViolation("wrapping-cluster colours failed to alternate")
    if not nest_ok:
        raise InvariantViolation("wrapping clusters not strictly radially nested")
    if (n_wrap == 0) != (blue_cross and yellow_cross):
        raise InvariantViolation(
            "circuit/crossing duality violated: "
            f"n_wrap={n_wrap}, blue_cross={blue_cross}, yellow_cross={yellow_cross}")
    return n_wrap, outermost, blue_cross, yellow_cross


def wrapping_profile(c: Coloring, lat: LatticeAnnulus) -> CircuitProfile:
    """Wrapping clusters of a colouring, outermost first, with the structural
    invariants asserted (alternation, nesting, crossing duality)."""
    scratch = _Scratch(lat.n_sites)
    n_wrap, _, _, _ = _classify_checked(lat, c.colors, scratch)
    return CircuitProfile(n_wrap, tuple(int(x) for x in scratch.wrap_colors[:n_wrap]))


# ----------------------------------------------------------------------------
# estimators


def _binom(count: int, n: int, seed: int) -> McEstimate:
    p = count / n
    return McEstimate(p, math.sqrt(max(p * (1.0 - p), 0.0) / n), n, seed)


@dataclass(frozen=True)
class EventEstimates:
    """Free-boundary circuit statistics.  pb[k] / py[k] estimate B_{k+1} /
    Y_{k+1}; the raw counts partition the samples exactly."""

    pn: McEstimate
    pb: tuple
    py: tuple
    count_n: int
    counts_b: tuple
    counts_y: tuple
    n_samples: int
    seed: int

    def partition_identity(self) -> bool:
        return self.count_n + sum(self.counts_b) + sum(self.counts_y) == self.n_samples


def estimate_events(lat: LatticeAnnulus, n_samples: int, seed: int = 0,
                    n_report: int = 8) -> EventEstimates:
    """Classify n_samples free-boundary colourings into N / B_k / Y_k."""
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    rng = np.random.Generator(np.random.Philox(key=seed))
    scratch = _Scratch(lat.n_sites)
    count_n = 0
    counts_b = np.zeros(n_report, dtype=np.int64)
    counts_y = np.zeros(n_report, dtype=np.int64)
    for _ in range(n_samples):
        colors = rng.integers(0, 2, lat.n_sites, dtype=np.uint8)
        n_wrap, outermost, _, _ = _classify_checked(lat, colors, scratch)
        if n_wrap == 0:
            count_n += 1
        elif n_wrap <= n_report:
            if outermost == BLUE:
                counts_b[n_wrap - 1] += 1
            else:
                counts_y[n_wrap - 1] += 1
        else:
            raise InvariantViolation(
                f"n_wrap={n_wrap} beyond the reporting window {n_report}; "
                "increase n_report")
    pn = _binom(count_n, n_samples, seed)
    pb = tuple(_binom(int(c), n_samples, seed) for c in counts_b)
    py = tuple(_binom(int(c), n_samples, seed) for c in counts_y)
    return EventEstimates(pn, pb, py, count_n, tuple(int(c) for c in counts_b),
                          tuple(int(c) for c in counts_y), n_samples, seed)


def estimate_F(lat: LatticeAnnulus, nu: float, n_samples: int,
               seed: int = 0) -> McEstimate:
    """Chordal two-sided crossing probability at outer-arc angle nu."""
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    if not 0.0 < nu < 2.0 * math.pi:
        raise ValueError("nu must lie strictly inside (0, 2 pi)")
    rng = np.random.Generator(np.random.Philox(key=seed))
    arc_blue, arc_yellow = chordal_masks(lat, nu)
    parent = np.empty(lat.n_sites, dtype=np.int64)
    hits = 0
    for _ in range(n_samples):
        colors = rng.integers(0, 2, lat.n_sites, dtype=np.uint8)
        colors[arc_blue] = BLUE
        colors[arc_yellow] = YELLOW
        if _crossing_F(colors, lat.neighbors, lat.is_inner,
                       arc_blue, arc_yellow, parent):
            hits += 1
    return _binom(hits, n_samples, seed)
