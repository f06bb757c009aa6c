"""Piecewise-dyadic averaging and mollification.

The approximation pipeline for a function f with a critical-radius field:

1. choose_thresholds picks three exponents (fine I, core J, outer M) so
   that cube oscillations below scale 2^-I, above scale 2^J, and far from
   the origin all drop below eps-proportional bounds, and cube sizes on
   supercritical scales do too;
2. assign_cubes tiles the box with half-open dyadic cubes whose sidelength
   depends on the region of the sample (core gets 2^(-I-2), the m-th shell
   gets 2^(m-I-J-1));
3. the region average replaces f by its cube means (exactly idempotent);
4. p1_p2_check verifies the smallness of the result outside the outer
   region and across closure-adjacent cubes.

Grids here must have power-of-two halfwidth and spacing 2^-p so the
shells tile exactly in integer cell arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateRegionError,
    OutOfDomainError,
    ThresholdExhaustedError,
)
from .family import BallFamily
from .grid import DyadicCube, Grid, GridFunction
from .oscillation import SplitNormReport, bmo_l_norm


# ---------------------------------------------------------------------------
# bump and mollifier


def _bump_profile(r2: np.ndarray) -> np.ndarray:
    """exp(-1/(1-r^2)) on r^2 < 1, 0 outside; vectorised and overflow-safe."""
    out = np.zeros(np.shape(r2))
    inside = r2 < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        out[inside] = np.exp(-1.0 / (1.0 - r2[inside]))
    return out


def bump(grid: Grid, center: Sequence[float] | None = None, width: float = 1.0) -> GridFunction:
    """The standard smooth bump supported on B(center, width), sampled and
    scaled to unit discrete mass.  Needs h < 1/4 (in units of the width) so
    the support holds enough samples for the mass to be meaningful."""
    if grid.spacing >= width / 4.0:
        raise ConfigError(
            f"spacing {grid.spacing} too coarse for a width-{width} bump; need h < width/4"
        )
    c = np.zeros(grid.n) if center is None else np.asarray(center, dtype=np.float64)
    if c.shape != (grid.n,):
        raise ConfigError("bump center dimension mismatch")
    if grid.n == 1:
        r2 = ((grid.axis - c[0]) / width) ** 2
    else:
        a = grid.axis
        r2 = ((a[:, None] - c[0]) ** 2 + (a[None, :] - c[1]) ** 2) / width**2
    vals = _bump_profile(r2)
    mass = float(np.sum(vals) * grid.cell_volume)
    if mass <= 0:
        raise ConfigError("bump support contains no samples")
    return GridFunction(grid, vals / mass)


@dataclass(frozen=True)
class Mollified:
    fn: GridFunction
    valid: np.ndarray  # True where the kernel window stayed inside the box


def mollify(f: GridFunction, t: float) -> Mollified:
    """Convolution with the unit-mass bump kernel scaled to width t,
    zero-padded outside the box.  Requires t >= 4h so the kernel holds
    enough samples.  valid marks samples whose window never left the box."""
    g = f.grid
    h = g.spacing
    if t < 4.0 * h * (1 - 1e-9):
        raise ConfigError(f"mollification width {t} is below 4h = {4 * h}")
    kmax = math.ceil(t / h - 1e-9) - 1
    offs = np.arange(-kmax, kmax + 1, dtype=np.float64) * h
    if g.n == 1:
        w = _bump_profile((offs / t) ** 2)
        w /= np.sum(w)
        if f.values.size * w.size <= 1 << 26:
            conv = np.convolve(f.values, w, mode="same")
        else:
            from scipy.signal import fftconvolve

            conv = fftconvolve(f.values, w, mode="same")
        n_ax = g.axis_count
        i = np.arange(n_ax)
        valid = (i - kmax >= 0) & (i + kmax <= n_ax - 1)
    else:
        w = _bump_profile((offs[:, None] ** 2 + offs[None, :] ** 2) / t**2)
        w /= np.sum(w)
        from scipy.signal import fftconvolve

        conv = fftconvolve(f.values, w, mode="same")
        n_ax = g.axis_count
        i = np.arange(n_ax)
        line = (i - kmax >= 0) & (i + kmax <= n_ax - 1)
        valid = line[:, None] & line[None, :]
    return Mollified(GridFunction(g, conv), valid)


# ---------------------------------------------------------------------------
# dyadic machinery on power-of-two boxes


def _dyadic_exponents(grid: Grid) -> tuple[int, int]:
    """(a, p) with halfwidth = 2^a and spacing = 2^-p, else ConfigError."""
    a = math.log2(grid.halfwidth)
    p = -math.log2(grid.spacing)
    if abs(a - round(a)) > 1e-9 or abs(p - round(p)) > 1e-9:
        raise ConfigError(
            "dyadic averaging needs a power-of-two box (halfwidth 2^a, spacing 2^-p); "
            f"got halfwidth {grid.halfwidth}, spacing {grid.spacing}"
        )
    return round(a), round(p)


class _LevelStats:
    """Per-cube counts/sums/sums-of-squares for one dyadic level tiling the
    box.  The top boundary sample on each axis folds into the last cube so
    the cubes partition all samples."""

    def __init__(self, f: GridFunction, level: int):
        g = f.grid
        a, p = _dyadic_exponents(g)
        if level < -p or level > a:
            raise ConfigError(f"level {level} outside the grid's dyadic range [{-p}, {a}]")
        self.level = level
        self.q = 2 ** (level + p)  # cells per cube edge
        self.nc = 2 ** (a + 1 - level)  # cubes per axis
        self.n0 = g.half_cells
        q, nc = self.q, self.nc
        v = f.values
        if g.n == 1:
            body = v[:-1].reshape(nc, q)
            sums = body.sum(axis=1)
            sumsq = (body**2).sum(axis=1)
            counts = np.full(nc, q, dtype=np.int64)
            sums[-1] += v[-1]
            sumsq[-1] += v[-1] ** 2
            counts[-1] += 1
        else:
            body = v[:-1, :-1].reshape(nc, q, nc, q)
            sums = body.sum(axis=(1, 3))
            sumsq = (body**2).sum(axis=(1, 3))
            counts = np.full((nc, nc), q * q, dtype=np.int64)
            e_r = v[-1, :-1].reshape(nc, q)
            sums[-1, :] += e_r.sum(axis=1)
            sumsq[-1, :] += (e_r**2).sum(axis=1)
            counts[-1, :] += q
            e_c = v[:-1, -1].reshape(nc, q)
            sums[:, -1] += e_c.sum(axis=1)
            sumsq[:, -1] += (e_c**2).sum(axis=1)
            counts[:, -1] += q
            sums[-1, -1] += v[-1, -1]
            sumsq[-1, -1] += v[-1, -1] ** 2
            counts[-1, -1] += 1
        self.counts = counts
        self.sums = sums
        self.sumsq = sumsq

    @property
    def mean(self) -> np.ndarray:
        return self.sums / self.counts

    @property
    def mean_sq(self) -> np.ndarray:
        return self.sumsq / self.counts

    @property
    def oscillation(self) -> np.ndarray:
        return np.sqrt(np.maximum(0.0, self.mean_sq - self.mean**2))

    @property
    def size(self) -> np.ndarray:
        return np.sqrt(self.mean_sq)

    def corner_cells_1d(self) -> np.ndarray:
        """Corner cell coordinate per axis index (lattice units of h)."""
        return -self.n0 + np.arange(self.nc, dtype=np.int64) * self.q

    def outside_score(self) -> np.ndarray:
        """Per-cube integer score g with: cube disjoint from the closed
        origin cube of half-extent T cells  <=>  g >= T."""
        c = self.corner_cells_1d()
        g1 = np.maximum(c - 1, -c - self.q)
        if self.counts.ndim == 1:
            return g1
        return np.maximum(g1[:, None], g1[None, :])

    def sigma_range(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-cube (min, max) of the radial cell score sigma(o) =
        max(o, -o-1) over the cube's samples; a cube lies in the half-open
        shell [S_lo, S_hi) cells iff min >= S_lo and max < S_hi."""
        c = self.corner_cells_1d()
        top = c + self.q - 1
        mn1 = np.where(c >= 0, c, np.where(top < 0, -c - self.q, 0))
        mx1 = np.maximum(top, -c - 1)
        if self.counts.ndim == 1:
            return mn1, mx1
        return (
            np.maximum(mn1[:, None], mn1[None, :]),
            np.maximum(mx1[:, None], mx1[None, :]),
        )

    def centers(self, grid: Grid) -> np.ndarray:
        """(n_cubes, n) cube centers in coordinates."""
        c = (self.corner_cells_1d() + self.q / 2.0) * grid.spacing
        if self.counts.ndim == 1:
            return c[:, None]
        xx, yy = np.meshgrid(c, c, indexing="ij")
        return np.stack([xx.ravel(), yy.ravel()], axis=1)


def _rho_fn(rho) -> Callable[[np.ndarray], np.ndarray]:
    if np.isscalar(rho) or isinstance(rho, (int, float)):
        return lambda pts: np.full(pts.shape[0], float(rho))
    if callable(rho):
        return lambda pts: np.asarray(rho(pts), dtype=np.float64).reshape(pts.shape[0])
    raise ConfigError(
        "critical-radius data for threshold scans must be a scalar or a callable on points"
    )


# ---------------------------------------------------------------------------
# threshold selection


@dataclass(frozen=True)
class ThresholdFractions:
    """eps multipliers for the scanned bounds; None picks the defaults
    1/(5*4^n) for oscillation conditions and 1/2 for size conditions."""

    oscillation: float | None = None
    size: float = 0.5

    def osc_value(self, n: int) -> float:
        return self.oscillation if self.oscillation is not None else 1.0 / (5.0 * 4.0**n)


@dataclass(frozen=True)
class AveragingThresholds:
    eps: float
    fine_exponent: int  # I: fine-scale cutoff 2^-I
    core_exponent: int  # J: core region halfwidth 2^J
    outer_exponent: int  # M: outer region halfwidth 2^M
    osc_bound: float
    size_bound: float
    level_min: int
    level_max: int
    closed_form_bound: float | None = None

    @property
    def core_level(self) -> int:
        return -self.fine_exponent - 2

    def shell_level(self, m: int) -> int:
        return m - self.fine_exponent - self.core_exponent - 1


def choose_thresholds(
    f: GridFunction,
    eps: float,
    rho,
    fractions: ThresholdFractions | None = None,
    level_min: int | None = None,
    level_max: int | None = None,
    slow_variation: tuple[float, int, float] | None = None,
) -> AveragingThresholds:
    """Scan dyadic levels for the smallest admissible (I, J, M).

    Five conditions, each required on a nonempty cube set (no vacuous
    passes):

    * oscillation below the fine scale, above the core scale, and on cubes
      entirely outside the doubled core region, all < osc_bound;
    * size (root mean square) on supercritical cubes above the core scale
      and on far supercritical cubes, both < size_bound.

    After J is fixed, I is enlarged until 2^(-I-1) <= inf rho over the
    J+2 region (critical-radius compatibility).  M is the smallest shell
    cutoff whose beyond-shell assigned cubes all have size < size_bound.
    ThresholdExhaustedError when any scan runs off the level range.

    slow_variation = (c, k0, rho_at_origin) adds the closed-form bound
    (k0+1) * (log2 C + I + J + 1), C = c * rho0 * (1 + 2 sqrt(n)/rho0)^(k0/(k0+1)),
    to the report for cross-checking the scanned M.
    """
    if not (eps > 0):
        raise ConfigError("eps must be positive")
    g = f.grid
    a, p = _dyadic_exponents(g)
    fr = fractions or ThresholdFractions()
    osc_bound = fr.osc_value(g.n) * eps
    size_bound = fr.size * eps
    l_lo = level_min if level_min is not None else -p + 1
    l_hi = level_max if level_max is not None else a
    if not (-p <= l_lo <= l_hi <= a):
        raise ConfigError(f"level range [{l_lo}, {l_hi}] outside the grid range [{-p}, {a}]")

    rho_at = _rho_fn(rho)
    stats: dict[int, _LevelStats] = {}

    def level_stats(l: int) -> _LevelStats:
        if l not in stats:
            stats[l] = _LevelStats(f, l)
        return stats[l]

    levels = list(range(l_lo, l_hi + 1))
    osc_max = {l: float(np.max(level_stats(l).oscillation)) for l in levels}

    # fine exponent: smallest I with sup osc over levels <= -I below bound
    fine = None
    running = -math.inf
    # S_small(l) = max osc over levels <= l; walk l downward == I upward
    small_sup: dict[int, float] = {}
    acc = -math.inf
    for l in levels:
        acc = max(acc, osc_max[l])
        small_sup[l] = acc
    for i_cand in range(-l_hi, -l_lo + 1):
        if small_sup[-i_cand] < osc_bound:
            fine = i_cand
            break
    if fine is None:
        raise ThresholdExhaustedError(
            f"no fine cutoff in levels [{l_lo}, {l_hi}] brings the small-cube "
            f"oscillation below {osc_bound:.3g}"
        )

    # per-level data for the J conditions
    large_sup: dict[int, float] = {}
    acc = -math.inf
    for l in reversed(levels):
        acc = max(acc, osc_max[l])
        large_sup[l] = acc

    # far oscillation: per level, cubes sorted by outside score with suffix max
    far_sorted: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    super_size_max: dict[int, float] = {}
    far_super_sorted: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for l in levels:
        st = level_stats(l)
        score = st.outside_score().ravel()
        osc = st.oscillation.ravel()
        order = np.argsort(score, kind="stable")
        s_sorted = score[order]
        suffix = np.maximum.accumulate(osc[order][::-1])[::-1]
        far_sorted[l] = (s_sorted, suffix)

        centers = st.centers(g)
        rho_c = rho_at(centers)
        sup_mask = (2.0**l) >= rho_c
        size = st.size.ravel()
        super_size_max[l] = float(np.max(size[sup_mask])) if np.any(sup_mask) else -math.inf
        if np.any(sup_mask):
            sc = score[sup_mask]
            sz = size[sup_mask]
            order = np.argsort(sc, kind="stable")
            far_super_sorted[l] = (
                sc[order],
                np.maximum.accumulate(sz[order][::-1])[::-1],
            )
        else:
            far_super_sorted[l] = (np.empty(0, np.int64), np.empty(0))

    def sorted_suffix_sup(pair: tuple[np.ndarray, np.ndarray], t_cells: int) -> float:
        s_sorted, suffix = pair
        at = int(np.searchsorted(s_sorted, t_cells, side="left"))
        if at >= s_sorted.size:
            return -math.inf
        return float(suffix[at])

    def conditions_hold(j: int) -> bool:
        # (a) oscillation on levels >= j
        if large_sup.get(j, -math.inf) >= osc_bound:
            return False
        # (b) oscillation on cubes outside the closed core region
        t_cells = 2 ** (j + p)
        far_vals = [sorted_suffix_sup(far_sorted[l], t_cells) for l in levels]
        if max(far_vals) >= osc_bound:
            return False
        # (c) size on supercritical cubes at levels >= j
        sup_sizes = [super_size_max[l] for l in levels if l >= j]
        if sup_sizes and max(sup_sizes) >= size_bound:
            return False
        # (d) size on far supercritical cubes (any level)
        far_sup_vals = [sorted_suffix_sup(far_super_sorted[l], t_cells) for l in levels]
        if max(far_sup_vals) >= size_bound:
            return False
        return True

    core = None
    j_floor = max(-fine - 1, l_lo)
    for j_cand in range(j_floor, l_hi + 1):
        if conditions_hold(j_cand):
            core = j_cand
            break
    if core is None:
        raise ThresholdExhaustedError(
            f"no core cutoff in levels [{j_floor}, {l_hi}] satisfies the large-scale, "
            "far, and supercritical conditions"
        )

    # critical-radius compatibility: enlarge the fine exponent until the
    # finest pre-assignment scale drops below inf rho on the J+2 region
    probe_half = min(2.0 ** (core + 2), g.halfwidth)
    probes = _region_probe_points(g, probe_half)
    rho_min = float(np.min(rho_at(probes)))
    while 2.0 ** (-fine - 1) > rho_min:
        fine += 1
        if -fine - 2 < -p:
            raise ThresholdExhaustedError(
                f"critical-radius compatibility pushes the fine cutoff below the "
                f"grid scale (inf rho = {rho_min:.3g} on the core neighbourhood)"
            )

    # outer exponent: shells beyond M must have small assigned-cube size
    if core + 1 > a:
        raise ThresholdExhaustedError(
            f"the box (halfwidth 2^{a}) cannot hold shells beyond the core 2^{core}"
        )
    shell_tops = list(range(core, a))  # shell m covers (2^m, 2^(m+1)]
    shell_size = {}
    for m in shell_tops:
        lv = m - fine - core - 1
        if lv < -p:
            raise ThresholdExhaustedError(
                f"shell {m} would need cubes below the grid scale"
            )
        st = level_stats(lv) if l_lo <= lv <= l_hi else _LevelStats(f, lv)
        mn, mx = st.sigma_range()
        size = st.size.ravel()
        inner_cells = 2 ** (m + p)
        outer_cells = 2 ** (m + 1 + p)
        in_shell = ((mn >= inner_cells) & (mx < outer_cells)).ravel()
        shell_size[m] = float(np.max(size[in_shell])) if np.any(in_shell) else -math.inf
    outer = None
    suffix_sup = -math.inf
    suffix_map = {}
    for m in reversed(shell_tops):
        suffix_sup = max(suffix_sup, shell_size[m])
        suffix_map[m] = suffix_sup
    for m in shell_tops:
        if suffix_map[m] < size_bound:
            outer = m
            break
    if outer is None:
        raise ThresholdExhaustedError(
            "no outer cutoff within the box keeps the beyond-shell cube sizes "
            f"below {size_bound:.3g}"
        )

    closed = None
    if slow_variation is not None:
        c_sv, k0, rho0 = slow_variation
        C = c_sv * rho0 * (1.0 + 2.0 * math.sqrt(g.n) / rho0) ** (k0 / (k0 + 1.0))
        closed = (k0 + 1.0) * (math.log2(max(C, 1e-300)) + fine + core + 1.0)

    return AveragingThresholds(
        eps, fine, core, outer, osc_bound, size_bound, l_lo, l_hi, closed
    )


def _region_probe_points(grid: Grid, halfw: float) -> np.ndarray:
    """Decimated grid points covering the closed origin cube of the given
    half-extent (always includes the origin and the corners)."""
    ax = grid.axis
    sel = np.abs(ax) <= halfw + 1e-12
    pts1 = ax[sel]
    if pts1.size > 129:
        stride = pts1.size // 129 + 1
        keep = pts1[::stride]
        if keep[-1] != pts1[-1]:
            keep = np.append(keep, pts1[-1])
        pts1 = keep
    if grid.n == 1:
        return pts1[:, None]
    xx, yy = np.meshgrid(pts1, pts1, indexing="ij")
    return np.stack([xx.ravel(), yy.ravel()], axis=1)


# ---------------------------------------------------------------------------
# cube assignment and averaging


@dataclass(frozen=True)
class DyadicAssignment:
    """Partition of the samples into half-open dyadic cubes.

    sample_cube maps each (row-major) sample to a cube id; cube_levels and
    cube_corners describe each cube.  Regions are half-open (the core is
    [-2^J, 2^J)^n), so the tiles partition the box exactly; the +X boundary
    samples fold into the last cube on their axis.
    """

    grid: Grid
    thresholds: AveragingThresholds
    sample_cube: np.ndarray
    cube_levels: np.ndarray
    cube_corners: np.ndarray
    cube_counts: np.ndarray

    @property
    def n_cubes(self) -> int:
        return self.cube_levels.size

    def cube(self, i: int) -> DyadicCube:
        return DyadicCube(int(self.cube_levels[i]), tuple(int(c) for c in self.cube_corners[i]))


def assign_cubes(thresholds: AveragingThresholds, grid: Grid) -> DyadicAssignment:
    """Tile the box according to the thresholds.

    Needs halfwidth >= 2^(M+3) so the truncation region of the pipeline
    fits with room to spare.
    """
    a, p = _dyadic_exponents(grid)
    th = thresholds
    if 2.0 ** (th.outer_exponent + 3) > grid.halfwidth * (1 + 1e-12):
        raise OutOfDomainError(
            f"box halfwidth {grid.halfwidth} below 2^(M+3) = {2.0 ** (th.outer_exponent + 3)}"
        )
    if th.core_level < -p:
        raise ConfigError("core cubes fall below the grid scale")
    n0 = grid.half_cells
    idx = np.arange(grid.axis_count, dtype=np.int64)
    o1 = np.minimum(idx, 2 * n0 - 1) - n0  # folded per-axis offsets
    sigma1 = np.maximum(o1, -o1 - 1)
    if grid.n == 1:
        o = o1[:, None]
        sigma = sigma1
    else:
        o = np.stack(
            [np.repeat(o1, grid.axis_count), np.tile(o1, grid.axis_count)], axis=1
        )
        sigma = np.maximum(sigma1[:, None], sigma1[None, :]).ravel()

    core_cells = 2 ** (th.core_exponent + p)
    in_core = sigma < core_cells
    shell_m = np.zeros(sigma.shape, dtype=np.int64)
    out = ~in_core
    if np.any(out):
        shell_m[out] = np.floor(np.log2(sigma[out].astype(np.float64))).astype(np.int64) - p
        # repair float edges exactly
        low = out & (2 ** (shell_m + p + 1) <= sigma)
        shell_m[low] += 1
        high = out & (2 ** (shell_m + p) > sigma)
        shell_m[high] -= 1

    level = np.where(in_core, th.core_level, shell_m - th.fine_exponent - th.core_exponent - 1)
    if np.any(level < -p):
        raise ConfigError("assignment produced cubes below the grid scale")
    qbits = (level + p).astype(np.int64)
    corners = o >> qbits[:, None]  # arithmetic shift = floor division

    key = np.concatenate([level[:, None], corners], axis=1)
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    counts = np.bincount(inverse)
    return DyadicAssignment(
        grid,
        th,
        inverse.astype(np.int64),
        uniq[:, 0].copy(),
        uniq[:, 1:].copy(),
        counts,
    )


def dyadic_average(f: GridFunction, assignment: DyadicAssignment) -> GridFunction:
    """Replace f by its mean on each assigned cube.

    Means are computed against a per-cube anchor sample, which makes the
    operation exactly idempotent on piecewise-constant input.
    """
    if not f.grid.compatible(assignment.grid):
        raise ConfigError("function and assignment grids differ")
    flat = f.values.ravel()
    sc = assignment.sample_cube
    n_cubes = assignment.n_cubes
    uniq_ids, first_idx = np.unique(sc, return_index=True)
    first = np.empty(n_cubes, dtype=np.int64)
    first[uniq_ids] = first_idx
    anchors = flat[first]
    diffs = flat - anchors[sc]
    sums = np.bincount(sc, weights=diffs, minlength=n_cubes)
    means = anchors + sums / assignment.cube_counts
    return GridFunction(f.grid, means[sc].reshape(f.grid.shape))


def cube_means(f: GridFunction, assignment: DyadicAssignment) -> np.ndarray:
    flat = f.values.ravel()
    sc = assignment.sample_cube
    sums = np.bincount(sc, weights=flat, minlength=assignment.n_cubes)
    return sums / assignment.cube_counts


# ---------------------------------------------------------------------------
# P1 / P2 gates


@dataclass(frozen=True)
class GateReport:
    p1_sup: float
    p1_ok: bool
    p2_max: float
    p2_ok: bool
    n_adjacent_pairs: int
    size_ratio_ok: bool


def p1_p2_check(
    f: GridFunction, assignment: DyadicAssignment, averaged: GridFunction | None = None
) -> GateReport:
    """P1: sup |averaged| outside the closed outer region <= eps/2.
    P2: |difference across closure-adjacent cubes| <= eps.  Also verifies
    the neighbour sidelength ratio invariant (in {1/2, 1, 2})."""
    th = assignment.thresholds
    g = assignment.grid
    A = averaged if averaged is not None else dyadic_average(f, assignment)
    lim = 2.0**th.outer_exponent
    ax = np.abs(g.axis)
    if g.n == 1:
        outside = ax > lim + 1e-12
    else:
        outside = (np.maximum(ax[:, None], ax[None, :]) > lim + 1e-12).ravel()
    flatA = A.values.ravel()
    p1 = float(np.max(np.abs(flatA[outside]), initial=0.0))

    means = cube_means(f, assignment)
    pairs = _adjacent_pairs(assignment)
    if pairs.size:
        d = np.abs(means[pairs[:, 0]] - means[pairs[:, 1]])
        p2 = float(np.max(d))
        lv = assignment.cube_levels
        ratio_ok = bool(np.all(np.abs(lv[pairs[:, 0]] - lv[pairs[:, 1]]) <= 1))
    else:
        p2 = 0.0
        ratio_ok = True
    return GateReport(
        p1,
        p1 <= th.size_bound + 1e-12,
        p2,
        p2 <= th.eps + 1e-12,
        pairs.shape[0],
        ratio_ok,
    )


def _adjacent_pairs(assignment: DyadicAssignment) -> np.ndarray:
    """Closure-adjacent cube id pairs, found by probing just outside each
    cube's faces and corners and locating the probe's cube."""
    g = assignment.grid
    n0 = g.half_cells
    lv = assignment.cube_levels
    _, p = _dyadic_exponents(g)
    q = (1 << (lv + p)).astype(np.int64)
    corners = assignment.cube_corners * q[:, None]  # in cells

    # map each folded offset cell to its cube id
    cell_to_cube = assignment.sample_cube  # indexed by row-major sample
    n_ax = g.axis_count

    def cube_at(cells: np.ndarray) -> np.ndarray:
        # cells: (k, n) lattice offsets in [-n0, n0-1]
        idx = cells + n0
        if g.n == 1:
            flat = idx[:, 0]
        else:
            flat = idx[:, 0] * n_ax + idx[:, 1]
        return cell_to_cube[flat]

    pairs = []
    if g.n == 1:
        c = corners[:, 0]
        for probe in (c - 1, c + q):
            ok = (probe >= -n0) & (probe <= n0 - 1)
            src = np.nonzero(ok)[0]
            tgt = cube_at(probe[ok][:, None])
            pairs.append(np.stack([src, tgt], axis=1))
    else:
        c0, c1 = corners[:, 0], corners[:, 1]
        # probe positions along each face at offsets {0, q/2, q-1}, plus corners
        for frac in (0, 1, 2):
            for side in range(4):
                off = {0: 0, 1: np.maximum(q // 2, 0), 2: q - 1}[frac]
                if side == 0:  # left face, varying axis 1
                    p0, p1 = c0 - 1, c1 + off
                elif side == 1:  # right face
                    p0, p1 = c0 + q, c1 + off
                elif side == 2:  # bottom face, varying axis 0
                    p0, p1 = c0 + off, c1 - 1
                else:
                    p0, p1 = c0 + off, c1 + q
                ok = (p0 >= -n0) & (p0 <= n0 - 1) & (p1 >= -n0) & (p1 <= n0 - 1)
                src = np.nonzero(ok)[0]
                tgt = cube_at(np.stack([p0[ok], p1[ok]], axis=1))
                pairs.append(np.stack([src, tgt], axis=1))
        for d0 in (-1, 1):
            for d1 in (-1, 1):
                p0 = np.where(d0 < 0, c0 - 1, c0 + q)
                p1 = np.where(d1 < 0, c1 - 1, c1 + q)
                ok = (p0 >= -n0) & (p0 <= n0 - 1) & (p1 >= -n0) & (p1 <= n0 - 1)
                src = np.nonzero(ok)[0]
                tgt = cube_at(np.stack([p0[ok], p1[ok]], axis=1))
                pairs.append(np.stack([src, tgt], axis=1))
    allp = np.concatenate(pairs, axis=0)
    allp = allp[allp[:, 0] != allp[:, 1]]
    lo = np.minimum(allp[:, 0], allp[:, 1])
    hi = np.maximum(allp[:, 0], allp[:, 1])
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


# ---------------------------------------------------------------------------
# distances


def approx_distance(
    f: GridFunction, g_fn: GridFunction, rho, family: BallFamily, p: float = 2.0
) -> SplitNormReport:
    """Critical-radius-adapted norm of f - g over the family."""
    return bmo_l_norm(f - g_fn, rho, family, p)
