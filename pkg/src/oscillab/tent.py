"""Tent-space functionals on half-space samples.

The primary region over a ball B(c, r) is the cylinder B x (0, r]; a
strict-tent oracle (points with |y - c| < r - t) is kept for cross-checks.
All dt/t integrals use trapezoid weights in log t recomputed on the
truncated ladder prefix, and all spatial sums count samples strictly
inside the ball times h^n.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateRegionError,
    LadderError,
    OutOfDomainError,
)
from .family import BallFamily, LimitCurve, bucketed_sup
from .grid import Ball, Grid, GridFunction, SummedTable, ball_member_values, mean_oscillation
from .oscillation import _family_geometry, _counts_for_cells
from .semigroup import (
    HalfSpaceFunction,
    PoissonExtension,
    SpectralOperator,
    TLadder,
    log_weights_for,
    poisson,
    square_function_field,
)


class BoxScanner:
    """Prefix tables of |F|^2 per ladder slice, serving cylinder sums."""

    def __init__(self, F: HalfSpaceFunction):
        self.F = F
        self.grid = F.grid
        self.tables = [SummedTable(self.grid, F.values[j] ** 2) for j in range(len(F.ladder))]

    def _slice_count(self, r: float) -> int:
        t = self.F.ladder.values
        if r < t[0] * (1 - 1e-9):
            raise LadderError(f"ball radius {r} lies below the smallest scale {t[0]}")
        if r > t[-1] * (1 + 1e-9):
            raise LadderError(f"ball radius {r} exceeds the largest scale {t[-1]}")
        return int(np.searchsorted(t, r * (1 + 1e-12), side="right"))

    def box_values(self, centers_idx: np.ndarray, cell_radius: int, r: float) -> np.ndarray:
        """r^{-n} * sum over the cylinder of |F|^2 h^n dt/t, vectorised over
        centers sharing one radius."""
        k = self._slice_count(r)
        w = log_weights_for(self.F.ladder.values[:k])
        g = self.grid
        n_c = centers_idx.shape[0] if centers_idx.ndim else 1
        total = np.zeros(n_c)
        for j in range(k):
            total += w[j] * self.tables[j].ball_sum(centers_idx, cell_radius)
        return total * g.cell_volume / r**g.n


def carleson_box(F: HalfSpaceFunction, ball: Ball) -> float:
    """r^{-n} * integral over B x (0, r] of |F|^2 dx dt/t (cylinder region).

    The ladder must cover the cylinder: r within [t_min, t_max].
    """
    g = F.grid
    if ball.n != g.n:
        raise ConfigError("ball dimension does not match the field")
    if not ball.inside_box(g):
        raise OutOfDomainError("carleson box ball touches or leaves the box")
    sc = BoxScanner(F)
    h = g.spacing
    m = round(ball.radius / h)
    on_lattice = (
        abs(ball.radius / h - m) <= 1e-6
        and bool(np.all(g.on_lattice(np.asarray(ball.center))))
    )
    if on_lattice:
        ci = g.coord_to_index(np.asarray(ball.center))
        centers = np.array([ci[0]]) if g.n == 1 else ci[None, :]
        return float(sc.box_values(centers, m, ball.radius)[0])
    # naive membership per slice
    k = sc._slice_count(ball.radius)
    w = log_weights_for(F.ladder.values[:k])
    total = 0.0
    for j in range(k):
        vals = ball_member_values(GridFunction(g, F.values[j]), ball)
        total += w[j] * float(np.sum(vals**2))
    return total * g.cell_volume / ball.radius**g.n


def carleson_box_strict_tent(F: HalfSpaceFunction, ball: Ball) -> float:
    """Oracle: same integral over the strict tent {(y, t): |y - c| < r - t}.

    Always <= the cylinder value for the same F.  Slow path only.
    """
    g = F.grid
    if not ball.inside_box(g):
        raise OutOfDomainError("tent ball touches or leaves the box")
    t = F.ladder.values
    k = int(np.searchsorted(t, ball.radius * (1 + 1e-12), side="right"))
    if k == 0:
        raise LadderError(f"ball radius {ball.radius} lies below the smallest scale")
    w = log_weights_for(t[:k])
    total = 0.0
    for j in range(k):
        shrunk = ball.radius - t[j]
        if shrunk <= 0:
            continue
        b = Ball(ball.center, shrunk)
        vals = ball_member_values(GridFunction(g, F.values[j]), b)
        total += w[j] * float(np.sum(vals**2))
    return total * g.cell_volume / ball.radius**g.n


def family_box_values(F: HalfSpaceFunction, family: BallFamily) -> np.ndarray:
    """Cylinder integrals for every family ball (shared prefix tables)."""
    if not F.grid.compatible(family.grid):
        raise ConfigError("field and family grids differ")
    sc = BoxScanner(F)
    idx, cells = _family_geometry(family)
    out = np.empty(len(family))
    for r in np.unique(family.radii):
        sel = family.radii == r
        m = int(np.rint(r / F.grid.spacing))
        ci = idx[sel, 0] if F.grid.n == 1 else idx[sel, :]
        out[sel] = sc.box_values(ci, m, float(r))
    return out


# ---------------------------------------------------------------------------
# cones


@dataclass(frozen=True)
class ConeField:
    """A(F) on the grid plus a per-sample truncation mark (cone clipped by
    the box before reaching the top scale)."""

    values: GridFunction
    truncated: np.ndarray


def cone_square_function(F: HalfSpaceFunction) -> ConeField:
    """A(F)(x) = (sum_j |F(y, t_j)|^2 h^n w_j / t_j^n over |y - x| < t_j)^(1/2)
    at every grid sample, aperture 1.
    """
    g = F.grid
    h = g.spacing
    t = F.ladder.values
    w = F.ladder.log_weights
    n_ax = g.axis_count
    acc = np.zeros(g.shape)
    truncated = np.zeros(g.shape, dtype=bool)
    if g.n == 1:
        for j, tj in enumerate(t):
            kmax = math.ceil(tj / h - 1e-9) - 1
            sq = F.values[j] ** 2
            p = np.zeros(n_ax + 1)
            np.cumsum(sq, out=p[1:])
            i = np.arange(n_ax)
            lo = i - kmax
            hi = i + kmax
            clipped = (lo < 0) | (hi > n_ax - 1)
            truncated |= clipped
            lo = np.clip(lo, 0, n_ax - 1)
            hi = np.clip(hi, 0, n_ax - 1)
            acc += (p[hi + 1] - p[lo]) * (h * w[j] / tj)
    else:
        cols = np.arange(n_ax)
        for j, tj in enumerate(t):
            sq = F.values[j] ** 2
            psum = np.zeros((n_ax, n_ax + 1))
            np.cumsum(sq, axis=1, out=psum[:, 1:])
            kmax = math.ceil(tj / h - 1e-9) - 1
            r2 = (tj / h) ** 2
            slab = np.zeros(g.shape)
            for dy in range(-kmax, kmax + 1):
                d2 = r2 - dy * dy
                if d2 <= 0:
                    continue
                kx = math.ceil(math.sqrt(d2) - 1e-9) - 1
                if kx < 0:
                    continue
                lo = np.clip(cols - kx, 0, n_ax - 1)
                hi = np.clip(cols + kx, 0, n_ax - 1)
                truncated[:, (cols - kx < 0) | (cols + kx > n_ax - 1)] = True
                row_window = psum[:, hi + 1] - psum[:, lo]  # (rows, out-cols)
                if dy >= 0:
                    slab[: n_ax - dy, :] += row_window[dy:, :]
                    if dy > 0:
                        truncated[n_ax - dy :, :] = True
                else:
                    slab[-dy:, :] += row_window[: n_ax + dy, :]
                    truncated[:-dy, :] = True
            acc += slab * (g.cell_volume * w[j] / tj**g.n)
    vals = GridFunction(g, np.sqrt(np.maximum(acc, 0.0)))
    return ConeField(vals, truncated)


@dataclass(frozen=True)
class TentNormReport:
    p: float
    value: float
    truncated_fraction: float
    arg_index: int


def t2p_norm(
    F: HalfSpaceFunction, p: float, family: BallFamily | None = None
) -> TentNormReport:
    """Tent-space norm: for finite p the L^p norm of the cone functional;
    for p = inf the family sup of sqrt(carleson box)."""
    if p == math.inf:
        if family is None:
            raise ConfigError("the sup-norm variant needs a ball family")
        vals = np.sqrt(family_box_values(F, family))
        arg = int(np.argmax(vals))
        return TentNormReport(p, float(vals[arg]), 0.0, arg)
    if not (p > 0):
        raise ConfigError(f"tent exponent must be positive, got {p}")
    cone = cone_square_function(F)
    a = cone.values.values
    val = float(np.sum(a**p) * F.grid.cell_volume) ** (1.0 / p)
    frac = float(np.mean(cone.truncated))
    return TentNormReport(p, val, frac, -1)


def tent_curves(F: HalfSpaceFunction, family: BallFamily) -> dict[str, LimitCurve]:
    """Limit curves of sqrt(carleson box) in the three plain modes."""
    vals = np.sqrt(family_box_values(F, family))
    return {
        mode: bucketed_sup(vals, family, mode)
        for mode in ("small-radius", "large-radius", "far-from-origin")
    }


# ---------------------------------------------------------------------------
# harmonic-extension Carleson norms


@dataclass(frozen=True)
class CarlesonReport:
    value: float
    arg_index: int
    n_balls: int


def hmo_norm(ext: PoissonExtension, family: BallFamily) -> CarlesonReport:
    """sup over the family of sqrt(carleson box) of the full scaled
    gradient of the extension."""
    G = ext.gradient_magnitude()
    vals = np.sqrt(family_box_values(G, family))
    arg = int(np.argmax(vals))
    return CarlesonReport(float(vals[arg]), arg, len(family))


def gradient_carleson_curves(ext: PoissonExtension, family: BallFamily) -> dict[str, LimitCurve]:
    G = ext.gradient_magnitude()
    vals = np.sqrt(family_box_values(G, family))
    return {
        mode: bucketed_sup(vals, family, mode)
        for mode in ("small-radius", "large-radius", "far-from-origin")
    }


# ---------------------------------------------------------------------------
# dilate oscillation and the box comparison


@dataclass(frozen=True)
class DilateOscillation:
    value: float
    n_subballs: int
    clipped: bool


def _snap(grid: Grid, x: np.ndarray) -> np.ndarray:
    return np.rint((x + grid.halfwidth) / grid.spacing) * grid.spacing - grid.halfwidth


def dilate_oscillation(
    f: GridFunction,
    op: SpectralOperator,
    ball: Ball,
    k: int,
    clip: bool = False,
    _diff_tables: dict | None = None,
) -> DilateOscillation:
    """sup over sub-balls B' of the k-th dilate of the semigroup
    oscillation (mean over B' of (f - e^{-r' sqrt(L)} f)^2)^(1/2).

    Sub-balls: centers on the r/4 lattice inside the dilate of factor
    2^(k+2), radii r' in {r/2, r, 2r}.  With clip=False a dilate escaping
    the box raises; clip=True intersects the search region with the box
    and marks the result.
    """
    g = f.grid
    if g.n != 1:
        raise ConfigError("dilate oscillation is implemented for 1-D grids")
    if k < 0:
        raise ConfigError("dilate index must be >= 0")
    r = ball.radius
    c = ball.center[0]
    reach = 2.0 ** (k + 2) * r
    lim = g.halfwidth - g.spacing / 4.0
    clipped = abs(c) + reach >= lim
    if clipped and not clip:
        raise OutOfDomainError(
            f"dilate 2^{k + 2} B of B({c}, {r}) escapes the box; "
            "pass clip=True to intersect it with the box"
        )
    h = g.spacing
    best = -math.inf
    n_used = 0
    for r_raw in (r / 2.0, r, 2.0 * r):
        rp = max(h, round(r_raw / h) * h)
        if _diff_tables is not None and rp in _diff_tables:
            table = _diff_tables[rp]
        else:
            diff = f.values - poisson(op, f, rp).values
            table = SummedTable(g, diff**2)
            if _diff_tables is not None:
                _diff_tables[rp] = table
        # admissible centers: |c' - c| + r' <= reach, ball inside the box
        span = reach - rp
        if span < 0:
            continue
        stride = max(h, round(r / 4.0 / h) * h)
        offs = np.arange(-math.floor(span / stride + 1e-9), math.floor(span / stride + 1e-9) + 1)
        cand = _snap(g, c + offs * stride)
        cand = np.unique(cand)
        ok = np.abs(cand) + rp < lim
        cand = cand[ok]
        if cand.size == 0:
            continue
        ci = np.rint((cand + g.halfwidth) / h).astype(np.int64)
        m = int(round(rp / h))
        counts = max(0, 2 * m - 1)
        if counts == 0:
            continue
        sums = table.ball_sum(ci, m)
        val = math.sqrt(max(0.0, float(np.max(sums)) / counts))
        n_used += cand.size
        best = max(best, val)
    if n_used == 0:
        raise DegenerateRegionError("no admissible sub-ball in the dilate")
    return DilateOscillation(best, n_used, clipped)


def dilate_mean_oscillation(f: GridFunction, ball: Ball, k: int) -> float:
    """sup over 0 <= j <= k of the 1-mean oscillation on the 4^(j+1) dilate."""
    if k < 0:
        raise ConfigError("dilate index must be >= 0")
    best = -math.inf
    for j in range(k + 1):
        b = Ball(ball.center, 4.0 ** (j + 1) * ball.radius)
        best = max(best, mean_oscillation(f, b, 1.0))
    return best


@dataclass(frozen=True)
class BoxOscillationReport:
    """Comparison of the cylinder square-function average on a ball with
    the weighted sum of dilate oscillations.

    lhs = ( |B|^{-1} * integral over B x (0, r] of |t sqrt(L) e^{-t sqrt(L)} f|^2 dx dt/t )^(1/2)
    rhs = sum_{k<=k_max} 2^{-k} * dilate_oscillation_k, plus a recorded tail
    allowance tail = 2^{-k_max} * norm_hint for the discarded scales.
    """

    lhs: float
    rhs: float
    tail: float
    ratio: float
    per_k: tuple[float, ...]
    clipped: bool


def box_oscillation_ratio(
    f: GridFunction,
    op: SpectralOperator,
    ball: Ball,
    k_max: int,
    ladder: TLadder,
    norm_hint: float = 0.0,
    clip: bool = False,
    field: HalfSpaceFunction | None = None,
) -> BoxOscillationReport:
    """Measure lhs / (rhs + tail) for one ball; values <= 1 up to a modest
    constant are the expected regime."""
    if k_max < 0:
        raise ConfigError("k_max must be >= 0")
    g = f.grid
    if field is None:
        field = square_function_field(op, f, ladder)
    box = carleson_box(field, ball)
    # convert r^{-n} normalisation to |B|^{-1}
    from .grid import ball_volume

    vol = ball_volume(g, ball)
    lhs = math.sqrt(box * ball.radius**g.n / vol)
    cache: dict = {}
    per_k = []
    clipped_any = False
    for k in range(k_max + 1):
        d = dilate_oscillation(f, op, ball, k, clip=clip, _diff_tables=cache)
        clipped_any |= d.clipped
        per_k.append(d.value)
    rhs = float(sum(2.0**-k * v for k, v in enumerate(per_k)))
    tail = 2.0**-k_max * norm_hint
    denom = rhs + tail
    ratio = lhs / denom if denom > 0 else math.inf
    return BoxOscillationReport(lhs, rhs, tail, ratio, tuple(per_k), clipped_any)


# ---------------------------------------------------------------------------
# reproducing pairing


@dataclass(frozen=True)
class PairingReport:
    direct: float
    tent: float
    rel_error: float
    support_ok: bool


def reproducing_pairing_check(
    f: GridFunction,
    g_fn: GridFunction,
    op: SpectralOperator,
    ladder: TLadder,
    window: float = 1.0 / 3.0,
) -> PairingReport:
    """Compare integral of f * g with
    4 * double integral of (t sqrt(L) e^{-t sqrt(L)} f)(t sqrt(L) e^{-t sqrt(L)} g) dx dt/t.

    The identity holds for wall-vanishing data once the ladder covers the
    spectral scales; support_ok records whether both inputs live in the
    interior window (outside it, wall effects pollute the comparison).
    """
    grid = f.grid
    if not grid.compatible(g_fn.grid) or not grid.compatible(op.grid):
        raise ConfigError("pairing inputs live on different grids")
    direct = float(np.sum(f.values * g_fn.values) * grid.cell_volume)
    Ff = square_function_field(op, f, ladder)
    Fg = square_function_field(op, g_fn, ladder)
    w = ladder.log_weights
    tent = 0.0
    for j in range(len(ladder)):
        tent += w[j] * float(np.sum(Ff.values[j] * Fg.values[j]))
    tent *= 4.0 * grid.cell_volume
    denom = max(abs(direct), 1e-300)
    lim = window * grid.halfwidth
    if grid.n == 1:
        outside = np.abs(grid.axis) > lim
        sup_out = max(
            float(np.max(np.abs(f.values[outside]), initial=0.0)),
            float(np.max(np.abs(g_fn.values[outside]), initial=0.0)),
        )
    else:
        ax = np.abs(grid.axis)
        mask = np.maximum(ax[:, None], ax[None, :]) > lim
        sup_out = max(
            float(np.max(np.abs(f.values[mask]), initial=0.0)),
            float(np.max(np.abs(g_fn.values[mask]), initial=0.0)),
        )
    return PairingReport(direct, tent, abs(tent - direct) / denom, sup_out <= 1e-12)
