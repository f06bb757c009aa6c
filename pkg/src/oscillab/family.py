"""Finite ball families and bucketed limit curves.

Asymptotic statements ("as r -> 0", "for balls far from the origin") are
reported as curves over a finite ladder of cutoffs, never as extrapolated
scalars.  A bucket with no qualifying ball is absent (NaN value, count 0),
which is not the same as a zero supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, DegenerateRegionError, GridMismatchError
from .grid import Ball, Grid

MODES = (
    "small-radius",
    "large-radius",
    "far-from-origin",
    "large-and-supercritical",
    "far-and-supercritical",
)

_SUPERCRITICAL_MODES = ("large-and-supercritical", "far-and-supercritical")
_DISTANCE_MODES = ("far-from-origin", "far-and-supercritical")


@dataclass(frozen=True)
class FamilyPolicy:
    """How to enumerate a deterministic ball family on a grid.

    Centers walk the lattice c = k * center_stride (componentwise) with
    |c| <= max_center_norm.  Radii are either given explicitly or as a
    geometric ladder radius_min * radius_ratio^j <= radius_max.  Every
    radius is snapped to a multiple of h; balls touching the box boundary
    are dropped.
    """

    center_stride: float
    radii: tuple[float, ...] | None = None
    radius_min: float | None = None
    radius_ratio: float = 2.0
    radius_max: float | None = None
    max_center_norm: float = math.inf
    distance_min: float | None = None
    distance_ratio: float = 2.0
    distance_max: float | None = None


@dataclass(frozen=True)
class BallFamily:
    """Deterministically enumerated balls, tagged for bucketed scans.

    centers: (k, n) coordinates; radii: (k,); inner_distance = |c| - r,
    the largest a such that the ball avoids B(0, a).  radius_ladder and
    distance_ladder are the cutoff ladders used by bucketed_sup.
    """

    grid: Grid
    centers: np.ndarray
    radii: np.ndarray
    radius_ladder: np.ndarray
    distance_ladder: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.centers, dtype=np.float64).reshape(-1, self.grid.n)
        r = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        if c.shape[0] != r.shape[0]:
            raise ConfigError("family centers and radii length mismatch")
        if c.shape[0] == 0:
            raise ConfigError("empty ball family")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        object.__setattr__(self, "radius_ladder", np.asarray(self.radius_ladder, dtype=np.float64))
        object.__setattr__(self, "distance_ladder", np.asarray(self.distance_ladder, dtype=np.float64))

    def __len__(self) -> int:
        return self.radii.shape[0]

    @property
    def center_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.centers**2, axis=1))

    @property
    def inner_distance(self) -> np.ndarray:
        return self.center_norms - self.radii

    def ball(self, i: int) -> Ball:
        return Ball(tuple(self.centers[i]), float(self.radii[i]))

    def balls(self):
        for i in range(len(self)):
            yield self.ball(i)


def make_ball_family(grid: Grid, policy: FamilyPolicy) -> BallFamily:
    """Enumerate the family described by policy on grid.

    Config errors: stride not a positive multiple of h, radii above X/2,
    a geometric ladder below 4h, or an enumeration with no surviving ball.
    """
    h = grid.spacing
    X = grid.halfwidth
    stride = policy.center_stride
    if not (stride > 0) or abs(stride / h - round(stride / h)) > 1e-6:
        raise ConfigError(f"center stride {stride} is not a positive multiple of h={h}")

    if policy.radii is not None:
        radii = sorted(float(r) for r in policy.radii)
        if not radii:
            raise ConfigError("explicit radius list is empty")
        if radii[0] < h * (1 - 1e-9):
            raise ConfigError(f"radius {radii[0]} is below the spacing h={h}")
    else:
        r_min = policy.radius_min if policy.radius_min is not None else 4 * h
        r_max = policy.radius_max if policy.radius_max is not None else X / 2
        if r_min < 4 * h * (1 - 1e-9):
            raise ConfigError(f"geometric radius ladder must start at >= 4h, got {r_min}")
        if policy.radius_ratio <= 1:
            raise ConfigError("radius_ratio must exceed 1")
        radii = []
        r = r_min
        while r <= r_max * (1 + 1e-9):
            radii.append(r)
            r *= policy.radius_ratio
        if not radii:
            raise ConfigError("geometric radius ladder is empty")
    if radii[-1] > X / 2 * (1 + 1e-9):
        raise ConfigError(
            f"largest family radius {radii[-1]} exceeds half the box halfwidth {X / 2}"
        )

    # snap radii to the h-lattice, drop duplicates after snapping
    snapped: list[float] = []
    for r in radii:
        rs = round(r / h) * h
        if rs <= 0:
            rs = h
        if not snapped or abs(rs - snapped[-1]) > h / 2:
            snapped.append(rs)
    radii = snapped

    k_max = int(math.floor(min(X, policy.max_center_norm) / stride + 1e-9))
    marks = np.arange(-k_max, k_max + 1, dtype=np.float64) * stride
    if grid.n == 1:
        cand = marks[:, None]
    else:
        xx, yy = np.meshgrid(marks, marks, indexing="ij")
        cand = np.stack([xx.ravel(), yy.ravel()], axis=1)
    norms = np.sqrt(np.sum(cand**2, axis=1))
    cand = cand[norms <= policy.max_center_norm * (1 + 1e-12)]

    lim = X - h / 4.0
    centers_out = []
    radii_out = []
    for r in radii:
        ok = np.all(np.abs(cand) + r < lim, axis=1)
        kept = cand[ok]
        if kept.shape[0] == 0:
            continue
        order = np.lexsort(tuple(kept[:, d] for d in range(grid.n - 1, -1, -1)))
        kept = kept[order]
        centers_out.append(kept)
        radii_out.append(np.full(kept.shape[0], r))
    if not centers_out:
        raise ConfigError("ball family is empty: no center/radius pair fits the box")

    centers = np.concatenate(centers_out, axis=0)
    rr = np.concatenate(radii_out)

    radius_ladder = np.asarray(radii, dtype=np.float64)
    d_min = policy.distance_min if policy.distance_min is not None else float(radius_ladder[0])
    d_max = policy.distance_max if policy.distance_max is not None else X / 2
    if policy.distance_ratio <= 1:
        raise ConfigError("distance_ratio must exceed 1")
    dl = []
    d = d_min
    while d <= d_max * (1 + 1e-9):
        dl.append(d)
        d *= policy.distance_ratio
    if not dl:
        raise ConfigError("distance ladder is empty")
    return BallFamily(grid, centers, rr, radius_ladder, np.asarray(dl))


@dataclass(frozen=True)
class LimitCurve:
    """Bucketed suprema of a per-ball metric along a ladder of cutoffs.

    values[j] is the sup over the balls qualifying at cutoff ladder[j];
    NaN marks an absent bucket (no qualifying ball).  The limit direction
    depends on the mode: small-radius curves approach their limit at the
    ladder's small end, all other modes at the large end.
    """

    mode: str
    ladder: np.ndarray
    values: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"unknown curve mode {self.mode!r}")

    @property
    def present(self) -> np.ndarray:
        return self.counts > 0

    def present_values(self) -> tuple[np.ndarray, np.ndarray]:
        m = self.present
        return self.ladder[m], self.values[m]

    def terminal_value(self) -> float:
        """Value of the bucket nearest the limit (needs >= 1 present bucket)."""
        lad, vals = self.present_values()
        if vals.size == 0:
            raise DegenerateRegionError(f"curve {self.mode} has no present bucket")
        return float(vals[0] if self.mode == "small-radius" else vals[-1])

    def initial_value(self) -> float:
        lad, vals = self.present_values()
        if vals.size == 0:
            raise DegenerateRegionError(f"curve {self.mode} has no present bucket")
        return float(vals[-1] if self.mode == "small-radius" else vals[0])


def bucketed_sup(
    metric: np.ndarray | Callable[[Ball], float],
    family: BallFamily,
    mode: str,
    rho: np.ndarray | float | None = None,
    ladder: np.ndarray | None = None,
) -> LimitCurve:
    """Supremum of a per-ball metric within each ladder bucket.

    metric: array aligned with the family (preferred) or a per-ball callable.
    rho: critical-radius values at the ball centers; required by the
    supercritical modes, where a ball qualifies only if r >= rho(center).
    rho may contain +inf (no ball ever qualifies there).
    """
    if mode not in MODES:
        raise ConfigError(f"unknown curve mode {mode!r}")
    if callable(metric):
        vals = np.array([float(metric(b)) for b in family.balls()])
    else:
        vals = np.asarray(metric, dtype=np.float64).reshape(-1)
        if vals.shape[0] != len(family):
            raise ConfigError("metric array length does not match the family")

    if ladder is None:
        ladder = (
            family.distance_ladder if mode in _DISTANCE_MODES else family.radius_ladder
        )
    ladder = np.asarray(ladder, dtype=np.float64)
    if ladder.size == 0 or np.any(np.diff(ladder) <= 0):
        raise ConfigError("ladder must be strictly increasing and nonempty")

    r = family.radii
    if mode in _SUPERCRITICAL_MODES:
        if rho is None:
            raise ConfigError(f"mode {mode} needs critical-radius values")
        rho_arr = np.broadcast_to(np.asarray(rho, dtype=np.float64), r.shape)
        super_mask = r >= rho_arr
    else:
        super_mask = None

    inner = family.inner_distance
    out_vals = np.full(ladder.shape, np.nan)
    out_counts = np.zeros(ladder.shape, dtype=np.int64)
    for j, a in enumerate(ladder):
        if mode == "small-radius":
            mask = r <= a * (1 + 1e-12)
        elif mode == "large-radius":
            mask = r >= a * (1 - 1e-12)
        elif mode == "far-from-origin":
            mask = inner >= a * (1 - 1e-12)
        elif mode == "large-and-supercritical":
            mask = (r >= a * (1 - 1e-12)) & super_mask
        else:  # far-and-supercritical
            mask = (inner >= a * (1 - 1e-12)) & super_mask
        cnt = int(np.count_nonzero(mask))
        out_counts[j] = cnt
        if cnt:
            out_vals[j] = float(np.max(vals[mask]))
    return LimitCurve(mode, ladder, out_vals, out_counts)
