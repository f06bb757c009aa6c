"""Oscillation functionals over ball families and their limit curves.

Two families of metrics:

* plain oscillation  (mean over B of |f - mean_B f|^p)^(1/p), and the
  supercritical companion (mean over B of |f|^2)^(1/2) (or mean |f| for
  p = 1);
* semigroup oscillation  (r^{-n} * integral over B of
  |f - e^{-r sqrt(L)} f|^2)^(1/2), where the subtraction uses the
  subordinated semigroup at time t = r exactly (one operator application
  per distinct radius in the family).

The norm that drives verdicts splits at the critical radius: oscillation
is measured on balls with r < rho(center), plain size on balls with
r >= rho(center); the two suprema are summed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateRegionError, LadderError
from .family import BallFamily, LimitCurve, bucketed_sup
from .grid import GridFunction, SummedTable, disc_rows
from .potential import rho_values_for
from .semigroup import SpectralOperator, TLadder, poisson

VERDICTS = ("VANISHING", "NONVANISHING", "INCONCLUSIVE")


# ---------------------------------------------------------------------------
# vectorised family scans


def _family_geometry(family: BallFamily):
    g = family.grid
    idx = g.coord_to_index(family.centers)
    if not np.all(np.abs(family.centers - g.index_to_coord(idx)) <= 1e-6 * g.spacing):
        raise ConfigError("family centers must sit on the grid lattice")
    cells = np.rint(family.radii / g.spacing).astype(np.int64)
    if np.any(np.abs(family.radii / g.spacing - cells) > 1e-6):
        raise ConfigError("family radii must be multiples of the spacing")
    return idx, cells


def _counts_for_cells(n: int, cells: np.ndarray) -> np.ndarray:
    out = np.empty(cells.shape, dtype=np.int64)
    for m in np.unique(cells):
        if n == 1:
            c = max(0, 2 * int(m) - 1)
        else:
            dy, kx = disc_rows(int(m))
            c = int(np.sum(2 * kx + 1))
        out[cells == m] = c
    return out


def family_ball_sums(values: np.ndarray, family: BallFamily) -> np.ndarray:
    """Sum of a sample array over every family ball (prefix-table path)."""
    g = family.grid
    idx, cells = _family_geometry(family)
    table = SummedTable(g, values)
    out = np.empty(len(family))
    for m in np.unique(cells):
        sel = cells == m
        ci = idx[sel, 0] if g.n == 1 else idx[sel, :]
        out[sel] = table.ball_sum(ci, int(m))
    return out


@dataclass(frozen=True)
class FamilyStats:
    """Per-ball sample counts and means over one family."""

    counts: np.ndarray
    mean: np.ndarray
    mean_sq: np.ndarray
    mean_abs: np.ndarray

    @property
    def oscillation2(self) -> np.ndarray:
        return np.sqrt(np.maximum(0.0, self.mean_sq - self.mean**2))

    @property
    def size2(self) -> np.ndarray:
        return np.sqrt(self.mean_sq)


def family_stats(f: GridFunction, family: BallFamily) -> FamilyStats:
    if not f.grid.compatible(family.grid):
        raise ConfigError("function and family live on different grids")
    _, cells = _family_geometry(family)
    counts = _counts_for_cells(f.grid.n, cells)
    if np.any(counts == 0):
        bad = int(np.nonzero(counts == 0)[0][0])
        raise DegenerateRegionError(
            f"family ball {bad} (radius {family.radii[bad]}) contains no sample"
        )
    s1 = family_ball_sums(f.values, family)
    s2 = family_ball_sums(f.values**2, family)
    sa = family_ball_sums(np.abs(f.values), family)
    return FamilyStats(counts, s1 / counts, s2 / counts, sa / counts)


def family_oscillation_p(f: GridFunction, family: BallFamily, p: float) -> np.ndarray:
    """Per-ball (mean |f - mean|^p)^(1/p); p = 2 is closed-form, other p
    fall back to member-value loops."""
    st = family_stats(f, family)
    if p == 2.0:
        return st.oscillation2
    if p < 1:
        raise ConfigError("oscillation exponent must be >= 1")
    from .grid import ball_member_values

    out = np.empty(len(family))
    for i, b in enumerate(family.balls()):
        vals = ball_member_values(f, b)
        out[i] = float(np.mean(np.abs(vals - st.mean[i]) ** p) ** (1.0 / p))
    return out


# ---------------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class OscillationReport:
    value: float
    arg_index: int
    p: float
    n_balls: int


def bmo_norm(f: GridFunction, family: BallFamily, p: float = 2.0) -> OscillationReport:
    """sup of p-mean oscillation over the family."""
    vals = family_oscillation_p(f, family, p)
    arg = int(np.argmax(vals))
    return OscillationReport(float(vals[arg]), arg, p, len(family))


@dataclass(frozen=True)
class SplitNormReport:
    """Norm split at the critical radius: subcritical oscillation plus
    supercritical size.  A part with no qualifying ball reports value 0 and
    present=False; the total is the sum of present parts."""

    value: float
    oscillation_part: float
    size_part: float
    oscillation_present: bool
    size_present: bool
    oscillation_arg: int
    size_arg: int
    p: float
    n_balls: int


def bmo_l_norm(
    f: GridFunction,
    rho,
    family: BallFamily,
    p: float = 2.0,
) -> SplitNormReport:
    """Critical-radius-adapted norm: sup oscillation over balls with
    r < rho(center) plus sup mean size over balls with r >= rho(center)
    (ties count as supercritical).  rho may be +inf (no size part)."""
    rho_c = rho_values_for(rho, family.centers)
    sub = family.radii < rho_c
    sup_mask = ~sub
    osc = family_oscillation_p(f, family, p)
    st = family_stats(f, family)
    size = st.size2 if p == 2.0 else st.mean_abs

    osc_part, osc_arg = _masked_sup(osc, sub)
    size_part, size_arg = _masked_sup(size, sup_mask)
    total = (osc_part if osc_arg >= 0 else 0.0) + (size_part if size_arg >= 0 else 0.0)
    return SplitNormReport(
        total,
        osc_part if osc_arg >= 0 else 0.0,
        size_part if size_arg >= 0 else 0.0,
        osc_arg >= 0,
        size_arg >= 0,
        osc_arg,
        size_arg,
        p,
        len(family),
    )


def _masked_sup(vals: np.ndarray, mask: np.ndarray) -> tuple[float, int]:
    if not np.any(mask):
        return math.nan, -1
    idx = np.nonzero(mask)[0]
    j = idx[int(np.argmax(vals[idx]))]
    return float(vals[j]), int(j)


# ---------------------------------------------------------------------------
# semigroup oscillation


def semigroup_difference_values(
    f: GridFunction,
    op: SpectralOperator,
    family: BallFamily,
    ladder: TLadder | None = None,
) -> np.ndarray:
    """Per-ball (r^{-n} * sum over B of (f - e^{-r sqrt(L)} f)^2 h^n)^(1/2).

    One subordinated application per distinct radius.  When a ladder is
    given, radii outside its range raise LadderError (the scale is not
    covered by the configured scale range)."""
    g = f.grid
    if not g.compatible(op.grid):
        raise ConfigError("function and operator grids differ")
    _, cells = _family_geometry(family)
    if ladder is not None:
        r = family.radii
        if np.any(r < ladder.values[0] * (1 - 1e-9)) or np.any(
            r > ladder.values[-1] * (1 + 1e-9)
        ):
            raise LadderError(
                "family radii fall outside the configured scale range "
                f"[{ladder.values[0]}, {ladder.values[-1]}]"
            )
    out = np.empty(len(family))
    idx, _ = _family_geometry(family)
    for r in np.unique(family.radii):
        sel = family.radii == r
        diff = f.values - poisson(op, f, float(r)).values
        table = SummedTable(g, diff**2)
        m = int(round(r / g.spacing))
        ci = idx[sel, 0] if g.n == 1 else idx[sel, :]
        sums = table.ball_sum(ci, m)
        out[sel] = np.sqrt(np.maximum(0.0, sums) * g.cell_volume / r**g.n)
    return out


def tilde_bmo_l_norm(
    f: GridFunction,
    op: SpectralOperator,
    family: BallFamily,
    ladder: TLadder | None = None,
) -> OscillationReport:
    """sup over the family of the semigroup oscillation metric."""
    vals = semigroup_difference_values(f, op, family, ladder)
    arg = int(np.argmax(vals))
    return OscillationReport(float(vals[arg]), arg, 2.0, len(family))


def semigroup_oscillation_curves(
    f: GridFunction,
    op: SpectralOperator,
    family: BallFamily,
    ladder: TLadder | None = None,
) -> dict[str, LimitCurve]:
    """Limit curves of the semigroup oscillation metric in the three plain
    modes (small-radius, large-radius, far-from-origin)."""
    vals = semigroup_difference_values(f, op, family, ladder)
    return {
        mode: bucketed_sup(vals, family, mode)
        for mode in ("small-radius", "large-radius", "far-from-origin")
    }


def oscillation_curves(
    f: GridFunction,
    rho,
    family: BallFamily,
) -> dict[str, LimitCurve]:
    """Limit curves of plain oscillation (three plain modes) and of the
    supercritical size metric (the two supercritical modes).

    The first three curves use the 2-mean oscillation; the supercritical
    curves use (mean over B of |f|^2)^(1/2).
    """
    rho_c = rho_values_for(rho, family.centers)
    st = family_stats(f, family)
    osc = st.oscillation2
    size = st.size2
    out: dict[str, LimitCurve] = {}
    for mode in ("small-radius", "large-radius", "far-from-origin"):
        out[mode] = bucketed_sup(osc, family, mode)
    for mode in ("large-and-supercritical", "far-and-supercritical"):
        out[mode] = bucketed_sup(size, family, mode, rho=rho_c)
    return out


# ---------------------------------------------------------------------------
# subcritical size growth


@dataclass(frozen=True)
class LogBoundReport:
    constant: float
    arg_index: int
    norm: float
    n_subcritical: int


def log_average_bound(f: GridFunction, rho, family: BallFamily, norm: float) -> LogBoundReport:
    """Smallest C with mean_B |f| <= C (1 + log(rho(x_B)/r_B)) * norm over
    subcritical balls.  norm must be positive (a zero norm is degenerate)."""
    if not (norm > 0):
        raise DegenerateRegionError("log bound needs a positive norm")
    rho_c = rho_values_for(rho, family.centers)
    sub = family.radii < rho_c
    if not np.any(sub):
        raise DegenerateRegionError("no subcritical ball in the family")
    st = family_stats(f, family)
    idx = np.nonzero(sub)[0]
    with np.errstate(divide="ignore"):
        denom = (1.0 + np.log(rho_c[idx] / family.radii[idx])) * norm
    ratios = st.mean_abs[idx] / denom
    j = int(np.argmax(ratios))
    return LogBoundReport(float(ratios[j]), int(idx[j]), norm, idx.size)


# ---------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class Verdict:
    verdict: str
    terminal: float
    initial: float
    decay_factor: float
    tol: float
    min_decay_factor: float
    n_present: int


def vanishing_verdict(
    curve: LimitCurve, tol: float, min_decay_factor: float = 4.0
) -> Verdict:
    """Classify a limit curve.

    VANISHING: terminal bucket <= tol and the curve decayed by at least
    min_decay_factor from its far end (a curve that is identically zero
    counts as decayed).  NONVANISHING: terminal >= 3 * tol with no decay
    trend.  Anything else: INCONCLUSIVE.  Requires >= 3 present buckets.
    """
    if tol < 0:
        raise ConfigError("tolerance must be >= 0")
    n_present = int(np.count_nonzero(curve.present))
    if n_present < 3:
        raise LadderError(
            f"verdict needs >= 3 present buckets, curve {curve.mode} has {n_present}"
        )
    terminal = curve.terminal_value()
    initial = curve.initial_value()
    if terminal == 0.0:
        decay = math.inf
    elif initial == 0.0:
        decay = 0.0
    else:
        decay = initial / terminal
    decayed = decay >= min_decay_factor
    if terminal <= tol and decayed:
        v = "VANISHING"
    elif terminal >= 3.0 * tol and not decayed:
        v = "NONVANISHING"
    else:
        v = "INCONCLUSIVE"
    return Verdict(v, terminal, initial, decay, tol, min_decay_factor, n_present)
