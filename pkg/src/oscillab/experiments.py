"""Named experiment scenarios and the config-driven runner.

Each experiment is a plain function returning a report dataclass, so tests
can call them directly; ``run`` binds them to a JSON config and emits a
deterministic bundle (CSV curves, JSON summary with a provenance block).
Assertion failures inside scenarios are collected and raised as
CriterionFailure after the bundle is written, so failed runs still leave
inspectable artifacts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .approx import (
    AveragingThresholds,
    ThresholdFractions,
    assign_cubes,
    bump,
    choose_thresholds,
    dyadic_average,
    mollify,
    p1_p2_check,
)
from .corpus import CORPUS, CorpusMember, member_by_name
from .errors import ConfigError, CriterionFailure, ThresholdExhaustedError
from .family import FamilyPolicy, LimitCurve, make_ball_family
from .grid import Ball, Grid, GridFunction, mean_oscillation
from .oscillation import (
    Verdict,
    bmo_l_norm,
    bmo_norm,
    oscillation_curves,
    semigroup_oscillation_curves,
    vanishing_verdict,
)
from .potential import (
    Potential,
    constant_potential,
    power_potential,
    solve_critical_radius,
    zero_potential,
)
from .semigroup import (
    DEFAULT_OP_CAP,
    SpectralOperator,
    TLadder,
    discretize,
    poisson_extension,
    square_function_field,
)
from .serialize import (
    config_hash,
    save_curves_csv,
    save_grid_function,
    save_json,
)
from .tent import gradient_carleson_curves, hmo_norm, reproducing_pairing_check, t2p_norm, tent_curves

RHO_CONSTANT_UNIT = 2.0**-0.5  # critical radius of the unit potential in 1-D


# ---------------------------------------------------------------------------
# shared helpers


def _operator_for(grid: Grid, cap: int) -> SpectralOperator:
    return discretize(constant_potential(1.0, grid.n), grid, cap=cap)


def _build_member(member: CorpusMember | str, grid: Grid, op: Optional[SpectralOperator], cap: int) -> tuple[GridFunction, Optional[SpectralOperator]]:
    m = member_by_name(member) if isinstance(member, str) else member
    if m.needs_operator and op is None:
        op = _operator_for(grid, cap)
    return m.build(grid, op), op


def _verdict_map(curves: dict[str, LimitCurve], tol: float, decay_factor: float) -> dict[str, Verdict]:
    return {mode: vanishing_verdict(c, tol, decay_factor) for mode, c in curves.items()}


def _all_vanishing(verdicts: dict[str, Verdict]) -> bool:
    return all(v.verdict == "VANISHING" for v in verdicts.values())


def _verdict_dict(verdicts: dict[str, Verdict]) -> dict:
    return {mode: asdict(v) for mode, v in sorted(verdicts.items())}


def lacunary_function(grid: Grid, k_max: int, width: float = 1.0) -> tuple[GridFunction, GridFunction]:
    """Sum of unit-mass bumps at 3^k, k = 1..k_max, plus the single bump at
    the origin (same sampled kernel) for reference oscillation values."""
    if k_max < 1:
        raise ConfigError("k_max must be >= 1")
    if grid.n != 1:
        raise ConfigError("the lacunary sum is a 1-D construction")
    reach = 3.0**k_max + width + 1.0
    if grid.halfwidth < reach:
        raise ConfigError(
            f"grid halfwidth {grid.halfwidth} does not cover the outermost bump (need >= {reach})"
        )
    h = grid.spacing
    probe = Grid(n=1, halfwidth=max(4.0 * width, 32 * h), spacing=h)
    kernel = bump(probe, width=width).values
    mask = np.abs(probe.axis) < width
    win = kernel[mask]
    koff = np.nonzero(mask)[0] - probe.half_cells

    vals = np.zeros(grid.axis_count)
    for k in range(1, k_max + 1):
        i = int(grid.coord_to_index(3.0**k))
        vals[i + koff] += win
    f = GridFunction(grid, vals)

    phi_vals = np.zeros(grid.axis_count)
    phi_vals[grid.half_cells + koff] = win
    return f, GridFunction(grid, phi_vals)


# ---------------------------------------------------------------------------
# critical-radius slope


@dataclass(frozen=True)
class RhoSlopeReport:
    slope: float
    expected: float
    n: int
    potential_kind: str
    exponent: Optional[float]
    x: tuple[float, ...]
    rho: tuple[float, ...]
    small_range_warning: bool

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "expected": self.expected,
            "n": self.n,
            "potential_kind": self.potential_kind,
            "exponent": self.exponent,
            "small_range_warning": self.small_range_warning,
        }


def exp_rho_slope(
    n: int,
    exponent: Optional[float] = None,
    potential: Optional[Potential] = None,
    x_min: float = 100.0,
    x_max: float = 1.0e4,
    points: int = 24,
    amplitude: float = 1.0,
    jitter: float = 0.0,
    rng: Optional[np.random.Generator] = None,
) -> RhoSlopeReport:
    """Least-squares slope of log rho against log |x| along the first axis.

    For the power potential the expected slope is 1 - exponent/2; for a
    constant potential it is 0.  x values below 10 are outside the
    asymptotic regime and only flagged, not rejected.
    """
    if potential is None:
        if exponent is None:
            raise ConfigError("either a potential or a power exponent is required")
        potential = power_potential(exponent, n, amplitude=amplitude)
    if potential.is_zero():
        raise ConfigError("the zero potential has an infinite critical radius everywhere")
    if x_min <= 0 or x_max <= x_min:
        raise ConfigError("need 0 < x_min < x_max")
    if points < 2:
        raise ConfigError("need at least two sample points")

    xs = np.geomspace(x_min, x_max, points)
    if jitter:
        if rng is None:
            raise ConfigError("jitter needs the run's PRNG stream")
        xs = xs * np.exp(rng.uniform(-jitter, jitter, size=xs.shape))
    centers = np.zeros((points, potential.n))
    centers[:, 0] = xs
    rho = solve_critical_radius(potential, centers).values

    slope = float(np.polyfit(np.log(xs), np.log(rho), 1)[0])
    if potential.kind == "power":
        expected = 1.0 - potential.eps / 2.0
    else:
        expected = 0.0
    return RhoSlopeReport(
        slope=slope,
        expected=expected,
        n=potential.n,
        potential_kind=potential.kind,
        exponent=potential.eps if potential.kind == "power" else None,
        x=tuple(float(v) for v in xs),
        rho=tuple(float(v) for v in rho),
        small_range_warning=bool(x_min < 10.0),
    )


# ---------------------------------------------------------------------------
# lacunary separation


@dataclass(frozen=True)
class LacunaryReport:
    k_max: int
    exponent: float
    amplitude: float
    norm: float
    tol: float
    verdicts: dict[str, Verdict]
    curves: dict[str, LimitCurve]
    floor: float
    floor_required: float
    floor_ok: bool
    trend_exponent: Optional[float]
    n_balls: int

    def to_dict(self) -> dict:
        return {
            "k_max": self.k_max,
            "exponent": self.exponent,
            "amplitude": self.amplitude,
            "norm": self.norm,
            "tol": self.tol,
            "verdicts": _verdict_dict(self.verdicts),
            "floor": self.floor,
            "floor_required": self.floor_required,
            "floor_ok": self.floor_ok,
            "trend_exponent": self.trend_exponent,
            "n_balls": self.n_balls,
        }


def exp_lacunary(
    k_max: int = 8,
    exponent: float = 1.05,
    amplitude: float = 0.002,
    halfwidth: float = 16384.0,
    spacing: float = 2.0**-8,
    stride: float = 0.25,
    radius_max: float = 4096.0,
    distance_max: float = 4096.0,
    tol_fraction: float = 0.05,
    decay_factor: float = 4.0,
    floor_factor: float = 0.3,
) -> LacunaryReport:
    """Bumps at 3^k under the analytic power-potential critical radius.

    The small-radius and far-supercritical oscillation curves are expected
    to vanish while the plain far curve stays pinned at the single-bump
    oscillation; the report carries all three verdicts, the far floor, and
    the fitted decay exponent of the far-supercritical curve.
    """
    grid = Grid(n=1, halfwidth=halfwidth, spacing=spacing)
    V = power_potential(exponent, 1, amplitude=amplitude)
    f, phi = lacunary_function(grid, k_max)
    floor_ref = mean_oscillation(phi, Ball((0.0,), 1.0), 2)

    fam = make_ball_family(
        grid,
        FamilyPolicy(
            center_stride=stride,
            radius_min=4 * spacing,
            radius_max=radius_max,
            distance_max=distance_max,
        ),
    )
    rho = solve_critical_radius(V, fam.centers).values
    norm = bmo_l_norm(f, rho, fam)
    tol = tol_fraction * norm.value

    curves = oscillation_curves(f, rho, fam)
    keep = ("small-radius", "far-from-origin", "far-and-supercritical")
    curves = {mode: curves[mode] for mode in keep}
    verdicts = {mode: vanishing_verdict(curves[mode], tol, decay_factor) for mode in keep}

    far = curves["far-from-origin"]
    floor = float(np.min(far.values[far.present]))
    floor_required = floor_factor * floor_ref

    fs = curves["far-and-supercritical"]
    m = fs.present & (fs.ladder >= 16.0) & (fs.values > 0)
    trend = None
    if int(np.count_nonzero(m)) >= 3:
        trend = float(np.polyfit(np.log(fs.ladder[m]), np.log(fs.values[m]), 1)[0])

    return LacunaryReport(
        k_max=k_max,
        exponent=exponent,
        amplitude=amplitude,
        norm=norm.value,
        tol=tol,
        verdicts=verdicts,
        curves=curves,
        floor=floor,
        floor_required=floor_required,
        floor_ok=bool(floor >= floor_required),
        trend_exponent=trend,
        n_balls=len(fam),
    )


# ---------------------------------------------------------------------------
# square-function membership agreement


def _default_corpus_policy(grid: Grid) -> FamilyPolicy:
    h = grid.spacing
    return FamilyPolicy(center_stride=max(0.5, 8 * h), radius_min=max(0.125, 4 * h), radius_max=grid.halfwidth / 4.0)


@dataclass(frozen=True)
class MembershipReport:
    member: str
    bmo_l: float
    t2_inf: float
    ratio: Optional[float]
    gamma_verdicts: dict[str, Verdict]
    eta_verdicts: dict[str, Verdict]
    gamma_vanishing: bool
    eta_vanishing: bool
    agree: bool
    gamma_curves: dict[str, LimitCurve]
    eta_curves: dict[str, LimitCurve]

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "bmo_l": self.bmo_l,
            "t2_inf": self.t2_inf,
            "ratio": self.ratio,
            "gamma_verdicts": _verdict_dict(self.gamma_verdicts),
            "eta_verdicts": _verdict_dict(self.eta_verdicts),
            "gamma_vanishing": self.gamma_vanishing,
            "eta_vanishing": self.eta_vanishing,
            "agree": self.agree,
        }


def exp_square_membership(
    member: CorpusMember | str,
    halfwidth: float = 16.0,
    spacing: float = 2.0**-6,
    policy: Optional[FamilyPolicy] = None,
    cap: int = DEFAULT_OP_CAP,
    tol_fraction: float = 0.05,
    decay_factor: float = 4.0,
    op: Optional[SpectralOperator] = None,
    ladder: Optional[TLadder] = None,
) -> MembershipReport:
    """Semigroup-metric curves of f against tent curves of the scaled square
    function field, with aggregate vanishing verdicts on both sides."""
    grid = Grid(n=1, halfwidth=halfwidth, spacing=spacing)
    if op is not None and not op.grid.compatible(grid):
        raise ConfigError("operator grid does not match the scenario grid")
    if op is None:
        op = _operator_for(grid, cap)
    f, op = _build_member(member, grid, op, cap)
    fam = make_ball_family(grid, policy or _default_corpus_policy(grid))
    if ladder is None:
        ladder = TLadder.geometric(grid.spacing, grid.halfwidth / 4.0, per_decade=16)

    norm = bmo_l_norm(f, RHO_CONSTANT_UNIT, fam)
    gamma_curves = semigroup_oscillation_curves(f, op, fam, ladder)
    size_curves = oscillation_curves(f, RHO_CONSTANT_UNIT, fam)
    for mode in ("large-and-supercritical", "far-and-supercritical"):
        gamma_curves[mode] = size_curves[mode]
    gtol = tol_fraction * norm.value
    gamma_verdicts = _verdict_map(gamma_curves, gtol, decay_factor)

    F = square_function_field(op, f, ladder)
    t2 = t2p_norm(F, math.inf, family=fam)
    eta_curves = tent_curves(F, fam)
    eta_verdicts = _verdict_map(eta_curves, tol_fraction * t2.value, decay_factor)

    gv = _all_vanishing(gamma_verdicts)
    ev = _all_vanishing(eta_verdicts)
    name = member if isinstance(member, str) else member.name
    return MembershipReport(
        member=name,
        bmo_l=norm.value,
        t2_inf=t2.value,
        ratio=(t2.value / norm.value) if norm.value > 0 else None,
        gamma_verdicts=gamma_verdicts,
        eta_verdicts=eta_verdicts,
        gamma_vanishing=gv,
        eta_vanishing=ev,
        agree=bool(gv == ev),
        gamma_curves=gamma_curves,
        eta_curves=eta_curves,
    )


# ---------------------------------------------------------------------------
# harmonic-extension agreement


@dataclass(frozen=True)
class ExtensionReport:
    member: str
    bmo_l: float
    hmo: float
    ratio: Optional[float]
    beta_verdicts: dict[str, Verdict]
    gamma_verdicts: dict[str, Verdict]
    beta_vanishing: bool
    gamma_vanishing: bool
    agree: bool
    beta_curves: dict[str, LimitCurve]
    gamma_curves: dict[str, LimitCurve]

    def to_dict(self) -> dict:
        return {
            "member": self.member,
            "bmo_l": self.bmo_l,
            "hmo": self.hmo,
            "ratio": self.ratio,
            "beta_verdicts": _verdict_dict(self.beta_verdicts),
            "gamma_verdicts": _verdict_dict(self.gamma_verdicts),
            "beta_vanishing": self.beta_vanishing,
            "gamma_vanishing": self.gamma_vanishing,
            "agree": self.agree,
        }


def exp_extension_agreement(
    member: CorpusMember | str,
    halfwidth: float = 16.0,
    spacing: float = 2.0**-6,
    policy: Optional[FamilyPolicy] = None,
    cap: int = DEFAULT_OP_CAP,
    tol_fraction: float = 0.05,
    decay_factor: float = 4.0,
    op: Optional[SpectralOperator] = None,
    ladder: Optional[TLadder] = None,
) -> ExtensionReport:
    """Carleson curves of the harmonic extension's scaled gradient against
    the plain oscillation curves of the boundary function."""
    grid = Grid(n=1, halfwidth=halfwidth, spacing=spacing)
    if op is not None and not op.grid.compatible(grid):
        raise ConfigError("operator grid does not match the scenario grid")
    if op is None:
        op = _operator_for(grid, cap)
    f, op = _build_member(member, grid, op, cap)
    fam = make_ball_family(grid, policy or _default_corpus_policy(grid))
    if ladder is None:
        ladder = TLadder.geometric(grid.spacing, grid.halfwidth / 4.0, per_decade=16)

    norm = bmo_l_norm(f, RHO_CONSTANT_UNIT, fam)
    gamma_curves = oscillation_curves(f, RHO_CONSTANT_UNIT, fam)
    gamma_verdicts = _verdict_map(gamma_curves, tol_fraction * norm.value, decay_factor)

    ext = poisson_extension(op, f, ladder)
    carleson = hmo_norm(ext, fam)
    beta_curves = gradient_carleson_curves(ext, fam)
    beta_verdicts = _verdict_map(beta_curves, tol_fraction * carleson.value, decay_factor)

    bv = _all_vanishing(beta_verdicts)
    gv = _all_vanishing(gamma_verdicts)
    name = member if isinstance(member, str) else member.name
    return ExtensionReport(
        member=name,
        bmo_l=norm.value,
        hmo=carleson.value,
        ratio=(carleson.value / norm.value) if norm.value > 0 else None,
        beta_verdicts=beta_verdicts,
        gamma_verdicts=gamma_verdicts,
        beta_vanishing=bv,
        gamma_vanishing=gv,
        agree=bool(bv == gv),
        beta_curves=beta_curves,
        gamma_curves=gamma_curves,
    )


# ---------------------------------------------------------------------------
# constructive approximation pipeline


@dataclass(frozen=True)
class PipelineReport:
    member: str
    eps: float
    norm: float
    verdict: str  # MEMBER / NONMEMBER
    thresholds: Optional[AveragingThresholds]
    p1_sup: Optional[float]
    p1_ok: Optional[bool]
    p2_max: Optional[float]
    p2_ok: Optional[bool]
    size_ratio_ok: Optional[bool]
    distance_averaged: Optional[float]
    distance_full: Optional[float]
    case_bound: Optional[float]
    corpus_bound: Optional[float]
    t_eps: Optional[float]
    exhausted_condition: Optional[str] = None

    def to_dict(self) -> dict:
        d = {
            "member": self.member,
            "eps": self.eps,
            "norm": self.norm,
            "verdict": self.verdict,
            "p1_sup": self.p1_sup,
            "p1_ok": self.p1_ok,
            "p2_max": self.p2_max,
            "p2_ok": self.p2_ok,
            "size_ratio_ok": self.size_ratio_ok,
            "distance_averaged": self.distance_averaged,
            "distance_full": self.distance_full,
            "case_bound": self.case_bound,
            "corpus_bound": self.corpus_bound,
            "t_eps": self.t_eps,
            "exhausted_condition": self.exhausted_condition,
        }
        if self.thresholds is not None:
            d["fine_exponent"] = self.thresholds.fine_exponent
            d["core_exponent"] = self.thresholds.core_exponent
            d["outer_exponent"] = self.thresholds.outer_exponent
            d["closed_form_bound"] = self.thresholds.closed_form_bound
        return d


def exp_pipeline(
    member: CorpusMember | str = "bump-narrow",
    eps_fraction: float = 0.1,
    halfwidth: float = float(2**16),
    spacing: float = 2.0**-8,
    stride: float = 2.0,
    osc_fraction: Optional[float] = 0.125,
    policy: Optional[FamilyPolicy] = None,
    corpus_factor: float = 25.0,
) -> PipelineReport:
    """Dyadic averaging pipeline at eps = eps_fraction * the function's
    critical-radius-adapted norm, under the unit potential.

    Returns a MEMBER report with both approximation distances, or a
    NONMEMBER report when the threshold scan is exhausted (constants are
    the canonical case: their supercritical size never drops).
    """
    grid = Grid(n=1, halfwidth=halfwidth, spacing=spacing)
    f, _ = _build_member(member, grid, None, cap=DEFAULT_OP_CAP)
    h = grid.spacing
    fam = make_ball_family(
        grid,
        policy
        or FamilyPolicy(center_stride=stride, radius_min=4 * h, radius_max=grid.halfwidth / 2.0),
    )
    norm = bmo_l_norm(f, RHO_CONSTANT_UNIT, fam)
    eps = eps_fraction * norm.value
    if eps <= 0:
        raise ConfigError("the zero function has nothing to approximate; eps would be 0")
    name = member if isinstance(member, str) else member.name

    fractions = ThresholdFractions(oscillation=osc_fraction)
    try:
        th = choose_thresholds(
            f,
            eps,
            RHO_CONSTANT_UNIT,
            fractions,
            slow_variation=(1.0, 1, RHO_CONSTANT_UNIT),
        )
    except ThresholdExhaustedError as e:
        return PipelineReport(
            member=name,
            eps=eps,
            norm=norm.value,
            verdict="NONMEMBER",
            thresholds=None,
            p1_sup=None,
            p1_ok=None,
            p2_max=None,
            p2_ok=None,
            size_ratio_ok=None,
            distance_averaged=None,
            distance_full=None,
            case_bound=None,
            corpus_bound=None,
            t_eps=None,
            exhausted_condition=str(e),
        )

    asg = assign_cubes(th, grid)
    A = dyadic_average(f, asg)
    gate = p1_p2_check(f, asg, A)

    d_avg = bmo_norm(f - A, fam).value

    # truncate to the M+2 region, then mollify at the fine-cube scale
    T = 2.0 ** (th.outer_exponent + 2)
    ax = grid.axis
    keep = (ax >= -T) & (ax < T)
    AX = GridFunction(grid, np.where(keep, A.values, 0.0))
    t_eps = max(2.0**-th.fine_exponent, 4.0 * h)
    F_eps = mollify(AX, t_eps).fn
    d_full = bmo_l_norm(f - F_eps, RHO_CONSTANT_UNIT, fam).value

    n = grid.n
    case_bound = (20.0 ** (n / 2.0) / 4.0**n + 2.0) * eps
    return PipelineReport(
        member=name,
        eps=eps,
        norm=norm.value,
        verdict="MEMBER",
        thresholds=th,
        p1_sup=gate.p1_sup,
        p1_ok=gate.p1_ok,
        p2_max=gate.p2_max,
        p2_ok=gate.p2_ok,
        size_ratio_ok=gate.size_ratio_ok,
        distance_averaged=d_avg,
        distance_full=d_full,
        case_bound=case_bound,
        corpus_bound=corpus_factor * eps,
        t_eps=t_eps,
        exhausted_condition=None,
    )


# ---------------------------------------------------------------------------
# config-driven runner


_TOP_KEYS = {"scenarios", "out_dir", "seed", "op_cap", "interior_window", "threads"}


@dataclass
class ExperimentConfig:
    scenarios: list[dict]
    out_dir: str = "oscillab-out"
    seed: int = 0
    op_cap: int = DEFAULT_OP_CAP
    interior_window: float = 1.0 / 3.0
    threads: Optional[int] = None
    raw: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        scenarios = d.get("scenarios", [])
        if not isinstance(scenarios, list) or any(not isinstance(s, dict) for s in scenarios):
            raise ConfigError("'scenarios' must be a list of objects")
        names = set()
        for s in scenarios:
            sid = s.get("id")
            if sid not in _SCENARIOS:
                raise ConfigError(f"unknown scenario id {sid!r}; known: {sorted(_SCENARIOS)}")
            name = s.get("name", sid)
            if name in names:
                raise ConfigError(f"duplicate scenario name {name!r}")
            names.add(name)
        seed = d.get("seed", 0)
        if not isinstance(seed, int):
            raise ConfigError("'seed' must be an integer")
        cap = d.get("op_cap", DEFAULT_OP_CAP)
        if not isinstance(cap, int) or cap < 2:
            raise ConfigError("'op_cap' must be an integer >= 2")
        window = d.get("interior_window", 1.0 / 3.0)
        if not (isinstance(window, (int, float)) and 0 < window <= 1):
            raise ConfigError("'interior_window' must lie in (0, 1]")
        threads = d.get("threads")
        if threads is not None and (not isinstance(threads, int) or threads < 1):
            raise ConfigError("'threads' must be a positive integer")
        return ExperimentConfig(
            scenarios=scenarios,
            out_dir=str(d.get("out_dir", "oscillab-out")),
            seed=seed,
            op_cap=cap,
            interior_window=float(window),
            threads=threads,
            raw=d,
        )


def _params(scenario: dict, allowed: set[str], required: set[str] = frozenset()) -> dict:
    p = {k: v for k, v in scenario.items() if k not in ("id", "name")}
    unknown = set(p) - allowed
    if unknown:
        raise ConfigError(f"scenario {scenario.get('id')!r}: unknown parameters {sorted(unknown)}")
    missing = required - set(p)
    if missing:
        raise ConfigError(f"scenario {scenario.get('id')!r}: missing parameters {sorted(missing)}")
    return p


def _parse_grid(p: dict, default_halfwidth: float = 16.0, default_spacing: float = 2.0**-6) -> Grid:
    return Grid(
        n=int(p.get("n", 1)),
        halfwidth=float(p.get("halfwidth", default_halfwidth)),
        spacing=float(p.get("spacing", default_spacing)),
    )


def _parse_policy(p: Optional[dict], grid: Grid) -> FamilyPolicy:
    if p is None:
        return _default_corpus_policy(grid)
    allowed = {
        "center_stride",
        "radii",
        "radius_min",
        "radius_ratio",
        "radius_max",
        "max_center_norm",
        "distance_min",
        "distance_ratio",
        "distance_max",
    }
    unknown = set(p) - allowed
    if unknown:
        raise ConfigError(f"unknown family keys {sorted(unknown)}")
    kw = dict(p)
    if "radii" in kw and kw["radii"] is not None:
        kw["radii"] = tuple(float(r) for r in kw["radii"])
    return FamilyPolicy(**kw)


def _parse_potential(p: Optional[dict], n: int) -> Potential:
    if p is None:
        return constant_potential(1.0, n)
    kind = p.get("kind")
    if kind == "zero":
        return zero_potential(n)
    if kind == "constant":
        return constant_potential(float(p.get("value", 1.0)), n)
    if kind == "power":
        return power_potential(float(p["exponent"]), n, amplitude=float(p.get("amplitude", 1.0)))
    raise ConfigError(f"unknown potential kind {kind!r} (config supports zero/constant/power)")


def _run_rho_slope(p: dict, cfg: ExperimentConfig, out: Path, rng: np.random.Generator):
    kw = _params({"id": "rho-slope", **p}, {"n", "exponent", "amplitude", "x_min", "x_max", "points", "potential", "jitter", "tolerance"})
    n = int(kw.pop("n", 1))
    tol = kw.pop("tolerance", None)
    pot = kw.pop("potential", None)
    potential = _parse_potential(pot, n) if pot is not None else None
    rep = exp_rho_slope(n, potential=potential, rng=rng, **kw)
    with (out / "rho.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "rho"])
        for x, r in zip(rep.x, rep.rho):
            w.writerow([repr(x), repr(r)])
    failures = []
    if tol is None:
        tol = 0.01 if rep.potential_kind != "power" else 0.05 * abs(rep.expected)
    if abs(rep.slope - rep.expected) > tol:
        failures.append(
            f"rho-slope: fitted slope {rep.slope:.4f} differs from expected {rep.expected:.4f} by more than {tol:.4f}"
        )
    return rep.to_dict(), failures


def _run_lacunary(p: dict, cfg: ExperimentConfig, out: Path, rng: np.random.Generator):
    kw = _params(
        {"id": "lacunary-separation", **p},
        {
            "k_max",
            "exponent",
            "amplitude",
            "halfwidth",
            "spacing",
            "stride",
            "radius_max",
            "distance_max",
            "tol_fraction",
            "decay_factor",
            "floor_factor",
            "assert_verdicts",
        },
    )
    check = bool(kw.pop("assert_verdicts", True))
    rep = exp_lacunary(**kw)
    save_curves_csv(out / "curves.csv", [rep.curves[m] for m in sorted(rep.curves)])
    failures = []
    if check:
        want = {
            "small-radius": "VANISHING",
            "far-from-origin": "NONVANISHING",
            "far-and-supercritical": "VANISHING",
        }
        for mode, expect in want.items():
            got = rep.verdicts[mode].verdict
            if got != expect:
                failures.append(f"lacunary-separation: {mode} verdict {got}, expected {expect}")
        if not rep.floor_ok:
            failures.append(
                f"lacunary-separation: far floor {rep.floor:.4f} below required {rep.floor_required:.4f}"
            )
    return rep.to_dict(), failures


def _run_membership(p: dict, cfg: ExperimentConfig, out: Path, rng: np.random.Generator):
    kw = _params(
        {"id": "square-function-agreement", **p},
        {"members", "halfwidth", "spacing", "family", "tol_fraction", "decay_factor", "assert_members"},
    )
    names = kw.pop("members", None) or [m.name for m in CORPUS]
    assert_members = set(kw.pop("assert_members", []))
    fam_spec = kw.pop("family", None)
    grid = _parse_grid({"halfwidth": kw.get("halfwidth", 16.0), "spacing": kw.get("spacing", 2.0**-6)})
    policy = _parse_policy(fam_spec, grid)
    op = _operator_for(grid, cfg.op_cap)
    sub = {}
    failures = []
    for name in names:
        rep = exp_square_membership(
            name,
            halfwidth=grid.halfwidth,
            spacing=grid.spacing,
            policy=policy,
            cap=cfg.op_cap,
            tol_fraction=float(kw.get("tol_fraction", 0.05)),
            decay_factor=float(kw.get("decay_factor", 4.0)),
            op=op,
        )
        sub[name] = rep.to_dict()
        save_curves_csv(out / f"{name}-gamma.csv", [rep.gamma_curves[m] for m in sorted(rep.gamma_curves)])
        save_curves_csv(out / f"{name}-eta.csv", [rep.eta_curves[m] for m in sorted(rep.eta_curves)])
        if name in assert_members and not rep.agree:
            failures.append(f"square-function-agreement: verdicts disagree on {name}")
    return {"members": sub}, failures


def _run_extension(p: dict, cfg: ExperimentConfig, out: Path, rng: np.random.Generator):
    kw = _params(
        {"id": "extension-agreement", **p},
        {"members", "halfwidth", "spacing", "family", "tol_fraction", "decay_factor", "assert_members"},
    )
    names = kw.pop("members", None) or [m.name for m in CORPUS]
    assert_members = set(kw.pop("assert_members", []))
    fam_spec = kw.pop("family", None)
    grid = _parse_grid({"halfwidth": kw.get("halfwidth", 16.0), "spacing": kw.get("spacing", 2.0**-6)})
    policy = _parse_policy(fam_spec, grid)
    op = _operator_for(grid, cfg.op_cap)
    sub = {}
    failures = []
    for name in names:
        rep = exp_extension_agreement(
            name,
            halfwidth=grid.halfwidth,
            spacing=grid.spacing,
            policy=policy,
            cap=cfg.op_cap,
            tol_fraction=float(kw.get("tol_fraction", 0.05)),
            decay_factor=float(kw.get("decay_factor", 4.0)),
            op=op,
        )
        sub[name] = rep.to_dict()
        save_curves_csv(out / f"{name}-beta.csv", [rep.beta_curves[m] for m in sorted(rep.beta_curves)])
        save_curves_csv(out / f"{name}-gamma.csv", [rep.gamma_curves[m] for m in sorted(rep.gamma_curves)])
        if name in assert_members and not rep.agree:
            failures.append(f"extension-agreement: verdicts disagree on {name}")
        if rep.ratio is not None and not math.isfinite(rep.ratio):
            failures.append(f"extension-agreement: non-finite norm ratio on {name}")
    return {"members": sub}, failures


def _run_pipeline(p: dict, cfg: ExperimentConfig, out: Path, rng: np.random.Generator):
    kw = _params(
        {"id": "approximation-pipeline", **p},
        {
            "member",
            "eps_fraction",
            "halfwidth",
            "spacing",
            "stride",
            "osc_fraction",
            "corpus_factor",
            "expect",
        },
    )
    expect = kw.pop("expect", "member").upper()
    if expect not in ("MEMBER", "NONMEMBER"):
        raise ConfigError("'expect' must be 'member' or 'nonmember'")
    rep = exp_pipeline(**kw)
    failures = []
    if rep.verdict != expect:
        failures.append(f"approximation-pipeline: verdict {rep.verdict}, expected {expect}")
    if rep.verdict == "MEMBER":
        if not (rep.p1_ok and rep.p2_ok and rep.size_ratio_ok):
            failures.append("approximation-pipeline: P1/P2 gate failed")
        if rep.distance_averaged > rep.corpus_bound:
            failures.append(
                f"approximation-pipeline: averaged distance {rep.distance_averaged:.4f} exceeds {rep.corpus_bound:.4f}"
            )
        if rep.distance_full > rep.corpus_bound:
            failures.append(
                f"approximation-pipeline: full distance {rep.distance_full:.4f} exceeds {rep.corpus_bound:.4f}"
            )
    return rep.to_dict(), failures


def _run_bmo_norms(p: dict, cfg: ExperimentConfig, out: Path, rng: np.random.Generator):
    kw = _params(
        {"id": "bmo-norms", **p},
        {"member", "halfwidth", "spacing", "family", "tol_fraction", "decay_factor"},
    )
    grid = _parse_grid(kw)
    policy = _parse_policy(kw.get("family"), grid)
    op = _operator_for(grid, cfg.op_cap)
    f, op = _build_member(str(kw.get("member", "bump-narrow")), grid, op, cfg.op_cap)
    fam = make_ball_family(grid, policy)
    ladder = TLadder.geometric(grid.spacing, grid.halfwidth / 4.0, per_decade=16)

    from .oscillation import tilde_bmo_l_norm

    plain = bmo_norm(f, fam)
    split = bmo_l_norm(f, RHO_CONSTANT_UNIT, fam)
    tilde = tilde_bmo_l_norm(f, op, fam, ladder)
    curves = oscillation_curves(f, RHO_CONSTANT_UNIT, fam)
    tolf = float(kw.get("tol_fraction", 0.05))
    decf = float(kw.get("decay_factor", 4.0))
    verdicts = _verdict_map(curves, tolf * split.value, decf)
    save_curves_csv(out / "curves.csv", [curves[m] for m in sorted(curves)])
    fam_ball = fam.ball(split.size_arg if split.size_arg >= 0 else 0)
    summary = {
        "member": str(kw.get("member", "bump-narrow")),
        "bmo": plain.value,
        "bmo_l": split.value,
        "bmo_l_oscillation_part": split.oscillation_part,
        "bmo_l_size_part": split.size_part,
        "tilde_bmo_l": tilde.value,
        "verdicts": _verdict_dict(verdicts),
        "arg_sup_ball": {"center": list(fam_ball.center), "radius": fam_ball.radius},
    }
    return summary, []


def _run_tent_norms(p: dict, cfg: ExperimentConfig, out: Path, rng: np.random.Generator):
    kw = _params(
        {"id": "tent-norms", **p},
        {"member", "halfwidth", "spacing", "family", "exponents"},
    )
    grid = _parse_grid(kw)
    policy = _parse_policy(kw.get("family"), grid)
    op = _operator_for(grid, cfg.op_cap)
    f, op = _build_member(str(kw.get("member", "bump-narrow")), grid, op, cfg.op_cap)
    fam = make_ball_family(grid, policy)
    ladder = TLadder.geometric(grid.spacing, grid.halfwidth / 4.0, per_decade=16)
    F = square_function_field(op, f, ladder)
    exponents = kw.get("exponents", [2.0, "inf"])
    norms = {}
    for e in exponents:
        pe = math.inf if e in ("inf", math.inf) else float(e)
        rep = t2p_norm(F, pe, family=fam)
        norms["inf" if pe == math.inf else repr(pe)] = {
            "value": rep.value,
            "truncated_fraction": rep.truncated_fraction,
        }
    curves = tent_curves(F, fam)
    save_curves_csv(out / "tent-curves.csv", [curves[m] for m in sorted(curves)])
    return {"member": str(kw.get("member", "bump-narrow")), "norms": norms}, []


def _run_pairing(p: dict, cfg: ExperimentConfig, out: Path, rng: np.random.Generator):
    kw = _params(
        {"id": "reproducing-pairing", **p},
        {"halfwidth", "spacing", "left", "right", "t_min", "t_max", "per_decade", "tolerance"},
    )
    grid = _parse_grid(kw)
    op = _operator_for(grid, cfg.op_cap)
    f, op = _build_member(str(kw.get("left", "gaussian")), grid, op, cfg.op_cap)
    g_fn, op = _build_member(str(kw.get("right", "gaussian")), grid, op, cfg.op_cap)
    ladder = TLadder.geometric(
        float(kw.get("t_min", grid.spacing / 4.0)),
        float(kw.get("t_max", grid.halfwidth / 4.0)),
        per_decade=int(kw.get("per_decade", 16)),
    )
    rep = reproducing_pairing_check(f, g_fn, op, ladder, window=cfg.interior_window)
    failures = []
    tol = kw.get("tolerance")
    if tol is not None and rep.rel_error > float(tol):
        failures.append(f"reproducing-pairing: relative error {rep.rel_error:.4%} exceeds {float(tol):.4%}")
    return (
        {
            "left": str(kw.get("left", "gaussian")),
            "right": str(kw.get("right", "bump-wide")),
            "direct": rep.direct,
            "tent": rep.tent,
            "rel_error": rep.rel_error,
            "support_ok": rep.support_ok,
        },
        failures,
    )


def _run_averaging(p: dict, cfg: ExperimentConfig, out: Path, rng: np.random.Generator):
    kw = _params(
        {"id": "averaging-pipeline", **p},
        {"member", "halfwidth", "spacing", "eps", "eps_fraction", "osc_fraction", "family"},
    )
    grid = _parse_grid(kw, default_halfwidth=64.0, default_spacing=2.0**-5)
    f, _ = _build_member(str(kw.get("member", "bump-narrow")), grid, None, cap=cfg.op_cap)
    policy = _parse_policy(kw.get("family"), grid)
    fam = make_ball_family(grid, policy)
    norm = bmo_l_norm(f, RHO_CONSTANT_UNIT, fam)
    if "eps" in kw and kw["eps"] is not None:
        eps = float(kw["eps"])
    else:
        eps = float(kw.get("eps_fraction", 0.1)) * norm.value
    if eps <= 0:
        raise ConfigError("averaging needs eps > 0")
    fractions = ThresholdFractions(oscillation=kw.get("osc_fraction", 0.125))
    th = choose_thresholds(f, eps, RHO_CONSTANT_UNIT, fractions)
    asg = assign_cubes(th, grid)
    A = dyadic_average(f, asg)
    gate = p1_p2_check(f, asg, A)

    with (out / "assignment.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["level"] + [f"corner_{ax}" for ax in "xy"[: grid.n]])
        for lv, corner in zip(asg.cube_levels.tolist(), asg.cube_corners.tolist()):
            w.writerow([lv] + list(corner))
    save_grid_function(out / "averaged.json", A)
    gate_doc = {
        "eps": eps,
        "p1_sup": gate.p1_sup,
        "p1_ok": gate.p1_ok,
        "p2_max": gate.p2_max,
        "p2_ok": gate.p2_ok,
        "n_adjacent_pairs": gate.n_adjacent_pairs,
        "size_ratio_ok": gate.size_ratio_ok,
    }
    save_json(out / "gate.json", gate_doc)
    summary = {
        "member": str(kw.get("member", "bump-narrow")),
        "eps": eps,
        "norm": norm.value,
        "fine_exponent": th.fine_exponent,
        "core_exponent": th.core_exponent,
        "outer_exponent": th.outer_exponent,
        "n_cubes": int(asg.cube_levels.shape[0]),
        "gate": gate_doc,
    }
    failures = []
    if not (gate.p1_ok and gate.p2_ok and gate.size_ratio_ok):
        failures.append("averaging-pipeline: P1/P2 gate failed")
    return summary, failures


_SCENARIOS = {
    "rho-slope": _run_rho_slope,
    "lacunary-separation": _run_lacunary,
    "square-function-agreement": _run_membership,
    "extension-agreement": _run_extension,
    "approximation-pipeline": _run_pipeline,
    "bmo-norms": _run_bmo_norms,
    "tent-norms": _run_tent_norms,
    "reproducing-pairing": _run_pairing,
    "averaging-pipeline": _run_averaging,
}


def run(config: ExperimentConfig | dict, out_dir: Optional[str] = None) -> dict:
    """Execute every scenario in the config and write the report bundle.

    The bundle is written even when assertions fail; failures are then
    raised as one CriterionFailure listing every failed check.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_dict(config)
    base = Path(out_dir if out_dir is not None else cfg.out_dir)
    base.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))

    summary: dict = {
        "provenance": {
            "config_sha256": config_hash(cfg.raw),
            "package_version": __version__,
            "seed": cfg.seed,
            "prng_stream": "oscillab-run",
            "op_cap": cfg.op_cap,
            "interior_window": cfg.interior_window,
        },
        "scenarios": {},
        "failures": [],
    }
    for scenario in cfg.scenarios:
        sid = scenario["id"]
        name = scenario.get("name", sid)
        sub = base / name
        sub.mkdir(parents=True, exist_ok=True)
        frag, failures = _SCENARIOS[sid](
            {k: v for k, v in scenario.items() if k != "name"}, cfg, sub, rng
        )
        frag = dict(frag)
        frag["id"] = sid
        summary["scenarios"][name] = frag
        summary["failures"].extend(failures)

    save_json(base / "summary.json", summary)
    if summary["failures"]:
        raise CriterionFailure("; ".join(summary["failures"]))
    return summary
