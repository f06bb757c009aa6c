"""Oscillation, tent-space, and critical-radius experiments on sampled boxes.

Exports resolve lazily (PEP 562) so that importing the package, and in
particular the command-line module, does not pull numpy before the CLI has
had a chance to pin the BLAS thread count.
"""

from importlib import import_module

__version__ = "0.1.0"

_EXPORTS: dict[str, tuple[str, ...]] = {
    "errors": (
        "BracketError",
        "ConfigError",
        "CriterionFailure",
        "DegenerateRegionError",
        "GridMismatchError",
        "LadderError",
        "OscillabError",
        "OutOfDomainError",
        "ThresholdExhaustedError",
    ),
    "grid": (
        "Ball",
        "DyadicCube",
        "Grid",
        "GridFunction",
        "SummedTable",
        "ball_average",
        "ball_sample_count",
        "ball_volume",
        "cube_average",
        "cube_oscillation",
        "mean_oscillation",
        "region_Rk",
    ),
    "family": (
        "BallFamily",
        "FamilyPolicy",
        "LimitCurve",
        "bucketed_sup",
        "make_ball_family",
    ),
    "potential": (
        "CriticalRadiusField",
        "CriticalRadiusOptions",
        "Potential",
        "almost_monotonicity_check",
        "constant_potential",
        "critical_radius",
        "normalized_mass",
        "power_potential",
        "rh_constant",
        "rh_ratio",
        "slow_variation_fit",
        "solve_critical_radius",
        "tabulated_potential",
        "zero_potential",
    ),
    "semigroup": (
        "HalfSpaceFunction",
        "PoissonExtension",
        "SpectralOperator",
        "TLadder",
        "apply_spectral",
        "default_ladder",
        "discretize",
        "heat",
        "heat_kernel_deficit",
        "poisson",
        "poisson_extension",
        "poisson_one_deficit",
        "poisson_subordinated",
        "square_function_field",
    ),
    "oscillation": (
        "OscillationReport",
        "SplitNormReport",
        "Verdict",
        "bmo_l_norm",
        "bmo_norm",
        "log_average_bound",
        "oscillation_curves",
        "semigroup_oscillation_curves",
        "tilde_bmo_l_norm",
        "vanishing_verdict",
    ),
    "tent": (
        "box_oscillation_ratio",
        "carleson_box",
        "carleson_box_strict_tent",
        "cone_square_function",
        "dilate_mean_oscillation",
        "dilate_oscillation",
        "gradient_carleson_curves",
        "hmo_norm",
        "reproducing_pairing_check",
        "t2p_norm",
        "tent_curves",
    ),
    "approx": (
        "AveragingThresholds",
        "DyadicAssignment",
        "ThresholdFractions",
        "approx_distance",
        "assign_cubes",
        "bump",
        "choose_thresholds",
        "dyadic_average",
        "mollify",
        "p1_p2_check",
    ),
    "corpus": (
        "CORPUS",
        "CorpusMember",
        "corpus_grid",
        "corpus_operator",
        "member_by_name",
    ),
    "serialize": (
        "canonical_json",
        "config_hash",
        "load_grid_function",
        "load_samples",
        "save_curves_csv",
        "save_family_csv",
        "save_grid_function",
        "save_json",
        "save_samples",
    ),
    "experiments": (
        "ExperimentConfig",
        "ExtensionReport",
        "LacunaryReport",
        "MembershipReport",
        "PipelineReport",
        "RhoSlopeReport",
        "exp_extension_agreement",
        "exp_lacunary",
        "exp_pipeline",
        "exp_rho_slope",
        "exp_square_membership",
        "lacunary_function",
        "run",
    ),
}

_SUBMODULES = tuple(_EXPORTS) + ("cli",)
_NAME_TO_MODULE = {
    name: module for module, names in _EXPORTS.items() for name in names
}

__all__ = sorted(_NAME_TO_MODULE) + ["__version__"]


def __getattr__(name: str):
    module = _NAME_TO_MODULE.get(name)
    if module is not None:
        return getattr(import_module(f".{module}", __name__), name)
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(set(__all__) | set(_SUBMODULES))
