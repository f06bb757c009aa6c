"""Canonical test functions shared by experiments and the acceptance suite.

Ten members, all deterministic.  Each member is a closed-form profile except
``eigenvector``, which needs a spectral operator.  Members carry a ``smooth``
flag marking the ones eligible for the mollifier-sweep check (flat members
give an identically zero distance curve, so strict decrease is meaningless
for them; the log spike has unbounded second derivative only at the window
edges, which stays within the sweep tolerance).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError
from .grid import Grid, GridFunction
from .potential import constant_potential
from .semigroup import SpectralOperator, discretize

__all__ = [
    "CorpusMember",
    "CORPUS",
    "corpus_grid",
    "corpus_operator",
    "member_by_name",
]


def _profile(u: np.ndarray) -> np.ndarray:
    """Peak-one smooth bump profile on |u| < 1, zero outside."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    with np.errstate(divide="ignore", over="ignore"):
        val = np.exp(1.0 - 1.0 / (1.0 - u[inside] ** 2))
    out[inside] = val
    return out


def _window(x: np.ndarray, inner: float = 10.0, outer: float = 14.0) -> np.ndarray:
    """Smooth plateau: 1 on |x| <= inner, 0 beyond outer."""
    u = np.clip((np.abs(x) - inner) / (outer - inner), 0.0, 1.0)
    return _profile(u)


def _zero(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


def _const_one(x: np.ndarray) -> np.ndarray:
    return np.ones_like(x)


def _const_neg_half(x: np.ndarray) -> np.ndarray:
    return np.full_like(x, -0.5)


def _bump_narrow(x: np.ndarray) -> np.ndarray:
    return _profile(x)


def _bump_wide(x: np.ndarray) -> np.ndarray:
    return _profile(x / 4.0)


def _smooth_step(x: np.ndarray) -> np.ndarray:
    return np.tanh(x / 0.3) * _window(x)


def _gaussian(x: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * x**2)


def _lacunary(x: np.ndarray) -> np.ndarray:
    return _profile(x - 3.0) + _profile(x - 9.0)


def _log_spike(x: np.ndarray) -> np.ndarray:
    # smooth log-type profile, scale 1/4, windowed so it vanishes at the wall
    return -0.5 * np.log(x**2 + 0.0625) * _window(x)


@dataclass(frozen=True)
class CorpusMember:
    name: str
    summary: str
    smooth: bool  # eligible for the mollifier-sweep acceptance check
    needs_operator: bool = False
    fn: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def build(self, grid: Grid, op: Optional[SpectralOperator] = None) -> GridFunction:
        if self.needs_operator:
            if op is None:
                raise ConfigError(f"corpus member {self.name!r} needs a spectral operator")
            if op.grid != grid:
                raise ConfigError("operator grid does not match the requested grid")
            vec = op.eigenvectors[:, 3].copy()
            # deterministic sign: largest-magnitude entry positive
            pivot = int(np.argmax(np.abs(vec)))
            if vec[pivot] < 0:
                vec = -vec
            f = op.embed_interior(vec)
            return GridFunction(grid, f.values / np.sqrt(grid.cell_volume))
        assert self.fn is not None
        return GridFunction.from_callable(grid, self.fn)


CORPUS: tuple[CorpusMember, ...] = (
    CorpusMember("zero", "identically zero", smooth=False, fn=_zero),
    CorpusMember("const-one", "constant 1", smooth=False, fn=_const_one),
    CorpusMember("const-neg-half", "constant -1/2", smooth=False, fn=_const_neg_half),
    CorpusMember("bump-narrow", "peak-one smooth bump on B(0,1)", smooth=True, fn=_bump_narrow),
    CorpusMember("bump-wide", "peak-one smooth bump on B(0,4)", smooth=True, fn=_bump_wide),
    CorpusMember("smooth-step", "tanh step at scale 0.3, windowed", smooth=True, fn=_smooth_step),
    CorpusMember("gaussian", "unit gaussian", smooth=True, fn=_gaussian),
    CorpusMember("lacunary", "bumps at 3 and 9", smooth=True, fn=_lacunary),
    CorpusMember(
        "eigenvector",
        "fourth eigenvector of the unit-potential operator, L2-normalized",
        smooth=True,
        needs_operator=True,
    ),
    CorpusMember("log-spike", "smooth log spike at scale 1/4, windowed", smooth=True, fn=_log_spike),
)

_BY_NAME = {m.name: m for m in CORPUS}


def member_by_name(name: str) -> CorpusMember:
    try:
        return _BY_NAME[name]
    except KeyError:
        raise ConfigError(f"unknown corpus member {name!r}") from None


def corpus_grid() -> Grid:
    return Grid(n=1, halfwidth=16.0, spacing=2.0**-6)


def corpus_operator(grid: Optional[Grid] = None, cap: int = 4096) -> SpectralOperator:
    g = grid if grid is not None else corpus_grid()
    return discretize(constant_potential(1.0, g.n), g, cap=cap)
