"""Spectral discretization of -Laplacian + V and its functional calculus.

The operator is the standard second-difference Laplacian plus a sampled
potential, with homogeneous Dirichlet walls exactly at the box faces; the
unknowns are the interior samples.  All semigroup actions go through the
eigendecomposition: apply psi means  f -> E psi(sqrt(lambda)) E^T f  on the
interior, zero at the walls.

Half-space objects (functions of (x, t) with t on a geometric ladder) carry
their ladder with them; integrals in dt/t use trapezoid weights in log t,
which is superalgebraically accurate for the smooth integrands that appear
here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import eigh_tridiagonal

from .errors import ConfigError, GridMismatchError, LadderError
from .grid import Grid, GridFunction
from .potential import Potential, UNIT_SPHERE_AREA

DEFAULT_OP_CAP = 4096


# ---------------------------------------------------------------------------
# scale ladders


@dataclass(frozen=True)
class TLadder:
    """Ascending positive scales t_1 < ... < t_m."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise ConfigError("empty scale ladder")
        if np.any(v <= 0) or np.any(np.diff(v) <= 0):
            raise ConfigError("ladder values must be positive and strictly increasing")
        object.__setattr__(self, "values", v)

    @staticmethod
    def geometric(t_min: float, t_max: float, per_decade: int = 16) -> "TLadder":
        if not (0 < t_min < t_max):
            raise ConfigError(f"need 0 < t_min < t_max, got ({t_min}, {t_max})")
        if per_decade < 2:
            raise ConfigError("per_decade must be >= 2")
        count = int(math.floor(per_decade * math.log10(t_max / t_min))) + 1
        vals = t_min * 10.0 ** (np.arange(count) / per_decade)
        if vals[-1] < t_max * (1 - 1e-12):
            vals = np.append(vals, t_max)
        else:
            vals[-1] = t_max
        return TLadder(vals)

    def __len__(self) -> int:
        return self.values.size

    @cached_property
    def log_weights(self) -> np.ndarray:
        """Trapezoid weights in log t: sum F(t_j) w_j ~ integral F dt/t."""
        return log_weights_for(self.values)

    def truncate(self, t_cap: float) -> "TLadder":
        """Prefix with t <= t_cap.  Raises LadderError when the ladder does
        not cover (its smallest value exceeds t_cap) or stops short of it."""
        v = self.values
        if t_cap < v[0] * (1 - 1e-12):
            raise LadderError(
                f"ladder starts at {v[0]}, above the requested cap {t_cap}"
            )
        if t_cap > v[-1] * (1 + 1e-9):
            raise LadderError(
                f"ladder ends at {v[-1]}, below the requested cap {t_cap}"
            )
        keep = v <= t_cap * (1 + 1e-12)
        return TLadder(v[keep])


def log_weights_for(values: np.ndarray) -> np.ndarray:
    v = np.log(np.asarray(values, dtype=np.float64))
    if v.size == 1:
        return np.array([1.0])  # degenerate; caller beware
    w = np.empty_like(v)
    w[1:-1] = (v[2:] - v[:-2]) / 2.0
    w[0] = (v[1] - v[0]) / 2.0
    w[-1] = (v[-1] - v[-2]) / 2.0
    return w


def default_ladder(grid: Grid, per_decade: int = 16) -> TLadder:
    return TLadder.geometric(grid.spacing, grid.halfwidth / 4.0, per_decade)


# ---------------------------------------------------------------------------
# the discrete operator


@dataclass(frozen=True)
class SpectralOperator:
    """Eigendecomposition of the Dirichlet finite-difference operator.

    eigenvalues: (M,) ascending, all positive; eigenvectors: (M, M) with
    orthonormal columns; M = number of interior samples.
    """

    grid: Grid
    potential_kind: str
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def interior_count(self) -> int:
        return self.eigenvalues.size

    def interior_values(self, f: GridFunction) -> np.ndarray:
        self._check(f)
        if self.grid.n == 1:
            return f.values[1:-1]
        return f.values[1:-1, 1:-1].ravel()

    def embed_interior(self, vals: np.ndarray) -> GridFunction:
        out = np.zeros(self.grid.shape)
        if self.grid.n == 1:
            out[1:-1] = vals
        else:
            m = self.grid.axis_count - 2
            out[1:-1, 1:-1] = vals.reshape(m, m)
        return GridFunction(self.grid, out)

    def coefficients(self, f: GridFunction) -> np.ndarray:
        return self.eigenvectors.T @ self.interior_values(f)

    def synthesize(self, coef: np.ndarray) -> GridFunction:
        return self.embed_interior(self.eigenvectors @ coef)

    def _check(self, f: GridFunction) -> None:
        if not f.grid.compatible(self.grid):
            raise GridMismatchError("function grid does not match the operator grid")


def sample_potential(V: Potential, grid: Grid) -> np.ndarray:
    """Potential samples on the grid; the singular cell of a power kind is
    replaced by its exact cell average so the discrete operator sees the
    right local mass."""
    if V.kind == "tabulated":
        if not V.samples.grid.compatible(grid):
            raise GridMismatchError("tabulated potential lives on a different grid")
        return V.samples.values.copy()
    if V.kind == "zero":
        return np.zeros(grid.shape)
    if V.kind == "constant":
        return np.full(grid.shape, V.constant * V.amplitude)
    # power kind
    if V.n != grid.n:
        raise GridMismatchError(
            f"power potential has ambient dimension {V.n}, grid has {grid.n}"
        )
    p = V.eps - 2.0
    h = grid.spacing
    if grid.n == 1:
        vals = np.abs(grid.axis) ** p
        # cell [-h/2, h/2]: mean of |y|^p = (h/2)^p / (p+1)
        vals[grid.half_cells] = (h / 2.0) ** p / (p + 1.0)
        return V.amplitude * vals
    a = grid.axis
    rr = np.sqrt(a[:, None] ** 2 + a[None, :] ** 2)
    with np.errstate(divide="ignore"):
        vals = rr**p
    # origin cell: exact average of |y|^p over the square of side h
    theta = (np.arange(64) + 0.5) / 64.0 * (math.pi / 4.0)
    cell = 8.0 * (h / 2.0) ** (p + 2) / (p + 2.0) * np.mean(np.cos(theta) ** (-(p + 2.0))) * (math.pi / 4.0)
    vals[grid.half_cells, grid.half_cells] = cell / h**2
    return V.amplitude * vals


def discretize(V: Potential, grid: Grid, cap: int = DEFAULT_OP_CAP) -> SpectralOperator:
    """Assemble and diagonalise -Laplacian_h + V with Dirichlet walls.

    cap bounds the axis sample count (n=1) or total interior count (n=2);
    exceeding it is a config error, not an OOM.
    """
    m_axis = grid.axis_count - 2
    if m_axis < 1:
        raise ConfigError("grid too small for an interior")
    total = m_axis if grid.n == 1 else m_axis * m_axis
    if (grid.n == 1 and grid.axis_count > cap) or (grid.n == 2 and total > cap):
        raise ConfigError(
            f"operator size {total} exceeds the cap {cap}; "
            "raise the cap explicitly if this is intended"
        )
    h = grid.spacing
    vals = sample_potential(V, grid)
    if grid.n == 1:
        diag = 2.0 / h**2 + vals[1:-1]
        off = np.full(m_axis - 1, -1.0 / h**2)
        w, e = eigh_tridiagonal(diag, off)
    else:
        inner = vals[1:-1, 1:-1].ravel()
        lap1 = (
            np.diag(np.full(m_axis, 2.0 / h**2))
            + np.diag(np.full(m_axis - 1, -1.0 / h**2), 1)
            + np.diag(np.full(m_axis - 1, -1.0 / h**2), -1)
        )
        eye = np.eye(m_axis)
        mat = np.kron(lap1, eye) + np.kron(eye, lap1) + np.diag(inner)
        from scipy.linalg import eigh

        w, e = eigh(mat)
    kind = V.kind
    return SpectralOperator(grid, kind, np.ascontiguousarray(w), np.ascontiguousarray(e))


# ---------------------------------------------------------------------------
# functional calculus


def apply_spectral(op: SpectralOperator, psi: Callable[[np.ndarray], np.ndarray], f: GridFunction) -> GridFunction:
    """psi(sqrt(L)) f.  psi receives the array of sqrt(eigenvalues)."""
    s = np.sqrt(op.eigenvalues)
    vals = np.asarray(psi(s), dtype=np.float64)
    if vals.shape != s.shape or not np.all(np.isfinite(vals)):
        raise ConfigError("psi must map the spectrum to finite values of the same shape")
    return op.synthesize(vals * op.coefficients(f))


def heat(op: SpectralOperator, f: GridFunction, t: float) -> GridFunction:
    if t < 0:
        raise ConfigError("heat time must be >= 0")
    return apply_spectral(op, lambda s: np.exp(-t * s**2), f)


def poisson(op: SpectralOperator, f: GridFunction, t: float) -> GridFunction:
    if t < 0:
        raise ConfigError("poisson time must be >= 0")
    return apply_spectral(op, lambda s: np.exp(-t * s), f)


def poisson_subordinated(op: SpectralOperator, f: GridFunction, t: float, rel_tol: float = 1e-10) -> GridFunction:
    """e^{-t sqrt(L)} f via the subordination integral

        (1/sqrt(pi)) int_0^inf e^{-u} u^{-1/2} e^{-(t^2/4u) L} f du,

    evaluated per eigenvalue with adaptive quadrature.  Independent of the
    direct exponential up to linear algebra, so it serves as a cross-check.
    """
    if t < 0:
        raise ConfigError("subordinated time must be >= 0")
    lam = op.eigenvalues
    if t == 0.0:
        g = np.ones_like(lam)
    else:
        def integrand(u: float) -> np.ndarray:
            return np.exp(-u - (t * t / (4.0 * u)) * lam) / math.sqrt(u)

        val, _err = quad_vec(integrand, 0.0, np.inf, epsrel=rel_tol, epsabs=1e-300)
        g = val / math.sqrt(math.pi)
    return op.synthesize(g * op.coefficients(f))


# ---------------------------------------------------------------------------
# half-space fields


@dataclass(frozen=True)
class HalfSpaceFunction:
    """Samples of a function of (x, t): values[j] is the t_j slice."""

    grid: Grid
    ladder: TLadder
    values: np.ndarray
    channel: str = ""

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        expect = (len(self.ladder),) + self.grid.shape
        if v.shape != expect:
            raise ConfigError(f"half-space values shape {v.shape}, expected {expect}")
        object.__setattr__(self, "values", v)

    def slice_at(self, j: int) -> GridFunction:
        return GridFunction(self.grid, self.values[j])


def _field_from_psi(
    op: SpectralOperator, f: GridFunction, ladder: TLadder, psi_ts, channel: str
) -> HalfSpaceFunction:
    coef = op.coefficients(f)
    s = np.sqrt(op.eigenvalues)
    out = np.empty((len(ladder),) + op.grid.shape)
    for j, t in enumerate(ladder.values):
        vals = psi_ts(t, s) * coef
        out[j] = op.embed_interior(op.eigenvectors @ vals).values
    return HalfSpaceFunction(op.grid, ladder, out, channel)


def square_function_field(op: SpectralOperator, f: GridFunction, ladder: TLadder) -> HalfSpaceFunction:
    """F(x, t) = t sqrt(L) e^{-t sqrt(L)} f on the ladder."""
    return _field_from_psi(op, f, ladder, lambda t, s: t * s * np.exp(-t * s), "tsqrtL-exp")


@dataclass(frozen=True)
class PoissonExtension:
    """u(x, t) = e^{-t sqrt(L)} f with its scaled derivatives.

    t_derivative holds t * du/dt (spectrally exact, = -t sqrt(L) u);
    x_gradient holds t * du/dx (fourth-order central stencil inside,
    second-order one-sided at the walls).
    """

    u: HalfSpaceFunction
    t_derivative: HalfSpaceFunction
    x_gradient: HalfSpaceFunction

    @property
    def grid(self) -> Grid:
        return self.u.grid

    @property
    def ladder(self) -> TLadder:
        return self.u.ladder

    def gradient_magnitude(self) -> HalfSpaceFunction:
        """sqrt((t du/dt)^2 + (t du/dx)^2), the full scaled gradient size."""
        mag = np.sqrt(self.t_derivative.values**2 + self.x_gradient.values**2)
        return HalfSpaceFunction(self.grid, self.ladder, mag, "t-grad-magnitude")


def _ddx(values: np.ndarray, h: float) -> np.ndarray:
    """d/dx along the last axis: 4th-order central inside, 2nd-order at the
    edges (one-sided at the walls, central just inside them)."""
    out = np.empty_like(values)
    v = values
    out[..., 2:-2] = (v[..., :-4] - 8 * v[..., 1:-3] + 8 * v[..., 3:-1] - v[..., 4:]) / (12 * h)
    out[..., 1] = (v[..., 2] - v[..., 0]) / (2 * h)
    out[..., -2] = (v[..., -1] - v[..., -3]) / (2 * h)
    out[..., 0] = (-3 * v[..., 0] + 4 * v[..., 1] - v[..., 2]) / (2 * h)
    out[..., -1] = (3 * v[..., -1] - 4 * v[..., -2] + v[..., -3]) / (2 * h)
    return out


def poisson_extension(op: SpectralOperator, f: GridFunction, ladder: TLadder) -> PoissonExtension:
    if op.grid.n != 1:
        raise ConfigError("the half-space extension is implemented for 1-D grids")
    u = _field_from_psi(op, f, ladder, lambda t, s: np.exp(-t * s), "subordinated")
    dt = _field_from_psi(op, f, ladder, lambda t, s: -t * s * np.exp(-t * s), "t-dt")
    gx = np.empty_like(u.values)
    for j, t in enumerate(ladder.values):
        gx[j] = t * _ddx(u.values[j], op.grid.spacing)
    return PoissonExtension(u, dt, HalfSpaceFunction(op.grid, ladder, gx, "t-dx"))


# ---------------------------------------------------------------------------
# interior windows and kernel deficits


def interior_index_window(grid: Grid, window: float = 1.0 / 3.0) -> np.ndarray:
    """Indices (per axis) of samples with |x| <= window * halfwidth."""
    if not (0 < window <= 1):
        raise ConfigError("window fraction must lie in (0, 1]")
    return np.nonzero(np.abs(grid.axis) <= window * grid.halfwidth + 1e-12)[0]


@dataclass(frozen=True)
class HeatKernelDeficitReport:
    t: float
    q: float
    fitted_constant: float
    max_deficit: float
    domination_violation: float
    kernel_min: float
    window: float


def heat_kernel_deficit(
    op: SpectralOperator,
    free_op: SpectralOperator,
    t: float,
    q: float,
    rho: np.ndarray | float,
    window: float = 1.0 / 3.0,
) -> HeatKernelDeficitReport:
    """Pointwise comparison of the heat kernel with the free kernel on the
    same grid.

    deficit(x, y) = K_free(x, y) - K_V(x, y), compared against the envelope
    (sqrt(t)/rho(x))^(2 - n/q) * phi_t(x - y) with the widened Gaussian
    phi_t(z) = (4 pi t)^(-n/2) exp(-|z|^2 / (8t)).  The fitted constant is
    the max ratio over the interior window; for the free potential the
    deficit vanishes identically and the constant is 0.
    """
    if op.grid.n != 1:
        raise ConfigError("kernel deficits are implemented for 1-D grids")
    if not op.grid.compatible(free_op.grid):
        raise GridMismatchError("the two operators live on different grids")
    h = op.grid.spacing
    kv = (op.eigenvectors * np.exp(-t * op.eigenvalues)) @ op.eigenvectors.T / h
    k0 = (free_op.eigenvectors * np.exp(-t * free_op.eigenvalues)) @ free_op.eigenvectors.T / h
    deficit = k0 - kv
    dom = float(np.max(kv - k0))
    kmin = float(np.min(kv))

    idx = interior_index_window(op.grid, window) - 1  # interior offsets
    idx = idx[(idx >= 0) & (idx < op.interior_count)]
    x = op.grid.axis[1:-1][idx]
    rho_x = np.broadcast_to(np.asarray(rho, dtype=np.float64), (op.interior_count,))[idx]

    d = deficit[np.ix_(idx, idx)]
    if float(np.max(np.abs(d))) < 1e-13:
        return HeatKernelDeficitReport(t, q, 0.0, float(np.max(np.abs(d))), dom, kmin, window)
    z = x[:, None] - x[None, :]
    phi = (4 * math.pi * t) ** (-0.5) * np.exp(-(z**2) / (8 * t))
    scale = (math.sqrt(t) / rho_x[:, None]) ** (2.0 - 1.0 / q)
    ratio = d / (scale * phi)
    return HeatKernelDeficitReport(
        t, q, float(np.max(ratio)), float(np.max(np.abs(d))), dom, kmin, window
    )


@dataclass(frozen=True)
class PoissonOneReport:
    alpha: float
    prefactor: float
    t_values: np.ndarray
    max_deficit_per_t: np.ndarray
    n_samples: int
    window: float


def poisson_one_deficit(
    op: SpectralOperator,
    ladder: TLadder,
    rho: np.ndarray | float,
    window: float = 1.0 / 3.0,
) -> PoissonOneReport:
    """Fit |e^{-t sqrt(L)} 1 - 1| ~ C (t / rho(x))^alpha over the window,
    pooled over ladder points with t <= rho(x).

    Needs at least 4 ladder values below min rho on the window, else
    LadderError.  Deficits below 1e-14 are floored before the log fit.
    """
    if op.grid.n != 1:
        raise ConfigError("implemented for 1-D grids")
    ones = GridFunction.constant(op.grid, 1.0)
    idx = interior_index_window(op.grid, window)
    x_all = op.grid.axis
    rho_full = np.broadcast_to(np.asarray(rho, dtype=np.float64), x_all.shape)
    rho_w = rho_full[idx]
    rho_min = float(np.min(rho_w))

    usable = ladder.values[ladder.values <= rho_min]
    if usable.size < 4:
        raise LadderError(
            f"only {usable.size} ladder values lie below min rho = {rho_min}; "
            "need at least 4 for the deficit fit"
        )

    logs_y = []
    logs_z = []
    max_per_t = np.empty(len(ladder))
    for j, t in enumerate(ladder.values):
        u = poisson(op, ones, t)
        deficit = np.abs(u.values[idx] - 1.0)
        max_per_t[j] = float(np.max(deficit)) if deficit.size else math.nan
        mask = t <= rho_w
        if np.any(mask):
            d = np.maximum(deficit[mask], 1e-14)
            logs_y.append(np.log(d))
            logs_z.append(np.log(t / rho_w[mask]))
    y = np.concatenate(logs_y)
    z = np.concatenate(logs_z)
    slope, intercept = np.polyfit(z, y, 1)
    return PoissonOneReport(
        float(slope), float(math.exp(intercept)), ladder.values.copy(), max_per_t, y.size, window
    )
