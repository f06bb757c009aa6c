import math

import numpy as np
import pytest

from oscillab.errors import ConfigError, GridMismatchError, LadderError
from oscillab.grid import Grid, GridFunction
from oscillab.potential import constant_potential, zero_potential
from oscillab.semigroup import (
    TLadder,
    apply_spectral,
    default_ladder,
    discretize,
    heat,
    heat_kernel_deficit,
    interior_index_window,
    poisson,
    poisson_extension,
    poisson_one_deficit,
    poisson_subordinated,
    square_function_field,
)


@pytest.fixture(scope="module")
def small_op():
    g = Grid(n=1, halfwidth=4.0, spacing=0.125)
    return discretize(constant_potential(1.0, 1), g)


def _interior_zeroed(f: GridFunction) -> np.ndarray:
    v = f.values.copy()
    v[0] = v[-1] = 0.0
    return v


def test_dirichlet_eigenvalues_constant_potential():
    # -Laplacian_h + c on N interior points has
    # lambda_k = (4/h^2) sin^2(k pi / (2(N+1))) + c
    g = Grid(n=1, halfwidth=2.0, spacing=0.25)
    op = discretize(constant_potential(3.0, 1), g)
    N = op.interior_count
    assert N == g.axis_count - 2
    k = np.arange(1, N + 1)
    want = 4.0 / 0.25**2 * np.sin(k * math.pi / (2 * (N + 1))) ** 2 + 3.0
    assert np.allclose(np.sort(op.eigenvalues), np.sort(want), rtol=1e-12)


def test_eigenvectors_orthonormal(small_op):
    e = small_op.eigenvectors
    assert np.allclose(e.T @ e, np.eye(small_op.interior_count), atol=1e-12)


def test_discretize_cap():
    g = Grid(n=1, halfwidth=4.0, spacing=0.125)
    with pytest.raises(ConfigError):
        discretize(constant_potential(1.0, 1), g, cap=16)


def test_2d_operator_eigenvalues_are_sums():
    # zero potential on a square grid: eigenvalues are sums of two 1-D ones
    g2 = Grid(n=2, halfwidth=1.0, spacing=0.25)
    op2 = discretize(zero_potential(2), g2)
    g1 = Grid(n=1, halfwidth=1.0, spacing=0.25)
    op1 = discretize(zero_potential(1), g1)
    want = np.sort((op1.eigenvalues[:, None] + op1.eigenvalues[None, :]).ravel())
    assert np.allclose(np.sort(op2.eigenvalues), want, rtol=1e-10)


def test_heat_semigroup_law(small_op):
    g = small_op.grid
    rng = np.random.default_rng(5)
    f = GridFunction(g, rng.normal(size=g.shape))
    lhs = heat(small_op, heat(small_op, f, 0.3), 0.7)
    rhs = heat(small_op, f, 1.0)
    assert np.max(np.abs(lhs.values - rhs.values)) <= 1e-10


def test_heat_at_zero_is_interior_identity(small_op):
    g = small_op.grid
    rng = np.random.default_rng(6)
    f = GridFunction(g, rng.normal(size=g.shape))
    got = heat(small_op, f, 0.0)
    assert np.allclose(got.values, _interior_zeroed(f), atol=1e-10)


def test_subordination_matches_direct_exponential(small_op):
    g = small_op.grid
    rng = np.random.default_rng(7)
    for _ in range(3):
        f = GridFunction(g, rng.normal(size=g.shape))
        for t in (0.1, 1.0):
            direct = poisson(small_op, f, t)
            sub = poisson_subordinated(small_op, f, t)
            assert np.max(np.abs(direct.values - sub.values)) <= 1e-8


def test_subordination_at_zero(small_op):
    f = GridFunction.constant(small_op.grid, 2.0)
    got = poisson_subordinated(small_op, f, 0.0)
    assert np.allclose(got.values, _interior_zeroed(f))


def test_apply_spectral_validates_psi(small_op):
    f = GridFunction.constant(small_op.grid, 1.0)
    with pytest.raises(ConfigError):
        apply_spectral(small_op, lambda s: s[:-1], f)
    with pytest.raises(ConfigError):
        apply_spectral(small_op, lambda s: np.full_like(s, np.nan), f)


def test_apply_spectral_rejects_other_grid(small_op):
    other = Grid(n=1, halfwidth=4.0, spacing=0.25)
    with pytest.raises(GridMismatchError):
        heat(small_op, GridFunction.constant(other, 1.0), 0.1)


def test_ladder_construction_and_truncate():
    lad = TLadder.geometric(0.01, 1.0, per_decade=8)
    assert lad.values[0] == 0.01
    assert lad.values[-1] == 1.0
    assert np.all(np.diff(lad.values) > 0)
    # trapezoid weights in log t telescope to log(t_max / t_min)
    assert np.sum(lad.log_weights) == pytest.approx(math.log(100.0))
    cut = lad.truncate(0.1)
    assert cut.values[-1] <= 0.1 * (1 + 1e-12)
    with pytest.raises(LadderError):
        lad.truncate(0.001)
    with pytest.raises(LadderError):
        lad.truncate(5.0)
    with pytest.raises(ConfigError):
        TLadder(np.array([0.2, 0.1]))
    with pytest.raises(ConfigError):
        TLadder.geometric(1.0, 0.5)


def test_default_ladder_spans_h_to_quarter_box():
    g = Grid(n=1, halfwidth=4.0, spacing=0.125)
    lad = default_ladder(g)
    assert lad.values[0] == pytest.approx(0.125)
    assert lad.values[-1] == pytest.approx(1.0)


def test_square_function_field_on_eigenvector(small_op):
    vec = small_op.eigenvectors[:, 2]
    f = small_op.embed_interior(vec)
    lad = TLadder(np.array([0.25, 0.5, 1.0]))
    field = square_function_field(small_op, f, lad)
    s = math.sqrt(small_op.eigenvalues[2])
    for j, t in enumerate(lad.values):
        want = t * s * math.exp(-t * s) * f.values
        assert np.allclose(field.values[j], want, atol=1e-12)


def test_poisson_extension_derivative_identity(small_op):
    vec = small_op.eigenvectors[:, 1]
    f = small_op.embed_interior(vec)
    lad = TLadder(np.array([0.25, 1.0]))
    ext = poisson_extension(small_op, f, lad)
    s = math.sqrt(small_op.eigenvalues[1])
    for j, t in enumerate(lad.values):
        assert np.allclose(
            ext.t_derivative.values[j], -t * s * ext.u.values[j] / 1.0, atol=1e-12
        )
    mag = ext.gradient_magnitude()
    want = np.sqrt(ext.t_derivative.values**2 + ext.x_gradient.values**2)
    assert np.array_equal(mag.values, want)


def test_x_gradient_against_exact_sine_derivative():
    # free-operator eigenvectors are exact sines, so t * du/dx has a closed
    # form; the interior stencil is 4th order, the walls drop to 2nd
    g = Grid(n=1, halfwidth=4.0, spacing=0.125)
    op = discretize(zero_potential(1), g)
    k = 2
    vec = op.eigenvectors[:, k - 1]
    if vec[0] < 0:
        vec = -vec
    f = op.embed_interior(vec)
    t = 0.5
    ext = poisson_extension(op, f, TLadder(np.array([t])))
    s = math.sqrt(op.eigenvalues[k - 1])
    N = op.interior_count
    amp = math.sqrt(2.0 / (N + 1))
    omega = k * math.pi / (2 * g.halfwidth)
    want = t * math.exp(-t * s) * amp * omega * np.cos(omega * (g.axis + g.halfwidth))
    got = ext.x_gradient.values[0]
    err = np.abs(got - want)
    assert np.max(err[3:-3]) <= 1e-5
    assert np.max(err) <= 1e-3


def test_interior_index_window():
    g = Grid(n=1, halfwidth=6.0, spacing=0.5)
    idx = interior_index_window(g, 1.0 / 3.0)
    x = g.axis[idx]
    assert np.all(np.abs(x) <= 2.0 + 1e-12)
    assert x.size == 9
    with pytest.raises(ConfigError):
        interior_index_window(g, 0.0)


def test_heat_kernel_deficit_free_is_zero(small_op):
    free = discretize(zero_potential(1), small_op.grid)
    rep = heat_kernel_deficit(free, free, t=0.25, q=2.0, rho=1.0)
    assert rep.fitted_constant == 0.0
    assert rep.max_deficit < 1e-13


def test_heat_kernel_domination(small_op):
    free = discretize(zero_potential(1), small_op.grid)
    rep = heat_kernel_deficit(small_op, free, t=0.25, q=2.0, rho=2.0**-0.5)
    # adding a nonnegative potential can only shrink the kernel
    assert rep.domination_violation <= 1e-10
    assert rep.fitted_constant > 0.0
    assert math.isfinite(rep.fitted_constant)


def test_poisson_one_deficit_linear_rate(op16):
    # for constant V = 1 the deficit of e^{-t sqrt(L)} 1 is 1 - e^{-t} + walls,
    # so the fitted exponent sits near 1
    lad = TLadder.geometric(0.01, 0.5, per_decade=8)
    rep = poisson_one_deficit(op16, lad, rho=2.0**-0.5)
    assert 0.8 <= rep.alpha <= 1.2
    assert rep.n_samples > 0


def test_poisson_one_deficit_needs_ladder_coverage(op16):
    lad = TLadder(np.array([1.0, 2.0, 4.0]))
    with pytest.raises(LadderError):
        poisson_one_deficit(op16, lad, rho=2.0**-0.5)
