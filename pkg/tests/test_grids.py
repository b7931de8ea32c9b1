import numpy as np
import pytest

from dnl import (
    DIRICHLET,
    NEUMANN,
    Field,
    Grid,
    apply_elliptic,
    constant,
    from_function,
    inner_l2,
    norm_h1,
    norm_h2,
    norm_l2,
    norm_linf,
    norm_lp,
    zeros,
)
from dnl.grids import elliptic_diagonals


def dense_operator(grid: Grid) -> np.ndarray:
    """Independent dense assembly of the elliptic operator."""
    n, h = grid.n, grid.h
    m = np.zeros((n, n))
    for i in range(n):
        m[i, i] = 2.0 / h**2
        if i > 0:
            m[i, i - 1] = -1.0 / h**2
        if i < n - 1:
            m[i, i + 1] = -1.0 / h**2
    if grid.bc == NEUMANN:
        m[0, 0] = 1.0 / h**2
        m[-1, -1] = 1.0 / h**2
        m += np.eye(n)
    return m


def random_field(grid: Grid, rng) -> Field:
    return Field(grid, rng.uniform(-1.0, 1.0, grid.n))


class TestGrid:
    def test_spacing_and_nodes_dirichlet(self):
        g = Grid(63)
        assert g.h == pytest.approx(1.0 / 64.0)
        assert len(g.x) == 63
        assert np.all(np.diff(g.x) > 0)
        assert g.x[0] > 0.0 and g.x[-1] < 1.0

    def test_spacing_and_nodes_neumann(self):
        g = Grid(64, bc=NEUMANN)
        assert g.h == pytest.approx(1.0 / 64.0)
        assert g.x[0] == pytest.approx(g.h / 2.0)

    def test_invalid_grid(self):
        with pytest.raises(ValueError):
            Grid(1)
        with pytest.raises(ValueError):
            Grid(8, 1.0, 0.0)
        with pytest.raises(ValueError):
            Grid(8, bc="periodic")

    def test_field_validation(self):
        g = Grid(8)
        with pytest.raises(ValueError):
            Field(g, np.zeros(7))
        with pytest.raises(ValueError):
            Field(g, np.full(8, np.nan))


class TestEllipticOperator:
    def test_zero_field(self):
        g = Grid(31)
        assert np.all(apply_elliptic(zeros(g)).values == 0.0)

    def test_neumann_constant(self):
        # identity-plus-Laplacian maps constants to themselves
        g = Grid(40, bc=NEUMANN)
        out = apply_elliptic(constant(g, 2.5)).values
        assert np.max(np.abs(out - 2.5)) == 0.0

    def test_matches_dense_oracle(self):
        g = Grid(63)
        u = from_function(g, lambda x: np.sin(np.pi * x))
        oracle = dense_operator(g) @ u.values
        assert np.max(np.abs(apply_elliptic(u).values - oracle)) <= 1e-12

    def test_dirichlet_sine_eigenvector(self):
        # analytic eigenvalue of the tridiagonal stencil; the residual floor
        # is the operator scale 2/h^2 times the rounding of the sine data,
        # about 2e-12 at n = 63, for the dense oracle as well
        g = Grid(63)
        u = from_function(g, lambda x: np.sin(np.pi * x))
        mu = 2.0 / g.h**2 * (1.0 - np.cos(np.pi * g.h))
        res = np.max(np.abs(apply_elliptic(u).values - mu * u.values))
        assert res <= 4e-12
        oracle_res = np.max(np.abs(dense_operator(g) @ u.values - mu * u.values))
        assert res <= 2.0 * oracle_res + 1e-12

    @pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN])
    def test_matches_dense_oracle_random(self, bc):
        rng = np.random.default_rng(7)
        g = Grid(24, -1.0, 2.0, bc)
        u = random_field(g, rng)
        oracle = dense_operator(g) @ u.values
        assert np.max(np.abs(apply_elliptic(u).values - oracle)) <= 1e-10

    @pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN])
    def test_linearity(self, bc):
        rng = np.random.default_rng(3)
        g = Grid(17, bc=bc)
        u, v = random_field(g, rng), random_field(g, rng)
        a, b = 1.7, -0.3
        lhs = apply_elliptic(Field(g, a * u.values + b * v.values)).values
        rhs = a * apply_elliptic(u).values + b * apply_elliptic(v).values
        assert np.max(np.abs(lhs - rhs)) <= 1e-9  # machine precision at 1/h^2 scale

    @pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN])
    def test_symmetry_and_positivity(self, bc):
        rng = np.random.default_rng(11)
        g = Grid(33, bc=bc)
        for _ in range(20):
            u, v = random_field(g, rng), random_field(g, rng)
            s1 = inner_l2(apply_elliptic(u), v)
            s2 = inner_l2(u, apply_elliptic(v))
            assert abs(s1 - s2) <= 1e-12 * max(1.0, abs(s1))
            quad = inner_l2(apply_elliptic(u), u)
            if bc == DIRICHLET:
                assert quad >= 0.0
            else:
                assert quad >= norm_l2(u) ** 2 - 1e-12

    def test_diagonals_match_dense(self):
        for bc in (DIRICHLET, NEUMANN):
            g = Grid(9, bc=bc)
            main, off = elliptic_diagonals(g)
            m = dense_operator(g)
            assert np.allclose(np.diag(m), main)
            assert np.allclose(np.diag(m, 1), off)


class TestNorms:
    def test_zero_field_all_norms_zero(self):
        g = Grid(16)
        z = zeros(g)
        for val in (
            norm_l2(z), norm_h1(z), norm_h2(z), norm_linf(z), norm_lp(z, 3.0),
        ):
            assert val == 0.0

    def test_neumann_constant_norms(self):
        g = Grid(50, bc=NEUMANN)  # unit measure: n h = 1
        c = constant(g, 3.0)
        assert norm_l2(c) == pytest.approx(3.0, abs=1e-14)
        for p in (1.0, 2.0, 3.5, 7.0):
            assert norm_lp(c, p) == pytest.approx(3.0, rel=1e-13)
        assert norm_linf(c) == 3.0

    def test_lp_p2_equals_l2(self):
        rng = np.random.default_rng(5)
        g = Grid(63)
        u = random_field(g, rng)
        # independent plain summation
        expected = (g.h * sum(float(x) ** 2 for x in u.values)) ** 0.5
        assert abs(norm_lp(u, 2.0) - norm_l2(u)) <= 1e-14 * expected
        assert norm_l2(u) == pytest.approx(expected, rel=1e-13)

    def test_lp_rejects_small_p(self):
        g = Grid(8)
        with pytest.raises(ValueError):
            norm_lp(zeros(g), 0.5)

    @pytest.mark.parametrize("bc", [DIRICHLET, NEUMANN])
    def test_lp_monotone_on_unit_domain(self, bc):
        # Hoelder on a measure of total mass <= 1
        rng = np.random.default_rng(9)
        g = Grid(63, 0.0, 1.0, bc)
        ps = [1.0, 1.5, 2.0, 3.0, 6.0, 12.0]
        for _ in range(10):
            u = random_field(g, rng)
            vals = [norm_lp(u, p) for p in ps] + [norm_linf(u)]
            for a, b in zip(vals, vals[1:]):
                assert a <= b * (1.0 + 1e-12)

    def test_h1_consistent_with_operator(self):
        # ||u||_H1^2 = ||u||^2 + (A u, u) for Dirichlet, = (A u, u) for Neumann
        rng = np.random.default_rng(13)
        for bc in (DIRICHLET, NEUMANN):
            g = Grid(21, bc=bc)
            u = random_field(g, rng)
            quad = inner_l2(apply_elliptic(u), u)
            if bc == DIRICHLET:
                expected = norm_l2(u) ** 2 + quad
            else:
                expected = quad
            assert norm_h1(u) ** 2 == pytest.approx(expected, rel=1e-11)

    def test_grid_mismatch_raises(self):
        u = zeros(Grid(8))
        v = zeros(Grid(9))
        with pytest.raises(ValueError):
            inner_l2(u, v)
