import math

import numpy as np
import pytest

from pointctl.errors import UnsupportedDegree
from pointctl.mesh import build_unit_disk, build_unit_square
from pointctl.quadrature import gauss_rule, integrate, reference_map


def simplex_monomial_integral(powers):
    """Exact integral of x^i y^j (z^k) over the reference simplex."""
    num = 1
    for p in powers:
        num *= math.factorial(p)
    return num / math.factorial(sum(powers) + len(powers))


def test_degree_one_is_centroid_rule():
    rule = gauss_rule(2, 1)
    assert rule.num_points == 1
    assert np.allclose(rule.points[0], 1.0 / 3.0)
    assert rule.weights[0] == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("dim", [2, 3])
def test_weights_positive_and_sum_to_reference_volume(dim):
    ref_vol = 0.5 if dim == 2 else 1.0 / 6.0
    for degree in range(1, 11):
        rule = gauss_rule(dim, degree)
        assert (rule.weights > 0).all()
        assert rule.weights.sum() == pytest.approx(ref_vol, abs=1e-14)


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("degree", range(1, 11))
def test_monomial_exactness(dim, degree):
    rule = gauss_rule(dim, degree)
    coords = rule.points[:, 1:]
    for total in range(degree + 1):
        for i in range(total + 1):
            rest = total - i
            powers = (i, rest) if dim == 2 else (i, rest, 0)
            vals = np.prod(coords ** np.asarray(powers), axis=1)
            assert float(rule.weights @ vals) == pytest.approx(
                simplex_monomial_integral(powers), abs=1e-12
            )


def test_degree5_x3y2():
    rule = gauss_rule(2, 5)
    vals = rule.points[:, 1] ** 3 * rule.points[:, 2] ** 2
    assert float(rule.weights @ vals) == pytest.approx(1.0 / 420.0, abs=1e-14)


def test_3d_degree2_weight_sum():
    assert gauss_rule(3, 2).weights.sum() == pytest.approx(1.0 / 6.0, abs=1e-15)


def test_unsupported_degree():
    with pytest.raises(UnsupportedDegree):
        gauss_rule(2, 11)
    with pytest.raises(UnsupportedDegree):
        gauss_rule(3, 0)


def test_integrate_constant_is_area():
    m = build_unit_square(5)
    val = integrate(m, gauss_rule(2, 3), lambda x: np.ones(x.shape[0]))
    assert val == pytest.approx(1.0, abs=1e-13)


def test_integrate_disk_area_second_order():
    errs = []
    hs = []
    from pointctl.mesh import mesh_size

    for level in range(1, 4):
        m = build_unit_disk(level)
        val = integrate(m, gauss_rule(2, 2), lambda x: np.ones(x.shape[0]))
        errs.append(np.pi - val)
        hs.append(mesh_size(m))
    C = errs[0] / hs[0] ** 2
    for e, h in zip(errs, hs):
        assert 0 < e <= 1.5 * C * h * h


def test_integrate_singular_log_squared():
    # int over the unit disk of (log|x| / 2pi)^2 = 1/(8 pi)
    exact = 1.0 / (8.0 * np.pi)
    rule = gauss_rule(2, 10)
    errs = [
        abs(
            integrate(
                build_unit_disk(level),
                rule,
                lambda x: (np.log(np.linalg.norm(x, axis=1)) / (2 * np.pi)) ** 2,
            )
            - exact
        )
        for level in (1, 3)
    ]
    assert errs[1] < errs[0] * 0.3
    assert errs[1] < 2e-5


def test_integrate_linear_in_integrand():
    m = build_unit_disk(1)
    rule = gauss_rule(2, 4)
    f = lambda x: np.sin(x[:, 0])
    g = lambda x: x[:, 1] ** 2
    lhs = integrate(m, rule, lambda x: 2.0 * f(x) - 3.0 * g(x))
    rhs = 2.0 * integrate(m, rule, f) - 3.0 * integrate(m, rule, g)
    assert lhs == pytest.approx(rhs, abs=1e-14)


def test_integrate_exact_for_random_polynomials():
    rng = np.random.default_rng(3)
    m = build_unit_square(3)
    for degree in (2, 4, 6):
        rule = gauss_rule(2, degree)
        coef = rng.standard_normal((degree + 1, degree + 1))
        terms = [
            (coef[i, j], i, j)
            for i in range(degree + 1)
            for j in range(degree + 1 - i)
        ]

        def poly(x):
            out = np.zeros(x.shape[0])
            for c, i, j in terms:
                out += c * x[:, 0] ** i * x[:, 1] ** j
            return out

        # exact integral over (0,1)^2 termwise
        exact = sum(c / ((i + 1) * (j + 1)) for c, i, j in terms)
        assert integrate(m, rule, poly) == pytest.approx(exact, abs=1e-12)


def test_reference_map_fields():
    m = build_unit_square(2)
    rm = reference_map(m, 3)
    assert rm.cell_index == 3
    assert rm.jacobian_det > 0
    v = m.vertices[m.cells[3]]
    assert np.allclose(rm.offset, v[0])
    assert np.allclose(rm.jacobian @ np.array([1.0, 0.0]), v[1] - v[0])
