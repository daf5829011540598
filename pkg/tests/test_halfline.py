import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from npcorner.exceptions import ConfigError, NotInDomain, SmallDenominator, TruncationError
from npcorner.halfline import (LogGrid, _cutoff_mellin, apply_model_operator, cutoff,
                               extract_singular_coefficient, fit_log_exponent, log_kernel,
                               model_kernel, model_resolvent, w1_proxy_norm)
from npcorner.symbol import mu_inverse, symbol_value

PI = math.pi
ALPHA = 2 * PI / 7
GRID = LogGrid()
X = GRID.x


def _gauss(c, w=1.0):
    return np.exp(-((X - c) / w) ** 2)


def _mellin_of_kernel(alpha, z):
    def part(fn):
        return quad(lambda s: fn(s ** (z - 1) * model_kernel(alpha, s, 1.0)), 0, 1, limit=400)[0] + \
            quad(lambda s: fn(s ** (z - 1) * model_kernel(alpha, s, 1.0)), 1, np.inf, limit=400)[0]
    return complex(part(np.real), part(np.imag))


def test_kernel_right_angle_value():
    # e^{ia}/(e^{ia} - 1) at a = pi/2 is (1 - i)/2
    assert model_kernel(PI / 2, 1.0, 1.0) == pytest.approx(1 / (2 * PI), rel=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.sampled_from([ALPHA, PI / 2, 3 * PI / 4]))
def test_kernel_homogeneity(s, t, alpha):
    assert model_kernel(alpha, 2 * s, 2 * t) == pytest.approx(model_kernel(alpha, s, t) / 2, rel=1e-12)


def test_log_kernel_matches_kernel():
    xi = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(log_kernel(ALPHA, xi), model_kernel(ALPHA, np.exp(xi), 1.0), rtol=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.4, 1.5, 4.0])
def test_kernel_mellin_transform_is_symbol(t):
    z = 0.5 + 1j * t
    assert _mellin_of_kernel(ALPHA, z) == pytest.approx(complex(symbol_value(ALPHA, z)), rel=1e-6)


@pytest.mark.parametrize("f", [_gauss(-3), _gauss(-5, 2) * np.cos(3 * X), _gauss(-8, 0.5),
                               _gauss(-2, 1.5) * (1 + 1j * X), _gauss(-10, 1.5) * np.sin(X) ** 2])
def test_direct_and_multiplier_agree(f):
    d = apply_model_operator(ALPHA, f, GRID, "direct")
    m = apply_model_operator(ALPHA, f, GRID, "multiplier")
    assert np.max(np.abs(d - m)) / np.max(np.abs(d)) < 1e-7


def test_linearity():
    f, g = _gauss(-3), _gauss(-6) * np.cos(X)
    a, b = 0.7 - 0.2j, -1.3
    lhs = apply_model_operator(ALPHA, a * f + b * g, GRID)
    rhs = a * apply_model_operator(ALPHA, f, GRID) + b * apply_model_operator(ALPHA, g, GRID)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * np.max(np.abs(lhs))


def test_cutoff_image_at_corner():
    out = apply_model_operator(ALPHA, cutoff(GRID.s), GRID, "direct", extend="constant")
    assert out[0] == pytest.approx(1 - ALPHA / PI, abs=1e-6)


def test_truncation_error_on_non_decaying_input():
    with pytest.raises(TruncationError):
        apply_model_operator(ALPHA, np.ones(GRID.n), GRID)
    with pytest.raises(ConfigError):
        apply_model_operator(ALPHA, _gauss(-3), GRID, "fourier")


WIDE = LogGrid(-40, 30, 8192)


@pytest.mark.parametrize("lam", [2 + 1j, 3.0, -1.5 + 0.2j])
def test_resolvent_round_trip(lam):
    g = np.exp(-(WIDE.x + 4) ** 2)
    f = model_resolvent(ALPHA, lam, g, WIDE, line=0.5)
    back = apply_model_operator(ALPHA, f, WIDE, window=False) - lam * f
    assert np.linalg.norm(back - g) / np.linalg.norm(g) < 1e-8


def test_resolvent_neumann_series_far_from_spectrum():
    g = np.exp(-(WIDE.x + 4) ** 2)
    lam = 3.0
    f = model_resolvent(ALPHA, lam, g, WIDE, line=0.5)
    partial = np.zeros_like(f)
    term = g.astype(complex)
    errs = []
    for k in range(4):
        partial = partial - term / lam ** (k + 1)
        errs.append(np.max(np.abs(f - partial)))
        term = apply_model_operator(ALPHA, term, WIDE, window=False)
    # the series in K / lam converges at least like 3**-k
    assert all(b < a / 2.5 for a, b in zip(errs, errs[1:]))


def test_small_denominator():
    with pytest.raises(SmallDenominator):
        model_resolvent(PI / 2, complex(symbol_value(PI / 2, 0.5)), _gauss(-4), GRID, line=0.5)


def _random_lambdas(alpha, n, rng):
    out = []
    while len(out) < n:
        mu = complex(-rng.uniform(0.1, 0.45), -rng.uniform(0.3, 2.5))
        lam = complex(symbol_value(alpha, mu))
        if lam.imag > 0 and abs(mu_inverse(alpha, lam).mu - mu) < 1e-9:
            out.append((lam, mu))
    return out


@pytest.mark.parametrize("alpha", [ALPHA, PI / 2])
def test_singular_exponent_law_and_sign_flip(alpha):
    rng = np.random.default_rng(42)
    g = _gauss(-2)
    for lam, mu in _random_lambdas(alpha, 5, rng):
        for sign in (1, -1):
            l = lam if sign > 0 else lam.conjugate()
            expected = mu if sign > 0 else -mu_inverse(alpha, l).mu
            nu = fit_log_exponent(model_resolvent(alpha, l, g, GRID), GRID, -18, -18 + 3 * math.log(10))
            assert abs(nu.real - expected.real) < 0.02 * abs(expected.real)
            assert abs(nu.imag - expected.imag) < 0.02 * abs(expected.imag)
        # conjugated spectral parameter gives the conjugated exponent
        assert -mu_inverse(alpha, lam.conjugate()).mu == pytest.approx(mu.conjugate(), abs=1e-12)


def test_singular_coefficient_matches_solution_near_corner():
    g = _gauss(-2)
    lam = 0.3 + 0.05j
    sol = model_resolvent(ALPHA, lam, g, GRID)
    sc = extract_singular_coefficient(ALPHA, lam, g, GRID, solution=sol)
    assert sc.mu == pytest.approx(mu_inverse(ALPHA, lam).mu, abs=1e-12)
    assert sc.d == 1.0
    lead = sol[:50] * np.exp(sc.exponent * X[:50])
    np.testing.assert_allclose(lead, sc.c_lambda, rtol=1e-6)


def test_singular_coefficient_vanishes_for_orthogonal_data():
    lam = 0.3 + 0.05j
    nu = mu_inverse(ALPHA, lam).mu
    h1, h2 = _gauss(-2), _gauss(-1)
    m1, m2 = (np.sum(np.exp(nu * X) * h) for h in (h1, h2))
    sc = extract_singular_coefficient(ALPHA, lam, h1 - m1 / m2 * h2, GRID)
    assert abs(sc.c_lambda) < 1e-12


def test_remainder_norm_is_grid_independent():
    lam = 0.3 + 0.05j
    norms, raw = [], []
    for grid in (LogGrid(-18, 6, 4096), LogGrid(-42, 6, 8192)):
        g = np.exp(-(grid.x + 2) ** 2)
        sol = model_resolvent(ALPHA, lam, g, grid)
        norms.append(extract_singular_coefficient(ALPHA, lam, g, grid, solution=sol).regular_part_norm)
        raw.append(w1_proxy_norm(sol, grid))
    assert norms[1] == pytest.approx(norms[0], rel=1e-6)
    assert raw[1] > 100 * raw[0]


def test_cutoff_mellin_continuation():
    for z in (1.1 + 1j, 1.3 - 0.5j):
        ref = quad(lambda s: (s ** (z - 1) * cutoff(s)).real, 0, 1, limit=200)[0] + \
            1j * quad(lambda s: (s ** (z - 1) * cutoff(s)).imag, 0, 1, limit=200)[0]
        assert _cutoff_mellin(z) == pytest.approx(ref, rel=1e-8)


def test_singular_coefficient_domain():
    with pytest.raises(NotInDomain):
        extract_singular_coefficient(ALPHA, 0.3, _gauss(-2), GRID)


def test_grid_validation():
    with pytest.raises(ConfigError):
        LogGrid(n=1000)
    with pytest.raises(ConfigError):
        LogGrid(1.0, 0.0)
