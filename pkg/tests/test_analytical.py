import numpy as np
import pytest

from igabeam.analytical import (analytical_modes, classify_analytical,
                                load_fixture, soedel_amplitude_ratio,
                                soedel_eigenvalues, verify_fixture)
from igabeam.assembly import element_quadrature
from igabeam.splines import make_periodic_space

TWO_PI = 2.0 * np.pi


def test_breathing_and_low_pairs(params):
    lam1, lam2 = soedel_eigenvalues(0, params)
    assert lam1 == 0.0
    assert lam2 == pytest.approx(1.2e6, rel=1e-14)
    lam1, lam2 = soedel_eigenvalues(1, params)
    assert lam1 == 0.0
    assert lam2 == pytest.approx(2.400000450000000e6, rel=1e-14)


def test_pairs_against_fixture(params):
    """The fixture stores the published table digits; its lambda_1 column
    carries ~1e-10 relative rounding noise from the source computation
    (cancellation in the (C - B) form), so the closed-form values are
    compared at that level.  lambda_2 and the amplitude ratios are clean."""
    table = load_fixture()
    for row in table:
        n = int(row[0])
        lam1, lam2 = soedel_eigenvalues(n, params)
        if row[1] != 0.0:
            assert lam1 == pytest.approx(row[1], rel=2e-10)
        else:
            assert lam1 == 0.0
        assert lam2 == pytest.approx(row[2], rel=1e-12)
        r1 = soedel_amplitude_ratio(n, 1, params)
        r2 = soedel_amplitude_ratio(n, 2, params)
        if row[3] != 0.0:
            assert r1 == pytest.approx(row[3], rel=1e-12)
        else:
            assert r1 == 0.0
        if row[4] != 0.0:
            assert r2 == pytest.approx(row[4], rel=1e-12)
        else:
            assert r2 == 0.0


def test_verify_fixture_report(params):
    ok, report = verify_fixture(params, rel_tol=1e-9)
    assert ok
    assert len(report) == 21
    ok12, _ = verify_fixture(params, rel_tol=1e-12)
    assert not ok12   # table noise exceeds 1e-12 on the lambda_1 column


def test_perturbed_modulus_fails_fixture():
    from igabeam.ring import RingParams
    bad = RingParams(E=1.2e6 * 1.01, rho=1.0, R=1.0, t=3.0 / 2000.0)
    ok, report = verify_fixture(bad, rel_tol=1e-9)
    assert not ok
    assert any("FAIL" in line for line in report)


def test_specific_ratio_values(params):
    assert soedel_amplitude_ratio(1, 1, params) == -1.0
    assert soedel_amplitude_ratio(1, 2, params) == pytest.approx(1.0, rel=1e-12)
    assert soedel_amplitude_ratio(3, 1, params) == pytest.approx(
        -3.333342333340016e-1, rel=1e-12)
    assert soedel_amplitude_ratio(10, 2, params) == pytest.approx(
        9.999632432768221e0, rel=1e-12)
    with pytest.raises(ValueError):
        soedel_amplitude_ratio(2, 3, params)
    with pytest.raises(ValueError):
        soedel_eigenvalues(-1, params)


def test_high_n_example(params):
    lam1, lam2 = soedel_eigenvalues(20, params)
    assert lam1 == pytest.approx(3.573087108895835e4, rel=2e-10)
    assert lam2 == pytest.approx(4.812003591289111e8, rel=1e-12)


def test_monotonicity(params):
    prev1, prev2 = soedel_eigenvalues(2, params)[0], soedel_eigenvalues(0, params)[1]
    for n in range(3, 65):
        lam1, _ = soedel_eigenvalues(n, params)
        assert lam1 > prev1
        prev1 = lam1
    for n in range(1, 65):
        _, lam2 = soedel_eigenvalues(n, params)
        assert lam2 > prev2
        prev2 = lam2


def test_ratio_asymptotics(params):
    for n in range(10, 40):
        r1 = soedel_amplitude_ratio(n, 1, params)
        r2 = soedel_amplitude_ratio(n, 2, params)
        assert abs(abs(r1) - 1.0 / n) < 0.01 / n
        assert abs(abs(r2) - n) < 0.01 * n
        assert abs(r1) <= 1.0 and abs(r2) >= 1.0


def test_classification(params):
    sets = classify_analytical(20, params)
    assert sets["transverse_lambda1"] == list(range(21))
    assert sets["circumferential_lambda1"] == []
    # by the letter of the thresholds the breathing mode (ratio 0) falls on
    # the transverse side of the lambda_2 branch; all others are
    # circumferential
    assert sets["transverse_lambda2"] == [0]
    assert sets["circumferential_lambda2"] == list(range(1, 21))


def test_mode_shapes_special_cases(params):
    modes = {(m.n, m.branch): m for m in analytical_modes(2, params)}
    th = np.linspace(0, TWO_PI, 7)
    # breathing: purely radial (cos t, sin t) direction
    ux, uy = modes[(0, 2)].cartesian(th)
    scale = np.hypot(ux, uy)
    assert np.allclose(ux, scale * np.cos(th), atol=1e-12)
    # rigid rotation: purely tangential
    ux, uy = modes[(0, 1)].cartesian(th)
    assert np.allclose(ux, -np.hypot(ux, uy)[0] * np.sin(th), atol=1e-12)
    assert not modes[(0, 1)].free_floating
    # x-translation at (n=1, branch 1)
    ux, uy = modes[(1, 1)].cartesian(th)
    assert np.allclose(ux, ux[0]) and np.allclose(uy, 0.0, atol=1e-14)


def test_free_floating_constraints(params):
    th = 1e-6
    for m in analytical_modes(6, params):
        if not m.free_floating:
            continue
        ux0, uy0 = m.cartesian(0.0)
        dux, _ = m.cartesian_derivative(0.0)
        assert abs(uy0) < 1e-14
        assert abs(dux) < 1e-14
        # finite-difference check of the derivative implementation
        uxp, _ = m.cartesian(th)
        uxm, _ = m.cartesian(-th)
        assert abs((uxp - uxm) / (2 * th) - dux) < 1e-6


def test_unit_norm_and_orthogonality(params):
    modes = [m for m in analytical_modes(5, params)]
    space = make_periodic_space(3, 32)
    thetas, weights = element_quadrature(space, 6)
    w = weights * params.R
    vals = [m.cartesian(thetas) for m in modes]
    for i, (uxi, uyi) in enumerate(vals):
        norm2 = ((uxi**2 + uyi**2) * w).sum()
        assert norm2 == pytest.approx(1.0, abs=1e-10)
        for j in range(i + 1, len(vals)):
            uxj, uyj = vals[j]
            ip = ((uxi * uxj + uyi * uyj) * w).sum()
            assert abs(ip) < 1e-10
