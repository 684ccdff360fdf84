import math

import numpy as np
import pytest
from scipy import special

from sparsefl.quantizer import (
    Q_MAX,
    bussgang_constants,
    codebook_csv,
    get_quantizer,
    train_lloyd_max,
)

TWO_OVER_PI = 2.0 / math.pi


def phi(x):
    return np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def big_phi(x):
    return 0.5 * special.erfc(-x / math.sqrt(2))


def cell_mse(q, a, b):
    """Closed-form integral of (x - q)^2 phi(x) over (a, b)."""
    mass = big_phi(b) - big_phi(a)
    phi_a, phi_b = phi(a), phi(b)
    a_term = a * phi_a if np.isfinite(a) else 0.0
    b_term = b * phi_b if np.isfinite(b) else 0.0
    return (1 + q * q) * mass - (b_term - a_term) - 2 * q * (phi_a - phi_b)


def codebook_mse(levels, thresholds):
    return sum(
        cell_mse(q, a, b) for q, a, b in zip(levels, thresholds[:-1], thresholds[1:])
    )


class TestTwoLevelClosedForm:
    def test_levels_and_threshold(self):
        q = train_lloyd_max(2)
        assert q.thresholds[1] == pytest.approx(0.0, abs=1e-12)
        assert q.levels[1] == pytest.approx(math.sqrt(TWO_OVER_PI), abs=1e-12)
        assert q.levels[0] == pytest.approx(-math.sqrt(TWO_OVER_PI), abs=1e-12)

    def test_constants_equal_two_over_pi(self):
        q = train_lloyd_max(2)
        assert q.gamma == pytest.approx(TWO_OVER_PI, abs=1e-12)
        assert q.psi == pytest.approx(TWO_OVER_PI, abs=1e-12)
        assert q.distortion == pytest.approx(1 - TWO_OVER_PI, abs=1e-12)


def test_four_level_matches_grid_search_oracle():
    # Independent oracle: direct closed-form MSE minimized by grid search
    # over the two free parameters of a symmetric 4-level codebook.
    inner = np.linspace(0.3, 0.6, 61)
    outer = np.linspace(1.35, 1.65, 61)
    best = None
    for q1 in inner:
        for q2 in outer:
            levels = np.array([-q2, -q1, q1, q2])
            t = np.array([-np.inf, -(q1 + q2) / 2, 0.0, (q1 + q2) / 2, np.inf])
            m = codebook_mse(levels, t)
            if best is None or m < best[0]:
                best = (m, q1, q2)
    trained = train_lloyd_max(4)
    assert trained.levels[2] == pytest.approx(best[1], abs=6e-3)
    assert trained.levels[3] == pytest.approx(best[2], abs=6e-3)
    # canonical values for this codebook
    assert trained.levels[2] == pytest.approx(0.4528, abs=1e-3)
    assert trained.levels[3] == pytest.approx(1.510, abs=1e-3)


def test_codebooks_symmetric_and_sorted():
    for q in range(2, Q_MAX + 1):
        quant = get_quantizer(q)
        assert np.all(np.diff(quant.levels) > 0)
        assert np.all(np.diff(quant.thresholds[1:-1]) > 0)
        np.testing.assert_allclose(quant.levels, -quant.levels[::-1], atol=1e-14)
        np.testing.assert_allclose(
            quant.thresholds[1:-1], -quant.thresholds[1:-1][::-1], atol=1e-14
        )


def test_constants_bounds_and_monotone_quality():
    prev = 0.0
    for q in range(2, Q_MAX + 1):
        quant = get_quantizer(q)
        assert 0 < quant.gamma**2 < quant.psi < 1
        quality = quant.gamma**2 / quant.psi
        assert quality > prev  # more levels, less distortion
        prev = quality


def test_lloyd_fixed_point():
    for q in (2, 5, 16):
        quant = get_quantizer(q)
        mass = big_phi(quant.thresholds[1:]) - big_phi(quant.thresholds[:-1])
        re_levels = (phi(quant.thresholds[:-1]) - phi(quant.thresholds[1:])) / mass
        assert np.max(np.abs(re_levels - quant.levels)) < 1e-10


def test_bussgang_constants_match_quadrature():
    # gamma = E[Q(x) x] and psi = E[Q(x)^2] by numerical integration,
    # cell by cell so the integrand stays smooth.
    from scipy import integrate

    quant = get_quantizer(6)
    bounds = np.clip(quant.thresholds, -12, 12)
    gamma_num = psi_num = 0.0
    for level, a, b in zip(quant.levels, bounds[:-1], bounds[1:]):
        gamma_num += level * integrate.quad(lambda x: x * phi(x), a, b)[0]
        psi_num += level**2 * integrate.quad(phi, a, b)[0]
    assert quant.gamma == pytest.approx(gamma_num, abs=1e-9)
    assert quant.psi == pytest.approx(psi_num, abs=1e-9)


def test_gamma_matches_monte_carlo():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(1_000_000)
    for q in (2, 4, 16):
        quant = get_quantizer(q)
        qx = quant.dequantize(quant.quantize(x))
        est = float(np.mean(qx * x))
        se = float(np.std(qx * x) / math.sqrt(x.size))
        assert abs(est - quant.gamma) < 3 * se


def test_mse_identity_monte_carlo():
    rng = np.random.default_rng(12)
    x = rng.standard_normal(1_000_000)
    for q in (2, 8):
        quant = get_quantizer(q)
        est = quant.gain * quant.dequantize(quant.quantize(x))
        mse = float(np.mean((x - est) ** 2))
        assert mse == pytest.approx(quant.distortion, rel=0.01)


def test_bussgang_orthogonality():
    rng = np.random.default_rng(13)
    n = 1_000_000
    x = rng.standard_normal(n)
    for q in (2, 6, 16):
        quant = get_quantizer(q)
        d = quant.dequantize(quant.quantize(x)) - quant.gamma * x
        corr = float(np.corrcoef(x, d)[0, 1])
        assert abs(corr) < 3 / math.sqrt(n)


class TestQuantizeConventions:
    def test_sign_quantizer_boundary(self):
        quant = get_quantizer(2)
        idx = quant.quantize(np.array([-3.0, 0.0, 0.1]))
        assert idx.tolist() == [0, 0, 1]  # exact threshold falls to the lower cell

    def test_interior_tie_goes_low(self):
        quant = get_quantizer(4)
        boundary = float(quant.thresholds[3])  # between the two upper cells
        idx = quant.quantize(np.array([boundary, np.nextafter(boundary, 2.0)]))
        assert idx.tolist() == [2, 3]

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            get_quantizer(2).quantize(np.array([0.0, np.nan]))

    def test_dequantize_values_in_codebook(self):
        rng = np.random.default_rng(5)
        quant = get_quantizer(7)
        out = quant.dequantize(quant.quantize(rng.standard_normal(4096) * 3))
        assert set(np.unique(out)) <= set(quant.levels.tolist())


def test_level_bounds_validated():
    with pytest.raises(ValueError):
        train_lloyd_max(1)
    with pytest.raises(ValueError):
        train_lloyd_max(17)
    assert train_lloyd_max(17, q_max=32).q_level == 17


def test_bussgang_free_function_matches_dataclass():
    quant = get_quantizer(9)
    gamma, psi = bussgang_constants(quant.levels, quant.thresholds)
    assert gamma == quant.gamma and psi == quant.psi


def test_codebook_csv_shape():
    text = codebook_csv([2, 3])
    lines = text.strip().splitlines()
    assert lines[0].startswith("q_level,index,level")
    assert len(lines) == 1 + 2 + 3
    assert lines[1].split(",")[0] == "2"
