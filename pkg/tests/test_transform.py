import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsefl.transform import cached_haar, generate_haar, inverse_cdf_normals, derive_rng


def test_dim_one_is_sign():
    seen = set()
    for seed in range(40):
        t = generate_haar(1, (seed,))
        assert t.matrix.shape == (1, 1)
        assert abs(abs(float(t.matrix[0, 0])) - 1.0) < 1e-15
        seen.add(float(t.matrix[0, 0]))
    assert seen == {-1.0, 1.0}  # both signs occur across seeds


def test_orthogonality_tight():
    t = generate_haar(64, (1, 2, 3))
    err = np.abs(t.matrix @ t.matrix.T - np.eye(64)).max()
    assert err < 1e-10


def test_regeneration_bit_identical():
    a = generate_haar(96, (9, 9, 9))
    b = generate_haar(96, (9, 9, 9))
    assert a.matrix.tobytes() == b.matrix.tobytes()
    c = generate_haar(96, (9, 9, 10))
    assert a.matrix.tobytes() != c.matrix.tobytes()


def test_entry_variance_matches_one_over_dim():
    dim = 256
    pooled = []
    for seed in range(8):
        pooled.append(generate_haar(dim, (seed,)).matrix.ravel()[:2048])
    pooled = np.concatenate(pooled)
    assert pooled.size >= 10_000
    assert float(pooled.mean()) == pytest.approx(0.0, abs=0.002)
    assert float(pooled.var()) == pytest.approx(1.0 / dim, rel=0.05)


def test_zero_dim_rejected():
    with pytest.raises(ValueError):
        generate_haar(0, (1,))


def test_length_mismatch_rejected():
    t = generate_haar(8, (0,))
    with pytest.raises(ValueError):
        t.forward(np.zeros(9))
    with pytest.raises(ValueError):
        t.inverse(np.zeros(7))


def test_basis_vector_maps_to_row():
    t = generate_haar(16, (4,))
    e1 = np.zeros(16)
    e1[0] = 1.0
    out = t.inverse(e1)  # first row of U, unit norm
    np.testing.assert_allclose(out, t.matrix[0], atol=1e-15)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(min_value=1, max_value=512), seed=st.integers(0, 2**32 - 1))
def test_isometry_and_round_trip(dim, seed):
    t = generate_haar(dim, (seed,))
    v = np.random.default_rng(seed).standard_normal(dim)
    x = t.forward(v)
    assert np.linalg.norm(x) == pytest.approx(np.linalg.norm(v), rel=1e-9)
    np.testing.assert_allclose(t.inverse(x), v, atol=1e-9 * max(1.0, np.abs(v).max()))
    assert np.allclose(t.forward(np.zeros(dim)), 0.0)


def test_cache_returns_same_object():
    a = cached_haar(32, (5, 6))
    b = cached_haar(32, (5, 6))
    assert a is b


def test_inverse_cdf_sampler_moments_and_determinism():
    rng = derive_rng((123,))
    z = inverse_cdf_normals(rng, 200_000)
    assert np.isfinite(z).all()
    assert float(z.mean()) == pytest.approx(0.0, abs=0.01)
    assert float(z.var()) == pytest.approx(1.0, rel=0.02)
    z2 = inverse_cdf_normals(derive_rng((123,)), 200_000)
    assert z.tobytes() == z2.tobytes()
