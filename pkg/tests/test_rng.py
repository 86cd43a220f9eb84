import numpy as np
import pytest

from pyrofield.rng import STREAM_FIELD, STREAM_ONEDIM, reference_uniforms, site_uniform, uniforms


@pytest.mark.parametrize("seed, replica, n", [
    (0, 0, 0), (1, 2, 3), (12345, 7, 999), (2**64 - 1, 2**63 - 1, 20000),
])
@pytest.mark.parametrize("stream", [STREAM_FIELD, STREAM_ONEDIM])
def test_matches_numpy_philox(seed, replica, n, stream):
    ours = uniforms(seed, replica, n, 23, stream)
    ref = reference_uniforms(seed, replica, n, 23, stream)
    np.testing.assert_array_equal(ours, ref)


def test_uniform_is_pure_function_of_its_key():
    a = site_uniform(np.uint64(5), np.uint64(1), 10, 7, 0)
    uniforms(5, 1, 10, 100)  # unrelated draws in between
    assert site_uniform(np.uint64(5), np.uint64(1), 10, 7, 0) == a


def test_streams_are_distinct():
    assert not np.array_equal(uniforms(1, 0, 0, 8, STREAM_FIELD), uniforms(1, 0, 0, 8, STREAM_ONEDIM))
    assert not np.array_equal(uniforms(1, 0, 0, 8), uniforms(1, 1, 0, 8))
    assert not np.array_equal(uniforms(1, 0, 0, 8), uniforms(1, 0, 1, 8))


def test_range_and_rough_uniformity():
    u = np.concatenate([uniforms(3, r, 0, 1000) for r in range(20)])
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 3 * np.sqrt(1 / 12 / u.size)
