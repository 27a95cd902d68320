import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pqnorms.profiles import VarianceProfile, make_iid, make_tensor
from pqnorms.sampling import (
    DOMAIN_STARTS,
    KeyedStream,
    SampleKey,
    generator_for,
    sample_matrices,
    sample_matrix,
    sample_weighted_vector,
    sample_weighted_vectors,
)


class TestSampleKey:
    @pytest.mark.parametrize("seed,index", [(-1, 0), (0, 2**64), (1.5, 0)])
    def test_rejects_non_u64(self, seed, index):
        with pytest.raises(ValueError):
            SampleKey(seed, index)

    def test_accepts_extremes(self):
        SampleKey(2**64 - 1, 2**64 - 1)


class TestStreams:
    def test_reposition_is_stateless(self):
        s = KeyedStream(7)
        a = s.normals(3, 5)
        s.normals(10, 17)
        s.at(1).random(3)
        np.testing.assert_array_equal(s.normals(3, 5), a)
        np.testing.assert_array_equal(KeyedStream(7).normals(3, 5), a)

    def test_distinct_indices_seeds_domains(self):
        a = KeyedStream(7).normals(3, 8)
        assert not np.array_equal(a, KeyedStream(7).normals(4, 8))
        assert not np.array_equal(a, KeyedStream(8).normals(3, 8))
        assert not np.array_equal(a, KeyedStream(7, DOMAIN_STARTS).normals(3, 8))

    def test_generator_for_matches_stream(self):
        g = generator_for(SampleKey(5, 9)).standard_normal(4)
        np.testing.assert_array_equal(g, KeyedStream(5).normals(9, 4))

    def test_prefix_property(self):
        # variates are consumed in row-major order, so a shorter draw is a prefix
        long = KeyedStream(1).normals(0, 20)
        np.testing.assert_array_equal(KeyedStream(1).normals(0, 6), long[:6])

    def test_moments(self):
        x = KeyedStream(0).normals(0, 200_000)
        assert abs(x.mean()) < 0.01
        assert abs(x.var() - 1) < 0.01


class TestSampleMatrices:
    def test_batch_equals_single(self):
        p = make_tensor([1.0, 0.5, 0.0], [2.0, 1.0])
        batch = sample_matrices(p, 3, 4, start=10)
        for k in range(4):
            np.testing.assert_array_equal(batch[k], sample_matrix(p, SampleKey(3, 10 + k)).g)

    def test_zero_entries_exact_and_positions_fixed(self):
        full = make_iid(3, 3, 1.0)
        a = np.ones((3, 3))
        a[1, 1] = 0.0
        g_full = sample_matrix(full, SampleKey(0, 0)).g
        g = sample_matrix(VarianceProfile(a), SampleKey(0, 0)).g
        assert g[1, 1] == 0.0 and not np.signbit(g[1, 1])
        mask = a != 0
        np.testing.assert_array_equal(g[mask], g_full[mask])

    def test_scale_equivariance(self):
        p = make_iid(2, 5, 1.0)
        np.testing.assert_array_equal(sample_matrices(p.scaled(3.0), 1, 3), 3.0 * sample_matrices(p, 1, 3))

    def test_vectors(self):
        a = np.array([1.0, 0.0, 2.0])
        v = sample_weighted_vectors(a, 2, 3, start=5)
        np.testing.assert_array_equal(v[1], sample_weighted_vector(a, SampleKey(2, 6)))
        assert np.all(v[:, 1] == 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**40), st.integers(1, 5), st.integers(1, 5))
def test_sample_is_function_of_key(seed, index, m, n):
    p = make_iid(m, n, 1.0)
    a = sample_matrix(p, SampleKey(seed, index)).g
    b = sample_matrices(p, seed, 1, start=index)[0]
    np.testing.assert_array_equal(a, b)
