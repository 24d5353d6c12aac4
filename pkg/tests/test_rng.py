import numpy as np

from nusa.rng import MASK64, Xorshift64Star, derive_seed


def test_same_seed_same_stream():
    a = Xorshift64Star(123)
    b = Xorshift64Star(123)
    assert [a.next_uint64() for _ in range(50)] == [b.next_uint64() for _ in range(50)]


def test_different_seeds_diverge():
    a = Xorshift64Star(1)
    b = Xorshift64Star(2)
    assert [a.next_uint64() for _ in range(10)] != [b.next_uint64() for _ in range(10)]


def test_zero_seed_works():
    vals = [Xorshift64Star(0).next_uint64() for _ in range(3)]
    assert all(0 <= v <= MASK64 for v in vals)


def test_uniform_range_and_mean():
    rng = Xorshift64Star(9)
    values = [rng.uniform() for _ in range(5000)]
    assert all(0.0 <= v < 1.0 for v in values)
    assert abs(np.mean(values) - 0.5) < 0.02


def test_normal_moments():
    rng = Xorshift64Star(10)
    values = rng.normals(20000)
    assert abs(values.mean()) < 0.03
    assert abs(values.std() - 1.0) < 0.03


def test_permutation_is_a_permutation():
    rng = Xorshift64Star(11)
    for n in (1, 2, 7, 100):
        assert sorted(rng.permutation(n).tolist()) == list(range(n))


def test_permutation_deterministic():
    assert np.array_equal(Xorshift64Star(4).permutation(30),
                          Xorshift64Star(4).permutation(30))


def test_unit_vector_norm():
    rng = Xorshift64Star(12)
    for dim in (1, 3, 16):
        assert abs(np.linalg.norm(rng.unit_vector(dim)) - 1.0) < 1e-12


def test_derive_seed_deterministic_and_sensitive():
    assert derive_seed(5, 1, 2) == derive_seed(5, 1, 2)
    assert derive_seed(5, 1, 2) != derive_seed(5, 2, 1)
    assert derive_seed(5, 1) != derive_seed(6, 1)
    assert derive_seed(5) != derive_seed(5, 0)
