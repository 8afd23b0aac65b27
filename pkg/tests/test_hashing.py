import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mbf.errors import InvalidParameterError
from mbf.hashing import (
    GOLDEN_MULTIPLIER,
    DirectIndex,
    PartitionHash,
    UniversalHashFamily,
    canonical,
    canonical_many,
    derive_seed,
    hash_index,
    make_universal_family,
    multiplicative_bucket,
    partition,
)


def h3_oracle(seed, i, data: bytes) -> int:
    """Bit-by-bit H3: XOR the coefficient of every set input bit."""
    acc = 0
    for p, byte in enumerate(data):
        coeffs = np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(i, p))).random_raw(8)
        for b in range(8):
            if byte >> (7 - b) & 1:
                acc ^= int(coeffs[b])
    return acc


def test_canonical_forms():
    assert canonical(1) == b"\x00" * 7 + b"\x01"
    assert canonical(-1) == b"\xff" * 8
    assert canonical("ab") == b"\x00\x00\x00\x02ab"
    assert canonical(b"\x05") == b"\x05"
    with pytest.raises(TypeError):
        canonical(1.5)


def test_canonical_many_pads_with_zeros():
    out = canonical_many([b"\x01", b"\x02\x03"])
    assert out.tolist() == [[1, 0], [2, 3]]
    ints = canonical_many(np.array([1, 256], dtype=np.uint64))
    assert bytes(ints[1]) == canonical(256)


@pytest.mark.parametrize("item", [0, 1, 12345678901234567, "word", b"\x00\xff\x10"])
def test_raw_matches_bitwise_oracle(item):
    fam = UniversalHashFamily(3, 97, seed=42)
    for i in range(3):
        assert fam.raw(i, item) == h3_oracle(42, i, canonical(item))
        assert fam.index(i, item) == h3_oracle(42, i, canonical(item)) % 97


def test_coefficients_are_the_pcg_stream():
    fam = make_universal_family(2, 16, seed=9)
    c = fam.coefficients(1, nbytes=2)
    expect = np.concatenate([np.random.PCG64(np.random.SeedSequence(9, spawn_key=(1, p))).random_raw(8) for p in range(2)])
    assert c.tolist() == expect.tolist()


@given(st.binary(min_size=8, max_size=8), st.binary(min_size=8, max_size=8))
@settings(max_examples=50, deadline=None)
def test_h3_is_linear_over_gf2(a, b):
    fam = UniversalHashFamily(2, 1 << 20, seed=3)
    x = bytes(p ^ q for p, q in zip(a, b))
    if not any(x):
        return
    for i in range(2):
        assert fam.raw(i, x) == fam.raw(i, a) ^ fam.raw(i, b)


def test_deterministic_across_instances_and_seed_sensitive():
    a = UniversalHashFamily(4, 1000, seed=5)
    b = UniversalHashFamily(4, 1000, seed=5)
    c = UniversalHashFamily(4, 1000, seed=6)
    items = list(range(200))
    assert a.indices_many(items).tolist() == b.indices_many(items).tolist()
    assert a.indices_many(items).tolist() != c.indices_many(items).tolist()


def test_vector_path_matches_scalar_path_and_long_items():
    fam = UniversalHashFamily(3, 50, seed=1, distinct=True)
    items = ["short", "a much longer string than the initial table width", 7, b"\x01\x02"]
    vec = fam.indices_many(items)
    assert vec.tolist() == [fam.indices(x) for x in items]


@given(st.lists(st.integers(min_value=0, max_value=2**64 - 1), min_size=1, max_size=30),
       st.integers(min_value=1, max_value=8), st.integers(min_value=8, max_value=40))
@settings(max_examples=60, deadline=None)
def test_distinct_index_sets(items, count, rng):
    fam = UniversalHashFamily(count, rng, seed=11, distinct=True)
    out = fam.indices_many(items)
    for row in out:
        assert len(set(row.tolist())) == count
        assert all(0 <= v < rng for v in row)


def test_distinct_leaves_first_index_raw():
    fam = UniversalHashFamily(3, 20, seed=2, distinct=True)
    for x in range(50):
        assert fam.indices(x)[0] == fam.index(0, x)


def test_index_uniformity_chi_square():
    m = 64
    fam = UniversalHashFamily(1, m, seed=2024)
    idx = fam.indices_many(np.arange(64_000, dtype=np.uint64))[:, 0]
    counts = np.bincount(idx, minlength=m)
    assert stats.chisquare(counts).pvalue > 1e-4


def test_pairwise_collision_rate():
    # Two different items collide under one function with probability about 1/m.
    m = 101
    n = 20_000
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2**64, n, dtype=np.uint64)
    b = rng.integers(0, 2**64, n, dtype=np.uint64)
    hits = 0
    for s in range(5):
        fam = UniversalHashFamily(1, m, seed=s)
        hits += int((fam.indices_many(a)[:, 0] == fam.indices_many(b)[:, 0]).sum())
    rate = hits / (5 * n)
    se = np.sqrt((1 / m) * (1 - 1 / m) / (5 * n))
    assert abs(rate - 1 / m) < 4 * se


def test_family_validation():
    with pytest.raises(InvalidParameterError):
        make_universal_family(0, 10, 1)
    with pytest.raises(InvalidParameterError):
        make_universal_family(1, 1, 1)
    fam = make_universal_family(2, 10, 1)
    with pytest.raises(InvalidParameterError):
        fam.index(2, 5)
    with pytest.raises(InvalidParameterError):
        fam.raw(0, b"")
    assert hash_index(fam, 1, 5) == fam.index(1, 5)


def test_derive_seed_is_stable_and_tag_sensitive():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(1, 3)
    assert 0 <= derive_seed(7) < 2**64


def test_partition_hash():
    one = PartitionHash(1, seed=0)
    assert one("x") == 0 and one.classify_many([1, 2]).tolist() == [0, 0]
    p = PartitionHash(10, seed=4)
    vals = p.classify_many(np.arange(20_000, dtype=np.uint64))
    assert vals.tolist()[:50] == [partition(p, int(x)) for x in range(50)]
    counts = np.bincount(vals, minlength=10)
    assert stats.chisquare(counts).pvalue > 1e-4
    with pytest.raises(InvalidParameterError):
        PartitionHash(0, 1)


def test_direct_index():
    d = DirectIndex(4)
    assert d.indices(3) == [3] and d.index(0, 2) == 2
    assert d.indices_many([0, 1, 3]).ravel().tolist() == [0, 1, 3]
    with pytest.raises(InvalidParameterError):
        d.indices(4)


def test_multiplicative_bucket_formula():
    for key in (0, 1, 2**63, 987654321):
        expect = (((key * GOLDEN_MULTIPLIER) % 2**64) * 37) >> 64
        assert multiplicative_bucket(key, 37) == expect
    assert multiplicative_bucket("abc", 1) == 0
    with pytest.raises(InvalidParameterError):
        multiplicative_bucket(1, 0)


def test_multiplicative_buckets_spread_sequential_keys():
    counts = np.bincount([multiplicative_bucket(k, 50) for k in range(5000)], minlength=50)
    assert counts.min() > 50 and counts.max() < 150
