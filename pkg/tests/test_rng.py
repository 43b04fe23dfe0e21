import numpy as np
import pytest
from scipy import stats

from mra.rng import (
    PURPOSE_BROWNIAN,
    PURPOSE_INITIAL,
    BrownianStream,
    brownian_block,
    brownian_increment,
    philox4x32,
    standard_normals,
)

# Philox4x32-10 known-answer vectors from the Random123 distribution
KAT = [
    ((0, 0, 0, 0), (0, 0), (0x6627E8D5, 0xE169C58D, 0xBC57AC4C, 0x9B00DBD8)),
    ((0xFFFFFFFF,) * 4, (0xFFFFFFFF, 0xFFFFFFFF), (0x408F276D, 0x41C83B0E, 0xA20BC7C6, 0x6D5451FD)),
    (
        (0x243F6A88, 0x85A308D3, 0x13198A2E, 0x03707344),
        (0xA4093822, 0x299F31D0),
        (0xD16CFE09, 0x94FDCCEB, 0x5001E420, 0x24126EA1),
    ),
]


@pytest.mark.parametrize("counter,key,expected", KAT)
def test_philox_known_answers(counter, key, expected):
    out = philox4x32(tuple(np.uint32(c) for c in counter), key)
    assert tuple(int(x) for x in out) == expected


def test_increment_is_a_pure_function_of_its_coordinates():
    s = BrownianStream(42, 7, 0.01)
    forward = [s.increment(k) for k in range(50)]
    backward = [s.increment(k) for k in reversed(range(50))][::-1]
    assert forward == backward
    np.testing.assert_array_equal(s.increments(0, 50), forward)
    assert brownian_increment(s, 17) == forward[17]


def test_block_matches_per_path_streams():
    block = brownian_block(9, np.arange(5, 9), 0.02, 3, 6)
    for col, pid in enumerate(range(5, 9)):
        np.testing.assert_array_equal(block[:, col], BrownianStream(9, pid, 0.02).increments(3, 6))


def test_seeds_paths_and_purposes_are_separated():
    base = standard_normals(1, 0, PURPOSE_BROWNIAN, np.arange(8, dtype=np.uint64))
    for other in (
        standard_normals(2, 0, PURPOSE_BROWNIAN, np.arange(8, dtype=np.uint64)),
        standard_normals(1, 1, PURPOSE_BROWNIAN, np.arange(8, dtype=np.uint64)),
        standard_normals(1, 0, PURPOSE_INITIAL, np.arange(8, dtype=np.uint64)),
        standard_normals(1, 2**32, PURPOSE_BROWNIAN, np.arange(8, dtype=np.uint64)),
    ):
        assert not np.any(base == other)


def test_high_seed_bits_matter():
    a = standard_normals(5, 0, PURPOSE_BROWNIAN, 0)
    b = standard_normals(5 + 2**40, 0, PURPOSE_BROWNIAN, 0)
    assert a != b


def test_normal_moments_over_a_million_draws():
    z = standard_normals(2024, np.arange(1000, dtype=np.uint64)[:, None], PURPOSE_BROWNIAN, np.arange(1000, dtype=np.uint64)[None, :]).ravel()
    n = z.size
    assert abs(z.mean()) < 5 / np.sqrt(n)
    assert abs(z.var() - 1) < 5 * np.sqrt(2 / n)
    assert abs(stats.skew(z)) < 5 * np.sqrt(6 / n)
    assert abs(stats.kurtosis(z)) < 5 * np.sqrt(24 / n)
    assert stats.kstest(z[:100_000], "norm").pvalue > 1e-4


def test_increments_have_variance_dt():
    dt = 1e-3
    w = brownian_block(3, np.arange(2000), dt, 0, 200).ravel()
    assert w.var() == pytest.approx(dt, rel=0.02)


def test_neighbouring_paths_are_uncorrelated():
    x = brownian_block(11, np.arange(2), 1.0, 0, 200_000)
    r = np.corrcoef(x[:, 0], x[:, 1])[0, 1]
    assert abs(r) < 5 / np.sqrt(200_000)


def test_stream_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        BrownianStream(0, 0, 0.0)
