import math

import numpy as np
import pytest
from scipy import stats

from mallows.estimation import expected_inversions, log_normalizer_phi
from mallows.permutation import (
    Permutation,
    all_permutations,
    compose,
    inversion_table,
    inversions,
    invert,
    prefix_inversion_table,
)
from mallows.regeneration import component_length_pmf
from mallows.sampling import (
    FiniteRow,
    GeometricRow,
    PShiftedStream,
    UnusedIntegers,
    decode_tables,
    sample_geometric,
    sample_gm,
    sample_igm_top_t,
    sample_mallows_phi,
    sample_p_shifted,
    sample_truncated_geometric,
    shifted_from_draws,
    truncated_geometric_pmf,
)


def word_index(words, n):
    table = {w: k for k, w in enumerate(all_permutations(n))}
    return np.array([table[tuple(int(v) for v in w)] for w in words])


def chi2_pvalue(observed, expected_probs):
    expected = expected_probs * observed.sum()
    return stats.chisquare(observed, expected).pvalue


def test_truncated_geometric_pmf_closed_form():
    q = math.exp(-1)
    p = truncated_geometric_pmf(1.0, 3)
    ref = np.array([q**i * (1 - q) / (1 - q**3) for i in range(3)])
    np.testing.assert_allclose(p, ref, rtol=1e-14)
    np.testing.assert_allclose(p, [0.665240955775, 0.244728471055, 0.090030573170], rtol=1e-10)
    assert truncated_geometric_pmf(2.0, 1).tolist() == [1.0]


def test_truncated_geometric_draws(rng):
    x = sample_truncated_geometric(1.0, 3, rng, size=200_000)
    counts = np.bincount(x, minlength=3)
    assert chi2_pvalue(counts, truncated_geometric_pmf(1.0, 3)) > 0.001
    assert np.all(sample_truncated_geometric(0.7, 1, rng, size=100) == 0)
    # near-deterministic stage
    assert np.mean(sample_truncated_geometric(30.0, 5, rng, size=1000) == 0) == 1.0


def test_geometric_draws(rng):
    x = sample_geometric(1.0, rng, size=200_000)
    q = math.exp(-1)
    k = np.arange(8)
    counts = np.bincount(np.minimum(x, 8), minlength=9)
    probs = np.append((1 - q) * q**k, q**8)
    assert chi2_pvalue(counts, probs) > 0.001


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
def test_phi_sampler_matches_enumeration(rng, theta):
    n = 4
    words = sample_mallows_phi(n, theta, rng, size=200_000)
    counts = np.bincount(word_index(words, n), minlength=24)
    inv = np.array([inversions(w) for w in all_permutations(n)])
    probs = np.exp(-theta * inv - log_normalizer_phi(theta, n))
    assert abs(probs.sum() - 1) < 1e-12
    assert chi2_pvalue(counts, probs) > 0.001


def test_phi_mean_inversions(rng):
    words = sample_mallows_phi(5, 1.0, rng, size=100_000)
    inv = np.array([inversions(w) for w in words[:100_000]])
    se = inv.std(ddof=1) / math.sqrt(inv.size)
    assert abs(inv.mean() - expected_inversions(1.0, 5)) < 3 * se


def test_single_draw_returns_permutation(rng):
    p = sample_mallows_phi(3, 1.0, rng)
    assert isinstance(p, Permutation)
    assert sample_mallows_phi(1, 1.0, rng) == Permutation((1,))


def test_gm_stage_marginals(rng):
    words = sample_gm(3, (1.0, 2.0), rng, size=100_000)
    tables = np.array([inversion_table(tuple(w)) for w in words])
    c1 = np.bincount(tables[:, 0], minlength=3)
    c2 = np.bincount(tables[:, 1], minlength=2)
    assert chi2_pvalue(c1, truncated_geometric_pmf(1.0, 3)) > 0.001
    assert chi2_pvalue(c2, truncated_geometric_pmf(2.0, 2)) > 0.001


def test_gm_equal_thetas_same_law_as_phi():
    a = sample_gm(4, (0.8, 0.8, 0.8), np.random.default_rng(3), size=50)
    b = sample_mallows_phi(4, 0.8, np.random.default_rng(3), size=50)
    np.testing.assert_array_equal(a, b)


def test_center_shift_law(rng):
    center = Permutation.from_ranked((2, 3, 1))
    words = sample_mallows_phi(3, 1.0, rng, center=center, size=60_000)
    rel = [compose(tuple(w), invert(center)).word for w in words]
    counts = np.bincount(word_index(rel, 3), minlength=6)
    base = np.bincount(word_index(sample_mallows_phi(3, 1.0, rng, size=60_000), 3), minlength=6)
    table = np.vstack([counts, base])
    assert stats.chi2_contingency(table).pvalue > 0.001


def test_center_is_the_mode(rng):
    center = (3, 1, 2)
    words = sample_mallows_phi(3, 4.0, rng, center=center, size=2000)
    ranked = [tuple(np.argsort(w) + 1) for w in words]
    top = max(set(ranked), key=ranked.count)
    assert top == center


def test_decode_tables_vectorised():
    n = 4
    tables = np.array([inversion_table(w) for w in all_permutations(n)])
    ranked = decode_tables(tables, n)
    assert [tuple(map(int, r)) for r in ranked] == [Permutation(w).ranked for w in all_permutations(n)]


def test_igm_zero_stages_gives_center_prefix():
    center = (5, 2, 9, 1)
    out = sample_igm_top_t((60.0, 60.0, 60.0), np.random.default_rng(0), center=center, size=5)
    assert all(tuple(r) == (5, 2, 9) for r in out)


def test_igm_first_item_law(rng):
    out = sample_igm_top_t((1.0,), rng, size=100_000)
    first = np.asarray(out)[:, 0]
    q = math.exp(-1)
    counts = np.bincount(np.minimum(first, 7), minlength=8)[1:]
    probs = np.append((1 - q) * q ** np.arange(6), q**6)
    assert chi2_pvalue(counts, probs) > 0.001


def test_igm_items_distinct(rng):
    out = np.asarray(sample_igm_top_t((0.3,) * 8, rng, size=1000))
    assert all(len(set(r)) == 8 for r in out.tolist())
    assert out.min() >= 1


def test_shifted_examples():
    assert shifted_from_draws([2, 1, 2, 3, 4, 1]) == [2, 1, 4, 6, 8, 3]
    assert shifted_from_draws([1] * 6) == [1, 2, 3, 4, 5, 6]
    prefix = shifted_from_draws([3, 1, 1, 2, 5, 1, 4])
    assert prefix_inversion_table(prefix) == [2, 0, 0, 1, 4, 0, 3]


def test_unused_integers():
    u = UnusedIntegers()
    assert [u.take_kth(3), u.take_kth(1), u.take_kth(1), u.take_kth(2)] == [3, 1, 2, 5]
    with pytest.raises(ValueError):
        u.take_kth(0)


def test_shifted_geometric_rows_inversion_marginals(rng):
    theta = 1.0
    m = 6
    tables = []
    for _ in range(20_000):
        prefix = sample_p_shifted(GeometricRow.from_theta(theta), m, rng)
        tables.append(prefix_inversion_table(prefix))
    tables = np.array(tables)
    q = math.exp(-theta)
    probs = np.append((1 - q) * q ** np.arange(5), q**5)
    for j in range(m):
        counts = np.bincount(np.minimum(tables[:, j], 5), minlength=6)
        assert chi2_pvalue(counts, probs) > 0.0005


def test_first_splitting_time_law(rng):
    row = GeometricRow.from_theta(1.0)
    _, pmf = component_length_pmf(row, 40)
    firsts = []
    for _ in range(20_000):
        stream = PShiftedStream(row, rng)
        running, pos = 0, 0
        while True:
            pos += 1
            v = stream.extend(1)[0]
            running = max(running, v)
            if running == pos:
                break
        firsts.append(pos)
    counts = np.bincount(np.minimum(firsts, 5), minlength=6)[1:]
    probs = np.append(pmf[:4], 1 - pmf[:4].sum())
    assert chi2_pvalue(counts, probs) > 0.001


def test_stream_cap(rng):
    stream = PShiftedStream(GeometricRow(0.5), rng, cap=10)
    stream.extend(10)
    with pytest.raises(OverflowError):
        stream.extend(1)


def test_row_validation():
    with pytest.raises(ValueError):
        FiniteRow((0.5, 0.6))
    with pytest.raises(ValueError):
        PShiftedStream(FiniteRow((0.0, 1.0)), np.random.default_rng(0))
    with pytest.raises(ValueError):
        GeometricRow(1.0)


def test_inhomogeneous_rows(rng):
    rows = lambda i: FiniteRow((1.0,)) if i % 2 else FiniteRow((0.0, 1.0))  # noqa: E731
    prefix = sample_p_shifted(rows, 6, rng)
    assert prefix == shifted_from_draws([1, 2, 1, 2, 1, 2])


def test_reproducible_with_seed():
    a = sample_mallows_phi(6, 0.7, np.random.default_rng(11), size=20)
    b = sample_mallows_phi(6, 0.7, np.random.default_rng(11), size=20)
    np.testing.assert_array_equal(a, b)
