import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dmcsim import evaluate
from dmcsim.errors import DataError

from conftest import make_ratings


class TestRmse:
    def test_perfect_predictions(self):
        rm = make_ratings(2, 2, [(0, 0, 1.0), (1, 1, 2.0)])
        assert evaluate.rmse([1.0, 2.0], rm) == 0.0

    def test_single_entry(self):
        rm = make_ratings(1, 1, [(0, 0, 5.0)])
        assert evaluate.rmse([2.0], rm) == 3.0

    def test_matches_entry_loop_oracle(self, rng):
        entries = [(u, i, float(rng.standard_normal()))
                   for u in range(5) for i in range(4)]
        rm = make_ratings(5, 4, entries)
        preds = rng.standard_normal(20)
        acc = 0.0
        for p, (_, _, r) in zip(preds, sorted(entries)):
            acc += (p - r) ** 2
        expect = np.sqrt(acc / 20)
        assert abs(evaluate.rmse(preds, rm) - expect) <= 1e-12

    def test_empty_truth(self):
        rm = make_ratings(2, 2, [])
        with pytest.raises(DataError):
            evaluate.rmse([], rm)


def brute_force_aps(scored, liked):
    """Average over all tie-breaking permutations of the percentile mean."""
    n = len(scored)
    totals = []
    for perm in itertools.permutations(range(n)):
        order = sorted(perm, key=lambda k: (-scored[k][1], perm[k]))
        rank = {scored[k][0]: pos + 1 for pos, k in enumerate(order)}
        totals.append(np.mean([100.0 * rank[it] / n for it in liked]))
    return float(np.mean(totals))


class TestApsUser:
    def test_top_ranked_of_ten(self):
        scored = [(i, 10.0 - i) for i in range(10)]
        assert evaluate.aps_user(scored, {0}) == 10.0

    def test_all_four_liked(self):
        scored = [(i, 4.0 - i) for i in range(4)]
        assert evaluate.aps_user(scored, {0, 1, 2, 3}) == 62.5

    def test_midrank_tie(self):
        # two items tied at the top; the liked one gets midrank 1.5
        scored = [(0, 9.0), (1, 9.0), (2, 5.0), (3, 1.0)]
        assert evaluate.aps_user(scored, {0}) == 37.5

    def test_midrank_matches_permutation_average(self, rng):
        scores = [3.0, 3.0, 3.0, 2.0, 1.0, 1.0]
        scored = list(enumerate(scores))
        for liked in ({0}, {1, 3}, {2, 5}, {0, 1, 2, 3, 4, 5}):
            assert evaluate.aps_user(scored, liked) == pytest.approx(
                brute_force_aps(scored, liked), abs=1e-12)

    def test_empty_liked_signals_skip(self):
        assert evaluate.aps_user([(0, 1.0)], set()) is None

    def test_liked_not_scored_is_error(self):
        with pytest.raises(DataError):
            evaluate.aps_user([(0, 1.0)], {7})

    @given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=12,
                    unique=True),
           st.data())
    @settings(max_examples=60, deadline=None)
    def test_monotone_transform_invariance(self, scores, data_strategy):
        scored = [(it, float(s)) for it, s in enumerate(scores)]
        liked = {data_strategy.draw(
            st.sampled_from([it for it, _ in scored]))}
        base = evaluate.aps_user(scored, liked)
        warped = [(it, 2.0 * s + 7.0) for it, s in scored]
        assert evaluate.aps_user(warped, liked) == pytest.approx(base)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=10,
                    unique=True),
           st.randoms())
    @settings(max_examples=60, deadline=None)
    def test_permutation_invariance(self, scores, random):
        scored = list(enumerate(scores))
        liked = {scored[0][0]}
        base = evaluate.aps_user(scored, liked)
        shuffled = scored[:]
        random.shuffle(shuffled)
        assert evaluate.aps_user(shuffled, liked) == pytest.approx(base)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=10,
                    unique=True))
    @settings(max_examples=60, deadline=None)
    def test_score_reversal_maps_percentile(self, scores):
        n = len(scores)
        scored = list(enumerate(scores))
        liked = {scored[0][0]}
        forward = evaluate.aps_user(scored, liked)
        backward = evaluate.aps_user([(it, -s) for it, s in scored], liked)
        assert backward == pytest.approx(100.0 * (n + 1) / n - forward)


class TestMeanAps:
    def test_perfect_model_one_liked_of_ten(self):
        entries, preds = [], []
        for u in range(20):
            for i in range(10):
                liked = i == 3
                entries.append((u, i, 1.0 if liked else 0.0))
                preds.append(5.0 if liked else -float(i))
        test = make_ratings(20, 10, entries)
        result = evaluate.mean_aps(np.array(preds), test, 1.0)
        assert result.maps == 10.0
        assert result.counted_users == 20
        assert result.skipped_users == 0

    def test_skipped_users_counted(self):
        entries = [(0, 0, 1.0), (0, 1, 0.0), (1, 0, 0.0), (1, 1, 0.0)]
        test = make_ratings(2, 2, entries)
        result = evaluate.mean_aps([1.0, 0.0, 0.5, 0.2], test, 1.0)
        assert result.counted_users == 1
        assert result.skipped_users == 1

    def test_random_scores_near_expected_percentile(self):
        # expectation 100*(n+1)/(2n) = 51.25 for n = 40
        rng = np.random.default_rng(424242)
        entries, liked_flags = [], []
        for u in range(500):
            liked_items = set(rng.choice(40, size=4, replace=False).tolist())
            for i in range(40):
                entries.append((u, i, 1.0 if i in liked_items else 0.0))
        test = make_ratings(500, 40, entries)
        preds = rng.random(len(entries))
        result = evaluate.mean_aps(preds, test, 1.0)
        assert 49.25 <= result.maps <= 53.25

    def test_no_liked_users_is_error(self):
        test = make_ratings(1, 2, [(0, 0, 0.0), (0, 1, 0.0)])
        with pytest.raises(DataError):
            evaluate.mean_aps([0.1, 0.2], test, 1.0)

    def test_empty_test_is_error(self):
        with pytest.raises(DataError):
            evaluate.mean_aps([], make_ratings(1, 1, []), 1.0)

    def test_matches_aps_user(self, rng):
        entries = []
        for u in range(6):
            for i in range(8):
                entries.append((u, i, float(rng.integers(0, 2))))
        test = make_ratings(6, 8, entries)
        preds = rng.standard_normal(len(entries))
        result = evaluate.mean_aps(preds, test, 1.0)
        for u, aps in result.per_user.items():
            sel = test.users == u
            scored = list(zip(test.items[sel].tolist(), preds[sel]))
            liked = set(test.items[sel][test.ratings[sel] >= 1.0].tolist())
            assert aps == pytest.approx(evaluate.aps_user(scored, liked))
