"""Held-out evaluation: RMSE and the ranking-based percentile metric.

Per user, the candidate list is exactly that user's rated test items.
Items are ranked by descending predicted score; the percentile of
1-based rank k among n candidates is 100*k/n, with midranks for score
ties.  A user's score is the mean percentile of their liked items
(lower is better); the aggregate is the mean over users that have at
least one liked test item.
"""

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import DataError


@dataclass(frozen=True)
class RankingResult:
    per_user: dict          # user index -> percentile score
    maps: float             # mean over counted users
    counted_users: int
    skipped_users: int      # users with no liked test item


def rmse(predictions, truth):
    """Root mean squared error of *predictions* aligned with the entries
    of the *truth* RatingMatrix."""
    predictions = np.asarray(predictions, dtype=np.float64)
    if len(truth) == 0:
        raise DataError("empty truth set")
    if predictions.shape != (len(truth),):
        raise DataError(
            f"got {predictions.shape} predictions for {len(truth)} entries")
    err = predictions - truth.ratings
    return float(np.sqrt(np.einsum("i,i->", err, err) / err.size))


def aps_user(scored, liked):
    """Percentile score for one user.

    *scored* is the user's (item, predicted score) list; *liked* the set
    of items the user actually preferred.  Returns None when *liked* is
    empty (the user is skipped, not an error).
    """
    if not liked:
        return None
    items = [it for it, _ in scored]
    scores = np.array([s for _, s in scored], dtype=np.float64)
    missing = set(liked) - set(items)
    if missing:
        raise DataError(f"liked items missing from scored list: {missing}")
    # midranks on descending score; invariant under input permutation
    ranks = rankdata(-scores, method="average")
    n = scores.size
    percentile = {it: 100.0 * rk / n for it, rk in zip(items, ranks)}
    liked_sorted = sorted(liked, key=items.index)
    return float(np.mean([percentile[it] for it in liked_sorted]))


def mean_aps(predictions, test, like_threshold=1.0):
    """Aggregate percentile score over all evaluable users.

    *predictions* is aligned with the entries of *test*; liked items are
    those with rating >= like_threshold.
    """
    predictions = np.asarray(predictions, dtype=np.float64)
    if len(test) == 0:
        raise DataError("empty test set")
    if predictions.shape != (len(test),):
        raise DataError(
            f"got {predictions.shape} predictions for {len(test)} entries")
    per_user = {}
    skipped = 0
    for u in np.unique(test.users):
        sel = test.users == u
        items = test.items[sel]
        scores = predictions[sel]
        liked = items[test.ratings[sel] >= like_threshold]
        if liked.size == 0:
            skipped += 1
            continue
        ranks = rankdata(-scores, method="average")
        liked_mask = np.isin(items, liked)
        per_user[int(u)] = float(
            np.mean(100.0 * ranks[liked_mask] / items.size))
    if not per_user:
        raise DataError("no user has a liked test item")
    values = [per_user[u] for u in sorted(per_user)]
    return RankingResult(per_user, float(np.mean(values)),
                         len(per_user), skipped)
