"""Rating datasets: file I/O, synthetic generation, splitting, partitioning.

File format: UTF-8 text, one ``user,item,rating`` triplet per line,
``#``-prefixed comment lines allowed.  Ratings are decimal reals and are
written back with full round-trip precision.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError, ParseError
from .linalg import MaskedIndexSet


@dataclass(frozen=True)
class RatingMatrix:
    """Sparse observed entries over an m x n user/item index space.

    Entry arrays are sorted by (user, item) and hold at most one entry
    per pair.  Optional label tuples map dense indices back to original
    file ids.
    """

    m: int
    n: int
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    user_labels: tuple = None
    item_labels: tuple = None

    def __post_init__(self):
        users = np.asarray(self.users, dtype=np.int64)
        items = np.asarray(self.items, dtype=np.int64)
        ratings = np.asarray(self.ratings, dtype=np.float64)
        if not (users.shape == items.shape == ratings.shape):
            raise DataError("entry arrays must have equal length")
        if users.size:
            if users.min() < 0 or users.max() >= self.m:
                raise DataError("user index out of bounds")
            if items.min() < 0 or items.max() >= self.n:
                raise DataError("item index out of bounds")
            order = np.lexsort((items, users))
            users, items, ratings = users[order], items[order], ratings[order]
            flat = users * self.n + items
            if np.any(np.diff(flat) == 0):
                raise DataError("duplicate (user, item) entry")
            if not np.isfinite(ratings).all():
                raise DataError("non-finite rating")
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "ratings", ratings)

    def __len__(self):
        return self.users.size

    def mask(self):
        """Observed positions as a MaskedIndexSet (entry order preserved)."""
        return MaskedIndexSet(self.m, self.n, self.users, self.items)


@dataclass(frozen=True)
class Shard:
    """One agent's column slice [col_start, col_end) with re-based columns."""

    agent_id: int
    col_start: int
    col_end: int
    ratings: RatingMatrix

    @property
    def n_local(self):
        return self.col_end - self.col_start


@dataclass(frozen=True)
class SplitDataset:
    train: RatingMatrix
    test: RatingMatrix
    seed: int


def load_ratings(path, m=None, n=None):
    """Load a triplet file into a RatingMatrix.

    Ids are taken as given when they are non-negative integers densely
    covering 0..max (or when *m*/*n* force the index space); otherwise
    they are remapped by first occurrence and the label tables retained.
    """
    raw = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(
                    f"{path}:{lineno}: expected 3 comma-separated fields")
            try:
                rating = float(parts[2])
            except ValueError:
                raise ParseError(
                    f"{path}:{lineno}: bad rating {parts[2]!r}") from None
            raw.append((parts[0].strip(), parts[1].strip(), rating, lineno))

    forced = m is not None or n is not None
    if forced and (m is None or n is None):
        raise ConfigurationError("m and n must be given together")

    def integral(ids):
        return all(s.isdigit() for s in ids)

    user_ids = [r[0] for r in raw]
    item_ids = [r[1] for r in raw]
    users_integral = integral(user_ids)
    items_integral = integral(item_ids)
    user_labels = item_labels = None

    if forced:
        if not (users_integral and items_integral):
            raise DataError(f"{path}: forced dimensions require integer ids")
        users = [int(s) for s in user_ids]
        items = [int(s) for s in item_ids]
        if users and (max(users) >= m or max(items) >= n):
            raise DataError(f"{path}: id exceeds forced dimensions {m}x{n}")
    else:
        def dense(vals):
            return vals and set(vals) == set(range(max(vals) + 1))

        if users_integral and items_integral:
            users = [int(s) for s in user_ids]
            items = [int(s) for s in item_ids]
            if not (dense(users) and dense(items)):
                users_integral = items_integral = False
        if not (users_integral and items_integral):
            umap, imap = {}, {}
            users, items = [], []
            for u, i, _, _ in raw:
                users.append(umap.setdefault(u, len(umap)))
                items.append(imap.setdefault(i, len(imap)))
            user_labels = tuple(umap)
            item_labels = tuple(imap)
        m = max(users) + 1 if users else 0
        n = max(items) + 1 if items else 0

    seen = {}
    for (u, i, lineno) in zip(users, items, (r[3] for r in raw)):
        if (u, i) in seen:
            raise DataError(
                f"{path}:{lineno}: duplicate (user, item) entry "
                f"(first at line {seen[(u, i)]})")
        seen[(u, i)] = lineno

    return RatingMatrix(
        m, n, np.array(users, dtype=np.int64), np.array(items, dtype=np.int64),
        np.array([r[2] for r in raw]), user_labels, item_labels)


def save_ratings(path, rm):
    """Write the triplet format with full round-trip float precision."""
    with open(path, "w", encoding="utf-8") as fh:
        for u, i, r in zip(rm.users, rm.items, rm.ratings):
            label_u = rm.user_labels[u] if rm.user_labels else u
            label_i = rm.item_labels[i] if rm.item_labels else i
            fh.write(f"{label_u},{label_i},{float(r)!r}\n")


def synth_low_rank(m, n, r, observe_fraction, noise_sd, seed):
    """Seeded synthetic low-rank instance.

    Ground truth is A @ B with i.i.d. standard normal factors; the
    observed set is sampled without replacement with
    |Omega| = round(observe_fraction * m * n).
    """
    if not 0 < observe_fraction <= 1:
        raise ConfigurationError("observe_fraction must be in (0, 1]")
    if not 1 <= r <= min(m, n):
        raise ConfigurationError("rank must satisfy 1 <= r <= min(m, n)")
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((m, r))
    b = rng.standard_normal((r, n))
    truth = a @ b
    count = round(observe_fraction * m * n)
    flat = rng.choice(m * n, size=count, replace=False)
    users, items = np.divmod(flat.astype(np.int64), n)
    values = truth[users, items]
    if noise_sd > 0:
        values = values + noise_sd * rng.standard_normal(count)
    return RatingMatrix(m, n, users, items, values), truth


def split(rm, fraction, seed, per_user=False):
    """Seeded train/test partition of the observed entries.

    Global by default; *per_user* stratifies the split inside each
    user's entry list instead.
    """
    if not 0 < fraction < 1:
        raise ConfigurationError("split fraction must be in (0, 1)")
    if len(rm) < 2:
        raise DataError("need at least 2 entries to split")
    rng = np.random.default_rng(seed)
    if per_user:
        train_mask = np.zeros(len(rm), dtype=bool)
        for u in np.unique(rm.users):
            idx = np.flatnonzero(rm.users == u)
            rng.shuffle(idx)
            train_mask[idx[:round(fraction * idx.size)]] = True
        train_idx = np.flatnonzero(train_mask)
        test_idx = np.flatnonzero(~train_mask)
    else:
        perm = rng.permutation(len(rm))
        cut = round(fraction * len(rm))
        train_idx, test_idx = perm[:cut], perm[cut:]

    def take(idx):
        return RatingMatrix(rm.m, rm.n, rm.users[idx], rm.items[idx],
                            rm.ratings[idx], rm.user_labels, rm.item_labels)

    return SplitDataset(take(train_idx), take(test_idx), seed)


def partition_columns(rm, num_agents):
    """Contiguous column shards; the first n mod L agents get the extra column."""
    if not 1 <= num_agents <= rm.n:
        raise ConfigurationError(
            f"agent count must be in [1, n={rm.n}], got {num_agents}")
    base, extra = divmod(rm.n, num_agents)
    shards = []
    start = 0
    for i in range(num_agents):
        width = base + (1 if i < extra else 0)
        end = start + width
        sel = (rm.items >= start) & (rm.items < end)
        local = RatingMatrix(rm.m, width, rm.users[sel],
                             rm.items[sel] - start, rm.ratings[sel])
        shards.append(Shard(i, start, end, local))
        start = end
    return shards


def merge_shards(shards):
    """Inverse of partition_columns (column offsets restored)."""
    m = shards[0].ratings.m
    n = shards[-1].col_end
    users = np.concatenate([s.ratings.users for s in shards])
    items = np.concatenate(
        [s.ratings.items + s.col_start for s in shards])
    ratings = np.concatenate([s.ratings.ratings for s in shards])
    return RatingMatrix(m, n, users, items, ratings)
