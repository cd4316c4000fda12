import numpy as np
import pytest

from dmcsim import data


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_ratings(m, n, entries):
    """RatingMatrix from a list of (user, item, rating) triples."""
    users = np.array([e[0] for e in entries], dtype=np.int64)
    items = np.array([e[1] for e in entries], dtype=np.int64)
    vals = np.array([e[2] for e in entries], dtype=np.float64)
    return data.RatingMatrix(m, n, users, items, vals)
