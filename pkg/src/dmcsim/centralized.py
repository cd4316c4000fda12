"""Centralized alternating-minimization baseline.

Same Gauss-Seidel block sweep (V, Z, U) and the same kernels as the
decentralized engine with a single agent, so the two can be compared
iterate for iterate.
"""

from dataclasses import dataclass

import numpy as np

from .engine import IterationMetrics, factor_rngs
from .errors import ConfigurationError
from .linalg import frob_norm, gram, masked_assign, matmul
from .engine import _solve_with_retry


@dataclass
class CentralState:
    U: np.ndarray  # m x r
    V: np.ndarray  # r x n
    Z: np.ndarray  # m x n


def central_init(rm, config):
    """Initialization matching the single-agent decentralized setup."""
    if config.rank > rm.m:
        raise ConfigurationError(
            f"rank {config.rank} exceeds user count {rm.m}")
    rng = factor_rngs(config.seed, 1)[0]
    z0 = masked_assign(np.zeros((rm.m, rm.n)), rm.mask(), rm.ratings)
    return CentralState(
        U=config.init_scale * rng.standard_normal((rm.m, config.rank)),
        V=np.zeros((config.rank, rm.n)),
        Z=z0,
    )


def central_step(state, rm, mask, ridge=0.0):
    """One exact block sweep V -> Z -> U (each block minimized, ridge
    retry on factorization failure)."""
    ut = np.ascontiguousarray(state.U.T)
    state.V = _solve_with_retry(gram(state.U), matmul(ut, state.Z),
                                ridge, "central V-step")
    state.Z = masked_assign(matmul(state.U, state.V), mask, rm.ratings)
    vt = np.ascontiguousarray(state.V.T)
    rhs = matmul(state.Z, vt)
    sol = _solve_with_retry(gram(vt), np.ascontiguousarray(rhs.T),
                            ridge, "central U-step")
    state.U = np.ascontiguousarray(sol.T)
    return state


def central_metrics(state, train, test, iteration=0):
    p = matmul(state.U, state.V)
    objective = 0.5 * frob_norm(p - state.Z) ** 2

    def entry_rmse(rm):
        if rm is None or len(rm) == 0:
            return float("nan")
        err = p[rm.users, rm.items] - rm.ratings
        return float(np.sqrt(np.einsum("i,i->", err, err) / err.size))

    return IterationMetrics(
        iteration=iteration,
        objective=objective,
        train_rmse=entry_rmse(train),
        test_rmse=entry_rmse(test),
        consensus_gap=0.0,
        dual_sum_norm=0.0,
    )


def central_run(train, config, test=None, sink=None, state=None,
                iterations=None):
    """Loop central_step for the configured iteration budget, stopping
    early when the relative objective change drops below stop_tol.

    *iterations* overrides config.iterations; 0 returns the
    initialization unchanged.
    """
    if state is None:
        state = central_init(train, config)
    if iterations is None:
        iterations = config.iterations
    mask = train.mask()
    series = []
    prev_obj = None
    for t in range(1, iterations + 1):
        central_step(state, train, mask, config.ridge)
        row = central_metrics(state, train, test, t)
        series.append(row)
        if sink is not None:
            sink(row)
        if (config.stop_tol is not None and prev_obj is not None
                and abs(prev_obj - row.objective) < config.stop_tol * (1.0 + prev_obj)):
            break
        prev_obj = row.objective
    return state, series
