"""Multi-agent completion engine: per-agent state, the per-iteration update
steps, the synchronous exchange schedule, and the multi-round runner.

Each iteration runs, under barrier semantics (phase k+1 starts only after
every agent finished phase k):

    V-step -> Z-step -> exchange -> U-step [-> second exchange] -> dual step

Only full-size user-factor replicas ever cross agent boundaries; item
factors, local completions, ratings, and dual variables stay local.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericsError, SingularityError
from .linalg import frob_norm, gram, masked_assign, matmul, solve_spd

U_UPDATE_MODES = ("verbatim", "consensus", "exact")
EXCHANGE_SCHEDULES = ("single", "double")


@dataclass
class EngineConfig:
    """Run parameters for the decentralized engine.

    init_scale defaults to 1/sqrt(rank) so the initial factor product has
    O(1)-scale entries.
    """

    rank: int
    beta: float = 0.5
    iterations: int = 500
    u_update_mode: str = "exact"
    exchange_schedule: str = "double"
    ridge: float = 0.0
    init_scale: float = None
    seed: int = 0
    stop_tol: float = None
    workers: int = 1

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigurationError("rank must be >= 1")
        if self.beta <= 0:
            raise ConfigurationError("step size beta must be > 0")
        if self.iterations < 1:
            raise ConfigurationError("iterations must be >= 1")
        if self.u_update_mode not in U_UPDATE_MODES:
            raise ConfigurationError(
                f"u_update_mode must be one of {U_UPDATE_MODES}")
        if self.exchange_schedule not in EXCHANGE_SCHEDULES:
            raise ConfigurationError(
                f"exchange_schedule must be one of {EXCHANGE_SCHEDULES}")
        if self.ridge < 0:
            raise ConfigurationError("ridge must be >= 0")
        if self.init_scale is None:
            self.init_scale = 1.0 / np.sqrt(self.rank)


@dataclass
class AgentState:
    """One agent's replica, local factors, completion, and dual variable."""

    id: int
    shard: object
    mask: object
    U: np.ndarray  # m x r, full global row count
    V: np.ndarray  # r x n_local
    Z: np.ndarray  # m x n_local
    a: np.ndarray  # m x r
    neighbors: np.ndarray


@dataclass(frozen=True)
class IterationMetrics:
    iteration: int
    objective: float
    train_rmse: float
    test_rmse: float
    consensus_gap: float
    dual_sum_norm: float


@dataclass(frozen=True)
class Message:
    sender: int
    receiver: int
    kind: str
    iteration: int
    payload: object


class MessageBus:
    """Delivery point for inter-agent traffic; optionally records every
    message so tests can audit exactly what crossed agent boundaries."""

    def __init__(self, record=False):
        self.record = record
        self.log = []

    def post(self, sender, receiver, kind, iteration, payload):
        if self.record:
            self.log.append(Message(sender, receiver, kind, iteration, payload))
        return payload


def factor_rngs(seed, num_agents):
    """One independent seeded generator per agent."""
    return [np.random.default_rng(s)
            for s in np.random.SeedSequence(seed).spawn(num_agents)]


def init_agents(shards, topology, config):
    """Fresh agent states: seeded normal U, zero V and dual, Z clamped to
    the observed ratings."""
    if topology.num_agents != len(shards):
        raise ConfigurationError(
            f"topology has {topology.num_agents} agents, got "
            f"{len(shards)} shards")
    m = shards[0].ratings.m
    if config.rank > m:
        raise ConfigurationError(
            f"rank {config.rank} exceeds user count {m}")
    rngs = factor_rngs(config.seed, len(shards))
    agents = []
    for shard, rng in zip(shards, rngs):
        mask = shard.ratings.mask()
        z0 = masked_assign(np.zeros((m, shard.n_local)), mask,
                           shard.ratings.ratings)
        agents.append(AgentState(
            id=shard.agent_id,
            shard=shard,
            mask=mask,
            U=config.init_scale * rng.standard_normal((m, config.rank)),
            V=np.zeros((config.rank, shard.n_local)),
            Z=z0,
            a=np.zeros((m, config.rank)),
            neighbors=topology.neighbors[shard.agent_id],
        ))
    return agents


def _auto_ridge(s):
    # scale-invariant fallback ridge for rank-deficient Gram matrices
    return 1e-8 * np.trace(s) / s.shape[0]


def _solve_with_retry(s, b, config_ridge, context):
    try:
        return solve_spd(s, b, 0.0, context)
    except SingularityError:
        ridge = config_ridge if config_ridge > 0 else _auto_ridge(s)
        return solve_spd(s, b, ridge, context)


def _check_finite(arr, what, agent_id, iteration):
    if not np.isfinite(arr).all():
        raise NumericsError(
            f"non-finite {what} for agent {agent_id} at iteration {iteration}")


def step_V(agent, config, iteration=0):
    """V_i from the least-squares fit of U_i to Z_i."""
    ut = np.ascontiguousarray(agent.U.T)
    agent.V = _solve_with_retry(
        gram(agent.U), matmul(ut, agent.Z), config.ridge,
        f"agent {agent.id} V-step, iteration {iteration}")
    _check_finite(agent.V, "V", agent.id, iteration)
    return agent.V


def step_Z(agent, iteration=0):
    """Z_i = U_i V_i off the observed set, exactly R_i on it."""
    agent.Z = masked_assign(matmul(agent.U, agent.V), agent.mask,
                            agent.shard.ratings.ratings)
    _check_finite(agent.Z, "Z", agent.id, iteration)
    return agent.Z


def exchange(agents, topology, iteration=0, bus=None):
    """Barrier exchange: every agent receives immutable copies of its
    neighbors' U replicas, tagged with sender id and iteration.

    Only U replicas are posted; nothing else leaves an agent.
    """
    if bus is None:
        bus = MessageBus()
    by_id = {a.id: a for a in agents}
    snapshots = {}
    for agent in agents:
        received = []
        for j in agent.neighbors:
            j = int(j)
            payload = bus.post(j, agent.id, "U", iteration, by_id[j].U.copy())
            received.append((j, payload))
        snapshots[agent.id] = received
    return snapshots


def _neighbor_sum(agent, snapshots):
    total = np.zeros_like(agent.U)
    for _, u_j in snapshots[agent.id]:  # ascending sender id
        total += u_j
    return total


def step_U(agent, snapshots, config, iteration=0):
    """U-subproblem update; behavior depends on u_update_mode.

    verbatim  : scalar-denominator average-consensus form.
    consensus : verbatim plus the beta*|N_i|*U_i self term, so an exact
                consensus point is a fixed point.
    exact     : exact minimizer of the quadratic U-subproblem; reduces to
                plain least squares when the agent has no neighbors.
    """
    beta = config.beta
    degree = len(agent.neighbors)
    vt = np.ascontiguousarray(agent.V.T)
    zvt = matmul(agent.Z, vt)
    rhs = zvt - agent.a
    if degree:
        rhs = rhs + beta * _neighbor_sum(agent, snapshots)
    mode = config.u_update_mode
    if mode == "verbatim":
        agent.U = rhs / (1.0 + 2.0 * beta * degree)
    elif mode == "consensus":
        if degree:
            rhs = rhs + beta * degree * agent.U
        agent.U = rhs / (1.0 + 2.0 * beta * degree)
    else:  # exact
        if degree:
            rhs = rhs + beta * degree * agent.U
        system = gram(vt)
        if degree:
            system = system + 2.0 * beta * degree * np.eye(config.rank)
        sol = _solve_with_retry(
            system, np.ascontiguousarray(rhs.T), config.ridge,
            f"agent {agent.id} U-step, iteration {iteration}")
        agent.U = np.ascontiguousarray(sol.T)
    _check_finite(agent.U, "U", agent.id, iteration)
    return agent.U


def step_dual(agent, snapshots, config, iteration=0):
    """Accumulate the consensus residual into the dual variable.

    The caller supplies snapshots from whichever exchange the schedule
    dictates; U_i and the neighbor sum then share that time index under
    the double schedule.
    """
    degree = len(agent.neighbors)
    if degree:
        residual = degree * agent.U - _neighbor_sum(agent, snapshots)
        agent.a = agent.a + config.beta * residual
        _check_finite(agent.a, "dual", agent.id, iteration)
    return agent.a


def predict_entries(agents, rm):
    """Score every entry of *rm* with the owning shard's own factors."""
    preds = np.empty(len(rm))
    for agent in agents:
        shard = agent.shard
        sel = (rm.items >= shard.col_start) & (rm.items < shard.col_end)
        if sel.any():
            local = matmul(agent.U, agent.V)
            preds[sel] = local[rm.users[sel], rm.items[sel] - shard.col_start]
    return preds


def metrics(agents, topology, train, test, iteration=0):
    """Global objective, shard-local RMSEs, consensus gap, dual-sum norm."""
    objective = 0.0
    products = {}
    for agent in agents:  # ascending id
        p = matmul(agent.U, agent.V)
        products[agent.id] = p
        objective += 0.5 * frob_norm(p - agent.Z) ** 2

    def shard_rmse(rm):
        if rm is None or len(rm) == 0:
            return float("nan")
        sq = 0.0
        count = 0
        for agent in agents:
            shard = agent.shard
            sel = (rm.items >= shard.col_start) & (rm.items < shard.col_end)
            if sel.any():
                p = products[agent.id]
                err = (p[rm.users[sel], rm.items[sel] - shard.col_start]
                       - rm.ratings[sel])
                sq += float(np.einsum("i,i->", err, err))
                count += err.size
        return float(np.sqrt(sq / count)) if count else float("nan")

    gap = 0.0
    by_id = {a.id: a for a in agents}
    for i, j in topology.edges:
        gap = max(gap, frob_norm(by_id[i].U - by_id[j].U))
    dual_total = np.zeros_like(agents[0].a)
    for agent in agents:
        dual_total += agent.a
    return IterationMetrics(
        iteration=iteration,
        objective=objective,
        train_rmse=shard_rmse(train),
        test_rmse=shard_rmse(test),
        consensus_gap=gap,
        dual_sum_norm=frob_norm(dual_total),
    )


def run(agents, topology, config, train=None, test=None, sink=None, bus=None):
    """Execute the synchronous iteration loop.

    Returns (agents, metric series).  The optional *sink* receives each
    IterationMetrics as it is produced; *bus* observes all exchanges.
    """
    workers = config.workers
    if workers == 0:
        workers = os.cpu_count() or 1
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def over_agents(fn):
        if pool is not None:
            return list(pool.map(fn, agents))
        return [fn(a) for a in agents]

    series = []
    try:
        for t in range(1, config.iterations + 1):
            prev_u = [agent.U for agent in agents]
            over_agents(lambda a: step_V(a, config, t))
            over_agents(lambda a: step_Z(a, t))
            snapshots = exchange(agents, topology, t, bus)
            over_agents(lambda a: step_U(a, snapshots, config, t))
            if config.exchange_schedule == "double":
                snapshots = exchange(agents, topology, t, bus)
            over_agents(lambda a: step_dual(a, snapshots, config, t))
            row = metrics(agents, topology, train, test, t)
            series.append(row)
            if sink is not None:
                sink(row)
            if config.stop_tol is not None:
                change = max(
                    frob_norm(agent.U - old) / (1.0 + frob_norm(old))
                    for agent, old in zip(agents, prev_u))
                if change < config.stop_tol:
                    break
    finally:
        if pool is not None:
            pool.shutdown()
    return agents, series
