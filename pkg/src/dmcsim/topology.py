"""Undirected agent graphs and their one-hop neighborhoods.

Topology file format: UTF-8 text, first line the agent count L, then one
``i j`` edge per line.
"""

import numpy as np

from .errors import ConfigurationError, GenerationError


class Topology:
    """Static undirected graph over L agents; neighborhoods sorted ascending."""

    def __init__(self, num_agents, edges, require_connected=True):
        if num_agents < 1:
            raise ConfigurationError("need at least one agent")
        norm = set()
        for i, j in edges:
            if i == j:
                raise ConfigurationError(f"self-loop at agent {i}")
            if not (0 <= i < num_agents and 0 <= j < num_agents):
                raise ConfigurationError(f"edge ({i}, {j}) out of bounds")
            norm.add((min(i, j), max(i, j)))
        self.num_agents = num_agents
        self.edges = sorted(norm)
        nbrs = [[] for _ in range(num_agents)]
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        self.neighbors = [np.array(sorted(v), dtype=np.int64) for v in nbrs]
        if require_connected and not is_connected(self):
            raise ConfigurationError("topology is not connected")

    def __eq__(self, other):
        return (isinstance(other, Topology)
                and self.num_agents == other.num_agents
                and self.edges == other.edges)


def is_connected(topology):
    """Breadth-first reachability from agent 0 covers all agents."""
    seen = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for i in frontier:
            for j in topology.neighbors[i]:
                if j not in seen:
                    seen.add(int(j))
                    nxt.append(int(j))
        frontier = nxt
    return len(seen) == topology.num_agents


def ring(num_agents):
    """Cycle over the agents (single edge at L=2, empty graph at L=1)."""
    if num_agents == 1:
        return Topology(1, [])
    return Topology(num_agents,
                    [(i, (i + 1) % num_agents) for i in range(num_agents)])


def complete(num_agents):
    """All-pairs graph."""
    edges = [(i, j) for i in range(num_agents) for j in range(i + 1, num_agents)]
    return Topology(num_agents, edges)


def erdos_renyi(num_agents, p, seed, max_attempts=1000):
    """G(L, p) resampled with fresh draws until connected."""
    if not 0 < p <= 1:
        raise ConfigurationError("edge probability must be in (0, 1]")
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(num_agents)
             for j in range(i + 1, num_agents)]
    for _ in range(max_attempts):
        draws = rng.random(len(pairs))
        edges = [pair for pair, d in zip(pairs, draws) if d < p]
        cand = Topology(num_agents, edges, require_connected=False)
        if is_connected(cand):
            return cand
    raise GenerationError(
        f"no connected graph in {max_attempts} attempts; increase p={p}")


def load_topology(path):
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()
                 and not ln.startswith("#")]
    if not lines:
        raise ConfigurationError(f"{path}: empty topology file")
    num_agents = int(lines[0])
    edges = []
    for ln in lines[1:]:
        i, j = ln.split()
        edges.append((int(i), int(j)))
    return Topology(num_agents, edges)


def save_topology(path, topology):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{topology.num_agents}\n")
        for i, j in topology.edges:
            fh.write(f"{i} {j}\n")
