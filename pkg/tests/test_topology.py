import numpy as np
import pytest

from dmcsim import topology
from dmcsim.errors import ConfigurationError, GenerationError


class TestRing:
    def test_neighborhood(self):
        t = topology.ring(4)
        assert list(t.neighbors[0]) == [1, 3]

    def test_two_agents_single_edge(self):
        t = topology.ring(2)
        assert t.edges == [(0, 1)]

    def test_all_degrees_two(self):
        t = topology.ring(8)
        assert all(len(nb) == 2 for nb in t.neighbors)

    def test_single_agent_empty(self):
        t = topology.ring(1)
        assert t.edges == []
        assert topology.is_connected(t)


class TestComplete:
    def test_three_agents(self):
        assert len(topology.complete(3).edges) == 3

    def test_single_agent(self):
        assert topology.complete(1).edges == []

    def test_eight_agents(self):
        t = topology.complete(8)
        assert len(t.edges) == 28
        assert all(len(nb) == 7 for nb in t.neighbors)


class TestErdosRenyi:
    def test_p_one_is_complete(self):
        assert topology.erdos_renyi(6, 1.0, 0) == topology.complete(6)

    def test_same_seed_same_graph(self):
        a = topology.erdos_renyi(8, 0.4, 3)
        b = topology.erdos_renyi(8, 0.4, 3)
        assert a == b

    def test_connected_by_bfs(self):
        t = topology.erdos_renyi(8, 0.4, 7)
        # independent BFS oracle
        adj = {i: set() for i in range(8)}
        for i, j in t.edges:
            adj[i].add(j)
            adj[j].add(i)
        seen, stack = {0}, [0]
        while stack:
            for j in adj[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        assert seen == set(range(8))

    def test_bad_p(self):
        with pytest.raises(ConfigurationError):
            topology.erdos_renyi(4, 0.0, 0)

    def test_generation_exhaustion(self):
        with pytest.raises(GenerationError):
            topology.erdos_renyi(30, 1e-9, 0, max_attempts=5)


class TestInvariants:
    @pytest.mark.parametrize("topo", [
        topology.ring(5), topology.complete(6), topology.erdos_renyi(8, 0.5, 1)])
    def test_neighborhood_symmetry(self, topo):
        for i in range(topo.num_agents):
            for j in topo.neighbors[i]:
                assert i in topo.neighbors[j]
        assert sum(len(nb) for nb in topo.neighbors) == 2 * len(topo.edges)

    @pytest.mark.parametrize("topo", [
        topology.ring(2), topology.ring(5), topology.complete(8),
        topology.erdos_renyi(8, 0.4, 2)])
    def test_generators_connected(self, topo):
        assert topology.is_connected(topo)

    def test_disconnected_detected(self):
        t = topology.Topology(4, [(0, 1), (2, 3)], require_connected=False)
        assert not topology.is_connected(t)

    def test_disconnected_rejected_on_construction(self):
        with pytest.raises(ConfigurationError):
            topology.Topology(4, [(0, 1), (2, 3)])

    def test_self_loop_rejected(self):
        with pytest.raises(ConfigurationError):
            topology.Topology(3, [(1, 1)])


def test_file_round_trip(tmp_path):
    t = topology.erdos_renyi(7, 0.6, 5)
    p = tmp_path / "topo.txt"
    topology.save_topology(p, t)
    assert topology.load_topology(p) == t
