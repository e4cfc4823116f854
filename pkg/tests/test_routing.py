import math
import random
from itertools import permutations

import pytest

from fanetsim.linkmetrics import LinkState, LqParams
from fanetsim.routing import (
    RouterState,
    TopologySet,
    absorb_tc,
    build_metric_graph,
    compute_routes,
    seq_newer,
    shortest_routes,
    should_forward,
)
from fanetsim.wire import HelloMessage, NeighborBlock, TcMessage, Variant

P = LqParams(alpha=0.2, beta=0.2, gamma=0.04, hello_interval=0.5)


def brute_force_routes(adj, source):
    """Exhaustive simple-path enumeration with the same total tie-break."""
    nodes = set(adj)
    for targets in adj.values():
        nodes.update(targets)
    best = {}
    others = [n for n in nodes if n != source]
    for r in range(1, len(others) + 1):
        for mid in permutations(others, r):
            path = (source, *mid)
            cost = 0.0
            ok = True
            for a, b in zip(path, path[1:]):
                w = adj.get(a, {}).get(b)
                if w is None:
                    ok = False
                    break
                cost += w
            if not ok:
                continue
            dest = path[-1]
            key = (cost, len(path) - 1, path[1])
            if dest not in best or key < best[dest]:
                best[dest] = key
    return best


def random_graph(rng):
    n = rng.randint(2, 6)
    nodes = list(range(1, n + 1))
    adj = {u: {} for u in nodes}
    tie_weights = rng.random() < 0.5
    for u in nodes:
        for v in nodes:
            if u == v or rng.random() > 0.55:
                continue
            if tie_weights:
                adj[u][v] = rng.choice([1.0, 1.0, 2.0, 2.5])
            else:
                adj[u][v] = math.exp(rng.uniform(-1, 1)) / rng.uniform(0.05, 1.0)
    return adj


class TestShortestRoutes:
    def test_matches_brute_force_on_random_graphs(self):
        rng = random.Random(2)
        for _ in range(150):
            adj = random_graph(rng)
            source = 1
            table = shortest_routes(adj, source)
            oracle = brute_force_routes(adj, source)
            assert set(table) == set(oracle)
            for dest, entry in table.items():
                cost, hops, first = oracle[dest]
                assert entry.total_metric == cost
                assert entry.hop_count == hops
                assert entry.next_hop == first

    def test_deterministic_tie_break_prefers_low_next_hop(self):
        adj = {1: {2: 1.0, 3: 1.0}, 2: {4: 1.0}, 3: {4: 1.0}}
        table = shortest_routes(adj, 1)
        assert table[4].next_hop == 2
        assert table[4].total_metric == 2.0

    def test_fewer_hops_wins_on_equal_metric(self):
        adj = {1: {2: 2.0, 3: 1.0}, 3: {2: 1.0}}
        table = shortest_routes(adj, 1)
        assert table[2].next_hop == 2
        assert table[2].hop_count == 1

    def test_unreachable_absent(self):
        adj = {1: {2: 1.0}, 3: {4: 1.0}}
        table = shortest_routes(adj, 1)
        assert 3 not in table and 4 not in table


def link(neighbor, rho=1.0, phi=1.0, v=0.0, expires=1e9):
    return LinkState(neighbor=neighbor, rho_ema=rho, phi_reported=phi,
                     v_ema=v, expires_at=expires)


def tc(originator, blocks, ansn=1, seq=0, variant=Variant.ORIGINAL):
    return TcMessage(variant=variant, ansn=ansn, originator=originator, seq=seq,
                     advertised=[NeighborBlock(addr=a, lq=lq, nlq=nlq, speed=sp)
                                 for a, lq, nlq, sp in blocks])


class TestComputeRoutes:
    def test_errorless_chain_metric_equals_hop_count(self):
        links = {2: link(2)}
        ts = TopologySet()
        absorb_tc(ts, tc(2, [(1, 255, 255, 0.0), (3, 255, 255, 0.0)]), t=0.0, validity_s=100.0)
        table = compute_routes(1, links, ts, P, t=1.0)
        assert table[3].next_hop == 2
        assert table[3].total_metric == pytest.approx(2.0)
        assert table[3].hop_count == 2

    def test_two_errorless_hops_beat_lossy_direct(self):
        # direct link with phi*rho = 0.2 (metric 5) vs relay metric 2
        links = {2: link(2), 3: link(3, rho=0.4, phi=0.5)}
        ts = TopologySet()
        absorb_tc(ts, tc(2, [(3, 255, 255, 0.0)]), t=0.0, validity_s=100.0)
        table = compute_routes(1, links, ts, P, t=1.0)
        assert table[3].next_hop == 2
        assert table[3].total_metric == pytest.approx(2.0, abs=1e-6)

    def test_asymmetric_neighbor_excluded(self):
        links = {2: LinkState(neighbor=2, rho_ema=1.0, expires_at=1e9)}
        assert compute_routes(1, links, TopologySet(), P, t=0.0) == {}

    def test_expired_link_excluded(self):
        links = {2: link(2, expires=0.5)}
        assert compute_routes(1, links, TopologySet(), P, t=1.0) == {}

    def test_expired_topology_entry_excluded(self):
        links = {2: link(2)}
        ts = TopologySet()
        absorb_tc(ts, tc(2, [(3, 255, 255, 0.0)]), t=0.0, validity_s=2.0)
        assert 3 in compute_routes(1, links, ts, P, t=1.0)
        assert 3 not in compute_routes(1, links, ts, P, t=3.0)

    def test_beta_zero_equivalence_between_modes(self):
        rng = random.Random(6)
        p0 = LqParams(alpha=0.2, beta=0.0, gamma=0.04, hello_interval=0.5)
        for _ in range(50):
            links = {}
            ts = TopologySet()
            for n in range(2, rng.randint(3, 6)):
                links[n] = link(n, rho=rng.uniform(0.3, 1.0), phi=rng.uniform(0.3, 1.0),
                                v=rng.uniform(-15, 15))
                blocks = [(m, rng.randrange(64, 256), rng.randrange(64, 256),
                           rng.uniform(-15, 15)) for m in range(1, 7) if m != n]
                absorb_tc(ts, tc(n, blocks, ansn=n), t=0.0, validity_s=100.0)
            with_speed = compute_routes(1, links, ts, p0, t=1.0)
            zeroed_links = {n: link(n, rho=l.rho_ema, phi=l.phi_reported, v=0.0)
                            for n, l in links.items()}
            zeroed_ts = TopologySet()
            for (o, nb), e in ts.entries.items():
                zeroed_ts.entries[(o, nb)] = type(e)(lq=e.lq, nlq=e.nlq, speed=0.0,
                                                     ansn=e.ansn, expires_at=e.expires_at)
            without_speed = compute_routes(1, zeroed_links, zeroed_ts, p0, t=1.0)
            assert with_speed == without_speed

    def test_infinite_local_edges_do_not_appear(self):
        links = {2: link(2, rho=0.0)}
        graph = build_metric_graph(1, links, TopologySet(), P, t=0.0)
        assert graph[1] == {}


class TestAbsorbTc:
    def test_fresh_originator_inserted(self):
        ts = TopologySet()
        assert absorb_tc(ts, tc(7, [(8, 200, 100, 1.0)]), t=0.0, validity_s=10.0)
        assert ts.entries[(7, 8)].lq == 200
        assert ts.ansn_by_origin[7] == 1

    def test_stale_ansn_ignored(self):
        ts = TopologySet()
        absorb_tc(ts, tc(7, [(8, 200, 100, 0.0)], ansn=10), t=0.0, validity_s=10.0)
        assert not absorb_tc(ts, tc(7, [(9, 1, 1, 0.0)], ansn=9), t=1.0, validity_s=10.0)
        assert (7, 9) not in ts.entries
        assert (7, 8) in ts.entries

    def test_equal_ansn_refreshes_validity(self):
        ts = TopologySet()
        absorb_tc(ts, tc(7, [(8, 200, 100, 0.0)], ansn=3), t=0.0, validity_s=10.0)
        changed = absorb_tc(ts, tc(7, [(8, 200, 100, 0.0)], ansn=3), t=5.0, validity_s=10.0)
        assert not changed  # same content
        assert ts.entries[(7, 8)].expires_at == pytest.approx(15.0)

    def test_newer_ansn_replaces(self):
        ts = TopologySet()
        absorb_tc(ts, tc(7, [(8, 200, 100, 0.0)], ansn=3), t=0.0, validity_s=10.0)
        assert absorb_tc(ts, tc(7, [(9, 50, 60, 0.0)], ansn=4), t=1.0, validity_s=10.0)
        assert (7, 8) not in ts.entries
        assert (7, 9) in ts.entries

    def test_ansn_wraparound_treated_as_newer(self):
        assert seq_newer(0, 65535)
        assert not seq_newer(65535, 0)
        ts = TopologySet()
        absorb_tc(ts, tc(7, [(8, 1, 1, 0.0)], ansn=65535), t=0.0, validity_s=10.0)
        assert absorb_tc(ts, tc(7, [(9, 1, 1, 0.0)], ansn=0), t=1.0, validity_s=10.0)
        assert (7, 9) in ts.entries

    def test_purge_drops_expired(self):
        ts = TopologySet()
        absorb_tc(ts, tc(7, [(8, 1, 1, 0.0)]), t=0.0, validity_s=2.0)
        assert not ts.purge(1.0)
        assert ts.purge(3.0)
        assert ts.entries == {}


class TestShouldForward:
    def test_first_sighting_forwards(self):
        seen = set()
        assert should_forward(tc(7, [], ansn=1, seq=5), seen)

    def test_second_sighting_suppressed(self):
        seen = set()
        m = tc(7, [], ansn=1, seq=5)
        should_forward(m, seen)
        assert not should_forward(m, seen)

    def test_new_ansn_forwards_again(self):
        seen = set()
        should_forward(tc(7, [], ansn=1, seq=5), seen)
        assert should_forward(tc(7, [], ansn=2, seq=5), seen)

    def test_flood_bounded_by_node_count(self):
        # every node forwards a given origination at most once
        n = 10
        seen = [set() for _ in range(n)]
        m = tc(7, [], ansn=1, seq=1)
        forwards = sum(1 for s in seen if should_forward(m, s))
        forwards += sum(1 for s in seen if should_forward(m, s))
        assert forwards == n


class TestRouterState:
    def _router(self, variant=Variant.ORIGINAL):
        return RouterState(addr=1, params=P, variant=variant)

    def test_hello_with_no_neighbors_is_header_only(self):
        r = self._router()
        msg = r.generate_hello(t=0.0, position=None)
        assert msg.neighbors == []
        assert msg.seq == 0
        assert r.generate_hello(t=1.0, position=None).seq == 1

    def test_hello_quantizes_own_ratio(self):
        r = self._router()
        r.links[2] = link(2, rho=0.712, phi=0.5)
        msg = r.generate_hello(t=0.0, position=None)
        assert msg.neighbors[0].lq == 182

    def test_hello_lists_expired_neighbors_not(self):
        r = self._router()
        r.links[2] = link(2, expires=0.5)
        r.links[3] = link(3, expires=10.0)
        msg = r.generate_hello(t=1.0, position=None)
        assert [b.addr for b in msg.neighbors] == [3]

    def test_ansn_constant_while_set_unchanged(self):
        r = self._router()
        r.links[2] = link(2)
        a1 = r.generate_tc(t=0.0).ansn
        a2 = r.generate_tc(t=1.0).ansn
        assert a1 == a2

    def test_ansn_increments_on_set_change(self):
        r = self._router()
        r.links[2] = link(2)
        a1 = r.generate_tc(t=0.0).ansn
        r.links[3] = link(3)
        a2 = r.generate_tc(t=1.0).ansn
        assert (a2 - a1) & 0xFFFF == 1

    def test_tc_advertises_only_symmetric(self):
        r = self._router()
        r.links[2] = link(2)
        r.links[3] = LinkState(neighbor=3, rho_ema=0.9, expires_at=1e9)
        msg = r.generate_tc(t=0.0)
        assert [b.addr for b in msg.advertised] == [2]

    def test_tc_seq_increments_every_emission(self):
        r = self._router()
        assert r.generate_tc(t=0.0).seq == 0
        assert r.generate_tc(t=1.0).seq == 1

    def test_current_routes_reports_changes(self):
        r = self._router()
        r.links[2] = link(2)
        table, changes = r.current_routes(t=0.0)
        assert changes == [(2, None, 2)]
        table, changes = r.current_routes(t=0.0)
        assert changes == []
        r.links[3] = link(3)
        r.dirty = True
        _, changes = r.current_routes(t=0.0)
        assert changes == [(3, None, 3)]

    def test_speed_clamped_to_wire_range(self):
        r = self._router(Variant.MODIFIED)
        r.links[2] = link(2, v=1e6)
        msg = r.generate_hello(t=0.0, position=None)
        assert msg.neighbors[0].speed == pytest.approx(32767 / 256.0)

    def test_refresh_topology_from_hello(self):
        r = self._router()
        absorb_tc(r.topology, tc(5, [(6, 100, 100, 0.0)]), t=0.0, validity_s=50.0)
        hello = HelloMessage(variant=Variant.ORIGINAL, seq=0, originator=5,
                             neighbors=[NeighborBlock(addr=6, lq=120, nlq=90),
                                        NeighborBlock(addr=1, lq=77, nlq=88)])
        assert r.refresh_topology_from_hello(hello)
        entry = r.topology.entries[(5, 6)]
        assert (entry.lq, entry.nlq) == (120, 90)
        # blocks naming self and unknown links are not topology entries
        assert (5, 1) not in r.topology.entries

    def test_determinism_identical_inputs_identical_tables(self):
        def build():
            r = self._router()
            r.links[2] = link(2, rho=0.8, phi=0.9)
            r.links[4] = link(4, rho=0.7, phi=0.95)
            absorb_tc(r.topology, tc(2, [(3, 230, 240, 0.0)]), t=0.0, validity_s=50.0)
            absorb_tc(r.topology, tc(4, [(3, 230, 240, 0.0)]), t=0.0, validity_s=50.0)
            return r.current_routes(t=1.0)[0]
        assert build() == build()
