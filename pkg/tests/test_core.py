import pytest
from hypothesis import given, strategies as st

from friendroute.core import (BROADCAST, CacheEntry, ContractError, IntimacyRecord,
                              MessageKind, Packet, PeerState, Route, RouteCache, fresher,
                              is_expired, make_earmark, make_route)


def entry(expires_at, installed_at=0.0, dest=1):
    return CacheEntry(Route(dest, 2, 1, 0.0, 10.0), installed_at, expires_at)


@pytest.mark.parametrize("now,expected", [(49.9, False), (50.0, True), (60.0, True)])
def test_is_expired_boundary_inclusive(now, expected):
    assert is_expired(entry(50.0), now) is expected


def test_make_earmark_examples():
    assert make_earmark(1000, 100) == 900
    assert make_earmark(1000, 1000) == 0
    assert make_earmark(1000, 999) < make_earmark(1000, 10)


def r(earmark, hops=1, nh=2, dest=9):
    return Route(dest, nh, hops, 0.0, earmark)


def test_fresher_examples():
    a, b = r(5), r(9)
    assert fresher(a, b) is a
    a, b = r(5, hops=3), r(5, hops=2)
    assert fresher(a, b) is b
    a, b = r(5), r(5)
    assert fresher(a, b) is a and fresher(b, a) is b


def test_fresher_next_hop_tiebreak():
    a, b = r(5, nh=7), r(5, nh=3)
    assert fresher(a, b) is b


def test_fresher_rejects_mismatched_dest():
    with pytest.raises(ContractError):
        fresher(r(1, dest=1), r(1, dest=2))


routes = st.builds(lambda e, h, n: Route(9, n, h, 0.0, e),
                   st.integers(0, 20).map(float), st.integers(1, 5), st.integers(0, 5))


@given(routes, routes)
def test_fresher_commutes_unless_full_tie(a, b):
    if (a.earmark, a.hop_count, a.next_hop) == (b.earmark, b.hop_count, b.next_hop):
        assert fresher(a, b) is a
    else:
        assert fresher(a, b) == fresher(b, a)


@given(routes, routes, routes)
def test_fresher_is_a_total_order(a, b, c):
    best = fresher(fresher(a, b), c)
    key = lambda x: (x.earmark, x.hop_count, x.next_hop)
    assert key(best) == min(map(key, (a, b, c)))


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(0, 1e6))
def test_earmark_strictly_decreasing(t_ref, d1, d2):
    if d1 < d2:
        assert make_earmark(t_ref, d1) >= make_earmark(t_ref, d2)
        if t_ref - d1 != t_ref - d2:
            assert make_earmark(t_ref, d1) > make_earmark(t_ref, d2)


def test_make_route_sets_earmark():
    rt = make_route(3, 4, 2, 100.0, 1000.0)
    assert rt.earmark == 900.0 and rt.hop_count == 2


def test_route_hop_count_at_least_one():
    with pytest.raises(ContractError):
        Route(1, 1, 0, 0.0, 0.0)


def test_cache_entry_must_expire_after_install():
    with pytest.raises(ContractError):
        CacheEntry(r(1), 5.0, 5.0)


class TestRouteCache:
    def test_lookup_hides_and_removes_expired(self):
        c = RouteCache(4)
        c.install(r(1, dest=1), now=0.0, timeout=10.0)
        assert c.lookup(1, 9.99) is not None
        assert c.lookup(1, 10.0) is None
        assert 1 not in c

    def test_one_entry_per_destination(self):
        c = RouteCache(4)
        c.install(r(5, dest=1), 0.0, 10.0)
        c.install(r(3, dest=1), 1.0, 10.0)
        assert len(c) == 1 and c.peek(1).route.earmark == 3

    def test_overflow_evicts_closest_to_expiry(self):
        c = RouteCache(2)
        c.install(r(1, dest=1), 0.0, 10.0)
        c.install(r(1, dest=2), 5.0, 10.0)
        _, evicted = c.install(r(1, dest=3), 6.0, 10.0)
        assert evicted.route.dest == 1
        assert sorted(c.entries) == [2, 3]

    def test_purge_returns_removed(self):
        c = RouteCache()
        c.install(r(1, dest=1), 0.0, 5.0)
        c.install(r(1, dest=2), 0.0, 50.0)
        gone = c.purge(5.0)
        assert [e.route.dest for e in gone] == [1]
        assert len(c.valid_entries(5.0)) == 1

    def test_capacity_must_be_positive(self):
        with pytest.raises(ContractError):
            RouteCache(0)

    @given(st.lists(st.tuples(st.integers(0, 6), st.floats(0, 100), st.floats(0.1, 50)),
                    max_size=30),
           st.floats(0, 200))
    def test_lookup_never_returns_expired(self, ops, t):
        c = RouteCache(4)
        for dest, now, timeout in sorted(ops, key=lambda o: o[1]):
            c.install(r(1, dest=dest), now, timeout)
            assert len(c) <= 4
        for dest in range(7):
            e = c.lookup(dest, t)
            assert e is None or not is_expired(e, t)


class TestIntimacy:
    def test_promotion_needs_strictly_more_than_threshold(self):
        rec = IntimacyRecord(3, k=1.0)
        promoted = [rec.observe(4.0) for _ in range(6)]
        assert promoted == [False, False, False, False, True, False]
        assert rec.state is PeerState.FRIEND

    @given(st.floats(0.1, 5), st.floats(0, 20), st.integers(0, 40))
    def test_intimacy_tracks_k_times_count(self, k, thres, n):
        rec = IntimacyRecord(1, k=k)
        was_friend = False
        for _ in range(n):
            rec.observe(thres)
            assert rec.intimacy == k * rec.packets_received
            if was_friend:
                assert rec.state is PeerState.FRIEND
            was_friend = rec.state is PeerState.FRIEND
        if rec.state is PeerState.FRIEND:
            assert rec.intimacy > thres


class TestPacket:
    def test_forward_decrements_ttl_and_counts_hop(self):
        p = Packet(1, MessageKind.DATA, 0, 5, 3, 512, 0.0)
        q = p.forwarded().forwarded()
        assert (q.ttl, q.hops_traversed) == (1, 2)
        assert q.hops_traversed + q.ttl <= p.ttl

    def test_cannot_forward_without_ttl(self):
        p = Packet(1, MessageKind.DATA, 0, 5, 0, 512, 0.0)
        with pytest.raises(ContractError):
            p.forwarded()

    def test_size_positive(self):
        with pytest.raises(ContractError):
            Packet(1, MessageKind.DATA, 0, 5, 1, 0, 0.0)

    def test_control_kinds(self):
        assert not MessageKind.DATA.is_control
        assert all(k.is_control for k in MessageKind if k is not MessageKind.DATA)

    def test_broadcast_sentinel_is_all_ones(self):
        assert BROADCAST == 2 ** 32 - 1
