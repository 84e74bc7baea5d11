from __future__ import annotations

import math
import random
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from contbench.config import parse_layers_services, parse_network
from contbench.netem import (
    DEFAULT_LINK,
    LinkModel,
    build_links,
    sample_transfer_time,
    transfer_time,
)
from contbench.providers import SimulatedProvider, map_services, requests_for


def small_plan(n_edge: int = 1, n_cloud: int = 1):
    text = f"""
layers:
  - name: edge
    services:
      - {{name: client, quantity: {n_edge}, environment: sim, profile: rpi3}}
  - name: cloud
    services:
      - {{name: server, quantity: {n_cloud}, environment: sim, profile: dahu}}
environments:
  sim: {{kind: simulated}}
"""
    cfg = parse_layers_services(text)
    provider = SimulatedProvider()
    grants = [provider.acquire(r) for r in requests_for(cfg)]
    return map_services(cfg, grants)


class TestLinkModel:
    def test_total_loss_rejected_at_construction(self):
        with pytest.raises(ValueError, match="loss"):
            LinkModel(0.0, 1000.0, loss=1.0)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError, match="rate"):
            LinkModel(0.0, 0.0)


class TestBuildLinks:
    def test_symmetric_rule_yields_both_directions(self):
        net = parse_network(
            "rules:\n  - {src: edge, dst: cloud, delay: 150ms, rate: 15Kbit, symmetric: true}\n"
        )
        plan = small_plan()
        table = build_links(net, plan)
        edge = plan.host_for("edge", "client")
        cloud = plan.host_for("cloud", "server")
        fwd = table.lookup(edge, cloud)
        rev = table.lookup(cloud, edge)
        assert fwd == rev
        assert fwd.one_way_delay_s == pytest.approx(0.075)
        assert fwd.rate_bps == 15000.0
        assert len(table.entries) == 2

    def test_empty_network_all_default(self):
        plan = small_plan()
        table = build_links(parse_network(""), plan)
        edge = plan.host_for("edge", "client")
        cloud = plan.host_for("cloud", "server")
        assert table.lookup(edge, cloud) is DEFAULT_LINK
        assert table.entries == {}

    def test_per_pair_expansion(self):
        net = parse_network("rules:\n  - {src: edge, dst: cloud, delay: 10ms, rate: 1Mbit}\n")
        plan = small_plan(n_edge=2)
        table = build_links(net, plan)
        assert len(table.entries) == 2  # one per edge host, directed edge->cloud only
        cloud = plan.host_for("cloud", "server")
        for edge in plan.layer_hosts("edge"):
            assert table.lookup(edge, cloud).rate_bps == 1e6
            assert table.lookup(cloud, edge) is DEFAULT_LINK


class TestTransferTime:
    def test_empty_payload_costs_only_delay(self):
        link = LinkModel(0.075, 15000.0)
        assert transfer_time(0, link) == 0.075

    def test_hand_computed_closed_form(self):
        # 46875 B at 15 kbit/s plus 75 ms one-way delay
        link = LinkModel(0.075, 15000.0)
        assert transfer_time(46875, link) == pytest.approx(25.075, abs=1e-12)

    def test_half_loss_doubles_bandwidth_term(self):
        clean = LinkModel(0.0, 1e6, loss=0.0)
        lossy = LinkModel(0.0, 1e6, loss=0.5)
        size = 30000
        assert transfer_time(size, lossy) == pytest.approx(2 * transfer_time(size, clean))

    @settings(max_examples=200, deadline=None)
    @given(
        size=st.integers(min_value=1, max_value=10**7),
        rate=st.floats(min_value=100.0, max_value=1e9),
        bump=st.integers(min_value=1, max_value=10**6),
    )
    def test_monotone_in_size_and_rate(self, size, rate, bump):
        link = LinkModel(0.01, rate)
        assert transfer_time(size + bump, link) > transfer_time(size, link)
        faster = LinkModel(0.01, rate * 2)
        assert transfer_time(size, faster) < transfer_time(size, link)

    def test_negative_size_rejected(self):
        with pytest.raises(ValueError):
            transfer_time(-1, DEFAULT_LINK)


class TestSampledTransfer:
    def test_lossless_sampling_matches_closed_form_exactly(self):
        rng = random.Random(0)
        for _ in range(1000):
            size = rng.randint(1, 5_000_000)
            rate = rng.uniform(1e3, 1e8)
            delay = rng.uniform(0.0, 0.5)
            link = LinkModel(delay, rate, loss=0.0)
            sampled = sample_transfer_time(size, link, rng)
            assert abs(sampled - transfer_time(size, link)) <= 1e-9

    @pytest.mark.parametrize("loss", [0.1, 0.5])
    def test_lossy_mean_converges_to_expectation(self, loss):
        link = LinkModel(0.01, 1e6, loss=loss)
        size = 30000
        rng = random.Random(1234)
        times = [sample_transfer_time(size, link, rng) for _ in range(10_000)]
        mean = statistics.fmean(times)
        se = statistics.stdev(times) / math.sqrt(len(times))
        expected = size * 8 / link.rate_bps * (1 / (1 - loss)) + link.one_way_delay_s
        assert abs(mean - expected) <= 3 * se

    def test_sampling_is_deterministic_given_rng(self):
        link = LinkModel(0.0, 1e6, loss=0.3)
        a = [sample_transfer_time(9000, link, random.Random(7)) for _ in range(1)]
        b = [sample_transfer_time(9000, link, random.Random(7)) for _ in range(1)]
        assert a == b
