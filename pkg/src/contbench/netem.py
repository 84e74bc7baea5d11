"""Per-link transfer-time models built from the network rules.

The model is store-and-forward with a single flow per link: a transfer costs
the one-way propagation delay once, plus serialization of the payload at the
link rate. Loss is Bernoulli per MTU-sized chunk with retransmit-until-
success, which gives the closed-form expectation

    time = one_way_delay + size * 8 / rate * 1 / (1 - loss)

``transfer_time`` returns that expectation; ``sample_transfer_time`` draws
the actual retransmissions so the expectation can be checked empirically.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping

from .config import NetworkConfig
from .providers import DeploymentPlan, Host

#: Rate used for unconstrained host pairs: effectively infinite but JSON-safe.
UNCONSTRAINED_RATE_BPS = 1e15


@dataclass(frozen=True)
class LinkModel:
    one_way_delay_s: float
    rate_bps: float
    loss: float = 0.0
    mtu_chunk: int = 1500  # retransmission granularity, bytes

    def __post_init__(self):
        if self.rate_bps <= 0:
            raise ValueError(f"link rate must be > 0, got {self.rate_bps}")
        if self.one_way_delay_s < 0:
            raise ValueError("one-way delay must be >= 0")
        if not 0.0 <= self.loss < 1.0:
            raise ValueError(f"loss must be in [0, 1), got {self.loss}")
        if self.mtu_chunk <= 0:
            raise ValueError("mtu_chunk must be > 0")


DEFAULT_LINK = LinkModel(one_way_delay_s=0.0, rate_bps=UNCONSTRAINED_RATE_BPS, loss=0.0)


@dataclass(frozen=True)
class LinkTable:
    """Directed (src host, dst host) -> LinkModel, total via the default link."""

    entries: Mapping[tuple[str, str], LinkModel] = field(default_factory=dict)
    default: LinkModel = DEFAULT_LINK

    def lookup(self, src: Host | str, dst: Host | str) -> LinkModel:
        src_id = src if isinstance(src, str) else src.id
        dst_id = dst if isinstance(dst, str) else dst.id
        return self.entries.get((src_id, dst_id), self.default)


def build_links(net: NetworkConfig, plan: DeploymentPlan, mtu_chunk: int = 1500) -> LinkTable:
    """Expand layer-level rules into per-directed-host-pair link models.

    The rule's round-trip delay is halved per direction. Host pairs not
    covered by any rule fall back to the default (zero delay, effectively
    infinite rate, zero loss).
    """
    entries: dict[tuple[str, str], LinkModel] = {}
    hosts = plan.hosts
    for rule in net.rules:
        model = LinkModel(
            one_way_delay_s=rule.delay_rtt_s / 2.0,
            rate_bps=rule.rate_bps,
            loss=rule.loss,
            mtu_chunk=mtu_chunk,
        )
        for src in hosts:
            if src.layer != rule.src:
                continue
            for dst in hosts:
                if dst.layer != rule.dst or dst.id == src.id:
                    continue
                entries[(src.id, dst.id)] = model
    return LinkTable(entries=entries)


def attach_links(plan: DeploymentPlan, net: NetworkConfig, mtu_chunk: int = 1500) -> DeploymentPlan:
    from dataclasses import replace

    return replace(plan, links=build_links(net, plan, mtu_chunk))


def transfer_time(size_bytes: int, link: LinkModel) -> float:
    """Expected one-way transfer time of ``size_bytes`` over ``link``."""
    if size_bytes < 0:
        raise ValueError("size must be >= 0")
    if size_bytes == 0:
        return link.one_way_delay_s
    return link.one_way_delay_s + (size_bytes * 8.0 / link.rate_bps) * (1.0 / (1.0 - link.loss))


def sample_transfer_time(size_bytes: int, link: LinkModel, rng: random.Random) -> float:
    """One event-driven transfer: per-chunk Bernoulli loss, retransmit until success.

    Bits on the wire are accumulated as an integer so that with loss 0 the
    result is bit-for-bit equal to the closed form, with no float drift from
    summing per-chunk times.
    """
    if size_bytes < 0:
        raise ValueError("size must be >= 0")
    if size_bytes == 0:
        return link.one_way_delay_s
    total_bits = 0
    remaining = size_bytes
    loss = link.loss
    while remaining > 0:
        chunk = min(link.mtu_chunk, remaining)
        remaining -= chunk
        attempts = 1
        if loss > 0.0:
            while rng.random() < loss:
                attempts += 1
        total_bits += attempts * chunk * 8
    return link.one_way_delay_s + total_bits / link.rate_bps
