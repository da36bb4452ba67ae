"""Vectorised samplers for the DeltaIoT quality models.

Each builder takes a topology, candidate settings and the current
uncertainties and returns an smc sampler ``sample(seed, indices)``. Run ``i``
reads only the counter-based stream of ``(seed, i)``, so results do not
depend on how runs are batched.
"""

from __future__ import annotations

import math

import numpy as np

from ..deltaiot import (
    MAX_QUEUE,
    MAX_SLOTS,
    MOTE_LOAD,
    NetworkSettings,
    PCR,
    SF_TIME,
    COULOMB_UNIT,
    Topology,
    UncertaintyState,
    receive_energy_per_cycle,
)
from ..rng import Stream, child_key, run_keys, seed_key, uniform_batch

# latency runs: warm-up cycles from empty queues, then measured cycles
LATENCY_WARMUP = 2
LATENCY_CYCLES = 2


class _Routing:
    """Per-mote arrays indexed by mote id."""

    def __init__(self, topology: Topology, settings: NetworkSettings, u: UncertaintyState):
        settings.validate(topology)
        size = max([m.id for m in topology.motes] + [topology.gateway]) + 1
        self.size = size
        self.gateway = topology.gateway
        self.load = np.zeros(size)
        for m, p in zip(topology.motes, u.loads):
            self.load[m.id] = p
        self.first = np.zeros(size, dtype=np.int64)
        self.second = np.zeros(size, dtype=np.int64)
        self.p_first = np.ones(size)
        self.duplicating = False
        for mote, links in topology.parent_links.items():
            self.first[mote] = links[0]
            self.second[mote] = links[-1]
            if len(links) == 2:
                f0, f1 = settings.factors[links[0]], settings.factors[links[1]]
                if f0 + f1 > 100:
                    self.duplicating = True
                self.p_first[mote] = f0 / 100.0
        self.pf = np.array([u.failure(i, p) for i, p in enumerate(settings.power)])
        self.dest = np.array([l.dest for l in topology.links], dtype=np.int64)
        self.depth = len(topology.motes) + 1
        self.topology = topology
        self.settings = settings


def packet_loss_sampler(topology: Topology, settings: NetworkSettings, u: UncertaintyState):
    """1.0 when a packet from a load-weighted random source is lost on its way."""
    r = _Routing(topology, settings, u)
    ids = np.array([m.id for m in topology.motes], dtype=np.int64)
    weights = np.array(u.loads, dtype=np.float64)
    total = float(weights.sum())
    cum = np.cumsum(weights)
    if r.duplicating:
        return _packet_loss_duplicating(r, ids, weights)

    def sample(seed, indices):
        n = len(indices)
        if total <= 0.0:
            return np.zeros(n)
        keys = run_keys(seed, indices)
        pick = np.searchsorted(cum, uniform_batch(keys, 0) * total, side="right")
        cur = ids[np.minimum(pick, len(ids) - 1)]
        lost = np.zeros(n, dtype=bool)
        active = np.ones(n, dtype=bool)
        for hop in range(r.depth):
            if not active.any():
                break
            route = uniform_batch(keys, 1 + 2 * hop)
            link = np.where(route < r.p_first[cur], r.first[cur], r.second[cur])
            fail = uniform_batch(keys, 2 + 2 * hop) < r.pf[link]
            lost |= active & fail
            cur = np.where(active, r.dest[link], cur)
            active &= ~fail & (cur != r.gateway)
        return lost.astype(np.float64)

    return sample


def _packet_loss_duplicating(r: _Routing, ids, weights):
    """Scalar path for settings that copy packets to several parents."""
    total = float(weights.sum())
    topo, settings = r.topology, r.settings

    def delivered(m: int, rng: Stream) -> bool:
        ok = False
        for li in topo.parent_links[m]:
            if settings.factors[li] == 0:
                continue
            success = not (r.pf[li] > 0 and rng.random() < r.pf[li])
            if success:
                d = int(r.dest[li])
                if d == r.gateway or delivered(d, rng):
                    ok = True
        return ok

    def sample(seed, indices):
        out = np.zeros(len(indices))
        if total <= 0.0:
            return out
        root = seed_key(seed)
        for k, i in enumerate(indices):
            rng = Stream(child_key(root, int(i)))
            x = rng.random() * total
            src = int(ids[min(int(np.searchsorted(np.cumsum(weights), x, side="right")), len(ids) - 1)])
            out[k] = 0.0 if delivered(src, rng) else 1.0
        return out

    return sample


def _window(q, gen):
    """Packets sent this turn and queue left behind, per the send-window rule."""
    own_room = MAX_SLOTS - MOTE_LOAD
    total = np.where(gen, np.where(q <= own_room, q + MOTE_LOAD, MAX_SLOTS), np.minimum(q, MAX_SLOTS))
    left = np.where(gen, np.where(q <= own_room, 0, q - own_room), q - np.minimum(q, MAX_SLOTS))
    return total, left


def _split(total, f0, f1):
    k0 = (total * f0) // 100
    k1 = -((-total * f1) // 100)
    return k0, k1


def energy_sampler(topology: Topology, settings: NetworkSettings, u: UncertaintyState):
    """Sending energy (C) of one cycle started from empty queues.

    Transmissions always succeed here; the reception cost is a constant that
    :func:`energy_offset` adds to the estimate.
    """
    r = _Routing(topology, settings, u)
    cost = [SF_TIME * PCR[p] / COULOMB_UNIT for p in settings.power]
    plan = []
    for m in topology.turn_order:
        links = topology.parent_links[m]
        plan.append((m, r.load[m], links, [settings.factors[i] for i in links]))

    def sample(seed, indices):
        n = len(indices)
        keys = run_keys(seed, indices)
        q = np.zeros((n, r.size), dtype=np.int64)
        e = np.zeros(n)
        for pos, (m, load, links, factors) in enumerate(plan):
            gen = uniform_batch(keys, pos) < load
            total, q[:, m] = _window(q[:, m], gen)
            if len(links) == 1:
                parts = [(links[0], total)]
            else:
                k0, k1 = _split(total, factors[0], factors[1])
                parts = [(links[0], k0), (links[1], k1)]
            for li, k in parts:
                e += k * cost[li]
                d = r.dest[li]
                if d != r.gateway:
                    q[:, d] = np.minimum(q[:, d] + k, MAX_QUEUE)
        return e

    return sample


def energy_offset(topology: Topology) -> float:
    return receive_energy_per_cycle(len(topology.motes))


def _binomial_cdf(p: float, size: int = MAX_SLOTS) -> np.ndarray:
    """Row k: cumulative Binomial(k, p) probabilities over 0..size (1 past k)."""
    out = np.ones((size + 1, size + 1))
    for k in range(size + 1):
        pmf = [math.comb(k, j) * p**j * (1 - p) ** (k - j) for j in range(k + 1)]
        out[k, : k + 1] = np.cumsum(pmf)
        out[k, k] = 1.0
    return out


def latency_sampler(
    topology: Topology,
    settings: NetworkSettings,
    u: UncertaintyState,
    warmup: int = LATENCY_WARMUP,
    cycles: int = LATENCY_CYCLES,
):
    """Mean backlog percentage (queued / generated) over measured cycles.

    Each run starts from empty queues, runs ``warmup`` cycles and then
    averages the per-cycle latency percentage over ``cycles`` cycles.
    Losses per link transmission are binomial in the packets sent, drawn by
    inverse transform from one uniform.
    """
    r = _Routing(topology, settings, u)
    plan = []
    for m in topology.turn_order:
        links = topology.parent_links[m]
        plan.append((m, r.load[m], links, [settings.factors[i] for i in links]))
    nturn = len(plan)
    # cdf[l][k, j] = P(at most j of k packets lost on link l)
    cdf = {li: _binomial_cdf(pf) for li, pf in enumerate(r.pf) if pf > 0}

    def draw(c, pos, j):
        return (c * nturn + pos) * 3 + j

    def sample(seed, indices):
        n = len(indices)
        keys = run_keys(seed, indices)
        q = np.zeros((n, r.size), dtype=np.int64)
        acc = np.zeros(n)
        for c in range(warmup + cycles):
            generated = np.zeros(n, dtype=np.int64)
            for pos, (m, load, links, factors) in enumerate(plan):
                gen = uniform_batch(keys, draw(c, pos, 0)) < load
                generated += np.where(gen, MOTE_LOAD, 0)
                total, q[:, m] = _window(q[:, m], gen)
                if len(links) == 1:
                    parts = [(links[0], total)]
                else:
                    k0, k1 = _split(total, factors[0], factors[1])
                    parts = [(links[0], k0), (links[1], k1)]
                for j, (li, k) in enumerate(parts):
                    if li in cdf:
                        u_ = uniform_batch(keys, draw(c, pos, 1 + j))
                        k = k - (u_[:, None] >= cdf[li][k]).sum(axis=1)
                    d = r.dest[li]
                    if d != r.gateway:
                        q[:, d] = np.minimum(q[:, d] + k, MAX_QUEUE)
            if c >= warmup:
                acc += 100.0 * q.sum(axis=1) / np.maximum(1, generated)
        return acc / cycles

    return sample
