"""Simulator of the DeltaIoT multi-hop sensor network.

Motes take turns once per cycle, children before parents. A mote that
generates load in a cycle fills its send window with its own 10 packets
first and tops it up from its receive queue; otherwise it forwards only
queued packets. Windows hold at most 40 packets and receive queues at most
60 (excess arrivals are dropped). A mote with two parents splits its window
by distribution factors, ``floor`` for the first parent and ``ceil`` for the
second. Every packet crossing a link is lost with a probability given by the
link's signal-to-noise ratio at the sending power.

Packets keep their identity so that duplicated traffic (the failsafe setting
sends everything to every parent) is counted once: a packet is delivered when
its first copy reaches the gateway and dropped when its last live copy is
destroyed.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Optional, Sequence

from .knowledge import Configuration
from .rng import Stream, derive_seed

GATEWAY = 1
MAX_SLOTS = 40
MAX_QUEUE = 60
MOTE_LOAD = 10
MAX_POWER = 15
SF_TIME = 0.258
COULOMB_UNIT = 1000.0
RECEPTION_TIME = 2
RECEPTION_COST = 14.2
PCR = (20.2, 21.2, 22.3, 23.7, 24.7, 26.1, 27.5, 28.8, 30.0, 31.2, 32.4, 33.7, 35.1, 36.5, 38.0, 38.9)
SNR_LIMIT = 50.0
FACTOR_STEP = 20


class TopologyError(ValueError):
    pass


class SettingsError(ValueError):
    pass


# -- physics ----------------------------------------------------------------

def link_failure_probability(snr: float) -> float:
    """0 for a nonnegative SNR, otherwise -snr/20 capped at 1."""
    if snr >= 0:
        return 0.0
    return min(1.0, -snr / 20.0)


def send_energy(packets: int, power: int) -> float:
    """Coulomb spent sending ``packets`` at transmission power ``power``."""
    if packets < 0:
        raise ValueError("packets must be >= 0")
    return packets * SF_TIME * PCR[power] / COULOMB_UNIT


def receive_energy_per_cycle(motes: int = 14, slots: int = MAX_SLOTS) -> float:
    """Listening cost of one cycle for ``motes`` non-gateway motes."""
    return motes * slots * RECEPTION_TIME * RECEPTION_COST / COULOMB_UNIT


def clamp_snr(snr: float) -> float:
    return max(-SNR_LIMIT, min(SNR_LIMIT, snr))


# -- topology ---------------------------------------------------------------

@dataclass(frozen=True)
class Link:
    source: int
    dest: int
    alpha: float  # SNR at power 0
    beta: float  # SNR gain per power step

    @property
    def name(self) -> str:
        return f"{self.source}->{self.dest}"


@dataclass(frozen=True)
class Mote:
    id: int
    load: float  # probability of generating MOTE_LOAD packets in a cycle
    periodic: bool = False


@dataclass(frozen=True)
class Topology:
    motes: tuple[Mote, ...]
    links: tuple[Link, ...]
    turn_order: tuple[int, ...] = ()
    gateway: int = GATEWAY

    def __post_init__(self):
        ids = [m.id for m in self.motes]
        if len(set(ids)) != len(ids):
            raise TopologyError("duplicate mote id")
        if self.gateway in ids:
            raise TopologyError("the gateway is not a mote")
        known = set(ids) | {self.gateway}
        seen = set()
        for l in self.links:
            if l.source not in ids:
                raise TopologyError(f"link {l.name}: unknown source mote")
            if l.dest not in known:
                raise TopologyError(f"link {l.name}: unknown destination")
            if l.source == l.dest:
                raise TopologyError(f"link {l.name}: self loop")
            if (l.source, l.dest) in seen:
                raise TopologyError(f"duplicate link {l.name}")
            if not (math.isfinite(l.alpha) and math.isfinite(l.beta)):
                raise TopologyError(f"link {l.name}: non-finite SNR coefficients")
            seen.add((l.source, l.dest))
        for m in self.motes:
            if not 0.0 <= m.load <= 1.0:
                raise TopologyError(f"mote {m.id}: load probability outside [0,1]")
            if len(self.parents(m.id)) > 2:
                raise TopologyError(f"mote {m.id}: at most two parents are supported")
        order = _children_first(self)
        if self.turn_order:
            if sorted(self.turn_order) != sorted(ids):
                raise TopologyError("turn order must list every mote once")
            pos = {m: i for i, m in enumerate(self.turn_order)}
            for l in self.links:
                if l.dest != self.gateway and pos[l.source] > pos[l.dest]:
                    raise TopologyError(f"turn order lets {l.dest} send before its child {l.source}")
        else:
            object.__setattr__(self, "turn_order", order)

    def parents(self, mote: int) -> list[int]:
        """Indices of the outgoing links of ``mote``, in declaration order."""
        return [i for i, l in enumerate(self.links) if l.source == mote]

    @cached_property
    def parent_links(self) -> dict:
        return {m.id: tuple(self.parents(m.id)) for m in self.motes}

    @cached_property
    def mote_index(self) -> dict:
        return {m.id: i for i, m in enumerate(self.motes)}

    def link_index(self, source: int, dest: int) -> int:
        for i, l in enumerate(self.links):
            if (l.source, l.dest) == (source, dest):
                return i
        raise KeyError(f"no link {source}->{dest}")

    @property
    def two_parent_motes(self) -> list[int]:
        return [m.id for m in self.motes if len(self.parent_links[m.id]) == 2]

    def to_dict(self) -> dict:
        return {
            "gateway": self.gateway,
            "motes": [{"id": m.id, "load": m.load, "periodic": m.periodic} for m in self.motes],
            "links": [[l.source, l.dest, l.alpha, l.beta] for l in self.links],
            "turnOrder": list(self.turn_order),
        }


def _children_first(t: Topology) -> tuple[int, ...]:
    """Topological order with every mote before its parents; detects cycles."""
    ids = [m.id for m in t.motes]
    children = {m: 0 for m in ids}
    for l in t.links:
        if l.dest in children:
            children[l.dest] += 1
    ready = sorted(m for m in ids if children[m] == 0)
    order = []
    while ready:
        m = ready.pop(0)
        order.append(m)
        for i in t.parents(m):
            d = t.links[i].dest
            if d in children:
                children[d] -= 1
                if children[d] == 0:
                    ready.append(d)
                    ready.sort()
    if len(order) != len(ids):
        raise TopologyError("cycle detected")
    # every mote must reach the gateway
    reach = {t.gateway}
    changed = True
    while changed:
        changed = False
        for l in t.links:
            if l.dest in reach and l.source not in reach:
                reach.add(l.source)
                changed = True
    missing = sorted(set(ids) - reach)
    if missing:
        raise TopologyError(f"unreachable mote(s) {missing}: no path to the gateway")
    return tuple(order)


def load_topology(spec) -> Topology:
    """Build a topology from a dict or a JSON file path (see docs/outputs.md)."""
    if not isinstance(spec, Mapping):
        with open(spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    try:
        motes = tuple(
            Mote(int(m["id"]), float(m.get("load", 1.0)), bool(m.get("periodic", False))) for m in spec["motes"]
        )
        links = []
        for l in spec["links"]:
            if isinstance(l, Mapping):
                links.append(Link(int(l["source"]), int(l["dest"]), float(l.get("alpha", 0.0)), float(l.get("beta", 1.0))))
            else:
                src, dst, a, b = l
                links.append(Link(int(src), int(dst), float(a), float(b)))
        order = tuple(int(x) for x in spec.get("turnOrder", ()))
        return Topology(motes, tuple(links), order, int(spec.get("gateway", GATEWAY)))
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, TopologyError):
            raise
        raise TopologyError(f"malformed topology: {err}") from None


# Link SNR coefficients and load probabilities below are fixture values made up
# for this package (the real deployment's field profiles are not public); the
# link set and turn order are those of the 15-node deployment.
_DELTAIOT_LINKS = (
    (2, 4, -2.0, 0.60),
    (3, 1, 1.0, 0.50),
    (4, 1, -4.5, 0.75),
    (5, 9, -1.5, 0.50),
    (6, 4, -3.0, 0.80),
    (7, 2, -5.0, 0.70),
    (7, 3, -3.5, 0.60),
    (8, 1, 0.5, 0.50),
    (9, 1, -6.0, 0.90),
    (10, 6, -2.5, 0.55),
    (10, 5, -4.0, 0.65),
    (11, 7, -1.0, 0.50),
    (12, 7, -6.5, 0.85),
    (12, 3, -12.0, 0.80),
    (13, 11, -3.5, 0.70),
    (14, 12, -2.0, 0.60),
    (15, 12, -4.0, 0.75),
)
_PERIODIC = {3, 8, 9, 15}
_EVENT_LOADS = {2: 0.3, 4: 0.2, 5: 0.25, 6: 0.2, 7: 0.3, 10: 0.25, 11: 0.2, 12: 0.3, 13: 0.25, 14: 0.25}
DELTAIOT_TURN_ORDER = (8, 10, 13, 14, 15, 5, 6, 11, 12, 9, 7, 2, 3, 4)

DELTAIOT15 = Topology(
    motes=tuple(
        Mote(i, 1.0 if i in _PERIODIC else _EVENT_LOADS[i], i in _PERIODIC) for i in range(2, 16)
    ),
    links=tuple(Link(*l) for l in _DELTAIOT_LINKS),
    turn_order=DELTAIOT_TURN_ORDER,
)


# -- settings and uncertainties ---------------------------------------------

@dataclass(frozen=True)
class NetworkSettings:
    power: tuple[int, ...]  # per link
    factors: tuple[int, ...]  # per link, percent

    def validate(self, topology: Topology) -> None:
        n = len(topology.links)
        if len(self.power) != n or len(self.factors) != n:
            raise SettingsError(f"settings cover {len(self.power)} links, topology has {n}")
        for i, (p, f) in enumerate(zip(self.power, self.factors)):
            if not (isinstance(p, int) and 0 <= p <= MAX_POWER):
                raise SettingsError(f"link {topology.links[i].name}: power {p!r} not in 0..{MAX_POWER}")
            if not (isinstance(f, int) and 0 <= f <= 100 and f % FACTOR_STEP == 0):
                raise SettingsError(f"link {topology.links[i].name}: factor {f!r} not a multiple of {FACTOR_STEP} in [0,100]")
        if self.is_failsafe:
            return
        for mote, links in topology.parent_links.items():
            total = sum(self.factors[i] for i in links)
            if total != 100:
                raise SettingsError(f"mote {mote}: factors must sum to 100, got {total}")

    @property
    def is_failsafe(self) -> bool:
        return all(p == MAX_POWER for p in self.power) and all(f == 100 for f in self.factors)

    def digest(self) -> str:
        raw = ",".join(map(str, self.power)) + ";" + ",".join(map(str, self.factors))
        return hashlib.sha256(raw.encode()).hexdigest()[:12]


def failsafe_settings(topology: Topology) -> NetworkSettings:
    n = len(topology.links)
    return NetworkSettings((MAX_POWER,) * n, (100,) * n)


@dataclass(frozen=True)
class UncertaintyState:
    alpha: tuple[float, ...]  # current per-link SNR offset
    beta: tuple[float, ...]
    loads: tuple[float, ...]  # per mote (topology order), generation probability

    def snr(self, link: int, power: int) -> float:
        return clamp_snr(self.alpha[link] + self.beta[link] * power)

    def failure(self, link: int, power: int) -> float:
        return link_failure_probability(self.snr(link, power))

    @classmethod
    def of(cls, topology: Topology) -> "UncertaintyState":
        return cls(
            tuple(l.alpha for l in topology.links),
            tuple(l.beta for l in topology.links),
            tuple(m.load for m in topology.motes),
        )

    @classmethod
    def from_snr(cls, topology: Topology, snr: Sequence[float], power: Sequence[int], loads: Sequence[float]):
        """Recover the SNR offsets from SNRs observed at known powers."""
        beta = tuple(l.beta for l in topology.links)
        alpha = tuple(s - b * p for s, b, p in zip(snr, beta, power))
        return cls(alpha, beta, tuple(loads))


def min_power_for_link(link: int, uncertainty: UncertaintyState) -> int:
    """Smallest power giving a nonnegative SNR, or the maximum when none does."""
    a, b = uncertainty.alpha[link], uncertainty.beta[link]
    for p in range(MAX_POWER + 1):
        if a + b * p >= 0:
            return p
    return MAX_POWER


# -- one cycle --------------------------------------------------------------

@dataclass(frozen=True)
class CycleStats:
    cycle: int
    generated: int
    delivered: int
    lost_link: int
    lost_overflow: int
    carried_in: int
    carried_out: int
    energy: float
    send_energy: float
    latency_pct: float
    settings_hash: str = ""

    @property
    def dropped(self) -> int:
        return self.lost_link + self.lost_overflow

    @property
    def packet_loss(self) -> float:
        resolved = self.delivered + self.dropped
        return self.dropped / resolved if resolved else 0.0


@dataclass
class NetworkState:
    """Receive queues (packet ids, FIFO) and the live-copy bookkeeping."""

    queues: dict = field(default_factory=dict)  # mote -> list of packet ids
    copies: dict = field(default_factory=dict)  # packet id -> live copies
    resolved: set = field(default_factory=set)  # ids delivered or dropped
    next_id: int = 0

    def unresolved_queued(self) -> int:
        ids = set()
        for q in self.queues.values():
            ids.update(p for p in q if p not in self.resolved)
        return len(ids)


def run_cycle(
    topology: Topology,
    settings: NetworkSettings,
    uncertainty: UncertaintyState,
    rng: Stream,
    state: Optional[NetworkState] = None,
    cycle: int = 0,
) -> tuple[CycleStats, NetworkState]:
    settings.validate(topology)
    st = state if state is not None else NetworkState()
    queues = {m.id: list(st.queues.get(m.id, ())) for m in topology.motes}
    copies = dict(st.copies)
    resolved = set(st.resolved)
    next_id = st.next_id
    carried_in = len({p for q in queues.values() for p in q if p not in resolved})
    generated = delivered = lost_link = lost_overflow = 0
    energy_send = 0.0

    def destroy(pid):
        copies[pid] -= 1
        if copies[pid] == 0:
            del copies[pid]
            if pid not in resolved:
                resolved.add(pid)
                return 1
        return 0

    for mote in topology.turn_order:
        mi = topology.mote_index[mote]
        q = queues[mote]
        if rng.bernoulli(uncertainty.loads[mi]):
            own = list(range(next_id, next_id + MOTE_LOAD))
            next_id += MOTE_LOAD
            generated += MOTE_LOAD
            for p in own:
                copies[p] = 1
            take = min(len(q), MAX_SLOTS - MOTE_LOAD)
            window = own + q[:take]
        else:
            take = min(len(q), MAX_SLOTS)
            window = q[:take]
        queues[mote] = q[take:]
        links = topology.parent_links[mote]
        # assign packets of the window to parent links
        if len(links) == 1:
            parts = [(links[0], window)]
        else:
            f0, f1 = settings.factors[links[0]], settings.factors[links[1]]
            n = len(window)
            k0 = math.floor(n * f0 / 100)
            k1 = math.ceil(n * f1 / 100)
            if f0 + f1 == 100:
                parts = [(links[0], window[:k0]), (links[1], window[k0:k0 + k1])]
            else:  # duplication: each parent gets its own share of copies
                parts = [(links[0], window[:k0]), (links[1], window[:k1])]
        sent_copies = sum(len(p) for _, p in parts)
        # a packet leaves the mote once; extra copies are created for duplication
        extra = sent_copies - len(window)
        if extra:
            counts: dict = {}
            for _, pkts in parts:
                for p in pkts:
                    counts[p] = counts.get(p, 0) + 1
            for p in window:
                c = counts.get(p, 0)
                copies[p] += c - 1
                if c == 0:
                    lost_link += destroy(p)
        for li, pkts in parts:
            if not pkts:
                continue
            power = settings.power[li]
            energy_send += send_energy(len(pkts), power)
            pf = uncertainty.failure(li, power)
            dest = topology.links[li].dest
            for p in pkts:
                if pf > 0.0 and rng.random() < pf:
                    lost_link += destroy(p)
                elif dest == topology.gateway:
                    if p not in resolved:
                        resolved.add(p)
                        delivered += 1
                    copies[p] -= 1
                    if copies[p] == 0:
                        del copies[p]
                elif len(queues[dest]) >= MAX_QUEUE:
                    lost_overflow += destroy(p)
                else:
                    queues[dest].append(p)

    # forget bookkeeping of packets that are finished and have no live copies
    resolved = {p for p in resolved if p in copies}
    new_state = NetworkState(queues, copies, resolved, next_id)
    carried_out = new_state.unresolved_queued()
    recv = receive_energy_per_cycle(len(topology.motes))
    stats = CycleStats(
        cycle=cycle,
        generated=generated,
        delivered=delivered,
        lost_link=lost_link,
        lost_overflow=lost_overflow,
        carried_in=carried_in,
        carried_out=carried_out,
        energy=energy_send + recv,
        send_energy=energy_send,
        latency_pct=100.0 * carried_out / max(1, generated),
        settings_hash=settings.digest(),
    )
    return stats, new_state


# -- scenarios --------------------------------------------------------------

@dataclass(frozen=True)
class LinkEvent:
    start: int  # first affected cycle
    stop: int  # first unaffected cycle
    links: tuple[int, ...]  # link indices; empty = every link
    delta_alpha: float


@dataclass(frozen=True)
class Scenario:
    """Per-cycle uncertainties: drifting SNR offsets and load probabilities.

    ``alpha_l(k) = alpha_l + amplitude * sin(2 pi (k / period + phase_l)) +
    noise`` where the noise is uniform in ``[-noise, noise]`` and the phase of
    each link is fixed by the scenario seed; events add constant offsets to
    chosen links over cycle ranges. Loads of event-driven motes wander by up
    to ``load_jitter`` around their base probability.
    """

    seed: int = 0
    amplitude: float = 0.0
    period: float = 45.0
    noise: float = 0.0
    load_jitter: float = 0.0
    events: tuple[LinkEvent, ...] = ()
    loads: Mapping[int, float] = field(default_factory=dict)  # base load overrides by mote id

    def uncertainty(self, topology: Topology, cycle: int) -> UncertaintyState:
        alphas = []
        for i, l in enumerate(topology.links):
            s = Stream(derive_seed(self.seed, 1, i))
            phase = s.random()
            a = l.alpha
            if self.amplitude:
                a += self.amplitude * math.sin(2 * math.pi * (cycle / self.period + phase))
            if self.noise:
                a += self.noise * (2 * Stream(derive_seed(self.seed, 2, cycle, i)).random() - 1)
            for ev in self.events:
                if ev.start <= cycle < ev.stop and (not ev.links or i in ev.links):
                    a += ev.delta_alpha
            alphas.append(a)
        loads = []
        for m in topology.motes:
            p = self.loads.get(m.id, m.load)
            if self.load_jitter and not m.periodic:
                u = Stream(derive_seed(self.seed, 3, cycle, m.id)).random()
                p = min(1.0, max(0.0, p + self.load_jitter * (2 * u - 1)))
            loads.append(p)
        return UncertaintyState(tuple(alphas), tuple(l.beta for l in topology.links), tuple(loads))

    def to_dict(self, topology: Optional[Topology] = None) -> dict:
        def link_ref(i):
            if topology is None:
                return i
            l = topology.links[i]
            return [l.source, l.dest]

        return {
            "seed": self.seed,
            "amplitude": self.amplitude,
            "period": self.period,
            "noise": self.noise,
            "loadJitter": self.load_jitter,
            "loads": {str(k): v for k, v in self.loads.items()},
            "events": [
                {"from": e.start, "to": e.stop, "links": [link_ref(i) for i in e.links], "deltaAlpha": e.delta_alpha}
                for e in self.events
            ],
        }


def load_scenario(spec, topology: Topology) -> Scenario:
    if not isinstance(spec, Mapping):
        with open(spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    known = {"seed", "amplitude", "period", "noise", "loadJitter", "loads", "events"}
    unknown = set(spec) - known
    if unknown:
        raise ValueError(f"unknown scenario fields {sorted(unknown)}")
    events = []
    for e in spec.get("events", ()):
        idx = []
        for ref in e.get("links", ()):
            idx.append(topology.link_index(int(ref[0]), int(ref[1])) if isinstance(ref, (list, tuple)) else int(ref))
        events.append(LinkEvent(int(e["from"]), int(e["to"]), tuple(idx), float(e["deltaAlpha"])))
    period = float(spec.get("period", 45.0))
    if period <= 0:
        raise ValueError("scenario period must be positive")
    return Scenario(
        seed=int(spec.get("seed", 0)),
        amplitude=float(spec.get("amplitude", 0.0)),
        period=period,
        noise=float(spec.get("noise", 0.0)),
        load_jitter=float(spec.get("loadJitter", 0.0)),
        events=tuple(events),
        loads={int(k): float(v) for k, v in spec.get("loads", {}).items()},
    )


# -- simulator with probe and effector --------------------------------------

class DeltaIoTSimulator:
    """Single-owner network simulator; settings change only between cycles."""

    def __init__(
        self,
        topology: Topology = DELTAIOT15,
        scenario: Optional[Scenario] = None,
        seed: int = 0,
        settings: Optional[NetworkSettings] = None,
    ):
        self.topology = topology
        self.scenario = scenario or Scenario()
        self.seed = seed
        self.cycle = 0
        self.settings = settings or default_settings(topology)
        self.settings.validate(topology)
        self._pending: Optional[NetworkSettings] = None
        self._state = NetworkState()
        self._last: Optional[CycleStats] = None
        self._last_uncertainty: Optional[UncertaintyState] = None
        self.history: list[CycleStats] = []

    def apply_settings(self, settings: NetworkSettings) -> None:
        settings.validate(self.topology)
        self._pending = settings

    def run_cycle(self) -> CycleStats:
        if self._pending is not None:
            self.settings = self._pending
            self._pending = None
        u = self.scenario.uncertainty(self.topology, self.cycle)
        rng = Stream.from_seed(derive_seed(self.seed, 0, self.cycle))
        stats, self._state = run_cycle(self.topology, self.settings, u, rng, self._state, self.cycle)
        self._last = stats
        self._last_uncertainty = u
        self.history.append(stats)
        self.cycle += 1
        return stats

    def probe(self) -> Configuration:
        if self._last is None:
            raise RuntimeError("probe before the first completed cycle")
        u = self._last_uncertainty
        return Configuration(
            settings=self.settings,
            qualities={
                "packetLoss": self._last.packet_loss,
                "energy": self._last.energy,
                "latency": self._last.latency_pct,
            },
            environment={
                "linksSNR": tuple(u.snr(i, p) for i, p in enumerate(self.settings.power)),
                "motesLoad": u.loads,
            },
        )


def default_settings(topology: Topology) -> NetworkSettings:
    """Maximum power with the traffic of two-parent motes split 100/0."""
    power = [MAX_POWER] * len(topology.links)
    factors = [0] * len(topology.links)
    for links in topology.parent_links.values():
        factors[links[0]] = 100
    return NetworkSettings(tuple(power), tuple(factors))


def uncertainty_from_probe(topology: Topology, conf: Configuration) -> UncertaintyState:
    return UncertaintyState.from_snr(
        topology, conf.environment["linksSNR"], conf.settings.power, conf.environment["motesLoad"]
    )


STATS_HEADER = ("cycle", "packetLoss", "energy", "latencyPct", "settingsHash")


def stats_row(s: CycleStats) -> tuple:
    return (s.cycle, f"{s.packet_loss:.6f}", f"{s.energy:.6f}", f"{s.latency_pct:.6f}", s.settings_hash)
