"""The quality models as automaton networks run on the model execution engine.

The ``.anm`` sources live in ``selfadapt/models``. Binding an adaptation
option replaces the parameter arrays' initial values; probabilities and loads
become integer branch weights (basis points for link failures, parts per
million for loads).
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources

from ..deltaiot import NetworkSettings, Topology, UncertaintyState
from ..engine import AutomatonNetwork, parse_model
from ..smc import engine_sampler

MAX_MOTES = 16
MAX_LINKS = 24
HORIZON = 100000

MODEL_FILES = {
    "packetLoss": "packet_loss.anm",
    "energy": "energy.anm",
    "latency": "latency.anm",
}


def model_source(name: str) -> str:
    return resources.files("selfadapt.models").joinpath(name).read_text(encoding="utf-8")


@lru_cache(maxsize=None)
def load_model(quality: str) -> AutomatonNetwork:
    return parse_model(model_source(MODEL_FILES[quality]))


def _pad(values, size, fill=0):
    values = list(values)
    if len(values) > size:
        raise ValueError(f"model supports at most {size} entries, got {len(values)}")
    return tuple(values + [fill] * (size - len(values)))


def bind_values(net: AutomatonNetwork, topology: Topology, settings: NetworkSettings, u: UncertaintyState) -> dict:
    settings.validate(topology)
    if any(m.id >= MAX_MOTES or m.id < 2 for m in topology.motes) or topology.gateway != 1:
        raise ValueError("engine models expect the gateway at id 1 and motes with ids 2..15")
    load = [0] * MAX_MOTES
    for m, p in zip(topology.motes, u.loads):
        load[m.id] = int(round(p * 1_000_000))
    parents = [0] * MAX_MOTES
    first = [0] * MAX_MOTES
    second = [0] * MAX_MOTES
    for m, links in topology.parent_links.items():
        parents[m] = len(links)
        first[m] = links[0]
        second[m] = links[-1]
    names = {d.name for d in net.variables}
    values = {
        "load": tuple(load),
        "nlinks": len(topology.links),
        "src": _pad([l.source for l in topology.links], MAX_LINKS),
        "dst": _pad([l.dest for l in topology.links], MAX_LINKS),
        "factor": _pad(settings.factors, MAX_LINKS),
        "fail": _pad([int(round(u.failure(i, p) * 10000)) for i, p in enumerate(settings.power)], MAX_LINKS),
        "parents": tuple(parents),
        "firstLink": tuple(first),
        "secondLink": tuple(second),
        "power": _pad(settings.power, MAX_LINKS),
        "nmotes": len(topology.turn_order),
        "order": _pad(topology.turn_order, MAX_MOTES),
    }
    return {k: v for k, v in values.items() if k in names}


def bind(quality: str, topology: Topology, settings: NetworkSettings, u: UncertaintyState) -> AutomatonNetwork:
    net = load_model(quality)
    return net.with_values(bind_values(net, topology, settings, u))


def packet_loss_sampler(topology, settings, u):
    net = bind("packetLoss", topology, settings, u)
    return engine_sampler(net, HORIZON, "Network.PacketLoss || Topology.Gateway", "Network.PacketLoss")


def energy_sampler(topology, settings, u):
    net = bind("energy", topology, settings, u)
    return engine_sampler(net, HORIZON, "System.End", "energy")


def latency_sampler(topology, settings, u):
    net = bind("latency", topology, settings, u)
    return engine_sampler(net, HORIZON, "System.End", "acc / MEASURE")
