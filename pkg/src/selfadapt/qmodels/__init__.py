"""Predictive quality models and their registry.

Packet loss is always estimated as a probability (accuracy/confidence);
energy and latency are always estimated as means with an RSEM stopping rule.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional

from ..smc import Estimate, estimate_mean, estimate_probability
from . import native

PROBABILITY = "probability"
MEAN = "mean"


@dataclass(frozen=True)
class SMCSettings:
    epsilon: float = 0.05
    alpha: float = 0.05
    rsem: float = 0.05
    min_runs: int = 20
    max_runs: int = 1000


@dataclass(frozen=True)
class QualityModel:
    """``build(context, settings)`` returns an smc sampler for one option.

    ``offset(context)`` is a deterministic amount added to mean estimates
    (for energy: the constant reception cost).
    """

    name: str
    kind: str
    build: Callable
    offset: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in (PROBABILITY, MEAN):
            raise ValueError(f"unknown estimator kind {self.kind!r}")

    def estimate(
        self,
        context,
        settings,
        smc: SMCSettings,
        seed: int,
        limit: Optional[int] = None,
        stop=None,
    ) -> Estimate:
        sampler = self.build(context, settings)
        if self.kind == PROBABILITY:
            return estimate_probability(sampler, smc.epsilon, smc.alpha, seed, limit=limit, stop=stop)
        est = estimate_mean(
            sampler, smc.rsem, seed, min_runs=smc.min_runs, max_runs=smc.max_runs, limit=limit, stop=stop
        )
        if self.offset is not None and est.runs:
            c = self.offset(context)
            est = replace(est, point=est.point + c, lo=est.lo + c, hi=est.hi + c)
        return est


class Registry:
    """Quality models keyed by quality name, in registration order."""

    def __init__(self, models=()):
        self._models: dict[str, QualityModel] = {}
        for m in models:
            self.register(m)

    def register(self, model: QualityModel) -> None:
        if model.name in self._models:
            raise ValueError(f"quality {model.name!r} is already registered")
        self._models[model.name] = model

    def copy(self) -> "Registry":
        return Registry(self._models.values())

    def names(self) -> tuple[str, ...]:
        return tuple(self._models)

    def __getitem__(self, name: str) -> QualityModel:
        return self._models[name]

    def __contains__(self, name: str) -> bool:
        return name in self._models

    def __iter__(self) -> Iterator[QualityModel]:
        return iter(self._models.values())

    def __len__(self) -> int:
        return len(self._models)


@dataclass(frozen=True)
class IoTContext:
    topology: object
    uncertainty: object


PACKET_LOSS = QualityModel(
    "packetLoss", PROBABILITY, lambda c, s: native.packet_loss_sampler(c.topology, s, c.uncertainty)
)
ENERGY = QualityModel(
    "energy",
    MEAN,
    lambda c, s: native.energy_sampler(c.topology, s, c.uncertainty),
    lambda c: native.energy_offset(c.topology),
)
LATENCY = QualityModel("latency", MEAN, lambda c, s: native.latency_sampler(c.topology, s, c.uncertainty))


def model_registry() -> Registry:
    """Fresh registry with the initial qualities; latency is added at run time."""
    return Registry([PACKET_LOSS, ENERGY])


def predict_packet_loss(topology, settings, uncertainty, epsilon=0.05, alpha=0.05, seed=0) -> Estimate:
    return PACKET_LOSS.estimate(IoTContext(topology, uncertainty), settings, SMCSettings(epsilon, alpha), seed)


def predict_energy(topology, settings, uncertainty, rsem=0.05, seed=0, **kw) -> Estimate:
    return ENERGY.estimate(IoTContext(topology, uncertainty), settings, SMCSettings(rsem=rsem, **kw), seed)


def predict_latency(topology, settings, uncertainty, rsem=0.05, seed=0, **kw) -> Estimate:
    return LATENCY.estimate(IoTContext(topology, uncertainty), settings, SMCSettings(rsem=rsem, **kw), seed)
