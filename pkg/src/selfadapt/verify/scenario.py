"""Stub scenarios: scripted probe samples and verifier outputs.

A scenario file looks like::

    {
      "name": "adaptation-needed",
      "goal": 0.10,
      "epsilon": 0.02,
      "initial": null,
      "base": {"type": "normal", "packetLoss": 0.04, "env": 0},
      "samples": [{}, {"packetLoss": 0.14, "type": "degraded", "env": 1}],
      "verifier": {
        "normal": {"options": [{"packetLoss": 0.03, "energy": 12.5}], "timeoutAfter": 0},
        "degraded": {"options": [...]}
      }
    }

Each sample is the base sample with the listed fields replaced. Packet loss
values are fractions with at most four decimals; energies are coulomb with at
most three decimals, so both are exact in the model's integer units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from ..engine import AutomatonNetwork

MAX_SAMPLES = 10
MAX_TYPES = 4
MAX_OPTIONS = 8
FAILSAFE = 8
NOCHANGE = 9
SKIPPED = 10
UNSET = 11


class ScenarioError(ValueError):
    pass


def _units(x, scale: int, what: str) -> int:
    f = Fraction(str(x)) * scale
    if f.denominator != 1 or f < 0:
        raise ScenarioError(f"{what} {x!r} is not a nonnegative multiple of 1/{scale}")
    return int(f)


@dataclass(frozen=True)
class Sample:
    type: str
    packet_loss: int  # basis points
    env: int


@dataclass(frozen=True)
class VerifierOutput:
    loss_hi: tuple[int, ...]  # basis points, per option
    energy: tuple[int, ...]  # millicoulomb, per option
    timeout_after: int = 0  # 0: never times out


@dataclass(frozen=True)
class StubScenario:
    name: str
    goal: int  # basis points
    samples: tuple[Sample, ...]
    verifier: Mapping[str, VerifierOutput] = field(default_factory=dict)
    initial: Optional[int] = None

    def __post_init__(self):
        if len(self.samples) > MAX_SAMPLES:
            raise ScenarioError(f"at most {MAX_SAMPLES} samples")
        if len(self.verifier) > MAX_TYPES:
            raise ScenarioError(f"at most {MAX_TYPES} sample types")
        for s in self.samples:
            if s.type not in self.verifier:
                raise ScenarioError(f"sample type {s.type!r} has no verifier outputs")
            if not 0 <= s.env <= 1000:
                raise ScenarioError("env ids must lie in 0..1000")
        for t, v in self.verifier.items():
            if not 1 <= len(v.loss_hi) <= MAX_OPTIONS or len(v.energy) != len(v.loss_hi):
                raise ScenarioError(f"type {t!r}: need 1..{MAX_OPTIONS} options")
            if not 0 <= v.timeout_after < len(v.loss_hi):
                raise ScenarioError(f"type {t!r}: timeoutAfter must lie in 0..{len(v.loss_hi) - 1}")
        if self.initial is not None and not 0 <= self.initial < MAX_OPTIONS:
            raise ScenarioError("initial option out of range")

    @property
    def types(self) -> tuple[str, ...]:
        return tuple(self.verifier)

    def expected(self, type_: str, timed_out: bool) -> int:
        """Correct decision by brute force: option code or FAILSAFE."""
        v = self.verifier[type_]
        n = v.timeout_after if timed_out else len(v.loss_hi)
        ok = sorted((v.energy[i], i) for i in range(n) if v.loss_hi[i] < self.goal)
        return ok[0][1] if ok else FAILSAFE


def load_stub_scenario(spec) -> StubScenario:
    if not isinstance(spec, Mapping):
        with open(spec, encoding="utf-8") as fh:
            spec = json.load(fh)
    known = {"name", "goal", "epsilon", "initial", "base", "samples", "verifier"}
    unknown = set(spec) - known
    if unknown:
        raise ScenarioError(f"unknown scenario fields {sorted(unknown)}")
    eps = Fraction(str(spec.get("epsilon", 0)))
    base = dict(spec.get("base", {}))
    samples = []
    for i, mut in enumerate(spec.get("samples", ())):
        bad = set(mut) - {"type", "packetLoss", "env"}
        if bad:
            raise ScenarioError(f"sample {i}: unknown fields {sorted(bad)}")
        d = {**base, **mut}
        try:
            samples.append(Sample(str(d["type"]), _units(d["packetLoss"], 10000, "packetLoss"), int(d.get("env", 0))))
        except KeyError as exc:
            raise ScenarioError(f"sample {i}: missing {exc.args[0]}") from None
    verifier = {}
    for t, v in spec.get("verifier", {}).items():
        hi, en = [], []
        for o in v["options"]:
            p = min(Fraction(1), Fraction(str(o["packetLoss"])) + eps)
            hi.append(_units(p, 10000, "packetLoss bound"))
            en.append(_units(o["energy"], 1000, "energy"))
        verifier[str(t)] = VerifierOutput(tuple(hi), tuple(en), int(v.get("timeoutAfter", 0)))
    init = spec.get("initial")
    return StubScenario(
        name=str(spec.get("name", "scenario")),
        goal=_units(spec.get("goal", 0.10), 10000, "goal"),
        samples=tuple(samples),
        verifier=verifier,
        initial=None if init is None else int(init),
    )


def _flat(per_type, width, fill=0):
    out = []
    for row in per_type:
        out.extend(list(row) + [fill] * (width - len(row)))
    return out


def bind_scenario(net: AutomatonNetwork, sc: StubScenario) -> AutomatonNetwork:
    """The loop model with the scenario's data as initial values."""
    types = sc.types
    tix = {t: i for i, t in enumerate(types)}
    pad_t = MAX_TYPES - len(types)
    outs = [sc.verifier[t] for t in types]
    pad_s = MAX_SAMPLES - len(sc.samples)
    values = {
        "nsamples": len(sc.samples),
        "stype": tuple([tix[s.type] for s in sc.samples] + [0] * pad_s),
        "sloss": tuple([s.packet_loss for s in sc.samples] + [0] * pad_s),
        "senv": tuple([s.env for s in sc.samples] + [0] * pad_s),
        "goal": sc.goal,
        "nopts": tuple([len(v.loss_hi) for v in outs] + [0] * pad_t),
        "partialAfter": tuple([v.timeout_after for v in outs] + [0] * pad_t),
        "estHi": tuple(_flat([v.loss_hi for v in outs] + [()] * pad_t, MAX_OPTIONS)),
        "energy": tuple(_flat([v.energy for v in outs] + [()] * pad_t, MAX_OPTIONS)),
        "expFull": tuple([sc.expected(t, False) for t in types] + [UNSET] * pad_t),
        "expPartial": tuple(
            [sc.expected(t, True) if sc.verifier[t].timeout_after else UNSET for t in types] + [UNSET] * pad_t
        ),
        "current": UNSET if sc.initial is None else sc.initial,
    }
    return net.with_values(values)
