"""Scenario files (TOML) and the built-in reproduction presets.

A scenario looks like::

    name = "k4-locked"
    law = "locked"            # plain2d | plain3d | locked
    num_agents = 4
    alpha = 1.0               # locked only; lifts the planar targets
    distances_are_squared = true

    [distances]               # "i-j" = squared distance
    "1-2" = 16.0

    [init]                    # kind = "uniform" (lo, hi, seed) or "explicit"
    kind = "uniform"          # (coords = [...], virtual_coord = ...)
    lo = -5.0
    hi = 5.0
    seed = 0

    [integrator]              # any IntegratorConfig field
    t_max = 200.0

    [outputs]
    trajectory = "k4_locked.csv"
    report = "k4_locked_report.json"
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .analysis import InitSampler, sampler_fixed, trial_rng
from .dynamics import IntegratorConfig, Method
from .energy import EnergySystem
from .exceptions import ConfigError, FormationError
from .geometry import DistanceSpec, FormationGraph, lift_distances

LAWS = ("plain2d", "plain3d", "locked")


def edge_key(edge) -> str:
    return f"{edge[0]}-{edge[1]}"


def parse_edge_key(key: str):
    try:
        i, j = (int(v) for v in str(key).replace(",", "-").split("-"))
    except ValueError:
        raise ConfigError(f"bad edge key {key!r}, expected 'i-j'") from None
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class InitSpec:
    kind: str = "uniform"
    lo: float = -5.0
    hi: float = 5.0
    seed: int = 0
    coords: tuple | None = None
    virtual_coord: float | None = None

    def to_dict(self) -> dict:
        if self.kind == "explicit":
            out = {"kind": "explicit", "coords": list(self.coords)}
            if self.virtual_coord is not None:
                out["virtual_coord"] = self.virtual_coord
            return out
        out = {"kind": "uniform", "lo": self.lo, "hi": self.hi, "seed": self.seed}
        if self.virtual_coord is not None:
            out["virtual_coord"] = self.virtual_coord
        return out


@dataclass(frozen=True)
class Scenario:
    name: str
    law: str
    num_agents: int
    distances: dict
    alpha: float | None = None
    virtual_vertex: int | None = None
    init: InitSpec = field(default_factory=InitSpec)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    trajectory_path: str | None = None
    report_path: str | None = None

    def __post_init__(self):
        if self.law not in LAWS:
            raise ConfigError(f"law must be one of {LAWS}, got {self.law!r}")
        if self.law == "locked" and (self.alpha is None or not self.alpha > 0):
            raise ConfigError("locked law needs alpha > 0")
        if self.law != "locked" and self.virtual_vertex is not None:
            raise ConfigError("virtual_vertex only applies to the locked law")
        try:
            self.spec()
        except FormationError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def is_locked(self) -> bool:
        return self.law == "locked"

    def spec(self) -> DistanceSpec:
        """The targets as written in the file (planar for the locked law)."""
        graph = FormationGraph(self.num_agents, tuple(self.distances))
        return DistanceSpec(graph, self.distances, 3 if self.law == "plain3d" else 2)

    def system(self) -> EnergySystem:
        spec = self.spec()
        if self.is_locked:
            vv = self.virtual_vertex or self.num_agents
            return EnergySystem.locked(lift_distances(spec, self.alpha, vv), vv, self.alpha)
        return EnergySystem.plain(spec)

    def sampler(self):
        if self.init.kind == "explicit":
            return sampler_fixed(self.explicit_state())
        return InitSampler(self.init.lo, self.init.hi, self.init.virtual_coord)

    def explicit_state(self) -> np.ndarray:
        x = np.asarray(self.init.coords, dtype=np.float64)
        if self.is_locked:
            z = self.init.virtual_coord if self.init.virtual_coord is not None else self.alpha
            x = np.append(x, z)
        return x

    def initial_state(self, seed: int | None = None) -> np.ndarray:
        """Start state; sampled runs use trial 0 of ``seed`` (default: init.seed)."""
        sys = self.system()
        seed = self.init.seed if seed is None else seed
        try:
            return sys.check_state(self.sampler()(sys, trial_rng(seed, 0)))
        except FormationError as exc:
            raise ConfigError(f"initial state: {exc}") from exc

    def with_overrides(self, *, t_max=None, dt=None, alpha=None) -> "Scenario":
        integ = self.integrator
        if t_max is not None:
            integ = integ.replace(t_max=t_max)
        if dt is not None:
            integ = integ.replace(dt=dt)
        return replace(self, integrator=integ, alpha=self.alpha if alpha is None else alpha)

    def to_dict(self) -> dict:
        doc = {"name": self.name, "law": self.law, "num_agents": self.num_agents}
        if self.alpha is not None:
            doc["alpha"] = self.alpha
        if self.virtual_vertex is not None:
            doc["virtual_vertex"] = self.virtual_vertex
        doc["distances_are_squared"] = True
        doc["distances"] = {edge_key(e): float(v) for e, v in self.distances.items()}
        doc["init"] = self.init.to_dict()
        integ = asdict(self.integrator)
        integ["method"] = self.integrator.method.value
        doc["integrator"] = integ
        outputs = {k: v for k, v in (("trajectory", self.trajectory_path),
                                     ("report", self.report_path)) if v is not None}
        if outputs:
            doc["outputs"] = outputs
        return doc

    def to_toml(self) -> str:
        return tomli_w.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        doc = dict(doc)
        if doc.pop("distances_are_squared", None) is not True:
            raise ConfigError("config must set distances_are_squared = true")
        try:
            dist_table = doc.pop("distances")
            name = doc.pop("name", "scenario")
            law = doc.pop("law")
            num_agents = doc.pop("num_agents", None)
        except KeyError as exc:
            raise ConfigError(f"missing key {exc.args[0]!r}") from None
        if not isinstance(dist_table, dict) or not dist_table:
            raise ConfigError("[distances] must be a non-empty table")
        distances = {parse_edge_key(k): v for k, v in dist_table.items()}
        if num_agents is None:
            num_agents = max(max(e) for e in distances)
        init_doc = dict(doc.pop("init", {}))
        kind = init_doc.pop("kind", "uniform")
        if kind == "explicit":
            if "coords" not in init_doc:
                raise ConfigError("explicit init needs coords")
            init_doc["coords"] = tuple(float(v) for v in init_doc["coords"])
        elif kind != "uniform":
            raise ConfigError(f"unknown init kind {kind!r}")
        outputs = doc.pop("outputs", {})
        try:
            init = InitSpec(kind=kind, **init_doc)
            integ_doc = dict(doc.pop("integrator", {}))
            if "method" in integ_doc:
                integ_doc["method"] = Method(integ_doc["method"])
            integrator = IntegratorConfig(**integ_doc)
            scenario = cls(name=name, law=law, num_agents=num_agents, distances=distances,
                           alpha=doc.pop("alpha", None), virtual_vertex=doc.pop("virtual_vertex", None),
                           init=init, integrator=integrator,
                           trajectory_path=outputs.get("trajectory"), report_path=outputs.get("report"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if doc:
            raise ConfigError(f"unknown keys: {sorted(doc)}")
        return scenario

    @classmethod
    def from_toml(cls, text: str) -> "Scenario":
        try:
            return cls.from_dict(tomli.loads(text))
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"invalid TOML: {exc}") from exc

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        return cls.from_toml(text)


K4_PLANAR = {(1, 2): 16.0, (1, 3): 25.0, (1, 4): 10.0, (2, 3): 17.0, (2, 4): 18.0, (3, 4): 5.0}
FIVE_AGENT = {(1, 2): 10.0, (1, 3): 4.0, (1, 4): 5.0, (2, 3): 10.0, (2, 5): 41.0,
              (3, 4): 5.0, (4, 5): 26.0}

# seeds for the five-agent runs were found by scanning seeds 0..39 (trial 0):
# seed 0 settles on the target shape at t ~ 3, seed 3 on a nondegenerate
# incorrect equilibrium (v ~ 0.361) at t ~ 589
PRESETS = {
    "k4-locked": Scenario(
        "k4-locked", "locked", 4, K4_PLANAR, alpha=1.0,
        init=InitSpec("uniform", -5.0, 5.0, 0),
        trajectory_path="k4_locked.csv", report_path="k4_locked_report.json"),
    "five-agent-correct": Scenario(
        "five-agent-correct", "plain2d", 5, FIVE_AGENT,
        init=InitSpec("uniform", -5.0, 5.0, 0), integrator=IntegratorConfig(t_max=1000.0),
        trajectory_path="five_agent_correct.csv", report_path="five_agent_correct_report.json"),
    "five-agent-incorrect": Scenario(
        "five-agent-incorrect", "plain2d", 5, FIVE_AGENT,
        init=InitSpec("uniform", -5.0, 5.0, 3), integrator=IntegratorConfig(t_max=1000.0),
        trajectory_path="five_agent_incorrect.csv", report_path="five_agent_incorrect_report.json"),
}
