"""Scenario documents (JSON) and the in-memory ``Scenario`` bundle.

The document format is described field by field in ``docs/formats.md``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

from .comms import CommGraph, UpdateSchedule, build_comm_graph
from .costs import CostModel, cost_from_dict
from .errors import ConfigurationError, DomainError, GneVoltError, ScenarioError
from .game import BlockDecomposition, CommPartition, VarLimits, decompose
from .grid import Edge, FeederTopology, GridModel, build_reduced_laplacian, ohms_to_pu

SEED_ENV = "GNEVOLT_SEED"


@dataclass(frozen=True)
class Scenario:
    name: str
    topology: FeederTopology
    model: GridModel
    costs: CostModel
    limits: VarLimits
    partition: CommPartition
    solver: dict = field(default_factory=dict)
    schedule: UpdateSchedule = field(default_factory=UpdateSchedule)
    tunings: dict = field(default_factory=dict)
    bus_names: tuple = ()
    weight_convention: str = "inv_x"

    @cached_property
    def decomp(self) -> BlockDecomposition:
        return decompose(self.model.B, self.partition)

    @cached_property
    def graph(self) -> CommGraph:
        return build_comm_graph(self.topology, self.partition)

    @property
    def N(self) -> int:
        return self.model.N

    @classmethod
    def build(cls, topology, model, costs, limits, partition, name="custom", **kw):
        partition.validate(topology.N, topology)
        if not (model.N == costs.N == limits.N == topology.N):
            raise DomainError("scenario components disagree on the bus count")
        return cls(name, topology, model, costs, limits, partition, **kw)

    def with_costs(self, c) -> "Scenario":
        """Copy with quadratic coefficients ``c`` (scalar or per bus)."""
        return replace(self, costs=self.costs.with_coefficients(c))

    def with_partition(self, partition: CommPartition) -> "Scenario":
        partition.validate(self.N, self.topology)
        return replace(self, partition=partition)

    def with_schedule(self, schedule: UpdateSchedule) -> "Scenario":
        return replace(self, schedule=schedule)


def _vec(value, n, what):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ScenarioError(f"{what} must be a scalar or a list of {n} numbers")
    return arr


def _require(doc, key, where="scenario"):
    if key not in doc:
        raise ScenarioError(f"{where}: missing required field {key!r}")
    return doc[key]


def parse_scenario(doc: dict, *, source: str = "<dict>") -> Scenario:
    """Validate a scenario document and build the ``Scenario``.

    Raises
    ------
    ScenarioError
        On any schema or cross-reference problem; the message names the
        offending field or bus.
    """
    if not isinstance(doc, dict):
        raise ScenarioError(f"{source}: top level must be an object")
    try:
        return _parse(doc, source)
    except ScenarioError:
        raise
    except (GneVoltError, TypeError, ValueError, KeyError) as exc:
        raise ScenarioError(f"{source}: {exc}") from exc


def _parse(doc, source):
    topo = _require(doc, "topology")
    n = int(_require(topo, "buses", "topology"))
    units = topo.get("units", "pu")
    if units not in ("pu", "ohm"):
        raise ScenarioError(f"topology.units must be 'pu' or 'ohm', got {units!r}")
    bases = doc.get("bases", {})
    if units == "ohm":
        vkv = float(_require(bases, "v_base_kv", "bases"))
        skva = float(_require(bases, "s_base_kva", "bases"))
    edges = []
    for raw in _require(topo, "edges", "topology"):
        if isinstance(raw, dict):
            i, j, r, x = raw["from"], raw["to"], raw.get("r", 0.0), raw["x"]
        else:
            if len(raw) != 4:
                raise ScenarioError(f"edge {raw!r} must be [from, to, r, x]")
            i, j, r, x = raw
        i, j, r, x = int(i), int(j), float(r), float(x)
        for b in (i, j):
            if not 0 <= b <= n:
                raise ScenarioError(f"edge ({i}, {j}) references unknown bus {b}")
        if units == "ohm":
            r, x = ohms_to_pu(r, vkv, skva), ohms_to_pu(x, vkv, skva)
        edges.append(Edge(i, j, x, r))
    topology = FeederTopology(n, tuple(edges))
    conv = doc.get("weight_convention", "inv_x")
    B = build_reduced_laplacian(topology, conv)

    op = doc.get("operating_point", {})
    if "w" in op:
        model = GridModel(B, _vec(op["w"], n, "operating_point.w"))
    elif "v_base" in op:
        vb = _vec(op["v_base"], n, "operating_point.v_base")
        model = GridModel(B, B @ vb, vb)
    else:
        v0 = float(op.get("v0", 1.0))
        load = _vec(op.get("load_q", 0.0), n, "operating_point.load_q")
        w = B @ np.full(n, v0) - load * float(op.get("load_scale", 1.0))
        model = GridModel(B, w, np.linalg.solve(B, w))

    gamma = float(doc.get("gamma", 1.0))
    mu = _vec(doc.get("mu", 1.0), n, "mu")
    cspec = doc.get("costs", {"type": "quadratic", "c": 0.0})
    if isinstance(cspec, list):
        if len(cspec) != n:
            raise ScenarioError(f"costs list must have {n} entries")
        bus_costs = tuple(cost_from_dict(c) for c in cspec)
    else:
        cspec = dict(cspec)
        kind = cspec.get("type", "quadratic")
        per_bus = {k: _vec(v, n, f"costs.{k}") for k, v in cspec.items() if k != "type"}
        bus_costs = tuple(cost_from_dict({"type": kind, **{k: v[j] for k, v in per_bus.items()}})
                          for j in range(n))
    costs = CostModel(gamma, mu, bus_costs)

    lim = _require(doc, "limits")
    limits = VarLimits(_vec(_require(lim, "lower", "limits"), n, "limits.lower"),
                       _vec(_require(lim, "upper", "limits"), n, "limits.upper"))

    part_doc = doc.get("partition")
    if part_doc is None:
        partition = CommPartition.single(n)
    else:
        seen = {}
        for k, area in enumerate(part_doc):
            for b in area:
                b = int(b)
                if not 1 <= b <= n:
                    raise ScenarioError(f"partition: bus {b} does not exist")
                if b in seen:
                    raise ScenarioError(
                        f"partition: bus {b} listed twice (areas {seen[b]} and {k})")
                seen[b] = k
        partition = CommPartition(tuple(tuple(int(b) for b in a) for a in part_doc))
        try:
            partition.validate(n, topology)
        except (DomainError, ConfigurationError) as exc:
            raise ScenarioError(f"partition: {exc}") from exc

    sched_doc = dict(doc.get("schedule", {}))
    if SEED_ENV in os.environ:
        sched_doc["seed"] = int(os.environ[SEED_ENV])
    schedule = UpdateSchedule(**sched_doc)

    names = tuple(topo.get("bus_names", ()))
    if names and len(names) != n + 1:
        raise ScenarioError(f"topology.bus_names needs {n + 1} entries (bus 0 included)")
    return Scenario(doc.get("name", Path(source).stem), topology, model, costs, limits,
                    partition, dict(doc.get("solver", {})), schedule,
                    dict(doc.get("tunings", {})), names, conv)


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        try:
            return load_bundled(str(path))
        except ScenarioError:
            raise ScenarioError(f"{path}: no such scenario file") from None
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON ({exc})") from exc
    return parse_scenario(doc, source=str(path))


def bundled_names() -> list[str]:
    files = resources.files("gnevolt").joinpath("data")
    return sorted(p.name[:-len(".json")] for p in files.iterdir() if p.name.endswith(".json"))


def bundled_document(name: str) -> dict:
    stem = name[:-len(".json")] if name.endswith(".json") else name
    stem = stem[:-len(".scenario")] if stem.endswith(".scenario") else stem
    res = resources.files("gnevolt").joinpath("data", f"{stem}.json")
    if not res.is_file():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return json.loads(res.read_text())


def load_bundled(name: str) -> Scenario:
    return parse_scenario(bundled_document(name), source=name)
