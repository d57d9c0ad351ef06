"""Scenario configuration: JSON schema, validation and round-trip serialization."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ConfigError, DomainError
from .market import (
    TOL,
    ClassId,
    MigrationRule,
    NetworkKind,
    NetworkResource,
    Provider,
    StrategyProfile,
    Tariff,
    TrafficClass,
)

SCHEMA_VERSION = 1
POLICIES = ("static", "best_response")

_nonneg = {"type": "number", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}
_frac = {"type": "number", "minimum": 0, "maximum": 1}
_per_class = {
    "type": "object",
    "properties": {"bulk": _nonneg, "premium": _nonneg},
    "required": ["bulk", "premium"],
    "additionalProperties": False,
}
_network = {
    "type": "object",
    "properties": {"capacity": _pos, "cost_per_unit": _nonneg},
    "required": ["capacity"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "required": ["schema_version", "classes", "unlicensed", "providers"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "loc": {"type": "string"},
        "t": {"type": "integer", "minimum": 0},
        "seed": {"type": "integer"},
        "classes": {
            "type": "object",
            "required": ["bulk", "premium"],
            "additionalProperties": False,
            "properties": {
                c: {
                    "type": "object",
                    "required": ["min_quality"],
                    "additionalProperties": False,
                    "properties": {"min_quality": _frac, "unit_price_hint": _nonneg},
                }
                for c in ("bulk", "premium")
            },
        },
        "unlicensed": _network,
        "providers": {
            "type": "array",
            "minItems": 2,
            "maxItems": 2,
            "items": {
                "type": "object",
                "required": ["id", "backhaul", "tariffs", "subscribers"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "backhaul": _network,
                    "licensed": _network,
                    "tariffs": {
                        "type": "object",
                        "required": ["unlicensed"],
                        "additionalProperties": False,
                        "properties": {"unlicensed": _per_class, "licensed": _per_class},
                    },
                    "subscribers": _per_class,
                    "latent_premium": _nonneg,
                },
            },
        },
        "migration": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"alpha": _nonneg, "beta": _nonneg, "cap": _frac, "hysteresis": _nonneg},
        },
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "deadlock_quality": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                "welfare_gap": _nonneg,
                "abandonment": _frac,
            },
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "grid_steps": {"type": "integer", "minimum": 2, "maximum": 12},
                "rounds": {"type": "integer", "minimum": 1},
                "max_iter": {"type": "integer", "minimum": 1},
                "policy": {"enum": list(POLICIES)},
            },
        },
        "initial_profile": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "additionalProperties": False,
                "properties": {"bulk": _frac, "premium": _frac, "resale": _frac},
            },
        },
        "events": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["round", "kind"],
                "additionalProperties": False,
                "properties": {
                    "round": {"type": "integer", "minimum": 1},
                    "kind": {"enum": ["roaming", "sabotage"]},
                    "influx": _nonneg,
                    "target": {"type": "string"},
                },
            },
        },
        "sweep": {
            "type": "object",
            "required": ["parameters"],
            "additionalProperties": False,
            "properties": {
                "parameters": {
                    "type": "array",
                    "minItems": 1,
                    "maxItems": 2,
                    "items": {
                        "type": "object",
                        "required": ["path", "values"],
                        "additionalProperties": False,
                        "properties": {
                            "path": {"type": "string"},
                            "values": {"type": "array", "minItems": 1, "items": {"type": "number"}},
                        },
                    },
                }
            },
        },
    },
}


@dataclass(frozen=True)
class Thresholds:
    deadlock_quality: float | None = None  # None means half the bulk floor
    welfare_gap: float = 0.25
    abandonment: float = 0.1


@dataclass(frozen=True)
class SolverSettings:
    grid_steps: int = 4
    rounds: int = 50
    max_iter: int = 100
    policy: str = "best_response"


@dataclass(frozen=True)
class Event:
    round: int
    kind: str
    influx: float = 0.0
    target: str = ""


@dataclass(frozen=True)
class Scenario:
    """Every free parameter of one two-provider market in one place."""

    classes: dict
    shared: NetworkResource
    providers: tuple
    subscribers: dict
    latent_premium: float = 0.0
    migration: MigrationRule = MigrationRule()
    thresholds: Thresholds = Thresholds()
    solver: SolverSettings = SolverSettings()
    initial_profile: dict = field(default_factory=dict)
    events: tuple = ()
    sweep: dict | None = None
    seed: int = 0
    loc_tag: str = "loc"
    t: int = 0

    @property
    def wifi(self) -> Provider:
        """The provider without licensed spectrum (i)."""
        return next(p for p in self.providers if p.licensed is None)

    @property
    def combined(self) -> Provider:
        """The provider holding licensed spectrum as well (j)."""
        return next(p for p in self.providers if p.licensed is not None)

    def provider(self, pid: str) -> Provider:
        for p in self.providers:
            if p.id == pid:
                return p
        raise DomainError(f"unknown provider {pid!r}")

    @property
    def bulk_floor(self) -> float:
        return self.classes[ClassId.BULK].min_quality

    @property
    def premium_floor(self) -> float:
        return self.classes[ClassId.PREMIUM].min_quality

    @property
    def deadlock_quality(self) -> float:
        d = self.thresholds.deadlock_quality
        return self.bulk_floor / 2 if d is None else d

    def initial(self) -> dict[str, StrategyProfile]:
        prof = dict(self.initial_profile)
        for p in self.providers:
            prof.setdefault(p.id, StrategyProfile(p.id, 0.0, 0.0, 0.0))
        return prof

    def fingerprint(self) -> str:
        return config_hash(to_dict(self))


def config_hash(data: dict) -> str:
    return hashlib.sha256(canonical_json(data).encode()).hexdigest()


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def _path(parts) -> str:
    return ".".join(str(p) for p in parts) or "<root>"


def from_dict(data: dict) -> Scenario:
    """Validate a config mapping and build a Scenario.

    Raises ConfigError listing every problem, each prefixed with its field path.
    """
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = [f"{_path(e.absolute_path)}: {e.message}"
              for e in sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))]
    if errors:
        raise ConfigError(errors)

    errors = []
    cls_cfg = data["classes"]
    classes = {
        ClassId(name): TrafficClass(ClassId(name), float(c["min_quality"]), float(c.get("unit_price_hint", 0.0)))
        for name, c in cls_cfg.items()
    }
    if classes[ClassId.PREMIUM].min_quality <= classes[ClassId.BULK].min_quality:
        errors.append("classes: class ordering violated (premium min_quality must exceed bulk min_quality)")

    u = data["unlicensed"]
    shared = NetworkResource(NetworkKind.UNLICENSED_AIR, float(u["capacity"]), float(u.get("cost_per_unit", 0.0)))

    providers, subscribers = [], {}
    latent = 0.0
    ids = [p["id"] for p in data["providers"]]
    if len(set(ids)) != len(ids):
        errors.append("providers: provider ids must be unique")
    n_licensed = sum("licensed" in p for p in data["providers"])
    if n_licensed != 1:
        errors.append("providers: exactly one provider must own a licensed network")
    for k, pc in enumerate(data["providers"]):
        where = f"providers.{k}"
        pid = pc["id"]
        bh = pc["backhaul"]
        nets = [NetworkResource(NetworkKind.BACKHAUL, float(bh["capacity"]), float(bh.get("cost_per_unit", 0.0)), pid)]
        tariffs = [Tariff(NetworkKind.UNLICENSED_AIR, ClassId(c), float(pr)) for c, pr in pc["tariffs"]["unlicensed"].items()]
        if "licensed" in pc:
            lc = pc["licensed"]
            lic = NetworkResource(NetworkKind.LICENSED_AIR, float(lc["capacity"]), float(lc.get("cost_per_unit", 0.0)), pid)
            nets.append(lic)
            if "licensed" not in pc["tariffs"]:
                errors.append(f"{where}.tariffs.licensed: provider with a licensed network needs licensed tariffs")
            else:
                tariffs += [Tariff(NetworkKind.LICENSED_AIR, ClassId(c), float(pr))
                            for c, pr in pc["tariffs"]["licensed"].items()]
            path_cost = shared.cost_per_unit + nets[0].cost_per_unit
            if not lic.cost_per_unit > path_cost:
                errors.append(f"{where}.licensed.cost_per_unit: cost ordering violated "
                              f"(licensed {lic.cost_per_unit:g} must exceed unlicensed path {path_cost:g})")
            latent = float(pc.get("latent_premium", 0.0))
            status_quo = float(pc["subscribers"]["bulk"]) + float(pc["subscribers"]["premium"])
            if status_quo > lic.capacity + TOL:
                errors.append(f"{where}.subscribers: licensed capacity bound violated "
                              f"(subscribers {status_quo:g} exceed licensed capacity {lic.capacity:g})")
        else:
            if "licensed" in pc["tariffs"]:
                errors.append(f"{where}.tariffs.licensed: provider without a licensed network cannot carry licensed tariffs")
            if pc.get("latent_premium", 0.0):
                errors.append(f"{where}.latent_premium: only the licensed provider can resell capacity")
        providers.append(Provider(pid, tuple(nets), tuple(tariffs)))
        subscribers[pid] = {ClassId(c): float(d) for c, d in pc["subscribers"].items()}

    m = data.get("migration", {})
    migration = MigrationRule((float(m.get("alpha", 1.0)), float(m.get("beta", 0.1))),
                              float(m.get("cap", 0.2)), float(m.get("hysteresis", 0.0)))
    th = data.get("thresholds", {})
    dq = th.get("deadlock_quality")
    thresholds = Thresholds(None if dq is None else float(dq), float(th.get("welfare_gap", 0.25)),
                            float(th.get("abandonment", 0.1)))
    so = data.get("solver", {})
    solver = SolverSettings(int(so.get("grid_steps", 4)), int(so.get("rounds", 50)),
                            int(so.get("max_iter", 100)), so.get("policy", "best_response"))

    initial = {}
    for pid, fr in data.get("initial_profile", {}).items():
        if pid not in ids:
            errors.append(f"initial_profile.{pid}: unknown provider")
            continue
        lic_owner = "licensed" in data["providers"][ids.index(pid)]
        if not lic_owner and fr.get("resale", 0.0):
            errors.append(f"initial_profile.{pid}.resale: only the licensed provider can resell capacity")
        initial[pid] = StrategyProfile(pid, float(fr.get("bulk", 0.0)), float(fr.get("premium", 0.0)),
                                       float(fr.get("resale", 0.0)))

    events = []
    for k, ev in enumerate(data.get("events", [])):
        if ev["kind"] == "roaming" and ev.get("target") not in ids:
            errors.append(f"events.{k}.target: roaming target must name a provider")
        events.append(Event(int(ev["round"]), ev["kind"], float(ev.get("influx", 0.0)), ev.get("target", "")))
        if ev["round"] > solver.rounds:
            errors.append(f"events.{k}.round: event after the last simulated round ({solver.rounds})")

    sweep = copy.deepcopy(data.get("sweep"))
    if sweep is not None:
        for k, prm in enumerate(sweep["parameters"]):
            try:
                _lookup(data, prm["path"])
            except ConfigError:
                errors.append(f"sweep.parameters.{k}.path: {prm['path']!r} does not name a numeric field")

    if errors:
        raise ConfigError(errors)

    scenario = Scenario(
        classes=classes, shared=shared, providers=tuple(providers), subscribers=subscribers,
        latent_premium=latent, migration=migration, thresholds=thresholds, solver=solver,
        initial_profile=initial, events=tuple(events), sweep=sweep, seed=int(data.get("seed", 0)),
        loc_tag=data.get("loc", "loc"), t=int(data.get("t", 0)),
    )
    _check_initial_placement(scenario)
    return scenario


def _check_initial_placement(scenario: Scenario) -> None:
    from .strategy import apply_strategy
    from .errors import InfeasibleStrategyError

    try:
        apply_strategy(scenario, scenario.initial())
    except InfeasibleStrategyError as exc:
        where = {"shared": "unlicensed.capacity", "licensed": "licensed.capacity"}.get(exc.constraint, exc.constraint)
        raise ConfigError([f"initial_profile: {exc.constraint} capacity bound violated by the initial placement "
                           f"({exc.load:g} > {exc.capacity:g}, see {where})"]) from None


def to_dict(s: Scenario) -> dict:
    """Serialize with every default filled in; ``from_dict(to_dict(s)) == s``."""
    b, v = ClassId.BULK, ClassId.PREMIUM
    providers = []
    for p in s.providers:
        pc = {
            "id": p.id,
            "backhaul": {"capacity": p.backhaul.capacity, "cost_per_unit": p.backhaul.cost_per_unit},
            "tariffs": {"unlicensed": {c.value: p.price(NetworkKind.UNLICENSED_AIR, c) for c in (b, v)}},
            "subscribers": {c.value: s.subscribers[p.id][c] for c in (b, v)},
        }
        if p.licensed is not None:
            pc["licensed"] = {"capacity": p.licensed.capacity, "cost_per_unit": p.licensed.cost_per_unit}
            pc["tariffs"]["licensed"] = {c.value: p.price(NetworkKind.LICENSED_AIR, c) for c in (b, v)}
            pc["latent_premium"] = s.latent_premium
        providers.append(pc)
    out = {
        "schema_version": SCHEMA_VERSION,
        "loc": s.loc_tag,
        "t": s.t,
        "seed": s.seed,
        "classes": {c.value: {"min_quality": s.classes[c].min_quality, "unit_price_hint": s.classes[c].unit_price_hint}
                    for c in (b, v)},
        "unlicensed": {"capacity": s.shared.capacity, "cost_per_unit": s.shared.cost_per_unit},
        "providers": providers,
        "migration": {"alpha": s.migration.elasticity[0], "beta": s.migration.elasticity[1],
                      "cap": s.migration.cap, "hysteresis": s.migration.hysteresis},
        "thresholds": {"deadlock_quality": s.thresholds.deadlock_quality, "welfare_gap": s.thresholds.welfare_gap,
                       "abandonment": s.thresholds.abandonment},
        "solver": {"grid_steps": s.solver.grid_steps, "rounds": s.solver.rounds, "max_iter": s.solver.max_iter,
                   "policy": s.solver.policy},
        "initial_profile": {pid: {"bulk": sp.bulk, "premium": sp.premium, "resale": sp.resale}
                            for pid, sp in sorted(s.initial_profile.items())},
        "events": [{"round": e.round, "kind": e.kind, "influx": e.influx, "target": e.target} for e in s.events],
    }
    if s.sweep is not None:
        out["sweep"] = copy.deepcopy(s.sweep)
    return out


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc.strerror}"]) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"<parse>: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from None
    return from_dict(data)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(json.dumps(to_dict(s), indent=2, sort_keys=True) + "\n")


def _lookup(data, path: str):
    node = data
    parts = path.split(".")
    try:
        for part in parts[:-1]:
            node = node[int(part)] if isinstance(node, list) else node[part]
        key = int(parts[-1]) if isinstance(node, list) else parts[-1]
        value = node[key]
    except (KeyError, IndexError, ValueError, TypeError):
        raise ConfigError([f"{path}: no such field"]) from None
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError([f"{path}: not a numeric field"])
    return node, key


def with_value(data: dict, path: str, value) -> dict:
    """Copy of a config mapping with one dotted-path field replaced."""
    out = copy.deepcopy(data)
    node, key = _lookup(out, path)
    node[key] = value
    return out


# ---------------------------------------------------------------------------
# Builders used by tests, the acceptance suite and the CLI examples.


def build(
    *,
    cu=100.0,
    bulk_floor=0.2,
    premium_floor=0.6,
    wifi_subs=(30.0, 0.0),
    combined_subs=(40.0, 20.0),
    latent=0.0,
    cl=80.0,
    cb_i=1e6,
    cb_j=1e6,
    shared_cost=0.0,
    backhaul_cost=(0.1, 0.1),
    licensed_cost=1.0,
    wifi_prices=(1.0, 3.0),
    combined_unlicensed_prices=None,
    licensed_prices=(2.0, 5.0),
    migration=MigrationRule(),
    solver=SolverSettings(),
    thresholds=Thresholds(),
    initial=None,
    events=(),
    ids=("i", "j"),
    loc="loc",
) -> Scenario:
    """Programmatic scenario construction with keyword defaults.

    When ``combined_unlicensed_prices`` is omitted, offloaded cellular
    subscribers keep paying their licensed tariff.
    """
    b, v = ClassId.BULK, ClassId.PREMIUM
    iid, jid = ids
    u, l_ = NetworkKind.UNLICENSED_AIR, NetworkKind.LICENSED_AIR
    cu_prices = licensed_prices if combined_unlicensed_prices is None else combined_unlicensed_prices
    wifi = Provider(
        iid,
        (NetworkResource(NetworkKind.BACKHAUL, cb_i, backhaul_cost[0], iid),),
        (Tariff(u, b, wifi_prices[0]), Tariff(u, v, wifi_prices[1])),
    )
    comb = Provider(
        jid,
        (NetworkResource(NetworkKind.BACKHAUL, cb_j, backhaul_cost[1], jid),
         NetworkResource(l_, cl, licensed_cost, jid)),
        (Tariff(u, b, cu_prices[0]), Tariff(u, v, cu_prices[1]),
         Tariff(l_, b, licensed_prices[0]), Tariff(l_, v, licensed_prices[1])),
    )
    initial = initial or {}
    return Scenario(
        classes={b: TrafficClass(b, bulk_floor, wifi_prices[0]), v: TrafficClass(v, premium_floor, wifi_prices[1])},
        shared=NetworkResource(u, cu, shared_cost),
        providers=(wifi, comb),
        subscribers={iid: {b: float(wifi_subs[0]), v: float(wifi_subs[1])},
                     jid: {b: float(combined_subs[0]), v: float(combined_subs[1])}},
        latent_premium=float(latent),
        migration=migration,
        thresholds=thresholds,
        solver=solver,
        initial_profile={k: StrategyProfile(k, *fr) for k, fr in initial.items()},
        events=tuple(events),
        loc_tag=loc,
    )


def random_scenario(rng: np.random.Generator, regime: str = "scarcity", **overrides) -> Scenario:
    """Draw a small random scenario.

    ``regime`` selects ``scarcity`` (backhaul can push the band below the
    bulk floor and the combined operator has enough bulk to get there),
    ``abundance`` (backhaul bounds keep the band above the premium floor)
    or ``any``.
    """
    cu = 100.0
    qb = round(float(rng.uniform(0.1, 0.4)), 3)
    qv = round(float(rng.uniform(qb + 0.2, 0.9)), 3)
    headroom = (1 - qb) * cu
    el = round(float(rng.uniform(0.8, 2.0)), 3)
    eu = (round(float(rng.uniform(0.0, 0.3)), 3), round(float(rng.uniform(0.0, 0.3)), 3))
    pl = (round(float(rng.uniform(1.0, 3.0)), 3), round(float(rng.uniform(3.0, 8.0)), 3))
    pw = (round(float(rng.uniform(0.5, 2.0)), 3), round(float(rng.uniform(2.0, 6.0)), 3))
    if regime == "scarcity":
        wifi_subs = (round(float(rng.uniform(5, 0.5 * headroom)), 3), round(float(rng.uniform(0, 15)), 3))
        jb = round(float(rng.uniform(headroom, 1.5 * cu)), 3)
        jv = round(float(rng.uniform(5, 30)), 3)
        cb = (round(float(rng.uniform(wifi_subs[0] + wifi_subs[1], cu)), 3), round(float(rng.uniform(headroom, 2 * cu)), 3))
        latent = round(float(rng.uniform(10, 60)), 3)
        # licensed room for the whole book at the premium floor: offloading is
        # then driven by cost, not by licensed congestion
        cl = round((jb + jv + latent) / (1 - qv) * float(rng.uniform(1.0, 1.3)), 3)
    elif regime == "abundance":
        wifi_subs = (round(float(rng.uniform(5, 40)), 3), round(float(rng.uniform(0, 20)), 3))
        jb = round(float(rng.uniform(5, 40)), 3)
        jv = round(float(rng.uniform(5, 30)), 3)
        cl = round(jb + jv + float(rng.uniform(0, 40)), 3)
        total_cap = (1 - qv) * cu * float(rng.uniform(0.3, 0.95))
        share = float(rng.uniform(0.3, 0.7))
        cb = (round(total_cap * share, 3), round(total_cap * (1 - share), 3))
        latent = round(float(rng.uniform(0, 30)), 3)
    elif regime == "any":
        wifi_subs = (round(float(rng.uniform(0, 60)), 3), round(float(rng.uniform(0, 30)), 3))
        jb = round(float(rng.uniform(0, 80)), 3)
        jv = round(float(rng.uniform(0, 40)), 3)
        cl = round(jb + jv + float(rng.uniform(1, 40)), 3)
        cb = (round(float(rng.uniform(10, 120)), 3), round(float(rng.uniform(10, 120)), 3))
        latent = round(float(rng.uniform(0, 50)), 3)
    else:
        raise ValueError(f"unknown regime {regime!r}")
    kw = dict(
        cu=cu, bulk_floor=qb, premium_floor=qv, wifi_subs=wifi_subs, combined_subs=(jb, jv),
        latent=latent, cl=cl, cb_i=cb[0], cb_j=cb[1], backhaul_cost=eu, licensed_cost=el,
        wifi_prices=pw, licensed_prices=pl,
    )
    kw.update(overrides)
    return build(**kw)
