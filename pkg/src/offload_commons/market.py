"""Market model: domain types plus the QoS, demand and revenue expressions.

All quantities are real valued. Traffic is measured in abstract units per
round, money in abstract currency. Comparisons use the absolute tolerance
``TOL`` unless a caller says otherwise.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

from .errors import DomainError

TOL = 1e-9

# Holder used for demand that is not (yet) a subscriber of any provider.
LATENT = "latent"

# Allocation slots inside a DemandPool.
UNLICENSED = "unlicensed"
LICENSED = "licensed"
UNSERVED = "unserved"
RESALE = "resale"
ROAMING = "roaming"


class ClassId(str, enum.Enum):
    BULK = "bulk"
    PREMIUM = "premium"


class NetworkKind(str, enum.Enum):
    UNLICENSED_AIR = "unlicensed"
    LICENSED_AIR = "licensed"
    BACKHAUL = "backhaul"


SHARED = "shared"


@dataclass(frozen=True)
class TrafficClass:
    id: ClassId
    min_quality: float
    unit_price_hint: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.min_quality <= 1.0:
            raise DomainError(f"min_quality of {self.id.value} must lie in [0, 1], got {self.min_quality}")


def check_class_order(classes: Mapping[ClassId, TrafficClass]) -> None:
    """Premium must demand strictly more quality than bulk."""
    if classes[ClassId.PREMIUM].min_quality <= classes[ClassId.BULK].min_quality:
        raise DomainError("class ordering violated: premium min_quality must exceed bulk min_quality")


@dataclass(frozen=True)
class NetworkResource:
    kind: NetworkKind
    capacity: float
    cost_per_unit: float
    owner: str = SHARED

    def __post_init__(self):
        if not self.capacity > 0:
            raise DomainError(f"{self.kind.value} capacity must be positive, got {self.capacity}")
        if self.cost_per_unit < 0:
            raise DomainError(f"{self.kind.value} cost_per_unit must be non-negative, got {self.cost_per_unit}")


@dataclass(frozen=True)
class Tariff:
    network_kind: NetworkKind
    cls: ClassId
    price: float

    def __post_init__(self):
        if self.price < 0:
            raise DomainError(f"tariff price must be non-negative, got {self.price}")


@dataclass(frozen=True)
class Provider:
    """An operator. Every provider owns a backhaul; the combined operator
    additionally owns a licensed network."""

    id: str
    networks: tuple[NetworkResource, ...]
    tariffs: tuple[Tariff, ...]

    def __post_init__(self):
        kinds = [n.kind for n in self.networks]
        if kinds.count(NetworkKind.BACKHAUL) != 1:
            raise DomainError(f"provider {self.id} needs exactly one backhaul")
        if NetworkKind.UNLICENSED_AIR in kinds:
            raise DomainError(f"provider {self.id} cannot own the shared unlicensed band")
        if self.licensed is not None:
            for cls in ClassId:
                self.price(NetworkKind.LICENSED_AIR, cls)

    def network(self, kind: NetworkKind) -> NetworkResource | None:
        for n in self.networks:
            if n.kind == kind:
                return n
        return None

    @property
    def backhaul(self) -> NetworkResource:
        return self.network(NetworkKind.BACKHAUL)

    @property
    def licensed(self) -> NetworkResource | None:
        return self.network(NetworkKind.LICENSED_AIR)

    @property
    def backhaul_capacity(self) -> float:
        return self.backhaul.capacity

    def price(self, kind: NetworkKind, cls: ClassId) -> float:
        for t in self.tariffs:
            if t.network_kind == kind and t.cls == cls:
                return t.price
        raise DomainError(f"provider {self.id} has no {kind.value} tariff for {cls.value}")

    def unlicensed_cost(self, shared: NetworkResource) -> float:
        """Per-unit cost of the Wi-Fi path: shared air plus own backhaul."""
        return shared.cost_per_unit + self.backhaul.cost_per_unit


@dataclass(frozen=True)
class DemandPool:
    """All demand of one class, split across (holder, slot) entries."""

    cls: ClassId
    total: float
    allocation: dict[tuple[str, str], float]

    def __post_init__(self):
        for key, d in self.allocation.items():
            if d < -TOL:
                raise DomainError(f"negative allocation {d} at {key} in {self.cls.value} pool")
        gap = abs(sum(self.allocation.values()) - self.total)
        if gap > TOL * max(1.0, abs(self.total)):
            raise DomainError(f"{self.cls.value} pool allocation does not sum to its total (off by {gap:g})")

    def get(self, holder: str, slot: str) -> float:
        return self.allocation.get((holder, slot), 0.0)

    def held_by(self, holder: str, slots: tuple[str, ...] = (UNLICENSED, LICENSED, UNSERVED)) -> float:
        return sum(d for (h, s), d in self.allocation.items() if h == holder and s in slots)


@dataclass(frozen=True)
class MarketState:
    """Snapshot of the market at one <loc, t>."""

    loc_tag: str
    round: int
    pools: dict[ClassId, DemandPool]
    derived_qos: dict[NetworkKind, float]
    profits: dict[str, float]
    classes: dict[ClassId, TrafficClass]
    shared: NetworkResource
    strategies: dict = field(default_factory=dict)
    subscriber_base: dict = field(default_factory=dict)

    def floor(self, cls: ClassId) -> float:
        return self.classes[cls].min_quality

    def unlicensed_load(self, provider_id: str) -> float:
        d = 0.0
        for cls in ClassId:
            d += self.pools[cls].get(provider_id, UNLICENSED)
        return d + self.pools[ClassId.BULK].get(provider_id, ROAMING)

    def licensed_load(self, provider_id: str) -> float:
        p = self.pools
        return (p[ClassId.BULK].get(provider_id, LICENSED)
                + (p[ClassId.PREMIUM].get(provider_id, LICENSED) + p[ClassId.PREMIUM].get(provider_id, RESALE)))

    def subscribers(self, provider_id: str, cls: ClassId) -> float:
        return self.pools[cls].held_by(provider_id)

    def visitors(self, provider_id: str) -> float:
        return self.pools[ClassId.BULK].get(provider_id, ROAMING)

    @property
    def latent_premium(self) -> float:
        pool = self.pools[ClassId.PREMIUM]
        return pool.held_by(LATENT, (UNSERVED,)) + sum(
            d for (h, s), d in pool.allocation.items() if s == RESALE)

    @property
    def q_unlicensed(self) -> float:
        return self.derived_qos[NetworkKind.UNLICENSED_AIR]

    @property
    def q_licensed(self) -> float | None:
        return self.derived_qos.get(NetworkKind.LICENSED_AIR)


def qos(total_demand: float, capacity: float) -> float:
    """Congestion quality ``1 - demand / capacity``."""
    if not capacity > 0:
        raise DomainError(f"capacity must be positive, got {capacity}")
    if total_demand < -TOL or total_demand > capacity + TOL:
        raise DomainError(f"demand {total_demand} outside [0, {capacity}]")
    return 1.0 - total_demand / capacity


def delta_terms(p_from: float, p_to: float, q_from: float, q_to: float) -> tuple[float, float]:
    """Price saved and quality given up by switching from one offer to another."""
    return p_from - p_to, q_from - q_to


def demand_response(base: float, dp: float, dq: float, elasticity: tuple[float, float]) -> float:
    """Demand attracted by an offer, linear in the differentials and clamped at zero.

    ``dp`` is the price saved by taking the offer, ``dq`` the quality given up.
    ``elasticity`` is ``(alpha, beta)``: quality and price sensitivity.
    """
    if base < 0:
        raise DomainError(f"base demand must be non-negative, got {base}")
    alpha, beta = elasticity
    return base * max(0.0, 1.0 + beta * dp - alpha * dq)


def revenue(demand: float, price: float) -> float:
    return demand * price


def _cells(provider: Provider, state: MarketState, kind: NetworkKind):
    """(demand, price, floor met?, unit cost) for each class on one network."""
    bulk, premium = state.pools[ClassId.BULK], state.pools[ClassId.PREMIUM]
    pid = provider.id
    if kind == NetworkKind.UNLICENSED_AIR:
        q = state.derived_qos[NetworkKind.UNLICENSED_AIR]
        cost = provider.unlicensed_cost(state.shared)
        pb = provider.price(NetworkKind.UNLICENSED_AIR, ClassId.BULK)
        pv = provider.price(NetworkKind.UNLICENSED_AIR, ClassId.PREMIUM)
        ok_b = q >= state.floor(ClassId.BULK) - TOL
        ok_v = q >= state.floor(ClassId.PREMIUM) - TOL
        return [
            (bulk.get(pid, UNLICENSED), pb, ok_b, cost),
            (premium.get(pid, UNLICENSED), pv, ok_v, cost),
            (bulk.get(pid, ROAMING), pb, ok_b, cost),
        ]
    if kind == NetworkKind.LICENSED_AIR:
        lic = provider.licensed
        q = state.derived_qos[NetworkKind.LICENSED_AIR]
        return [
            (bulk.get(pid, LICENSED), provider.price(kind, ClassId.BULK),
             q >= state.floor(ClassId.BULK) - TOL, lic.cost_per_unit),
            (premium.get(pid, LICENSED) + premium.get(pid, RESALE), provider.price(kind, ClassId.PREMIUM),
             q >= state.floor(ClassId.PREMIUM) - TOL, lic.cost_per_unit),
        ]
    return []


def network_profit(provider: Provider, state: MarketState, kind: NetworkKind) -> float:
    """Revenue minus carrying cost on one network.

    Traffic only pays while its network meets the class quality floor; the
    carrying cost is due either way.
    """
    if kind == NetworkKind.LICENSED_AIR and provider.licensed is None:
        for cls in ClassId:
            if state.pools[cls].get(provider.id, LICENSED) > TOL or state.pools[cls].get(provider.id, RESALE) > TOL:
                raise DomainError(f"provider {provider.id} carries licensed traffic but owns no licensed network")
        return 0.0
    total = 0.0
    for d, p, ok, cost in _cells(provider, state, kind):
        total += revenue(d, p if ok else 0.0) - cost * d
    return total


def provider_profit(provider: Provider, state: MarketState) -> float:
    total = 0.0
    for kind in (NetworkKind.UNLICENSED_AIR, NetworkKind.LICENSED_AIR):
        total += network_profit(provider, state, kind)
    return total


@dataclass(frozen=True)
class StrategyProfile:
    """One provider's placement decision.

    ``bulk`` and ``premium`` are the shares of the provider's subscribers of
    that class carried on the unlicensed path. For the combined operator the
    rest stays on its licensed network; for the Wi-Fi-only provider the rest
    is not materialized. ``resale`` is the share of freed licensed capacity
    (bounded by the latent premium pool) sold to new cellular customers.
    """

    provider: str
    bulk: float
    premium: float
    resale: float = 0.0

    def __post_init__(self):
        for name in ("bulk", "premium", "resale"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"{name} fraction of {self.provider} must lie in [0, 1], got {v}")

    def offload_fraction(self, cls: ClassId) -> float:
        return self.bulk if cls == ClassId.BULK else self.premium

    def key(self) -> tuple[float, float, float]:
        return (self.bulk, self.premium, self.resale)


@dataclass(frozen=True)
class MigrationRule:
    """Per-round customer migration law between competing offers."""

    elasticity: tuple[float, float] = (1.0, 0.1)
    cap: float = 0.2
    hysteresis: float = 0.0

    def __post_init__(self):
        alpha, beta = self.elasticity
        if alpha < 0 or beta < 0:
            raise DomainError("elasticities must be non-negative")
        if not 0.0 <= self.cap <= 1.0:
            raise DomainError(f"migration_cap must lie in [0, 1], got {self.cap}")
        if self.hysteresis < 0:
            raise DomainError("hysteresis must be non-negative")
