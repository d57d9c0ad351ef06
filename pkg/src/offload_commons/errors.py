"""Exception types shared across the package."""

from __future__ import annotations


class ModelError(Exception):
    """Runtime failure inside the market model (CLI exit status 3)."""


class DomainError(ModelError, ValueError):
    """An operation was called outside its mathematical domain."""


class InfeasibleStrategyError(ModelError):
    """A placement violates a capacity constraint.

    ``constraint`` names the violated bound: ``shared``, ``licensed`` or
    ``backhaul:<provider>``.
    """

    def __init__(self, constraint: str, load: float, capacity: float):
        self.constraint = constraint
        self.load = load
        self.capacity = capacity
        super().__init__(f"{constraint} capacity exceeded: load {load:g} > capacity {capacity:g}")


class ConfigError(Exception):
    """Scenario file could not be parsed or validated (CLI exit status 2).

    ``errors`` holds every problem found, each prefixed by its field path.
    """

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
