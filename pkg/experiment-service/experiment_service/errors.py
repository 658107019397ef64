from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PlanConfigurationError(Exception):
    message: str
    details: dict[str, object]


@dataclass(frozen=True)
class EnvironmentFileError(Exception):
    message: str
    details: dict[str, object]


@dataclass(frozen=True)
class UnknownSuiteError(Exception):
    message: str
    details: dict[str, object]


@dataclass(frozen=True)
class RuntimeConfigurationError(Exception):
    message: str
    details: dict[str, object]
