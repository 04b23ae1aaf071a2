"""Simulation and analysis toolkit for a heralded-entanglement DIQKD link."""

__version__ = "0.1.0"

from .errors import DiqkdError, DomainError, NumericError  # noqa: E402,F401
