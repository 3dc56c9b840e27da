"""Numerical tolerances shared by every check.

``DHAP_TOL`` in the environment overrides the relative tolerance.
"""

import os
from contextlib import contextmanager

TAU_ABS = 1e-12

_override: list[float] = []


def tau_rel() -> float:
    if _override:
        return _override[-1]
    raw = os.environ.get("DHAP_TOL")
    if raw is None or raw.strip() == "":
        return 1e-9
    return float(raw)


def close(a, b, scale=1.0) -> bool:
    """Return True when ``|a - b|`` is within tolerance relative to ``scale``."""
    return abs(a - b) <= tau_rel() * max(abs(scale), 1.0) + TAU_ABS


def leq(a, b) -> bool:
    """Tolerant ``a <= b``."""
    return a <= b + tau_rel() * max(abs(b), 1.0) + TAU_ABS


@contextmanager
def relative_tolerance(value: float):
    """Temporarily replace the relative tolerance."""
    _override.append(float(value))
    try:
        yield
    finally:
        _override.pop()
