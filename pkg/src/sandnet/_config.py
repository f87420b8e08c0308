import os

DEFAULT_TOL = 1e-12


def base_tol() -> float:
    """Relative tolerance, overridable through ``SANDNET_TOL``."""
    raw = os.environ.get("SANDNET_TOL")
    if not raw:
        return DEFAULT_TOL
    value = float(raw)
    if not value > 0:
        raise ValueError(f"SANDNET_TOL must be positive, got {raw!r}")
    return value
