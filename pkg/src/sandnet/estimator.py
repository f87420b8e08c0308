"""scikit-learn style front end to the solver.

``fit`` takes a network (or a ``.net`` file) and solves it; ``predict`` maps
query points ``[edge index, t]`` with normalized ``t`` in ``[0, 1]`` to
``[d, v]``.
"""
from __future__ import annotations

import os

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import netfile as nf
from .analysis import UniquenessReport, uniqueness_check
from .netgraph import Network, validate
from .pipeline import GRID_MODES, Solution, resample, solve
from .rolling import FluxRow, TransmissionSpec, flux_report

__all__ = ["SandpileSolver", "as_netfile", "check_query"]


def as_netfile(X) -> nf.NetFile:
    """Coerce a ``NetFile``, ``Network``, path or raw bytes to a ``NetFile``."""
    if isinstance(X, nf.NetFile):
        return X
    if isinstance(X, Network):
        return nf.NetFile(X)
    if isinstance(X, (str, os.PathLike, bytes)):
        return nf.read(X)
    raise TypeError(f"expected a Network, NetFile or path, got {type(X).__name__}")


def check_query(X, n_edges: int) -> tuple[np.ndarray, np.ndarray]:
    """Validate an ``(n, 2)`` query array and split it into edge indices and ``t``."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"queries need 2 columns [edge index, t], got {X.shape[1]}")
    j = X[:, 0]
    if np.any(j != np.round(j)) or np.any(j < 0) or np.any(j >= n_edges):
        raise ValueError(f"edge index must be an integer in [0, {n_edges})")
    t = X[:, 1]
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("t must lie in [0, 1]")
    return j.astype(int), t


class SandpileSolver(BaseEstimator):
    """Equilibrium sandpile on a metric network.

    Parameters
    ----------
    h : float or None
        Target grid step. ``None`` keeps the resolution stored in the network.
    grid : {"ceil", "odd", "quarter"}
        How the cell count per edge is rounded when ``h`` is given.
    tol : float or None
        Relative tie tolerance for the distance field; ``None`` uses the
        package default (``SANDNET_TOL`` if set).

    Attributes
    ----------
    network_ : Network
        The network actually solved (after resampling).
    solution_ : Solution
    structure_ : Structure
    rolling_ : RollingField
    n_edges_ : int
    """

    def __init__(self, h: float | None = None, grid: str = "ceil", tol: float | None = None):
        self.h = h
        self.grid = grid
        self.tol = tol

    def _validate_params(self) -> None:
        if self.h is not None and not (np.isfinite(self.h) and self.h > 0):
            raise ValueError(f"h must be a positive number, got {self.h!r}")
        if self.grid not in GRID_MODES:
            raise ValueError(f"grid must be one of {GRID_MODES}, got {self.grid!r}")
        if self.tol is not None and not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol!r}")

    def fit(self, X, y=None) -> "SandpileSolver":
        self._validate_params()
        source = as_netfile(X)
        network = source.network
        if self.h is not None:
            network = resample(network, self.h, self.grid)
        report = validate(network)
        if not report.ok:
            raise nf.NetValidationError(report)
        self.spec_ = TransmissionSpec.from_netfile(source)
        self.solution_: Solution = solve(network, self.spec_, self.tol)
        self.network_ = network
        self.structure_ = self.solution_.structure
        self.rolling_ = self.solution_.rolling
        self.n_edges_ = network.n_edges
        return self

    def predict(self, X) -> np.ndarray:
        """Columns ``[d, v]`` at each query ``[edge index, t]``."""
        check_is_fitted(self, "solution_")
        j, t = check_query(X, self.n_edges_)
        out = np.empty((len(j), 2))
        for k in np.unique(j):
            rows = j == k
            s = t[rows] * self.network_.edges[k].length
            out[rows, 0] = self.structure_.dfield.interpolate(k, s)
            out[rows, 1] = self.rolling_.interpolate(k, s)
        return out

    def uniqueness(self) -> UniquenessReport:
        check_is_fitted(self, "solution_")
        return uniqueness_check(self.solution_)

    def flux(self) -> list[FluxRow]:
        check_is_fitted(self, "solution_")
        return flux_report(self.rolling_)
