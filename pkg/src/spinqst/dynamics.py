"""Exact one-excitation dynamics from the spectral decomposition.

With ``H = sum_i E_i |v_i><v_i|`` the propagator is
``U(t) = sum_i exp(-i E_i t) |v_i><v_i|``, so every observable below is a
finite sum over eigenpairs and can be evaluated at arbitrary times without
stepping.  Sites are numbered from 1 in the public API.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .chain import OneExcitationHamiltonian
from .errors import NumericalError, ValidationError

OBSERVABLES = ("population", "fidelity", "ipr", "sites")

_PROB_SLACK = 1e-12


@dataclass(frozen=True)
class SpectralDecomposition:
    """Ascending energies and the matching orthonormal eigenvectors.

    ``vectors[:, i]`` is the eigenvector for ``energies[i]``.
    """

    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.energies)

    def matrix(self) -> np.ndarray:
        """Reassemble ``V diag(E) V^T``."""
        return (self.vectors * self.energies) @ self.vectors.T


@dataclass(frozen=True)
class EvolvedState:
    time: float
    site_amplitudes: np.ndarray

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.site_amplitudes) ** 2


@dataclass
class TimeSeries:
    """Observables sampled on an ascending time grid."""

    grid: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        for name, col in self.columns.items():
            if len(col) != len(self.grid):
                raise ValidationError(f"column {name!r} has {len(col)} rows, grid has {len(self.grid)}")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def to_csv(self, fh=None) -> str | None:
        """Write ``t,<observable>...`` rows with 17 significant digits.

        Returns the text when ``fh`` is None.
        """
        out = io.StringIO() if fh is None else fh
        names = list(self.columns)
        out.write(",".join(["t"] + names) + "\n")
        cols = [self.columns[n] for n in names]
        for k, t in enumerate(self.grid):
            out.write(",".join(_fmt(v) for v in [t] + [c[k] for c in cols]) + "\n")
        return out.getvalue() if fh is None else None


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def decompose(h: OneExcitationHamiltonian | np.ndarray) -> SpectralDecomposition:
    """Symmetric eigendecomposition with ascending energies."""
    m = np.asarray(getattr(h, "matrix", h), dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {m.shape}")
    finite_input = bool(np.all(np.isfinite(m)))
    if finite_input and not np.array_equal(m, m.T):
        raise ValidationError("matrix is not symmetric")
    try:
        if not finite_input:
            raise np.linalg.LinAlgError("non-finite matrix entries")
        energies, vectors = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:
        finite = m[np.isfinite(m)]
        scale = np.max(np.abs(finite)) if finite.size else float("nan")
        raise NumericalError(
            f"eigensolver failed ({exc}); n={m.shape[0]}, max|h|={scale:.3e}, "
            f"non-finite entries={int(np.sum(~np.isfinite(m)))}") from exc
    return SpectralDecomposition(energies, vectors)


def _check_site(sd: SpectralDecomposition, site: int) -> int:
    if not 1 <= site <= sd.n:
        raise ValidationError(f"site must be in 1..{sd.n}, got {site}")
    return site - 1


def _phases(sd: SpectralDecomposition, t) -> np.ndarray:
    return np.exp(-1j * np.multiply.outer(np.asarray(t, dtype=float), sd.energies))


def amplitude(sd: SpectralDecomposition, t, source: int = 1, target: int | None = None):
    """Transition amplitude ``<target|U(t)|source>`` (scalar or array in ``t``)."""
    j = _check_site(sd, source)
    k = _check_site(sd, sd.n if target is None else target)
    weights = sd.vectors[k] * sd.vectors[j]
    return _phases(sd, t) @ weights


def evolve(sd: SpectralDecomposition, initial_site: int, t: float) -> EvolvedState:
    """State at time ``t`` of an excitation launched at ``initial_site``."""
    if t < 0:
        raise ValidationError(f"time must be non-negative, got {t}")
    j = _check_site(sd, initial_site)
    coeff = sd.vectors[j] * _phases(sd, t)
    return EvolvedState(float(t), sd.vectors @ coeff)


def site_amplitudes(sd: SpectralDecomposition, grid, initial_site: int = 1) -> np.ndarray:
    """Amplitudes on every site for every grid time, shape ``(len(grid), N)``."""
    j = _check_site(sd, initial_site)
    return (_phases(sd, np.atleast_1d(grid)) * sd.vectors[j]) @ sd.vectors.T


def transferred_population(sd: SpectralDecomposition, t):
    """``P(t) = |<N|U(t)|1>|**2``."""
    p = np.abs(amplitude(sd, t)) ** 2
    return float(p) if np.ndim(p) == 0 else p


def averaged_fidelity(p):
    """Input-averaged transfer fidelity ``sqrt(P)/3 + P/6 + 1/2``."""
    arr = np.asarray(p, dtype=float)
    if np.any(arr < -_PROB_SLACK) or np.any(arr > 1 + _PROB_SLACK) or np.any(np.isnan(arr)):
        raise ValidationError("population must lie in [0, 1]")
    arr = np.clip(arr, 0.0, 1.0)
    f = np.sqrt(arr) / 3 + arr / 6 + 0.5
    return float(f) if f.ndim == 0 else f


def state_fidelity(sd: SpectralDecomposition, alpha: complex, beta: complex, t: float) -> float:
    """Fidelity of the qubit received at site N for input ``alpha|0> + beta|1>``.

    The zero-excitation component is stationary, so the reduced state of
    the last spin depends only on the transfer amplitude.  Its phase is
    taken to be compensated (rotated to be real and positive).
    """
    a2, b2 = abs(alpha) ** 2, abs(beta) ** 2
    if abs(a2 + b2 - 1) > 1e-10:
        raise ValidationError(f"|alpha|^2 + |beta|^2 = {a2 + b2!r}, expected 1")
    p = transferred_population(sd, t)
    return a2 * (a2 + b2 * (1 - p)) + 2 * a2 * b2 * math.sqrt(p) + b2 * b2 * p


def ipr(state: EvolvedState | np.ndarray) -> float:
    """Inverse participation ratio ``1 / sum_j |chi_j|**4`` over site amplitudes."""
    chi = np.asarray(getattr(state, "site_amplitudes", state))
    return float(1.0 / np.sum(np.abs(chi) ** 4))


def pretty_good_time(sd: SpectralDecomposition, epsilon: float, t_max: float,
                     dt: float) -> float | None:
    """First time with ``P(t) >= 1 - epsilon``, or None if not reached by ``t_max``.

    The grid ``0, dt, 2 dt, ...`` is scanned and the first bracketing cell
    is refined to 1e-10 in time.
    """
    if not 0 < epsilon <= 1:
        raise ValidationError(f"epsilon must be in (0, 1], got {epsilon}")
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    level = 1.0 - epsilon
    grid = np.arange(0.0, t_max + 0.5 * dt, dt)
    grid = grid[grid <= t_max]
    p = transferred_population(sd, grid)
    hits = np.flatnonzero(p >= level)
    if hits.size == 0:
        return None
    k = int(hits[0])
    if k == 0:
        return 0.0
    g = lambda t: transferred_population(sd, t) - level
    return float(brentq(g, grid[k - 1], grid[k], xtol=1e-10, rtol=4 * np.finfo(float).eps))


def sample_series(sd: SpectralDecomposition, grid: Sequence[float],
                  observables: Iterable[str] = ("population",),
                  initial_site: int = 1) -> TimeSeries:
    """Evaluate the requested observables on ``grid``.

    Observable names: ``population`` (P), ``fidelity`` (averaged F),
    ``ipr`` (L over sites) and ``sites`` (one ``site_j`` column per site).
    ``population`` and ``fidelity`` always refer to transfer from site 1
    to site N.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1:
        raise ValidationError("grid must be one-dimensional")
    if np.any(np.diff(grid) < 0):
        raise ValidationError("grid must be ascending")
    if np.any(grid < 0):
        raise ValidationError("grid times must be non-negative")
    observables = list(observables)
    unknown = [o for o in observables if o not in OBSERVABLES]
    if unknown:
        raise ValidationError(f"unknown observable(s) {unknown}; choose from {OBSERVABLES}")

    cols: dict[str, np.ndarray] = {}
    amps = None
    if {"ipr", "sites"} & set(observables):
        amps = site_amplitudes(sd, grid, initial_site)
    for name in observables:
        if name == "population":
            cols["population"] = np.atleast_1d(transferred_population(sd, grid))
        elif name == "fidelity":
            cols["fidelity"] = np.atleast_1d(averaged_fidelity(transferred_population(sd, grid)))
        elif name == "ipr":
            cols["ipr"] = 1.0 / np.sum(np.abs(amps) ** 4, axis=1)
        else:
            probs = np.abs(amps) ** 2
            for j in range(sd.n):
                cols[f"site_{j + 1}"] = probs[:, j]
    return TimeSeries(grid, cols)


def count_local_maxima(values: np.ndarray) -> int:
    """Strict interior local maxima of a sampled curve."""
    v = np.asarray(values)
    if v.size < 3:
        return 0
    return int(np.sum((v[1:-1] > v[:-2]) & (v[1:-1] > v[2:])))
