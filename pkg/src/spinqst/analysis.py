"""Spectral diagnostics of transfer chains.

Gaps between successive energies are measured in units of ``pi / T``; a
gap that sits on an odd integer lets the corresponding pair of eigenmodes
interfere constructively at the end of the chain at time ``T``.  The
localization weight ``w_i = |<v_i|1>|**2`` tells how much of the initial
excitation each eigenmode carries.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import SpectralDecomposition
from .errors import ValidationError

DEFAULT_GAP_TOL = 0.05


@dataclass(frozen=True)
class GapLadder:
    arrival_time: float
    scaled_gaps: np.ndarray
    odd_targets: np.ndarray
    odd_distances: np.ndarray

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("i,scaled_gap,q,d\n")
        for i, (g, q, d) in enumerate(zip(self.scaled_gaps, self.odd_targets, self.odd_distances), 1):
            out.write(f"{i},{float(g):.17g},{int(q)},{float(d):.17g}\n")
        return out.getvalue()


@dataclass(frozen=True)
class LocalizationProfile:
    weights: np.ndarray

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("i,weight\n")
        for i, w in enumerate(self.weights, 1):
            out.write(f"{i},{float(w):.17g}\n")
        return out.getvalue()


@dataclass(frozen=True)
class OrderReport:
    """Which gaps are ordered and how much weight their eigenmodes carry.

    Indices are 1-based: gap ``i`` separates eigenvalues ``i`` and ``i+1``.
    ``ordered_weight`` sums ``w`` over every eigenvector bounding an
    ordered gap; ``localized_indices`` are those eigenvectors whose weight
    is at least ``weight_floor``.
    """

    ordered_indices: list[int]
    ordered_weight: float
    participating_indices: list[int]
    localized_indices: list[int]
    gap_tol: float
    weight_floor: float

    @property
    def ordered_count(self) -> int:
        return len(self.ordered_indices)

    def to_dict(self) -> dict:
        return {
            "ordered_indices": list(self.ordered_indices),
            "ordered_count": self.ordered_count,
            "ordered_weight": self.ordered_weight,
            "participating_indices": list(self.participating_indices),
            "localized_indices": list(self.localized_indices),
            "gap_tol": self.gap_tol,
            "weight_floor": self.weight_floor,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def nearest_odd(x):
    """Nearest odd natural number (>= 1); exact midpoints go to the smaller one."""
    k = (np.asarray(x, dtype=float) - 1.0) / 2.0
    base = np.floor(k)
    k_round = np.where(k - base > 0.5, base + 1, base)
    q = np.maximum(2 * k_round + 1, 1).astype(int)
    return int(q) if q.ndim == 0 else q


def gap_ladder(sd: SpectralDecomposition, arrival_time: float) -> GapLadder:
    if not arrival_time > 0:
        raise ValidationError(f"arrival time must be positive, got {arrival_time}")
    if sd.n < 2:
        raise ValidationError("gap ladder needs at least two levels")
    scaled = np.diff(sd.energies) / (math.pi / arrival_time)
    q = nearest_odd(scaled)
    return GapLadder(float(arrival_time), scaled, q, np.abs(scaled - q))


def localization_profile(sd: SpectralDecomposition, site: int = 1) -> LocalizationProfile:
    """``w_i = |<v_i|site>|**2`` for every eigenvector."""
    if not 1 <= site <= sd.n:
        raise ValidationError(f"site must be in 1..{sd.n}, got {site}")
    return LocalizationProfile(sd.vectors[site - 1] ** 2)


def order_report(ladder: GapLadder, profile: LocalizationProfile,
                 gap_tol: float = DEFAULT_GAP_TOL,
                 weight_floor: float | None = None) -> OrderReport:
    n = len(profile.weights)
    if len(ladder.scaled_gaps) != n - 1:
        raise ValidationError("ladder and profile describe chains of different length")
    if weight_floor is None:
        weight_floor = 2.0 / n
    if not gap_tol > 0:
        raise ValidationError(f"gap_tol must be positive, got {gap_tol}")
    if not 0 < weight_floor < 1:
        raise ValidationError(f"weight_floor must lie in (0, 1), got {weight_floor}")

    ordered = np.flatnonzero(ladder.odd_distances <= gap_tol)
    participating = np.union1d(ordered, ordered + 1)
    w = profile.weights
    localized = [int(i) + 1 for i in participating if w[i] >= weight_floor]
    return OrderReport(
        ordered_indices=[int(i) + 1 for i in ordered],
        ordered_weight=float(np.sum(w[participating])) if participating.size else 0.0,
        participating_indices=[int(i) + 1 for i in participating],
        localized_indices=localized,
        gap_tol=float(gap_tol),
        weight_floor=float(weight_floor),
    )
