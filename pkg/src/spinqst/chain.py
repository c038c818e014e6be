"""Chain specifications and one-excitation Hamiltonians.

Two models are supported:

* ``SHORT_RANGE``: ferromagnetic isotropic Heisenberg chain with nearest
  neighbour couplings ``J_i``,
  ``H = -sum_i J_i (sx_i sx_{i+1} + sy_i sy_{i+1} + sz_i sz_{i+1})``.
* ``LONG_RANGE``: anisotropic dipolar chain,
  ``H = sum_{i<j} J / |x_i - x_j|**3 (cx sx_i sx_j + cy sy_i sy_j + cz sz_i sz_j)``,
  parameterized by the nearest-neighbour gaps ``d_i = x_{i+1} - x_i``.

Both conserve the number of up spins, so the dynamics of a single
excitation lives in the N-dimensional block spanned by ``|j>`` (only spin
``j`` up).  Matrices are returned dense.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ValidationError

#: Smallest admissible nearest-neighbour gap of the long-range model.
D_MIN = 0.1

DEFAULT_ANISOTROPY = (1.0, 1.0, -2.0)

_SYMMETRY_RTOL = 1e-12


class Model(str, enum.Enum):
    SHORT_RANGE = "short_range"
    LONG_RANGE = "long_range"


@dataclass(frozen=True)
class ChainSpec:
    """Physical description of a chain.

    Exactly one of ``couplings`` (short range) or ``gaps`` (long range) is
    populated; each has ``n - 1`` entries.  ``global_j`` and
    ``anisotropy`` only enter the long-range model.
    """

    model: Model
    n: int
    couplings: tuple[float, ...] | None = None
    gaps: tuple[float, ...] | None = None
    global_j: float = 1.0
    anisotropy: tuple[float, float, float] = DEFAULT_ANISOTROPY
    centro_symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if self.couplings is not None:
            object.__setattr__(self, "couplings", tuple(float(v) for v in self.couplings))
        if self.gaps is not None:
            object.__setattr__(self, "gaps", tuple(float(v) for v in self.gaps))
        object.__setattr__(self, "anisotropy", tuple(float(v) for v in self.anisotropy))
        object.__setattr__(self, "global_j", float(self.global_j))
        self._validate()

    def _validate(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValidationError(f"chain length must be an integer >= 2, got {self.n!r}")
        if len(self.anisotropy) != 3:
            raise ValidationError("anisotropy must have three components (cx, cy, cz)")
        if self.model is Model.SHORT_RANGE:
            if self.gaps is not None:
                raise ValidationError("short-range chains take couplings, not gaps")
            values, what = self.couplings, "couplings"
        else:
            if self.couplings is not None:
                raise ValidationError("long-range chains take gaps, not couplings")
            values, what = self.gaps, "gaps"
            if not self.global_j > 0:
                raise ValidationError(f"global_j must be positive, got {self.global_j}")
            cx, cy, _ = self.anisotropy
            if cx != cy:
                # cx != cy adds sigma+ sigma+ terms that leave the one-excitation block
                raise ValidationError("anisotropy requires cx == cy to conserve magnetization")
        if values is None:
            raise ValidationError(f"{self.model.value} chain requires {what}")
        if len(values) != self.n - 1:
            raise ValidationError(f"expected {self.n - 1} {what}, got {len(values)}")
        arr = np.asarray(values)
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"{what} must be finite")
        if what == "couplings" and np.any(arr <= 0):
            raise ValidationError("all couplings must be positive")
        if what == "gaps" and np.any(arr < D_MIN):
            raise ValidationError(f"all gaps must be >= d_min = {D_MIN}")
        if self.centro_symmetric and not np.allclose(arr, arr[::-1], rtol=_SYMMETRY_RTOL, atol=0):
            raise ValidationError(f"{what} flagged centro-symmetric but not mirror symmetric")

    @property
    def parameters(self) -> np.ndarray:
        """The N-1 free physical values (couplings or gaps)."""
        return np.asarray(self.couplings if self.model is Model.SHORT_RANGE else self.gaps)

    @property
    def positions(self) -> np.ndarray:
        """Site coordinates with ``x_1 = 0`` (long-range model only)."""
        if self.model is not Model.LONG_RANGE:
            raise ValidationError("positions are defined for long-range chains only")
        return np.concatenate([[0.0], np.cumsum(self.gaps)])

    def to_dict(self) -> dict:
        d = {"model": self.model.value, "n": self.n}
        if self.model is Model.SHORT_RANGE:
            d["couplings"] = list(self.couplings)
        else:
            d["gaps"] = list(self.gaps)
        d["global_j"] = self.global_j
        d["anisotropy"] = list(self.anisotropy)
        d["centro_symmetric"] = self.centro_symmetric
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ChainSpec":
        allowed = {"model", "n", "couplings", "gaps", "global_j", "anisotropy", "centro_symmetric"}
        unknown = set(d) - allowed
        if unknown:
            raise ValidationError(f"unknown chain keys: {sorted(unknown)}")
        for key in ("model", "n"):
            if key not in d:
                raise ValidationError(f"chain is missing required key {key!r}")
        try:
            model = Model(d["model"])
        except ValueError:
            raise ValidationError(f"unknown model {d['model']!r}") from None
        if isinstance(d["n"], bool) or not isinstance(d["n"], int):
            raise ValidationError(f"n must be an integer, got {d['n']!r}")
        return cls(
            model=model,
            n=d["n"],
            couplings=d.get("couplings"),
            gaps=d.get("gaps"),
            global_j=d.get("global_j", 1.0),
            anisotropy=tuple(d.get("anisotropy", DEFAULT_ANISOTROPY)),
            centro_symmetric=bool(d.get("centro_symmetric", False)),
        )

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "ChainSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class OneExcitationHamiltonian:
    """Real symmetric matrix ``h[j, k] = <j|H|k>`` in the single-spin-up basis."""

    n: int
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (self.n, self.n):
            raise ValidationError(f"matrix shape {m.shape} does not match n={self.n}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def shifted(self, c: float) -> "OneExcitationHamiltonian":
        """Return ``H + c I``."""
        return OneExcitationHamiltonian(self.n, self.matrix + c * np.eye(self.n))


def short_range_matrices(couplings: np.ndarray) -> np.ndarray:
    """One-excitation matrices for a batch of coupling vectors.

    Parameters
    ----------
    couplings : ndarray, shape (..., N-1)

    Returns
    -------
    ndarray, shape (..., N, N)
        ``h[j, j+1] = -2 J_j`` and ``h[j, j] = -sum J + 2 (J_{j-1} + J_j)``
        with ``J_0 = J_N = 0``.
    """
    J = np.asarray(couplings, dtype=float)
    n = J.shape[-1] + 1
    pad = [(0, 0)] * (J.ndim - 1) + [(1, 1)]
    Jp = np.pad(J, pad)
    diag = -J.sum(axis=-1, keepdims=True) + 2.0 * (Jp[..., :-1] + Jp[..., 1:])
    h = np.zeros(J.shape[:-1] + (n, n))
    idx = np.arange(n)
    h[..., idx, idx] = diag
    h[..., idx[:-1], idx[1:]] = -2.0 * J
    h[..., idx[1:], idx[:-1]] = -2.0 * J
    return h


def long_range_matrices(gaps: np.ndarray, global_j: float = 1.0,
                        anisotropy: Sequence[float] = DEFAULT_ANISOTROPY) -> np.ndarray:
    """One-excitation matrices of the dipolar chain for a batch of gap vectors.

    Off-diagonal elements are ``(cx + cy) J / r_jk**3``; the diagonal is
    ``cz J (S - 2 sum_{i != j} 1 / r_ij**3)`` where ``S`` sums ``1/r**3``
    over all pairs.
    """
    d = np.asarray(gaps, dtype=float)
    cx, cy, cz = anisotropy
    n = d.shape[-1] + 1
    pad = [(0, 0)] * (d.ndim - 1) + [(1, 0)]
    x = np.cumsum(np.pad(d, pad), axis=-1)
    r = np.abs(x[..., :, None] - x[..., None, :])
    idx = np.arange(n)
    r[..., idx, idx] = np.inf
    inv3 = 1.0 / r**3
    row = inv3.sum(axis=-1)
    total = 0.5 * row.sum(axis=-1, keepdims=True)
    h = (cx + cy) * global_j * inv3
    h[..., idx, idx] = cz * global_j * (total - 2.0 * row)
    # exact symmetry regardless of summation order
    return 0.5 * (h + np.swapaxes(h, -1, -2))


def build_short_range(spec: ChainSpec) -> OneExcitationHamiltonian:
    if spec.model is not Model.SHORT_RANGE:
        raise ValidationError("build_short_range needs a short-range spec")
    with np.errstate(over="ignore", invalid="ignore"):
        # overflow shows up as non-finite entries, reported by the eigensolver
        return OneExcitationHamiltonian(spec.n, short_range_matrices(spec.couplings))


def build_long_range(spec: ChainSpec) -> OneExcitationHamiltonian:
    if spec.model is not Model.LONG_RANGE:
        raise ValidationError("build_long_range needs a long-range spec")
    h = long_range_matrices(spec.gaps, spec.global_j, spec.anisotropy)
    if spec.centro_symmetric:
        # mirrored cumulative sums differ in the last bit; restore exact persymmetry
        h = 0.5 * (h + h[::-1, ::-1].T)
    return OneExcitationHamiltonian(spec.n, h)


def build_hamiltonian(spec: ChainSpec) -> OneExcitationHamiltonian:
    """Dispatch on ``spec.model``."""
    if spec.model is Model.SHORT_RANGE:
        return build_short_range(spec)
    return build_long_range(spec)


def homogeneous_baseline(model: Model | str, n: int, value: float = 1.0) -> ChainSpec:
    """Chain with every coupling (or gap) equal to ``value``."""
    model = Model(model)
    if not value > 0:
        raise ValidationError(f"value must be positive, got {value}")
    values = (float(value),) * (n - 1) if n >= 2 else ()
    if model is Model.SHORT_RANGE:
        return ChainSpec(model, n, couplings=values, centro_symmetric=True)
    return ChainSpec(model, n, gaps=values, centro_symmetric=True)


def is_persymmetric(matrix: np.ndarray, atol: float = 0.0) -> bool:
    """``h[j, k] == h[N-1-k, N-1-j]`` for all entries."""
    m = np.asarray(matrix)
    return bool(np.allclose(m, m[::-1, ::-1].T, rtol=0, atol=atol))
