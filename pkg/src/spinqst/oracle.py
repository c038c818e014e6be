"""Brute-force reference implementations for testing.

Nothing here reuses the fast kernels of the rest of the package: full
Hamiltonians are assembled from Pauli tensor products over all ``2**N``
basis states, propagation uses a dense matrix exponential or fixed-step
Runge-Kutta, and fidelities are averaged by explicit density-matrix
algebra on sampled input states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .chain import ChainSpec, Model, OneExcitationHamiltonian
from .errors import CapacityError, ValidationError

MAX_SPINS = 12

# |0> = spin down, |1> = spin up, so sigma_z = diag(-1, +1)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[-1, 0], [0, 1]], dtype=complex)


@dataclass(frozen=True)
class FullHamiltonian:
    n: int
    matrix: sp.csr_matrix = field(repr=False)


def _site_op(op: np.ndarray, site: int, n: int) -> sp.csr_matrix:
    """``op`` on ``site`` (0-based, leftmost factor = site 0)."""
    left = sp.identity(2**site, format="csr")
    right = sp.identity(2 ** (n - site - 1), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(op)), right, format="csr")


def _pair(i: int, j: int, n: int, cx: float, cy: float, cz: float) -> sp.csr_matrix:
    return (cx * _site_op(SX, i, n) @ _site_op(SX, j, n)
            + cy * _site_op(SY, i, n) @ _site_op(SY, j, n)
            + cz * _site_op(SZ, i, n) @ _site_op(SZ, j, n))


def full_hamiltonian(spec: ChainSpec) -> FullHamiltonian:
    """Chain Hamiltonian on the full ``2**N`` space."""
    n = spec.n
    if n > MAX_SPINS:
        raise CapacityError(f"full Hamiltonian limited to N <= {MAX_SPINS}, got {n}")
    dim = 2**n
    h = sp.csr_matrix((dim, dim), dtype=complex)
    if spec.model is Model.SHORT_RANGE:
        for i, J in enumerate(spec.couplings):
            h = h - J * _pair(i, i + 1, n, 1.0, 1.0, 1.0)
    else:
        cx, cy, cz = spec.anisotropy
        x = [0.0]
        for d in spec.gaps:
            x.append(x[-1] + d)
        for i in range(n):
            for j in range(i + 1, n):
                h = h + spec.global_j / abs(x[i] - x[j]) ** 3 * _pair(i, j, n, cx, cy, cz)
    if abs(h.imag).max() > 1e-12 if h.nnz else False:
        raise ValidationError("full Hamiltonian is not real")
    return FullHamiltonian(n, sp.csr_matrix(h.real))


def total_magnetization(n: int) -> sp.csr_matrix:
    return sum((_site_op(SZ, i, n) for i in range(n)), sp.csr_matrix((2**n, 2**n))).real


def magnetization_commutator_norm(fh: FullHamiltonian) -> float:
    """``max |[H, sum_i sz_i]|`` entrywise."""
    m = total_magnetization(fh.n)
    c = fh.matrix @ m - m @ fh.matrix
    return float(abs(c).max()) if c.nnz else 0.0


def single_excitation_index(site: int, n: int) -> int:
    """Basis index of ``|site>`` (1-based site, site 1 is the leftmost bit)."""
    return 2 ** (n - site)


def one_excitation_block(fh: FullHamiltonian) -> OneExcitationHamiltonian:
    idx = [single_excitation_index(j, fh.n) for j in range(1, fh.n + 1)]
    block = fh.matrix[idx][:, idx].toarray()
    return OneExcitationHamiltonian(fh.n, block)


def zero_excitation_energy(fh: FullHamiltonian) -> float:
    return float(fh.matrix[0, 0])


def propagate_dense(h, initial: np.ndarray, t: float, dt: float | None = None,
                    method: str = "expm") -> np.ndarray:
    """Evolve ``initial`` under ``h`` for time ``t``.

    ``method="expm"`` applies the Pade scaling-and-squaring exponential of
    ``-i h t`` directly.  ``method="rk4"`` integrates ``i dpsi/dt = h psi``
    with fixed steps no larger than ``dt``; ``dt * ||h||_2`` must stay
    below 2 for stability.
    """
    m = np.asarray(getattr(h, "matrix", h), dtype=float)
    psi = np.asarray(initial, dtype=complex)
    if t < 0:
        raise ValidationError("time must be non-negative")
    if method == "expm":
        return scipy.linalg.expm(-1j * t * m) @ psi
    if method != "rk4":
        raise ValidationError(f"unknown method {method!r}")
    if dt is None or not dt > 0:
        raise ValidationError("rk4 needs a positive dt")
    norm = np.linalg.norm(m, 2)
    if dt * norm > 2.0:
        raise ValidationError(f"dt={dt} too large for ||h||={norm:.3g}; need dt*||h|| <= 2")
    if t == 0:
        return psi.copy()
    steps = int(np.ceil(t / dt))
    step = t / steps
    a = -1j * m
    for _ in range(steps):
        k1 = a @ psi
        k2 = a @ (psi + 0.5 * step * k1)
        k3 = a @ (psi + 0.5 * step * k2)
        k4 = a @ (psi + step * k3)
        psi = psi + step / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return psi


def _matrix_of(h) -> np.ndarray:
    if hasattr(h, "matrix") and callable(h.matrix):
        return h.matrix()  # SpectralDecomposition
    return np.asarray(getattr(h, "matrix", h), dtype=float)


def transfer_amplitude(h, t: float) -> complex:
    m = _matrix_of(h)
    return complex(scipy.linalg.expm(-1j * t * m)[-1, 0])


def bloch_samples(samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Inputs ``alpha|0> + beta|1>`` uniform on the Bloch sphere."""
    cos_theta = rng.uniform(-1.0, 1.0, samples)
    phi = rng.uniform(0.0, 2 * np.pi, samples)
    alpha = np.sqrt((1 + cos_theta) / 2).astype(complex)
    beta = np.sqrt((1 - cos_theta) / 2) * np.exp(1j * phi)
    return alpha, beta


def output_qubit_fidelity(alpha: np.ndarray, beta: np.ndarray, transfer: complex) -> np.ndarray:
    """``<psi|rho_N|psi>`` with the transfer phase compensated.

    ``rho_N`` is the reduced state of the last spin after the chain
    evolves ``alpha|0...0> + beta|1 0...0>``.
    """
    f = abs(transfer)
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    rho = np.empty(alpha.shape + (2, 2), dtype=complex)
    rho[..., 0, 0] = np.abs(alpha) ** 2 + np.abs(beta) ** 2 * (1 - f**2)
    rho[..., 0, 1] = alpha * np.conj(beta) * f
    rho[..., 1, 0] = np.conj(alpha) * beta * f
    rho[..., 1, 1] = np.abs(beta) ** 2 * f**2
    psi = np.stack([alpha, beta], axis=-1)
    return np.einsum("...a,...ab,...b->...", np.conj(psi), rho, psi).real


def monte_carlo_fidelity(h, t: float, samples: int = 100_000,
                         rng_seed: int = 0) -> tuple[float, float]:
    """Bloch-sphere average of the received-qubit fidelity.

    ``h`` may be a Hamiltonian, a matrix or a spectral decomposition.
    Returns ``(mean, standard_error)``.
    """
    if samples < 1000:
        raise ValidationError("use at least 1000 samples")
    rng = np.random.default_rng(rng_seed)
    alpha, beta = bloch_samples(samples, rng)
    vals = output_qubit_fidelity(alpha, beta, transfer_amplitude(h, t))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(samples))


def short_range_bond_blocks(n: int) -> np.ndarray:
    """One-excitation blocks of each unit-strength bond term, shape ``(N-1, N, N)``.

    Short-range Hamiltonians are linear in the couplings, so any chain is
    ``sum_i J_i * blocks[i]``.
    """
    if n > MAX_SPINS:
        raise CapacityError(f"bond blocks limited to N <= {MAX_SPINS}, got {n}")
    idx = [single_excitation_index(j, n) for j in range(1, n + 1)]
    blocks = []
    for i in range(n - 1):
        h = -_pair(i, i + 1, n, 1.0, 1.0, 1.0).real
        blocks.append(h[idx][:, idx].toarray())
    return np.array(blocks)


def _populations(blocks: np.ndarray, couplings: np.ndarray, t: float) -> np.ndarray:
    h = np.einsum("ki,ijl->kjl", couplings, blocks)
    u = scipy.linalg.expm(-1j * t * h)
    return np.abs(u[:, -1, 0]) ** 2


def grid_scan_short_range(n: int, arrival_time: float, low: float, high: float,
                          points: int = 10_000, fill_value: float = 1.0) -> tuple[float, float]:
    """Best ``P(T)`` over a 1-D grid of the end coupling ``J_1 = J_{N-1}``."""
    blocks = short_range_bond_blocks(n)
    grid = np.linspace(low, high, points)
    J = np.full((points, n - 1), fill_value)
    J[:, 0] = grid
    J[:, -1] = grid
    p = _populations(blocks, J, arrival_time)
    k = int(np.argmax(p))
    return float(grid[k]), float(p[k])


def random_search_short_range(n: int, arrival_time: float, low: float, high: float,
                              samples: int = 1_000_000, rng_seed: int = 0,
                              chunk: int = 100_000) -> tuple[np.ndarray, float]:
    """Best ``P(T)`` over uniformly random centro-symmetric coupling sets."""
    blocks = short_range_bond_blocks(n)
    m = n // 2
    rng = np.random.default_rng(rng_seed)
    best_x, best_p = None, -1.0
    done = 0
    while done < samples:
        k = min(chunk, samples - done)
        x = rng.uniform(low, high, (k, m))
        J = np.empty((k, n - 1))
        for i in range(m):
            J[:, i] = x[:, i]
            J[:, n - 2 - i] = x[:, i]
        p = _populations(blocks, J, arrival_time)
        i = int(np.argmax(p))
        if p[i] > best_p:
            best_x, best_p = x[i], float(p[i])
        done += k
    return best_x, best_p
