"""States, Hamiltonians and spectral constructions.

Conventions: k_B = hbar = 1, energies and temperatures are dimensionless and
an inverse temperature ``beta`` may be ``INFINITE`` (``math.inf``), which
always denotes the exact zero-temperature limit (uniform mixture over the
ground eigenspace), never a large finite number.

Density matrices are plain complex ``numpy`` arrays. Every public function
runs them through :func:`validate_state`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .exceptions import ValidationError

INFINITE = math.inf

HERMITIAN_ATOL = 1e-10
TRACE_ATOL = 1e-10
PSD_ATOL = 1e-10
UNITARY_ATOL = 1e-10
DEGENERACY_ATOL = 1e-12


def is_infinite(beta) -> bool:
    if isinstance(beta, str):
        if beta.lower() in ("inf", "infinite", "infinity"):
            return True
        raise ValidationError(f"unknown inverse temperature tag {beta!r}")
    return math.isinf(beta) and beta > 0


def _readonly(a):
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """H = sum_k eps_k |eps_k><eps_k| with nondecreasing eps_k.

    ``basis`` holds the eigenvectors as columns; ``None`` means the
    computational basis.
    """

    eigenvalues: np.ndarray
    basis: np.ndarray | None = None

    def __post_init__(self):
        eps = np.asarray(self.eigenvalues, dtype=float).ravel()
        if eps.size == 0:
            raise ValidationError("Hamiltonian needs at least one level")
        if not np.all(np.isfinite(eps)):
            raise ValidationError("energies must be finite")
        if np.any(np.diff(eps) < 0):
            raise ValidationError("energies must be sorted nondecreasing")
        object.__setattr__(self, "eigenvalues", _readonly(eps))
        if self.basis is not None:
            u = np.asarray(self.basis, dtype=complex)
            d = eps.size
            if u.shape != (d, d):
                raise ValidationError(f"basis must be {d}x{d}, got {u.shape}")
            if np.abs(u.conj().T @ u - np.eye(d)).max() > UNITARY_ATOL:
                raise ValidationError("basis is not unitary")
            object.__setattr__(self, "basis", _readonly(u))

    @classmethod
    def from_matrix(cls, hmat) -> "Hamiltonian":
        hmat = np.asarray(hmat, dtype=complex)
        if np.abs(hmat - hmat.conj().T).max() > HERMITIAN_ATOL:
            raise ValidationError("Hamiltonian matrix is not Hermitian")
        eps, vecs = np.linalg.eigh(hmat)
        return cls(eps, vecs)

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    @property
    def vectors(self) -> np.ndarray:
        if self.basis is None:
            return np.eye(self.dim, dtype=complex)
        return np.asarray(self.basis)

    @property
    def matrix(self) -> np.ndarray:
        return self.embed(self.eigenvalues)

    @property
    def gap(self) -> float:
        """Spectral width eps_d - eps_1."""
        return float(self.eigenvalues[-1] - self.eigenvalues[0])

    @property
    def is_trivial(self) -> bool:
        return self.gap <= DEGENERACY_ATOL

    def ground_degeneracy(self) -> int:
        return int(np.sum(self.eigenvalues - self.eigenvalues[0] <= DEGENERACY_ATOL))

    def levels(self) -> list[np.ndarray]:
        """Index groups of (numerically) degenerate energies, lowest first."""
        eps = self.eigenvalues
        groups, start = [], 0
        for k in range(1, eps.size + 1):
            if k == eps.size or eps[k] - eps[k - 1] > DEGENERACY_ATOL:
                groups.append(np.arange(start, k))
                start = k
        return groups

    def to_energy_basis(self, op) -> np.ndarray:
        op = np.asarray(op, dtype=complex)
        if self.basis is None:
            return op
        v = self.vectors
        return v.conj().T @ op @ v

    def from_energy_basis(self, op) -> np.ndarray:
        op = np.asarray(op, dtype=complex)
        if self.basis is None:
            return op
        v = self.vectors
        return v @ op @ v.conj().T

    def embed(self, populations) -> np.ndarray:
        """sum_k p_k |eps_k><eps_k| as a matrix."""
        return self.from_energy_basis(np.diag(np.asarray(populations, dtype=complex)))

    def check_dim(self, op) -> None:
        if np.shape(op)[-1] != self.dim:
            raise ValidationError(
                f"dimension mismatch: Hamiltonian has d={self.dim}, operand {np.shape(op)}"
            )


def validate_state(rho, copy: bool = True) -> np.ndarray:
    """Check that ``rho`` is a density matrix and return a cleaned copy.

    Eigenvalues in [-1e-10, 0) are clipped to zero and the state is
    renormalized; anything more negative is rejected.
    """
    m = np.array(rho, dtype=complex, copy=copy)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
        raise ValidationError(f"density matrix must be square, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("density matrix has non-finite entries")
    if np.abs(m - m.conj().T).max() > HERMITIAN_ATOL:
        raise ValidationError("density matrix is not Hermitian")
    m = 0.5 * (m + m.conj().T)
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_ATOL:
        raise ValidationError(f"density matrix has trace {tr!r}")
    w, v = np.linalg.eigh(m)
    if w[0] < -PSD_ATOL:
        raise ValidationError(f"density matrix has negative eigenvalue {w[0]!r}")
    if w[0] < 0:
        w = np.clip(w, 0.0, None)
        w /= w.sum()
        m = (v * w) @ v.conj().T
        m = 0.5 * (m + m.conj().T)
    return m


class SpectralDecomposition(NamedTuple):
    populations: np.ndarray  # nonincreasing
    vectors: np.ndarray  # columns |r_k>


def _canonical_phase(v):
    idx = np.argmax(np.abs(v) > 1e-12)
    ph = v[idx] / abs(v[idx])
    return v / ph


def _eigh_desc(m):
    w, v = np.linalg.eigh(m)
    w, v = w[::-1], v[:, ::-1]
    d = w.size
    order, k = [], 0
    while k < d:
        j = k + 1
        while j < d and w[k] - w[j] <= DEGENERACY_ATOL:
            j += 1
        block = list(range(k, j))
        if len(block) > 1:
            cols = [_canonical_phase(v[:, i]) for i in block]
            keys = [tuple(np.round(np.column_stack([c.real, c.imag]).ravel(), 12)) for c in cols]
            block = [block[i] for i in sorted(range(len(block)), key=lambda i: keys[i])]
        order.extend(block)
        k = j
    vecs = np.column_stack([_canonical_phase(v[:, i]) for i in order])
    return w[order], vecs


def spectral(rho) -> SpectralDecomposition:
    """Eigen-decomposition with populations sorted nonincreasing.

    Degenerate eigenvalues are ordered by the lexicographic order of their
    (phase-fixed) eigenvectors so the output is deterministic.
    """
    m = validate_state(rho)
    w, v = _eigh_desc(m)
    return SpectralDecomposition(np.clip(w, 0.0, None), v)


def eigvals_desc(rho) -> np.ndarray:
    return np.clip(np.linalg.eigvalsh(rho)[::-1], 0.0, None)


def energy_populations(h: Hamiltonian, rho) -> np.ndarray:
    """Diagonal <eps_k|rho|eps_k> in the energy basis."""
    h.check_dim(rho)
    return np.real(np.diag(h.to_energy_basis(rho)))


def energy(h: Hamiltonian, rho) -> float:
    rho = validate_state(rho)
    return float(np.dot(h.eigenvalues, energy_populations(h, rho)))


def shannon(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def entropy(rho) -> float:
    """Von Neumann entropy -Tr rho ln rho (natural log, 0 ln 0 = 0)."""
    rho = validate_state(rho)
    return shannon(eigvals_desc(rho))


@dataclass(frozen=True, eq=False)
class PassiveState:
    """Energy-diagonal state with populations nonincreasing in energy."""

    populations: np.ndarray
    hamiltonian: Hamiltonian = field(repr=False)

    def __post_init__(self):
        p = np.asarray(self.populations, dtype=float).ravel()
        if p.size != self.hamiltonian.dim:
            raise ValidationError("population vector does not match Hamiltonian dimension")
        if np.any(p < -PSD_ATOL) or abs(p.sum() - 1.0) > TRACE_ATOL:
            raise ValidationError("populations must be a probability vector")
        if np.any(np.diff(p) > 1e-12):
            raise ValidationError("passive populations must be nonincreasing")
        object.__setattr__(self, "populations", _readonly(np.clip(p, 0.0, None)))

    @property
    def matrix(self) -> np.ndarray:
        return self.hamiltonian.embed(self.populations)


@dataclass(frozen=True, eq=False)
class GibbsState(PassiveState):
    beta: float = 0.0

    @property
    def temperature(self) -> float:
        return 0.0 if is_infinite(self.beta) else (math.inf if self.beta == 0 else 1.0 / self.beta)


def gibbs_populations(eps, beta) -> np.ndarray:
    eps = np.asarray(eps, dtype=float)
    shifted = eps - eps[0]
    if is_infinite(beta):
        w = (shifted <= DEGENERACY_ATOL).astype(float)
    else:
        w = np.exp(-beta * shifted)
    return w / w.sum()


def gibbs(h: Hamiltonian, beta) -> GibbsState:
    """Gibbs state exp(-beta H)/Z; ``beta=INFINITE`` gives the ground projector."""
    if is_infinite(beta):
        beta = INFINITE
    else:
        beta = float(beta)
        if not (beta >= 0.0) or math.isnan(beta):
            raise ValidationError(f"Gibbs states need beta >= 0, got {beta}")
    return GibbsState(gibbs_populations(h.eigenvalues, beta), h, beta=beta)


def passive_rearrangement(h: Hamiltonian, rho) -> PassiveState:
    """P_rho: k-th largest eigenvalue of rho on the k-th lowest level."""
    rho = validate_state(rho)
    h.check_dim(rho)
    r = eigvals_desc(rho)
    return PassiveState(r / r.sum(), h)


def is_passive(h: Hamiltonian, rho, tol: float = 1e-9) -> bool:
    """True iff rho commutes with H and populations do not increase with energy.

    Within a degenerate level the block may be arbitrary; across distinct
    energies the smallest eigenvalue of a lower block must dominate the
    largest eigenvalue of the next block.
    """
    rho = validate_state(rho)
    h.check_dim(rho)
    m = h.to_energy_basis(rho)
    levels = h.levels()
    mask = np.ones(m.shape, dtype=bool)
    for idx in levels:
        mask[np.ix_(idx, idx)] = False
    if mask.any() and np.abs(m[mask]).max() > tol:
        return False
    prev_min = None
    for idx in levels:
        w = np.linalg.eigvalsh(m[np.ix_(idx, idx)])
        if prev_min is not None and w[-1] > prev_min + tol:
            return False
        prev_min = w[0]
    return True


def extraction_unitary(h: Hamiltonian, rho) -> np.ndarray:
    """U_rho = sum_k |eps_k><r_k| (all phases zero)."""
    rho = validate_state(rho)
    h.check_dim(rho)
    _, vecs = _eigh_desc(rho)
    return h.vectors @ vecs.conj().T


def random_state(d: int, measure: str = "hilbert-schmidt", seed=None) -> np.ndarray:
    """Random density matrix from the Hilbert-Schmidt or Haar-pure ensemble."""
    if d < 1:
        raise ValidationError("dimension must be positive")
    rng = np.random.default_rng(seed)
    if measure == "hilbert-schmidt":
        g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rho = g @ g.conj().T
    elif measure == "haar-pure":
        psi = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        rho = np.outer(psi, psi.conj())
    else:
        raise ValidationError(f"unknown measure {measure!r}")
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def random_unitary(d: int, seed=None) -> np.ndarray:
    """Haar unitary via QR of a Ginibre matrix with phase correction."""
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_passive(h: Hamiltonian, seed=None) -> PassiveState:
    """Flat-Dirichlet sample of the population simplex, sorted nonincreasing."""
    rng = np.random.default_rng(seed)
    p = np.sort(rng.dirichlet(np.ones(h.dim)))[::-1]
    return PassiveState(p, h)


def project_to_simplex(v, total: float = 1.0) -> np.ndarray:
    """Euclidean projection of a real vector onto {x >= 0, sum x = total}."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    return np.maximum(v - tau, 0.0)


def project_to_states(m) -> np.ndarray:
    """Nearest density matrix (Frobenius) to a Hermitian matrix."""
    m = np.asarray(m, dtype=complex)
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    w = project_to_simplex(w)
    out = (v * w) @ v.conj().T
    return 0.5 * (out + out.conj().T)


def dephase(h: Hamiltonian, rho) -> np.ndarray:
    """Remove energy-basis coherences."""
    return h.embed(energy_populations(h, rho))
