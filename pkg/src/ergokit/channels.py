"""CPTP maps in Kraus form, the named maps of the two resource theories,
random channels, thermal operations and Kraus-resolved outcomes.

State-dependent maps (the ergotropy-extracting unitary, Lambda_beta with a
state-dependent beta) are not linear, so they are modelled as a
:class:`ChannelFamily`: a rule that picks a :class:`KrausChannel` for each
input state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .exceptions import ValidationError
from .spectra import (
    INFINITE,
    Hamiltonian,
    extraction_unitary,
    gibbs,
    is_infinite,
    random_unitary,
    validate_state,
)
from .workfn import beta_of_state

COMPLETENESS_ATOL = 1e-9
UNITAL_ATOL = 1e-9
ENERGY_BUCKET_ATOL = 1e-9
THERMAL_DIM_CAP = 64


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Lambda(rho) = sum_i K_i rho K_i^dag with sum_i K_i^dag K_i = I."""

    kraus: np.ndarray
    label: str = ""

    def __post_init__(self):
        k = np.array(self.kraus, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[0] == 0 or k.shape[1] != k.shape[2]:
            raise ValidationError(f"Kraus operators must be a nonempty stack of square matrices, got {k.shape}")
        err = np.abs(np.einsum("kji,kjl->il", k.conj(), k) - np.eye(k.shape[1])).max()
        if err > COMPLETENESS_ATOL:
            raise ValidationError(f"Kraus completeness violated by {err:.3g}")
        k.setflags(write=False)
        object.__setattr__(self, "kraus", k)

    @property
    def dim(self) -> int:
        return self.kraus.shape[1]

    def __len__(self):
        return self.kraus.shape[0]

    def __call__(self, rho):
        return apply(self, rho)

    def resolve(self, rho=None) -> "KrausChannel":
        return self


@dataclass(frozen=True, eq=False)
class ChannelFamily:
    """A rule assigning a KrausChannel to each input state."""

    name: str
    rule: Callable[[np.ndarray], KrausChannel] = field(repr=False)
    params: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"{self.name}({args})"

    def resolve(self, rho) -> KrausChannel:
        return self.rule(validate_state(rho))

    def __call__(self, rho):
        return apply(self, rho)


class SelectiveOutcome(NamedTuple):
    probability: float
    state: np.ndarray


def apply(ch, rho) -> np.ndarray:
    rho = validate_state(rho)
    ch = ch.resolve(rho)
    if rho.shape[0] != ch.dim:
        raise ValidationError(f"channel acts on d={ch.dim}, state has d={rho.shape[0]}")
    k = ch.kraus
    out = np.einsum("kij,jl,kml->im", k, rho, k.conj())
    return 0.5 * (out + out.conj().T)


def choi_matrix(ch: KrausChannel) -> np.ndarray:
    """sum_ij |i><j| (x) Lambda(|i><j|)."""
    d = ch.dim
    k = ch.kraus
    # vec(K) stacked: Choi = sum_k |K_k>> <<K_k| with row-major input index first
    vecs = np.transpose(k, (0, 2, 1)).reshape(len(ch), d * d)
    return np.einsum("ka,kb->ab", vecs, vecs.conj())


def is_cptp(ch: KrausChannel, atol: float = 1e-10) -> bool:
    c = choi_matrix(ch)
    d = ch.dim
    if np.linalg.eigvalsh(0.5 * (c + c.conj().T)).min() < -atol:
        return False
    # partial trace over the output factor gives the identity for TP maps
    ptr = np.einsum("iaja->ij", c.reshape(d, d, d, d))
    return np.abs(ptr - np.eye(d)).max() <= COMPLETENESS_ATOL


def is_unital(ch: KrausChannel) -> bool:
    k = ch.kraus
    return np.abs(np.einsum("kij,klj->il", k, k.conj()) - np.eye(ch.dim)).max() <= UNITAL_ATOL


def selective_outcomes(ch, rho) -> list[SelectiveOutcome]:
    """(q_i, K_i rho K_i^dag / q_i) for every Kraus operator with q_i > 1e-12."""
    rho = validate_state(rho)
    ch = ch.resolve(rho)
    outs = []
    for k in ch.kraus:
        m = k @ rho @ k.conj().T
        q = float(np.trace(m).real)
        if q > 1e-12:
            m = m / q
            outs.append(SelectiveOutcome(q, 0.5 * (m + m.conj().T)))
    return outs


def _in_lab(h: Hamiltonian, ops):
    v = h.vectors
    return np.einsum("ij,kjl,ml->kim", v, np.asarray(ops, dtype=complex), v.conj())


def identity_channel(d: int) -> KrausChannel:
    return KrausChannel(np.eye(d, dtype=complex)[None], label="identity")


def dephasing(h: Hamiltonian, representation: str = "projectors") -> KrausChannel:
    """Energy-basis dephasing.

    ``"projectors"`` gives the d rank-one projectors |eps_k><eps_k|;
    ``"phases"`` gives the same map as d equally weighted diagonal phase
    unitaries Z^m / sqrt(d), Z = sum_k exp(2 pi i k/d)|eps_k><eps_k|. The two
    realizations differ only in their selective outcomes.
    """
    d = h.dim
    if representation == "projectors":
        ops = np.zeros((d, d, d), dtype=complex)
        ops[np.arange(d), np.arange(d), np.arange(d)] = 1.0
    elif representation == "phases":
        omega = np.exp(2j * np.pi * np.arange(d) / d)
        ops = np.stack([np.diag(omega**m) for m in range(d)]) / math.sqrt(d)
    else:
        raise ValidationError(f"unknown dephasing representation {representation!r}")
    return KrausChannel(_in_lab(h, ops), label=f"dephasing[{representation}]")


def partial_dephasing(h: Hamiltonian, coeffs) -> KrausChannel:
    """Entrywise (Schur) multiplication of energy-basis coherences by ``coeffs``.

    The map is completely positive iff ``coeffs`` is positive semidefinite,
    so that is required in addition to the unit diagonal.
    """
    c = np.asarray(coeffs, dtype=complex)
    d = h.dim
    if c.shape != (d, d):
        raise ValidationError(f"coefficient matrix must be {d}x{d}")
    if np.abs(c - c.conj().T).max() > 1e-10:
        raise ValidationError("coefficient matrix must be Hermitian")
    if np.abs(np.diag(c) - 1).max() > 1e-10:
        raise ValidationError("coefficient matrix must have unit diagonal")
    w, v = np.linalg.eigh(0.5 * (c + c.conj().T))
    if w.min() < -1e-10:
        raise ValidationError("coefficient matrix is not positive semidefinite (map not CP)")
    keep = w > 1e-14
    ops = np.stack([math.sqrt(wm) * np.diag(v[:, m]) for m, wm in zip(np.nonzero(keep)[0], w[keep])])
    return KrausChannel(_in_lab(h, ops), label="partial-dephasing")


def _pure_decomposition(m, tol=1e-14):
    w, v = np.linalg.eigh(m)
    keep = w > tol
    return w[keep], v[:, keep]


def coherent_gibbs(h: Hamiltonian, beta) -> np.ndarray:
    """|g><g| with |g> = sum_k sqrt(gamma_k) |eps_k>; always a valid sigma' for Lambda_beta."""
    g = np.sqrt(gibbs(h, beta).populations)
    psi = h.vectors @ g
    return np.outer(psi, psi.conj())


def lambda_beta_map(h: Hamiltonian, beta, sigma_prime) -> KrausChannel:
    """Measure |psi_d> vs its complement, prepare sigma' or sigma.

    sigma = d/(d-1) (gamma_beta - sigma'/d) must be positive semidefinite;
    every incoherent input is then sent to gamma_beta.
    """
    d = h.dim
    if d < 2:
        raise ValidationError("Lambda_beta needs d >= 2")
    sp = validate_state(sigma_prime)
    h.check_dim(sp)
    gam = gibbs(h, beta).matrix
    sigma = d / (d - 1) * (gam - sp / d)
    sigma = 0.5 * (sigma + sigma.conj().T)
    if np.linalg.eigvalsh(sigma).min() < -1e-10:
        raise ValidationError("sigma = d/(d-1)(gamma_beta - sigma'/d) is not positive semidefinite")
    psi = h.vectors @ (np.ones(d) / math.sqrt(d))
    comp = np.eye(d) - np.outer(psi, psi.conj())
    _, evec = np.linalg.eigh(comp)
    effects = evec[:, 1:]  # eigenvalue-1 subspace of the complement projector
    ops = []
    t, vecs = _pure_decomposition(sigma)
    for tj, vec in zip(t, vecs.T):
        for m in range(effects.shape[1]):
            ops.append(math.sqrt(tj) * np.outer(vec, effects[:, m].conj()))
    t, vecs = _pure_decomposition(sp)
    for tj, vec in zip(t, vecs.T):
        ops.append(math.sqrt(tj) * np.outer(vec, psi.conj()))
    b = "inf" if is_infinite(beta) else f"{float(beta):.6g}"
    return KrausChannel(np.stack(ops), label=f"lambda_beta(beta={b})")


def thermalizing(h: Hamiltonian, beta) -> KrausChannel:
    """Constant map rho -> gamma_beta, built as Lambda_beta with sigma' = gamma_beta."""
    if not is_infinite(beta) and beta < 0:
        raise ValidationError("thermalizing map needs beta >= 0")
    ch = lambda_beta_map(h, beta, gibbs(h, beta).matrix)
    b = "inf" if is_infinite(beta) else f"{float(beta):.6g}"
    return KrausChannel(ch.kraus, label=f"thermalizing(beta={b})")


def unitary_channel(u, label: str = "unitary") -> KrausChannel:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValidationError("unitary must be square")
    if np.abs(u.conj().T @ u - np.eye(u.shape[0])).max() > 1e-10:
        raise ValidationError("matrix is not unitary")
    return KrausChannel(u[None], label=label)


def level_swap(h: Hamiltonian, i: int = 0, j: int = -1) -> KrausChannel:
    """Unitary exchanging energy levels i and j (default ground and top)."""
    d = h.dim
    perm = np.arange(d)
    i, j = i % d, j % d
    perm[[i, j]] = perm[[j, i]]
    u = np.eye(d, dtype=complex)[perm]
    return unitary_channel(_in_lab(h, u[None])[0], label=f"swap({i},{j})")


def mixture(channels: Sequence[KrausChannel], weights) -> KrausChannel:
    """sum_i p_i Lambda_i, Kraus set = union of sqrt(p_i) K."""
    w = np.asarray(weights, dtype=float)
    if len(channels) != w.size or w.size == 0:
        raise ValidationError("need one weight per channel")
    if np.any(w < 0) or abs(w.sum() - 1) > 1e-10:
        raise ValidationError("weights must be a probability vector")
    dims = {c.dim for c in channels}
    if len(dims) != 1:
        raise ValidationError("channels act on different dimensions")
    ops = np.concatenate([math.sqrt(p) * c.kraus for c, p in zip(channels, w) if p > 0])
    label = " + ".join(f"{p:.3g}*{c.label}" for c, p in zip(channels, w))
    return KrausChannel(ops, label=f"mixture[{label}]")


def _energy_blocks(values, atol=ENERGY_BUCKET_ATOL):
    order = np.argsort(values, kind="stable")
    blocks, cur = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if values[b] - values[a] <= atol:
            cur.append(b)
        else:
            blocks.append(cur)
            cur = [b]
    blocks.append(cur)
    return blocks


def thermal_dilation(h: Hamiltonian, h_env: Hamiltonian, seed=None) -> np.ndarray:
    """Haar-random unitary on system (x) environment commuting with H + H_E.

    Drawn independently on each total-energy eigenspace; returned in the
    lab product basis.
    """
    d, de = h.dim, h_env.dim
    if d * de > THERMAL_DIM_CAP:
        raise ValidationError(f"d*d_E = {d * de} exceeds the cap {THERMAL_DIM_CAP}")
    rng = np.random.default_rng(seed)
    tot = np.add.outer(h.eigenvalues, h_env.eigenvalues).ravel()
    u = np.zeros((d * de, d * de), dtype=complex)
    for block in _energy_blocks(tot):
        sub = random_unitary(len(block), seed=rng)
        u[np.ix_(block, block)] = sub
    v = np.kron(h.vectors, h_env.vectors)
    return v @ u @ v.conj().T


def thermal_operation(h: Hamiltonian, h_env: Hamiltonian, beta: float, seed=None) -> KrausChannel:
    """rho -> Tr_E[U (rho (x) gamma^E_beta) U^dag] with [U, H + H_E] = 0."""
    d, de = h.dim, h_env.dim
    u = thermal_dilation(h, h_env, seed=seed).reshape(d, de, d, de)
    g_env = gibbs(h_env, beta).populations
    ve = h_env.vectors
    # environment in its own energy basis: |e_j> = ve[:, j]
    u_e = np.einsum("aj,iakb,bl->ijkl", ve.conj(), u, ve)  # <i, e_j| U |k, e_l>
    ops = []
    for l, gl in enumerate(g_env):
        if gl <= 0:
            continue
        for j in range(de):
            ops.append(math.sqrt(gl) * u_e[:, j, :, l])
    b = "inf" if is_infinite(beta) else f"{float(beta):.6g}"
    return KrausChannel(np.stack(ops), label=f"thermal-operation(beta={b}, d_E={de})")


def random_channel(d: int, kraus_rank: int = 1, seed=None) -> KrausChannel:
    """Stinespring channel from a Haar-random isometry C^d -> C^(d r)."""
    if kraus_rank < 1:
        raise ValidationError("Kraus rank must be >= 1")
    rng = np.random.default_rng(seed)
    n = d * kraus_rank
    z = (rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return KrausChannel(q.reshape(kraus_rank, d, d), label=f"random(rank={kraus_rank})")


def random_unital_channel(d: int, n_unitaries: int = 3, seed=None) -> KrausChannel:
    """Random mixture of Haar unitaries (always unital)."""
    rng = np.random.default_rng(seed)
    w = rng.dirichlet(np.ones(n_unitaries))
    us = [unitary_channel(random_unitary(d, seed=rng)) for _ in range(n_unitaries)]
    return KrausChannel(mixture(us, w).kraus, label=f"random-unital(n={n_unitaries})")


# ------------------------------------------------------------ state-dependent


def extraction_family(h: Hamiltonian) -> ChannelFamily:
    """rho -> U_rho rho U_rho^dag, the ergotropy-extracting unitary for each input."""
    return ChannelFamily(
        "extraction",
        lambda rho: unitary_channel(extraction_unitary(h, rho), label="extraction"),
    )


def lambda_beta_tilde_family(h: Hamiltonian, offset: float = 0.5) -> ChannelFamily:
    """Lambda_beta~ with beta~(rho) = beta(rho) + offset and sigma' the coherent Gibbs state."""
    if offset < 0:
        raise ValidationError("offset must be nonnegative so that beta~ >= beta(rho)")

    def rule(rho):
        b = beta_of_state(h, rho).beta
        bt = INFINITE if is_infinite(b) else b + offset
        return lambda_beta_map(h, bt, coherent_gibbs(h, bt))

    return ChannelFamily("lambda_beta_tilde", rule, {"offset": offset})
