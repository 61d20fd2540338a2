"""Work-extraction functionals: ergotropy, free energy and n-copy ergotropy."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .exceptions import ValidationError
from .spectra import (
    INFINITE,
    Hamiltonian,
    eigvals_desc,
    energy_populations,
    gibbs_populations,
    is_infinite,
    passive_rearrangement,
    shannon,
    validate_state,
)

ENTROPY_ATOL = 1e-10
BETA_SPAN = 1e4
NCOPY_CAP = 2_000_000


@dataclass(frozen=True)
class BetaSolution:
    beta: float  # INFINITE when S(rho) <= ln(ground degeneracy)
    achieved_entropy: float
    residual: float

    @property
    def is_infinite(self) -> bool:
        return is_infinite(self.beta)


def gibbs_entropy(eps, beta: float) -> float:
    """S(gamma_beta) = beta <H - eps_1> + ln Z, evaluated without overflow."""
    shifted = np.asarray(eps, dtype=float) - eps[0]
    if is_infinite(beta):
        return math.log(int(np.sum(shifted <= 1e-12)))
    w = np.exp(-beta * shifted)
    z = w.sum()
    return float(beta * np.dot(w, shifted) / z + math.log(z))


def gibbs_energy(eps, beta) -> float:
    return float(np.dot(gibbs_populations(eps, beta), eps))


def _solve_beta(eps, s_target: float) -> BetaSolution:
    eps = np.asarray(eps, dtype=float)
    gap = eps[-1] - eps[0]
    d = eps.size
    if gap <= 1e-12:
        return BetaSolution(0.0, math.log(d), abs(math.log(d) - s_target))
    s_ground = math.log(int(np.sum(eps - eps[0] <= 1e-12)))
    if s_target <= s_ground + ENTROPY_ATOL:
        return BetaSolution(INFINITE, s_ground, abs(s_ground - s_target))
    s_max = math.log(d)
    if s_target >= s_max - ENTROPY_ATOL:
        return BetaSolution(0.0, s_max, abs(s_max - s_target))
    beta_max = BETA_SPAN / gap
    f = lambda b: gibbs_entropy(eps, b) - s_target
    # near-degenerate excited levels can keep S above target at BETA_SPAN / gap
    while f(beta_max) > 0 and beta_max < 1e300:
        beta_max *= 1e3
    beta = brentq(f, 0.0, beta_max, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    achieved = gibbs_entropy(eps, beta)
    residual = abs(achieved - s_target)
    if residual > ENTROPY_ATOL:
        # brentq stalled on a flat stretch; fall back to plain bisection
        lo, hi = 0.0, beta_max
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if f(mid) > 0:
                lo = mid
            else:
                hi = mid
        beta = 0.5 * (lo + hi)
        achieved = gibbs_entropy(eps, beta)
        residual = abs(achieved - s_target)
    return BetaSolution(float(beta), achieved, residual)


def beta_of_state(h: Hamiltonian, rho) -> BetaSolution:
    """Inverse temperature of the Gibbs state with the same entropy as rho."""
    rho = validate_state(rho)
    h.check_dim(rho)
    return _solve_beta(h.eigenvalues, shannon(eigvals_desc(rho)))


class _Prepared:
    """Energy-basis quantities of one state, shared by the functionals."""

    __slots__ = ("eps", "r", "a", "e_rho")

    def __init__(self, h: Hamiltonian, rho):
        rho = validate_state(rho)
        h.check_dim(rho)
        self.eps = h.eigenvalues
        self.r = eigvals_desc(rho)
        self.a = energy_populations(h, rho)
        self.e_rho = float(np.dot(self.eps, self.a))

    def ergotropy(self) -> float:
        return self.e_rho - float(np.dot(self.eps, self.r))

    def free_energy(self) -> float:
        if self.eps[-1] - self.eps[0] <= 1e-12:
            return 0.0
        sol = _solve_beta(self.eps, shannon(self.r))
        return self.e_rho - gibbs_energy(self.eps, sol.beta)


def _clip(x: float) -> float:
    # callers see tiny negative rounding as exactly zero
    return 0.0 if x < 1e-12 else x


def ergotropy(h: Hamiltonian, rho) -> float:
    """E(rho) - E(P_rho)."""
    return _clip(_Prepared(h, rho).ergotropy())


def free_energy(h: Hamiltonian, rho) -> float:
    """E(rho) - E(gamma_rho), gamma_rho the Gibbs state of equal entropy."""
    return _clip(_Prepared(h, rho).free_energy())


def coherent_ergotropy(h: Hamiltonian, rho) -> float:
    rho = validate_state(rho)
    dephased = h.embed(energy_populations(h, rho))
    return _clip(ergotropy(h, rho) - ergotropy(h, dephased))


def ergo_free_identity_gap(h: Hamiltonian, rho) -> float:
    """ergotropy - F(rho) + F(P_rho); zero up to rounding."""
    passive = passive_rearrangement(h, rho).matrix
    return ergotropy(h, rho) - free_energy(h, rho) + free_energy(h, passive)


def _tuple_sums(values, n: int, dtype) -> np.ndarray:
    out = np.zeros(1, dtype=dtype)
    v = np.asarray(values, dtype=dtype)
    for _ in range(n):
        out = (out[:, None] + v[None, :]).ravel()
    return out


def ergotropy_ncopy(h: Hamiltonian, rho, n: int, cap: int = NCOPY_CAP) -> float:
    """Ergotropy of rho^{(x)n} under the non-interacting sum Hamiltonian.

    Works on spectra only: the d^n eigenvalue products are ranked through
    their long-double log sums and paired with the ascending d^n energy
    sums, so no d^n x d^n matrix is ever built.
    """
    if n < 1:
        raise ValidationError("number of copies must be >= 1")
    prep = _Prepared(h, rho)
    d = h.dim
    if d**n > cap:
        raise ValidationError(f"d^n = {d}^{n} exceeds the n-copy cap {cap}")
    with np.errstate(divide="ignore"):
        logr = np.log(prep.r.astype(np.longdouble))
    logs = _tuple_sums(logr, n, np.longdouble)
    sums = _tuple_sums(prep.eps, n, np.longdouble)
    logs = np.sort(logs, kind="stable")[::-1]
    sums = np.sort(sums, kind="stable")
    # exp(-inf) = 0 drops the zero-population tail
    passive_energy = np.sum(np.exp(logs) * sums)
    value = n * np.longdouble(prep.e_rho) - passive_energy
    return _clip(float(value))
