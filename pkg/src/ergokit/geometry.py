"""Divergences, nonequilibrium temperatures, distances and monotones.

Matrix logarithms and powers go through eigendecompositions with an
eigenvalue floor of 1e-14; weight on eigenvectors below the floor is a
support violation and makes a divergence infinite.

Temperatures are returned signed. Optimizers over the passive set discard
candidates whose temperature denominator is below 1e-12 in magnitude or
whose temperature is non-positive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .exceptions import DomainError, ValidationError
from .spectra import (
    INFINITE,
    GibbsState,
    Hamiltonian,
    PassiveState,
    eigvals_desc,
    energy_populations,
    gibbs,
    gibbs_populations,
    is_infinite,
    passive_rearrangement,
    project_to_simplex,
    random_passive,
    shannon,
    validate_state,
)
from .workfn import _Prepared, _solve_beta

EIG_FLOOR = 1e-14
SUPPORT_WEIGHT = 1e-12
DENOM_ATOL = 1e-12
ALPHA_ONE_ATOL = 1e-6
PASSIVE_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class MonotoneResult:
    value: float
    minimizer: PassiveState
    minimizer_param: object  # beta for Gibbs minimizers, populations for passive ones
    method: str  # closed-form | pav | grid+local | multistart
    boundary: bool = False


def _eigh(m):
    w, v = np.linalg.eigh(np.asarray(m, dtype=complex))
    return np.clip(w, 0.0, None), v


# ---------------------------------------------------------------- divergences


def relative_entropy(rho, sigma) -> float:
    """S(rho||sigma) = Tr rho (ln rho - ln sigma); ``math.inf`` off support."""
    rho = validate_state(rho)
    sigma = validate_state(sigma)
    if rho.shape != sigma.shape:
        raise ValidationError("dimension mismatch")
    r, u = _eigh(rho)
    s, v = _eigh(sigma)
    overlap = np.abs(u.conj().T @ v) ** 2  # [i, j] = |<r_i|s_j>|^2
    weight = r @ overlap
    dead = s < EIG_FLOOR
    if np.any(weight[dead] > SUPPORT_WEIGHT):
        return math.inf
    logs = np.log(np.where(dead, 1.0, s))
    value = -shannon(r) - float(weight[~dead] @ logs[~dead])
    return max(value, 0.0)


def _power(w, x):
    with np.errstate(divide="ignore"):
        return np.where(w > EIG_FLOOR, np.power(np.where(w > EIG_FLOOR, w, 1.0), x), 0.0)


def tsallis_divergence(rho, sigma, alpha: float) -> float:
    """S_alpha(rho||sigma) = (Tr rho^a sigma^(1-a) - 1)/(a - 1)."""
    if not alpha > 0:
        raise ValidationError("Tsallis order must be positive")
    if abs(alpha - 1.0) < ALPHA_ONE_ATOL:
        return relative_entropy(rho, sigma)
    rho = validate_state(rho)
    sigma = validate_state(sigma)
    if rho.shape != sigma.shape:
        raise ValidationError("dimension mismatch")
    r, u = _eigh(rho)
    s, v = _eigh(sigma)
    overlap = np.abs(u.conj().T @ v) ** 2
    weight = _power(r, alpha) @ overlap
    dead = s < EIG_FLOOR
    if alpha > 1 and np.any(weight[dead] > SUPPORT_WEIGHT):
        return math.inf
    q = float(weight[~dead] @ np.power(s[~dead], 1.0 - alpha))
    return (q - 1.0) / (alpha - 1.0)


# --------------------------------------------------------------- temperatures


def _free_matrix(h: Hamiltonian, free):
    if isinstance(free, PassiveState):
        return free.matrix
    m = validate_state(free)
    h.check_dim(m)
    return m


def _require_ergotropy(prep: _Prepared) -> float:
    erg = prep.ergotropy()
    if erg <= 1e-12:
        raise DomainError("temperature undefined: rho is passive (zero ergotropy)")
    return erg


def noneq_temperature(h: Hamiltonian, p, rho) -> float:
    """T(P|rho) = ergotropy(rho) / Tr[(P_rho - rho) ln P].

    ``p`` is a :class:`PassiveState` or any full-rank density matrix.
    Reduces to 1/beta when P is a Gibbs state.
    """
    prep = _Prepared(h, rho)
    erg = _require_ergotropy(prep)
    q = _free_matrix(h, p)
    w, v = _eigh(q)
    if w.min() < EIG_FLOOR:
        raise DomainError("temperature undefined: P is rank deficient")
    log_q = h.to_energy_basis((v * np.log(w)) @ v.conj().T)
    rho_e = h.to_energy_basis(validate_state(rho))
    den = float(np.dot(prep.r, np.real(np.diag(log_q))) - np.real(np.trace(rho_e @ log_q)))
    if abs(den) < 1e-14:
        raise DomainError("temperature undefined: vanishing denominator")
    return erg / den


def _mpow(m, x):
    w, v = _eigh(m)
    return (v * _power(w, x)) @ v.conj().T


def tsallis_temperature_p(h: Hamiltonian, p, rho, alpha: float) -> float:
    """T_alpha(P|rho) = (1-a) ergotropy / Tr[(P_rho^a - rho^a) P^(1-a)]."""
    if not alpha > 0:
        raise ValidationError("Tsallis order must be positive")
    if abs(alpha - 1.0) < ALPHA_ONE_ATOL:
        return noneq_temperature(h, p, rho)
    prep = _Prepared(h, rho)
    erg = _require_ergotropy(prep)
    q = _free_matrix(h, p)
    if np.linalg.eigvalsh(q).min() < EIG_FLOOR:
        raise DomainError("temperature undefined: P is rank deficient")
    q_e = h.to_energy_basis(_mpow(q, 1.0 - alpha))
    rho_a = h.to_energy_basis(_mpow(validate_state(rho), alpha))
    den = float(np.dot(_power(prep.r, alpha), np.real(np.diag(q_e))) - np.real(np.trace(rho_a @ q_e)))
    if abs(den) < 1e-14:
        raise DomainError("temperature undefined: vanishing denominator")
    return (1.0 - alpha) * erg / den


def _gibbs_target(prep: _Prepared):
    sol = _solve_beta(prep.eps, shannon(prep.r))
    return sol.beta, gibbs_populations(prep.eps, sol.beta)


def tsallis_temperature_cp(h: Hamiltonian, gamma: GibbsState, rho, alpha: float) -> float:
    """T_cp,alpha(gamma|rho) = (1-a) F(rho) / Tr[(gamma_rho^a - rho^a) gamma^(1-a)]."""
    if not alpha > 0:
        raise ValidationError("Tsallis order must be positive")
    if is_infinite(gamma.beta):
        raise DomainError("temperature undefined for the zero-temperature Gibbs state")
    prep = _Prepared(h, rho)
    f = prep.free_energy()
    if f <= 1e-12:
        raise DomainError("temperature undefined: rho is a Gibbs state (zero free energy)")
    _, g_rho = _gibbs_target(prep)
    g = np.asarray(gamma.populations)
    if abs(alpha - 1.0) < ALPHA_ONE_ATOL:
        den = float(np.dot(g_rho - prep.a, np.log(g)))
        if abs(den) < 1e-14:
            raise DomainError("temperature undefined: vanishing denominator")
        return f / den
    rho_a = h.to_energy_basis(_mpow(validate_state(rho), alpha))
    gp = np.power(g, 1.0 - alpha)
    den = float(np.dot(_power(g_rho, alpha), gp) - np.dot(np.real(np.diag(rho_a)), gp))
    if abs(den) < 1e-14:
        raise DomainError("temperature undefined: vanishing denominator")
    return (1.0 - alpha) * f / den


def distance_to_free(h: Hamiltonian, rho, free) -> float:
    """D(rho, free): T(gamma) S(rho||gamma) for Gibbs states, T(P|rho) S(rho||P) otherwise."""
    rho = validate_state(rho)
    if isinstance(free, GibbsState):
        if is_infinite(free.beta) or free.beta <= 0:
            raise DomainError("distance needs a Gibbs state with 0 < beta < infinity")
        return relative_entropy(rho, free.matrix) / free.beta
    if not isinstance(free, PassiveState):
        raise ValidationError("free state must be a GibbsState or PassiveState")
    t = noneq_temperature(h, free, rho)
    if t <= 0:
        raise DomainError("distance undefined: non-positive nonequilibrium temperature")
    return t * relative_entropy(rho, free.matrix)


# ------------------------------------------------------------- passive set


def pav_decreasing(y, w=None) -> np.ndarray:
    """Antitonic (nonincreasing) least-squares fit by pool-adjacent-violators."""
    y = np.asarray(y, dtype=float)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float)
    vals, wts, sizes = [], [], []
    for yi, wi in zip(y, w):
        vals.append(yi)
        wts.append(wi)
        sizes.append(1)
        while len(vals) > 1 and vals[-2] < vals[-1]:
            v2, w2, n2 = vals.pop(), wts.pop(), sizes.pop()
            wsum = wts[-1] + w2
            vals[-1] = (vals[-1] * wts[-1] + v2 * w2) / wsum
            wts[-1] = wsum
            sizes[-1] += n2
    return np.repeat(vals, sizes)


def project_ordered_simplex(y, floor: float = 0.0) -> np.ndarray:
    """Euclidean projection onto {p_1 >= ... >= p_d >= floor, sum p = 1}.

    The isotonic fit commutes with constant shifts, so projecting its
    output onto the simplex solves the joint problem.
    """
    y = np.asarray(y, dtype=float)
    d = y.size
    q = project_to_simplex(pav_decreasing(y - floor), total=1.0 - d * floor)
    return q + floor


def monotone_Mp(h: Hamiltonian, rho) -> MonotoneResult:
    """min over passive P of S(rho||P), solved exactly by PAV on the energy populations."""
    rho = validate_state(rho)
    h.check_dim(rho)
    a = energy_populations(h, rho)
    a = np.clip(a, 0.0, None)
    a = a / a.sum()
    p = np.clip(pav_decreasing(a), 0.0, None)
    p = p / p.sum()
    live = a > 0
    value = -shannon(eigvals_desc(rho)) - float(np.dot(a[live], np.log(p[live])))
    value = max(value, 0.0)
    return MonotoneResult(value, PassiveState(p, h), p, "pav")


class _PassiveObjective:
    """T_alpha(P|rho)^nu S_alpha(rho||P) as a function of passive populations.

    Everything reduces to d-vectors because every passive P is diagonal in
    the energy basis: r are the eigenvalues of rho (descending) and b the
    energy-basis diagonal of rho^alpha.
    """

    def __init__(self, h: Hamiltonian, rho, alpha: float, nu: float):
        prep = _Prepared(h, rho)
        self.alpha, self.nu = alpha, nu
        self.one = abs(alpha - 1.0) < ALPHA_ONE_ATOL
        self.erg = prep.ergotropy()
        self.r = prep.r
        self.a = prep.a
        self.s_rho = shannon(prep.r)
        if not self.one:
            rho_a = h.to_energy_basis(_mpow(validate_state(rho), alpha))
            self.b = np.real(np.diag(rho_a))
            self.ra = _power(prep.r, alpha)

    def parts(self, p):
        """(S, den, T) arrays for a batch of population rows; T = erg / den."""
        p = np.atleast_2d(p)
        if self.one:
            with np.errstate(divide="ignore", invalid="ignore"):
                lp = np.log(p)
                s = -self.s_rho - np.where(self.a > 0, self.a * lp, 0.0).sum(axis=1)
                den = np.where(self.r - self.a != 0, (self.r - self.a) * lp, 0.0).sum(axis=1)
            raw = den
        else:
            pp = np.power(p, 1.0 - self.alpha)
            big_a = pp @ self.ra
            big_b = pp @ self.b
            s = (big_b - 1.0) / (self.alpha - 1.0)
            raw = big_a - big_b
            den = raw / (1.0 - self.alpha)
        return s, den, raw

    def __call__(self, p):
        s, den, raw = self.parts(p)
        if self.nu == 0:
            out = s
        else:
            ok = (np.abs(raw) >= DENOM_ATOL) & (den > 0) & (s >= 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = self.erg / den
                out = np.where(ok, np.power(t, self.nu) * s, np.inf)
        out = np.where(np.isfinite(out), out, np.inf)
        return out if np.ndim(p) == 2 else float(out[0])

    def grad(self, p):
        p = np.atleast_2d(np.asarray(p, dtype=float))
        s, den, _ = self.parts(p)
        s, den = s[:, None], den[:, None]
        if self.one:
            ds = -self.a / p
            dden = (self.r - self.a) / p
        else:
            pa = np.power(p, -self.alpha)
            ds = -self.b * pa
            dden = (self.ra - self.b) * pa
        if self.nu == 0:
            return ds
        with np.errstate(divide="ignore", invalid="ignore"):
            f = (self.erg / den) ** self.nu * s
            return f * (-self.nu * dden / den + ds / s)


def _antitonic_batch(y):
    """Row-wise nonincreasing least-squares fit.

    Uses the min-max formula x_k = min_{i<=k} max_{j>=k} mean(y[i..j]),
    which vectorizes over rows; O(d^2) per row.
    """
    n, d = y.shape
    c = np.concatenate([np.zeros((n, 1)), np.cumsum(y, axis=1)], axis=1)
    i = np.arange(d)[:, None]
    j = np.arange(d)[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        means = (c[:, None, 1:] - c[:, :-1, None]) / (j - i + 1)  # [row, i, j]
    out = np.empty_like(y)
    for k in range(d):
        block = means[:, : k + 1, k:]
        out[:, k] = block.max(axis=2).min(axis=1)
    return out


def _simplex_batch(v, total):
    n, d = v.shape
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - total
    k = np.arange(1, d + 1)
    cond = u - css / k > 0
    rho = d - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(n), rho] / (rho + 1)
    return np.maximum(v - tau[:, None], 0.0)


def _project_batch(y, floor):
    d = y.shape[1]
    return _simplex_batch(_antitonic_batch(y - floor), 1.0 - d * floor) + floor


PRUNE_EVERY = 25


def _descend(obj: _PassiveObjective, p0, iters: int = 500):
    """Projected gradient descent with per-row Armijo backtracking, all starts at once."""
    p = _project_batch(np.atleast_2d(np.asarray(p0, dtype=float)), PASSIVE_FLOOR)
    fp = obj(p)
    active = np.isfinite(fp)
    step = np.ones(p.shape[0])
    mark = fp.copy()
    for it in range(iters):
        if not active.any():
            break
        if it and it % PRUNE_EVERY == 0:
            # drop starts that cannot reach the incumbent even if they kept
            # their recent (decelerating) rate of decrease for the remaining budget
            with np.errstate(invalid="ignore"):
                reach = fp - (mark - fp) * (iters - it) / PRUNE_EVERY
            active &= ~(reach > fp.min() + 1e-9)
            mark = fp.copy()
        idx = np.nonzero(active)[0]
        g = obj.grad(p[idx])
        bad = ~np.all(np.isfinite(g), axis=1)
        gn = np.linalg.norm(np.where(bad[:, None], 0.0, g), axis=1)
        stop = bad | (gn == 0)
        g = np.where(stop[:, None], 0.0, g)
        s = step[idx] / np.where(gn > 0, gn, 1.0)
        pending = ~stop
        q = p[idx].copy()
        fq = fp[idx].copy()
        for _ in range(60):
            if not pending.any():
                break
            rows = np.nonzero(pending)[0]
            cand = _project_batch(p[idx[rows]] - s[rows, None] * g[rows], PASSIVE_FLOOR)
            fc = obj(cand)
            dec = np.einsum("ij,ij->i", g[rows], p[idx[rows]] - cand)
            ok = np.isfinite(fc) & (fc <= fp[idx[rows]] - 1e-4 * dec)
            q[rows[ok]] = cand[ok]
            fq[rows[ok]] = fc[ok]
            pending[rows[ok]] = False
            s[rows[~ok]] *= 0.5
        stop |= pending
        moved = np.abs(q - p[idx]).max(axis=1) > 1e-15
        stop |= ~moved
        converged = fp[idx] - fq <= 1e-12 * np.maximum(1.0, np.abs(fp[idx]))
        upd = ~stop
        p[idx[upd]] = q[upd]
        fp[idx[upd]] = fq[upd]
        step[idx] = np.minimum(s * gn * 2.0, 1.0)
        active[idx[stop | converged]] = False
    return p, fp


def family_Mp(h: Hamiltonian, rho, alpha: float, nu: float, seed: int = 0, starts: int = 20) -> MonotoneResult:
    """min over passive P of T_alpha(P|rho)^nu S_alpha(rho||P).

    Multistart projected descent: starts at P_rho, at the exact minimizer of
    the relative-entropy monotone and at ``starts`` random passive states.
    """
    if not alpha > 0:
        raise ValidationError("Tsallis order must be positive")
    if not 0.0 <= nu <= 1.0:
        raise ValidationError("nu must lie in [0, 1]")
    rho = validate_state(rho)
    obj = _PassiveObjective(h, rho, alpha, nu)
    if nu > 0 and obj.erg <= 1e-12:
        raise DomainError("family with nu > 0 is undefined on passive states")
    if nu == 0 and obj.erg <= 1e-12 and abs(obj.a - obj.r).max() < 1e-12:
        # rho is itself diagonal and passive
        return MonotoneResult(0.0, PassiveState(obj.r, h), obj.r, "closed-form")
    inits = [obj.r, monotone_Mp(h, rho).minimizer_param]
    inits += [random_passive(h, seed=(seed, k)).populations for k in range(starts)]
    ps, fs = _descend(obj, np.array(inits))
    if not np.isfinite(fs).any():
        raise DomainError("no passive state with positive nonequilibrium temperature found")
    k = int(np.argmin(fs))
    return MonotoneResult(float(fs[k]), PassiveState(ps[k], h), ps[k], "multistart")


# ---------------------------------------------------------------- Gibbs set


def _beta_grid(h: Hamiltonian, points: int = 400) -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(-4, 4, points) / h.gap])


def _log_gibbs(eps, betas):
    """ln gamma_beta populations for a vector of finite betas, shape (n, d)."""
    shifted = eps - eps[0]
    x = -np.outer(betas, shifted)
    return x - np.log(np.exp(x).sum(axis=1, keepdims=True))


def _refine(fun, grid, vals, xatol=1e-13):
    i = int(np.argmin(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    best_x, best_v = grid[i], vals[i]
    if hi > lo:
        res = minimize_scalar(fun, bounds=(lo, hi), method="bounded",
                              options={"xatol": xatol * max(1.0, hi)})
        if np.isfinite(res.fun) and res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    return best_x, best_v, i


def monotone_Mcp(h: Hamiltonian, rho) -> MonotoneResult:
    """min over beta >= 0 of S(rho||gamma_beta), with the minimizing beta.

    The objective -S(rho) + beta <H - eps_1>_rho + ln Z is convex in beta;
    a 400-point log grid locates the basin and a bounded scalar search
    refines it. A minimum at beta = 0 is reported as a boundary solution.
    """
    rho = validate_state(rho)
    h.check_dim(rho)
    prep = _Prepared(h, rho)
    eps = prep.eps
    s_rho = shannon(prep.r)
    if h.is_trivial:
        val = max(math.log(h.dim) - s_rho, 0.0)
        return MonotoneResult(val, gibbs(h, 0.0), 0.0, "closed-form", boundary=True)
    e_shift = prep.e_rho - eps[0]
    if e_shift <= 1e-14:
        val = max(math.log(h.ground_degeneracy()) - s_rho, 0.0)
        return MonotoneResult(val, gibbs(h, INFINITE), INFINITE, "closed-form", boundary=True)
    shifted = eps - eps[0]

    def fun(b):
        b = np.atleast_1d(b)
        x = -np.outer(b, shifted)
        lz = np.log(np.exp(x).sum(axis=1))
        out = -s_rho + b * e_shift + lz
        return out if out.size > 1 else float(out[0])

    grid = _beta_grid(h)
    vals = fun(grid)
    beta, val, i = _refine(fun, grid, vals)
    boundary = i == 0 and beta == 0.0 or i == grid.size - 1
    return MonotoneResult(max(val, 0.0), gibbs(h, beta), beta, "grid+local", boundary=boundary)


class _GibbsObjective:
    def __init__(self, h: Hamiltonian, rho, alpha: float, nu: float):
        prep = _Prepared(h, rho)
        self.eps = prep.eps
        self.alpha, self.nu = alpha, nu
        self.one = abs(alpha - 1.0) < ALPHA_ONE_ATOL
        self.a = prep.a
        self.s_rho = shannon(prep.r)
        self.f = prep.free_energy()
        self.beta_rho, self.g_rho = _gibbs_target(prep)
        if not self.one:
            rho_a = h.to_energy_basis(_mpow(validate_state(rho), alpha))
            self.b = np.real(np.diag(rho_a))
            self.ga = _power(self.g_rho, alpha)

    def __call__(self, betas):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return self._eval(betas)

    def _eval(self, betas):
        betas = np.atleast_1d(np.asarray(betas, dtype=float))
        lg = _log_gibbs(self.eps, betas)
        if self.one:
            s = -self.s_rho - lg @ self.a
            raw = lg @ (self.g_rho - self.a)
            den = raw
        else:
            gp = np.exp((1.0 - self.alpha) * lg)
            s = (gp @ self.b - 1.0) / (self.alpha - 1.0)
            raw = gp @ self.ga - gp @ self.b
            den = raw / (1.0 - self.alpha)
        if self.nu == 0:
            out = s
        else:
            ok = (np.abs(raw) >= DENOM_ATOL) & (den > 0) & (s >= 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(ok, np.power(self.f / den, self.nu) * s, np.inf)
        out = np.where(np.isfinite(out), out, np.inf)
        return out if out.size > 1 else float(out[0])


def family_Mcp(h: Hamiltonian, rho, alpha: float, nu: float) -> MonotoneResult:
    """min over beta >= 0 of T_cp,alpha(gamma_beta|rho)^nu S_alpha(rho||gamma_beta)."""
    if not alpha > 0:
        raise ValidationError("Tsallis order must be positive")
    if not 0.0 <= nu <= 1.0:
        raise ValidationError("nu must lie in [0, 1]")
    rho = validate_state(rho)
    h.check_dim(rho)
    if h.is_trivial:
        raise DomainError("Gibbs family is degenerate for a constant Hamiltonian")
    obj = _GibbsObjective(h, rho, alpha, nu)
    if nu > 0 and obj.f <= 1e-12:
        raise DomainError("family with nu > 0 is undefined on Gibbs states")
    grid = _beta_grid(h)
    if not is_infinite(obj.beta_rho):
        grid = np.unique(np.append(grid, obj.beta_rho))
    vals = obj(grid)
    if not np.isfinite(vals).any():
        raise DomainError("no Gibbs state with positive nonequilibrium temperature found")
    beta, val, i = _refine(obj, grid, vals)
    boundary = (i == 0 and beta == 0.0) or i == grid.size - 1
    return MonotoneResult(max(val, 0.0), gibbs(h, beta), beta, "grid+local", boundary=boundary)


def helmholtz_excess(h: Hamiltonian, rho, beta: float) -> float:
    """Delta F_beta(rho) = F_beta(rho) - F_beta(gamma_beta) from energies and entropies."""
    rho = validate_state(rho)
    g = gibbs(h, beta)
    prep = _Prepared(h, rho)
    e_g = float(np.dot(g.populations, h.eigenvalues))
    return (prep.e_rho - e_g) - (shannon(prep.r) - shannon(g.populations)) / beta
