"""Sampled certification of free-operation conditions.

Membership in either set of free operations is universally quantified, so
every check here is a falsification search: ``pass`` means no counterexample
was found in the trials and optimizer starts that the verdict records.
A ``fail`` carries a self-contained certificate (input state, resolved Kraus
operators, image, both sides of the violated inequality) that
:func:`verify_counterexample` re-checks without the original channel object.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .channels import KrausChannel, apply, coherent_gibbs, selective_outcomes
from .exceptions import DomainError, PreconditionError, ValidationError
from .geometry import noneq_temperature, relative_entropy
from .spectra import (
    INFINITE,
    Hamiltonian,
    PassiveState,
    energy_populations,
    gibbs,
    gibbs_populations,
    is_infinite,
    passive_rearrangement,
    project_to_states,
    random_passive,
    random_state,
    validate_state,
)
from .workfn import beta_of_state, ergotropy, free_energy

CONDITIONS = ("F.i", "F.ii", "F.iii", "E.i", "E.ii", "E.iii", "strongF", "strongE", "Ocp-necessary-for-Op")
FIT_TOL = 1e-8
MONO_TOL = 1e-9
ETA_FLOOR = 1e-6
ETA_PROBES = (1e-6, 1e-5, 1e-4)
PERTURB_SIGMA = 0.05


@dataclass
class ConditionVerdict:
    condition: str
    status: str  # "pass" | "fail"
    trials: int
    counterexample: dict | None = None
    note: str = ""
    seed: int | None = None
    starts: int = 0
    tol: float = 0.0
    worst_margin: float = -math.inf
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        from .io import state_to_json

        ce = None
        if self.counterexample is not None:
            ce = dict(self.counterexample)
        if ce is not None and "state" in ce:
            h = Hamiltonian(ce.pop("eigenvalues"), ce.pop("basis"))
            for key in ("state", "image"):
                ce[key] = state_to_json(h, ce[key])
        return {
            "condition": self.condition,
            "status": self.status,
            "trials": self.trials,
            "starts": self.starts,
            "seed": self.seed,
            "tol": self.tol,
            "worst_margin": self.worst_margin,
            "counterexample": ce,
            "note": self.note,
            "details": self.details,
        }


@dataclass
class EtaEstimate:
    gamma_beta: float
    eta: float
    argmax_state: np.ndarray | None
    starts: int
    max_ratio: float  # best F(Lambda(rho))/S(rho||gamma) found, equals eta * T(Lambda(gamma))
    fitted_beta: float  # inverse temperature of the Gibbs state nearest Lambda(gamma)
    fit_residual: float
    boundary: bool  # best value came from the exclusion-ball probes
    flagged: bool  # Lambda(gamma) is not Gibbs at finite positive temperature

    def to_dict(self) -> dict:
        return {
            "gamma_beta": self.gamma_beta,
            "eta": self.eta,
            "max_ratio": self.max_ratio,
            "fitted_beta": self.fitted_beta,
            "fit_residual": self.fit_residual,
            "starts": self.starts,
            "boundary": self.boundary,
            "flagged": self.flagged,
            "argmax_state": None if self.argmax_state is None else self.argmax_state,
        }


# ------------------------------------------------------------------ helpers


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("ERGOKIT_THREADS", "1")))
    except ValueError:
        return 1


def _run(fn, n: int):
    """Evaluate fn(0..n-1); stops at the first failing index (lowest index wins)."""
    workers = _workers()
    if workers == 1:
        for i in range(n):
            r = fn(i)
            if r is not None:
                return i + 1, r
        return n, None
    chunk = 64 * workers
    with ThreadPoolExecutor(workers) as pool:
        for start in range(0, n, chunk):
            idx = range(start, min(n, start + chunk))
            for i, r in zip(idx, pool.map(fn, idx)):
                if r is not None:
                    return i + 1, r
    return n, None


def trace_distance(a, b) -> float:
    return 0.5 * float(np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))).sum())


def nearest_gibbs(h: Hamiltonian, rho) -> tuple[float, float]:
    """(beta', trace distance) of the Gibbs state closest to rho in trace distance.

    Candidates: the entropy- and energy-matched inverse temperatures, a
    log-spaced grid and beta' = infinity, then a bounded scalar refine
    around the best candidate.
    """
    rho = validate_state(rho)
    eps = h.eigenvalues
    gap = eps[-1] - eps[0]
    if gap <= 1e-12:
        return 0.0, trace_distance(rho, np.eye(h.dim) / h.dim)
    m = h.to_energy_basis(rho)

    def dist(b):
        return trace_distance(m, np.diag(gibbs_populations(eps, b)))

    cands = [0.0, INFINITE, *np.logspace(-3, 3, 61) / gap]
    b_s = beta_of_state(h, rho).beta
    cands.append(b_s)
    e = float(np.dot(eps, energy_populations(h, rho)))
    if e - eps[0] > 1e-14 and e < eps.mean():
        f = lambda b: float(np.dot(gibbs_populations(eps, b), eps)) - e
        cands.append(brentq(f, 0.0, 1e4 / gap, xtol=1e-14, maxiter=200) if f(1e4 / gap) < 0 else INFINITE)
    vals = [dist(b) for b in cands]
    k = int(np.argmin(vals))
    best_b, best = cands[k], vals[k]
    finite = sorted(b for b in cands if not is_infinite(b))
    if not is_infinite(best_b):
        j = finite.index(best_b)
        lo = finite[j - 1] if j > 0 else 0.0
        hi = finite[j + 1] if j + 1 < len(finite) else 2 * best_b + 1.0 / gap
        res = minimize_scalar(dist, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 / gap})
        if res.fun < best:
            best_b, best = float(res.x), float(res.fun)
    return best_b, best


def sample_state(h: Hamiltonian, seed: int, i: int) -> np.ndarray:
    """Trial i of the falsification sampler.

    i mod 4 in {0, 1}: Hilbert-Schmidt, 2: Haar-pure, 3: Gibbs state plus a
    Hermitian Gaussian perturbation (sigma = 0.05) projected back to states.
    """
    rng = np.random.default_rng((seed, i))
    d = h.dim
    kind = i % 4
    if kind < 2:
        return random_state(d, "hilbert-schmidt", seed=rng)
    if kind == 2:
        return random_state(d, "haar-pure", seed=rng)
    gap = max(h.gap, 1e-12)
    beta = rng.uniform(0.0, 3.0) / gap
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    pert = PERTURB_SIGMA * 0.5 * (g + g.conj().T)
    return project_to_states(gibbs(h, beta).matrix + pert)


def _resolve(ch, rho) -> KrausChannel:
    return ch.resolve(rho)


def _record(h, functional, state, kch, lhs, rhs, **extra) -> dict:
    image = apply(kch, state)
    rec = {
        "functional": functional,
        "eigenvalues": np.array(h.eigenvalues),
        "basis": None if h.basis is None else np.array(h.basis),
        "state": np.array(state),
        "image": image,
        "kraus": np.array(kch.kraus),
        "lhs": float(lhs),
        "rhs": float(rhs),
        "margin": float(lhs - rhs),
    }
    rec.update(extra)
    return rec


def _functional(name: str):
    return {"free_energy": free_energy, "ergotropy": ergotropy}[name]


def verify_counterexample(record: dict, tol: float = 1e-9) -> dict:
    """Recompute a certificate from its own fields.

    Accepts the in-memory record or its JSON form (as written in a report).
    Returns ``{"ok", "lhs", "rhs", "margin"}``; ``ok`` requires the stored
    image to equal the stored Kraus map applied to the stored state and the
    recomputed margin to match the stored one within ``tol``.
    """
    from .io import decode_complex, state_from_json

    rec = dict(record)
    if isinstance(rec.get("state"), dict):
        h, state = state_from_json(rec["state"])
        _, image = state_from_json(rec["image"])
    else:
        h = Hamiltonian(np.asarray(rec["eigenvalues"], float), rec.get("basis"))
        state, image = validate_state(rec["state"]), validate_state(rec["image"])
    kraus = rec["kraus"]
    if not isinstance(kraus, np.ndarray):
        kraus = decode_complex(kraus)
    kch = KrausChannel(kraus)
    image_ok = np.abs(apply(kch, state) - image).max() <= 1e-9
    fn = rec["functional"]
    if fn in ("free_energy", "ergotropy"):
        f = _functional(fn)
        lhs, rhs = f(h, image), f(h, state)
    elif fn == "gibbs_fit":
        lhs, rhs = nearest_gibbs(h, image)[1], 0.0
    elif fn == "passivity":
        lhs, rhs = ergotropy(h, image), 0.0
    elif fn in ("strong_free_energy", "strong_ergotropy"):
        f = _functional(fn.removeprefix("strong_"))
        lhs = sum(o.probability * f(h, o.state) for o in selective_outcomes(kch, state))
        rhs = f(h, state)
    else:
        raise ValidationError(f"unknown certificate functional {fn!r}")
    margin = lhs - rhs
    ok = bool(image_ok and abs(margin - float(rec["margin"])) <= tol and margin > 0)
    return {"ok": ok, "lhs": float(lhs), "rhs": float(rhs), "margin": float(margin)}


def _verdict(cond, n, found, tol, seed=None, starts=0, note="", worst=-math.inf, details=None):
    return ConditionVerdict(
        cond,
        "fail" if found is not None else "pass",
        n,
        found,
        note,
        seed,
        starts,
        tol,
        found["margin"] if found is not None else worst,
        details or {},
    )


# ---------------------------------------------------------------- theory cp


def check_Fi(ch, h: Hamiltonian, beta_grid, tol: float = FIT_TOL) -> ConditionVerdict:
    """Lambda(gamma_beta) must be Gibbs for every beta on the grid."""
    grid = [b for b in np.atleast_1d(beta_grid)]
    worst = -math.inf
    fits = []
    for b in grid:
        g = gibbs(h, b).matrix
        kch = _resolve(ch, g)
        img = apply(kch, g)
        b_fit, res = nearest_gibbs(h, img)
        fits.append([float(b), b_fit, res])
        worst = max(worst, res)
        if res > tol:
            rec = _record(h, "gibbs_fit", g, kch, res, 0.0, beta=float(b), fitted_beta=b_fit)
            return _verdict("F.i", len(fits), rec, tol, note="image of a Gibbs state is not Gibbs",
                            details={"fits": fits})
    return _verdict("F.i", len(grid), None, tol, worst=worst, details={"fits": fits})


def _passive_anchor(h, seed, i):
    return random_passive(h, seed=np.random.default_rng((seed, i))).matrix


def _monotone_trial(ch, h, seed, fname, tol, worst, anchors=()):
    f = _functional(fname)

    def check(rho, i, **tag):
        kch = _resolve(ch, rho)
        lhs, rhs = f(h, apply(kch, rho)), f(h, rho)
        worst[i % len(worst)] = max(worst[i % len(worst)], lhs - rhs)
        if lhs > rhs + tol:
            return _record(h, fname, rho, kch, lhs, rhs, trial=i, **tag)
        return None

    def trial(i):
        if i < len(anchors):
            return check(anchors[i], i, anchor=True)
        i -= len(anchors)
        found = check(sample_state(h, seed, i), i)
        if found is None and fname == "ergotropy":
            # the passive draw of E.i trial i: an E.i violation is an E.ii violation
            found = check(_passive_anchor(h, seed, i), i, anchor=True)
        return found

    return trial


def _sampled(cond, ch, h, trials, seed, tol, fname, anchors=()):
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    worst = [-math.inf] * 64
    n, found = _run(_monotone_trial(ch, h, seed, fname, tol, worst, anchors), trials + len(anchors))
    note = ""
    if found is not None:
        where = "Gibbs anchor" if fname == "free_energy" and found.get("anchor") else "trial"
        note = f"violation at {where} {found['trial']}"
    return _verdict(cond, max(n - len(anchors), 0), found, tol, seed=seed, worst=max(worst), note=note)


def check_Fii(ch, h: Hamiltonian, trials: int = 1000, seed: int = 0, tol: float = MONO_TOL,
              beta_grid=()) -> ConditionVerdict:
    """No sampled state has F(Lambda(rho)) > F(rho) + tol.

    The Gibbs states at ``beta_grid`` are checked first, so a channel that
    fails F.i on a grid cannot pass F.ii on the same grid unless the
    violation is below ``tol``.
    """
    anchors = [gibbs(h, b).matrix for b in np.atleast_1d(beta_grid)]
    return _sampled("F.ii", ch, h, trials, seed, tol, "free_energy", anchors)


def _ratio(ch, h, gam, rho):
    s = relative_entropy(rho, gam)
    if not np.isfinite(s) or s <= 0:
        return 0.0, s
    return free_energy(h, apply(ch, rho)) / s, s


def eta_ratio(ch, h: Hamiltonian, beta: float, rho) -> float:
    """F(Lambda(rho)) / S(rho||gamma_beta), the quantity maximized for eta."""
    return _ratio(ch, h, gibbs(h, beta).matrix, validate_state(rho))[0]


def _from_params(x, d):
    a = (x[: d * d] + 1j * x[d * d:]).reshape(d, d)
    m = a @ a.conj().T
    return m / np.trace(m).real


def _to_params(rho):
    w, v = np.linalg.eigh(rho)
    a = v * np.sqrt(np.clip(w, 1e-12, None))
    return np.concatenate([a.real.ravel(), a.imag.ravel()])


def _probe(ch, h, gam, sigma, target):
    """State on the segment gamma -> sigma with S(rho||gamma) = target."""
    s1 = relative_entropy(sigma, gam)
    if not np.isfinite(s1) or s1 < target:
        return None
    f = lambda t: relative_entropy((1 - t) * gam + t * sigma, gam) - target
    t = brentq(f, 0.0, 1.0, xtol=1e-15, rtol=1e-14)
    rho = (1 - t) * gam + t * sigma
    r, s = _ratio(ch, h, gam, rho)
    if s < ETA_FLOOR * (1 - 1e-9):
        return None
    return r, rho


def estimate_eta_cp(ch, h: Hamiltonian, beta: float, starts: int = 8, seed: int = 0) -> EtaEstimate:
    """Multistart lower bound on eta_Lambda(gamma_beta).

    Maximizes F(Lambda(rho))/S(rho||gamma) over states outside the exclusion
    ball S(rho||gamma) < 1e-6, plus segment probes from gamma toward random,
    pure and coherent directions at S in {1e-6, 1e-5, 1e-4}. The returned
    eta is the best ratio divided by the temperature of the Gibbs state
    nearest Lambda(gamma).
    """
    if is_infinite(beta) or beta <= 0:
        raise ValidationError("eta is estimated at finite beta > 0")
    d = h.dim
    gam = gibbs(h, beta).matrix
    b_fit, fit_res = nearest_gibbs(h, apply(ch, gam))
    rng = np.random.default_rng((seed, 7919))
    best_r, best_rho, boundary = 0.0, None, False

    def consider(r, rho, on_boundary):
        nonlocal best_r, best_rho, boundary
        if r > best_r:
            best_r, best_rho, boundary = r, rho, on_boundary

    dirs = [coherent_gibbs(h, beta), h.embed(np.eye(d)[0]), h.embed(np.eye(d)[-1])]
    for _ in range(max(starts, 1)):
        dirs.append(random_state(d, "haar-pure", seed=rng))
        dirs.append(random_state(d, "hilbert-schmidt", seed=rng))
    for sigma in dirs:
        for target in ETA_PROBES:
            got = _probe(ch, h, gam, sigma, target)
            if got is not None:
                consider(got[0], got[1], True)

    def obj(x):
        rho = _from_params(x, d)
        s = relative_entropy(rho, gam)
        if not np.isfinite(s):
            return 0.0
        return -free_energy(h, apply(ch, rho)) / max(s, ETA_FLOOR)

    for k in range(max(starts, 1)):
        t = rng.uniform(0.05, 1.0)
        x0 = _to_params((1 - t) * gam + t * random_state(d, seed=rng))
        res = minimize(obj, x0, method="L-BFGS-B", options={"maxiter": 200})
        rho = _from_params(res.x, d)
        r, s = _ratio(ch, h, gam, rho)
        if s >= ETA_FLOOR:
            consider(r, rho, False)

    flagged = fit_res > FIT_TOL or is_infinite(b_fit) or b_fit <= 0
    if is_infinite(b_fit):
        eta = 0.0 if best_r == 0 else math.inf
    else:
        eta = b_fit * best_r
    return EtaEstimate(float(beta), float(eta), best_rho, int(starts), float(best_r),
                       b_fit, float(fit_res), boundary, bool(flagged))


def check_Fiii(ch, h: Hamiltonian, beta_grid, starts: int = 8, seed: int = 0,
               tol: float = 1e-6) -> ConditionVerdict:
    """eta(gamma) T(Lambda(gamma)) <= T(gamma) on the grid (requires F.i)."""
    fi = check_Fi(ch, h, beta_grid)
    if not fi.passed:
        raise PreconditionError("F.iii needs F.i to hold on the same grid")
    etas = []
    worst = -math.inf
    for b in beta_grid:
        if is_infinite(b) or b <= 0:
            continue
        est = estimate_eta_cp(ch, h, b, starts, seed)
        etas.append(est.to_dict())
        lhs, rhs = est.max_ratio, 1.0 / b
        worst = max(worst, lhs - rhs)
        if lhs > rhs + tol:
            kch = _resolve(ch, est.argmax_state)
            rec = _record(h, "free_energy", est.argmax_state, kch,
                          free_energy(h, apply(kch, est.argmax_state)),
                          rhs * relative_entropy(est.argmax_state, gibbs(h, b).matrix), beta=float(b))
            rec["functional"] = "eta_temperature"
            rec["lhs"], rec["rhs"], rec["margin"] = lhs, rhs, lhs - rhs
            return _verdict("F.iii", len(etas), rec, tol, seed=seed, starts=starts, details={"eta": etas})
    return _verdict("F.iii", len(etas), None, tol, seed=seed, starts=starts, worst=worst, details={"eta": etas})


# ----------------------------------------------------------------- theory p


def check_Ei(ch, h: Hamiltonian, trials: int = 1000, seed: int = 0, tol: float = MONO_TOL) -> ConditionVerdict:
    """Images of sampled passive states must be passive (zero ergotropy)."""
    worst = [-math.inf] * 64

    def trial(i):
        p = _passive_anchor(h, seed, i)
        kch = _resolve(ch, p)
        lhs = ergotropy(h, apply(kch, p))
        worst[i % 64] = max(worst[i % 64], lhs)
        return _record(h, "passivity", p, kch, lhs, 0.0, trial=i) if lhs > tol else None

    n, found = _run(trial, trials)
    return _verdict("E.i", n, found, tol, seed=seed, worst=max(worst))


def check_Eii(ch, h: Hamiltonian, trials: int = 1000, seed: int = 0, tol: float = MONO_TOL) -> ConditionVerdict:
    """No sampled state has ergotropy(Lambda(rho)) > ergotropy(rho) + tol.

    Each trial also checks the passive state drawn by :func:`check_Ei` for
    the same seed and index, so passing E.ii implies passing E.i.
    """
    return _sampled("E.ii", ch, h, trials, seed, tol, "ergotropy")


def eta_p_pointwise(ch, h: Hamiltonian, p, rho, tol: float = MONO_TOL) -> dict:
    """eta_Lambda(P|rho) and the pointwise (E,iii) inequality.

    Returns ``status`` "skip" with a reason when a temperature is undefined
    or nonpositive (passive images, rank-deficient Lambda(P), vanishing or
    negative denominators), otherwise the ratio and both inequality checks.
    """
    pm = p.matrix if isinstance(p, PassiveState) else validate_state(p)
    rho = validate_state(rho)
    kch = _resolve(ch, rho)
    img_r, img_p = apply(kch, rho), apply(_resolve(ch, pm), pm)
    try:
        t_in = noneq_temperature(h, pm, rho)
        t_out = noneq_temperature(h, img_p, img_r)
    except DomainError as exc:
        return {"status": "skip", "reason": str(exc)}
    if t_in <= 0 or t_out <= 0:
        return {"status": "skip", "reason": "nonpositive temperature"}
    s_in = relative_entropy(rho, pm)
    s_out = relative_entropy(img_r, img_p)
    erg_out = ergotropy(h, img_r)
    eta = erg_out / (t_out * s_in)
    lhs, rhs = eta * t_out, t_in
    bound = s_out / s_in
    return {
        "status": "ok",
        "eta": eta,
        "lhs": lhs,
        "rhs": rhs,
        "e3_ok": bool(lhs <= rhs + tol),
        "contraction_bound": bound,
        "e2_bound_ok": bool(eta <= bound + tol and bound <= 1 + tol),
        "t_in": t_in,
        "t_out": t_out,
    }


def check_Eiii(ch, h: Hamiltonian, trials: int = 1000, seed: int = 0, tol: float = MONO_TOL) -> ConditionVerdict:
    """Sampled pointwise (E,iii) over random (P, rho) pairs; domain skips are counted."""
    skips = [0]

    def trial(i):
        rng = np.random.default_rng((seed, i, 3))
        p = random_passive(h, seed=rng)
        rho = sample_state(h, seed, i)
        r = eta_p_pointwise(ch, h, p, rho, tol)
        if r["status"] == "skip":
            skips[0] += 1
            return None
        if not r["e3_ok"]:
            kch = _resolve(ch, rho)
            rec = _record(h, "ergotropy", rho, kch, r["lhs"], r["rhs"], trial=i)
            rec["functional"] = "eta_temperature"
            rec["passive"] = p.populations
            return rec
        return None

    n, found = _run(trial, trials)
    return _verdict("E.iii", n, found, tol, seed=seed, note=f"{skips[0]} domain skips")


# ----------------------------------------------------- strong monotonicity


def strong_mono_check(ch, h: Hamiltonian, rho, theory: str = "cp", tol: float = MONO_TOL) -> ConditionVerdict:
    """sum_i q_i f(sigma_i) <= f(rho) for the declared Kraus operators.

    Also reports whether the sufficient condition applies: for ``cp`` every
    selective outcome of gamma_rho is Gibbs and no hotter than gamma_rho;
    for ``p`` every selective outcome of P_rho is passive.
    """
    if theory not in ("cp", "p"):
        raise ValidationError("theory must be 'cp' or 'p'")
    rho = validate_state(rho)
    kch = _resolve(ch, rho)
    fname = "free_energy" if theory == "cp" else "ergotropy"
    f = _functional(fname)
    lhs = sum(o.probability * f(h, o.state) for o in selective_outcomes(kch, rho))
    rhs = f(h, rho)
    if theory == "cp":
        b = beta_of_state(h, rho).beta
        free = gibbs(h, b).matrix
        t_in = gibbs(h, b).temperature
        ok = True
        for o in selective_outcomes(kch, free):
            bi, res = nearest_gibbs(h, o.state)
            ti = 0.0 if is_infinite(bi) else (math.inf if bi == 0 else 1 / bi)
            ok &= res <= FIT_TOL and ti <= t_in * (1 + 1e-9) + 1e-12
    else:
        free = passive_rearrangement(h, rho).matrix
        ok = all(ergotropy(h, o.state) <= tol for o in selective_outcomes(kch, free))
    cond = "strongF" if theory == "cp" else "strongE"
    found = None
    if lhs > rhs + tol:
        found = _record(h, "strong_" + fname, rho, kch, lhs, rhs)
    return _verdict(cond, 1, found, tol, worst=lhs - rhs,
                    note=f"sufficient condition {'applies' if ok else 'does not apply'}",
                    details={"lhs": lhs, "rhs": rhs, "sufficient_condition": bool(ok)})


# ------------------------------------------------------- cross-theory checks


def ocp_to_op_necessary(ch, h: Hamiltonian, beta_grid, starts: int = 8, seed: int = 0,
                        trials: int = 200, tol: float = 1e-6) -> ConditionVerdict:
    """eta(gamma) T(Lambda(gamma)) + delta(gamma) <= T(gamma) on the grid.

    delta = [F(P_rho_gamma) - F(P_Lambda(rho_gamma))] / S(rho_gamma||gamma)
    uses the witness found by :func:`estimate_eta_cp`. A violation predicts
    that the channel is not free in the passive-state theory.
    """
    if not check_Fi(ch, h, beta_grid).passed:
        raise PreconditionError("needs F.i")
    if not check_Fii(ch, h, trials, seed, beta_grid=beta_grid).passed:
        raise PreconditionError("needs F.ii")
    rows = []
    worst = -math.inf
    for b in beta_grid:
        if is_infinite(b) or b <= 0:
            continue
        est = estimate_eta_cp(ch, h, b, starts, seed)
        if est.argmax_state is None:
            rows.append({"beta": float(b), "lhs": 0.0, "rhs": 1 / b, "delta": 0.0})
            continue
        w = est.argmax_state
        s = relative_entropy(w, gibbs(h, b).matrix)
        pw = passive_rearrangement(h, w).matrix
        plw = passive_rearrangement(h, apply(ch, w)).matrix
        delta = (free_energy(h, pw) - free_energy(h, plw)) / s
        lhs, rhs = est.max_ratio + delta, 1.0 / b
        rows.append({"beta": float(b), "lhs": lhs, "rhs": rhs, "delta": delta, "eta": est.eta})
        worst = max(worst, lhs - rhs)
    viol = [r for r in rows if r["lhs"] > r["rhs"] + tol]
    return ConditionVerdict(
        "Ocp-necessary-for-Op",
        "fail" if viol else "pass",
        len(rows),
        None,
        "inequality violated: channel predicted outside the passive-state free set" if viol else "",
        seed,
        starts,
        tol,
        worst,
        {"rows": rows},
    )


def distance_decomposition_check(h: Hamiltonian, rho, tol: float = 1e-8) -> bool:
    """F(rho) = ergotropy(rho) + F(P_rho) within tol."""
    rho = validate_state(rho)
    p = passive_rearrangement(h, rho).matrix
    return abs(free_energy(h, rho) - ergotropy(h, rho) - free_energy(h, p)) <= tol


def convexity_suite(h: Hamiltonian, trials: int = 1000, seed: int = 0, tol: float = MONO_TOL) -> ConditionVerdict:
    """Ergotropy convexity and closure of passive states under mixing.

    The details also report the nearest-Gibbs residual of an equal mixture of
    two Gibbs states, nonzero whenever the Gibbs set is not convex (d >= 3
    with at least three distinct levels).
    """
    def trial(i):
        rng = np.random.default_rng((seed, i, 11))
        r1, r2 = random_state(h.dim, seed=rng), random_state(h.dim, seed=rng)
        lam = rng.uniform()
        mix = lam * r1 + (1 - lam) * r2
        lhs = ergotropy(h, mix)
        rhs = lam * ergotropy(h, r1) + (1 - lam) * ergotropy(h, r2)
        if lhs > rhs + tol:
            return {"kind": "convexity", "lhs": lhs, "rhs": rhs, "margin": lhs - rhs, "trial": i}
        p1, p2 = random_passive(h, seed=rng).matrix, random_passive(h, seed=rng).matrix
        e = ergotropy(h, lam * p1 + (1 - lam) * p2)
        if e > tol:
            return {"kind": "passive-closure", "lhs": e, "rhs": 0.0, "margin": e, "trial": i}
        return None

    n, found = _run(trial, trials)
    gap = max(h.gap, 1e-12)
    mix = 0.5 * gibbs(h, 0.5 / gap).matrix + 0.5 * gibbs(h, 2.0 / gap).matrix
    _, res = nearest_gibbs(h, mix)
    return ConditionVerdict("convexity", "fail" if found else "pass", n, found,
                            "" if found is None else f"{found['kind']} violated at trial {found['trial']}",
                            seed, 0, tol, found["margin"] if found else -math.inf,
                            {"gibbs_mixture_residual": res})


# -------------------------------------------------------------- classification


def classify(ch, h: Hamiltonian, theory: str = "both", beta_grid=(0.5, 1.0, 2.0), trials: int = 1000,
             seed: int = 0, tol: float = MONO_TOL, starts: int = 8, eta: bool = True) -> dict:
    """Run all checks of one or both theories and collect them in a report dict."""
    if theory not in ("cp", "p", "both"):
        raise ValidationError("theory must be cp, p or both")
    label = getattr(ch, "label", "")
    verdicts, etas = [], []
    if theory in ("cp", "both"):
        fi = check_Fi(ch, h, beta_grid)
        verdicts.append(fi)
        verdicts.append(check_Fii(ch, h, trials, seed, tol, beta_grid))
        if eta:
            if fi.passed:
                fiii = check_Fiii(ch, h, beta_grid, starts, seed)
                verdicts.append(fiii)
                etas = fiii.details.get("eta", [])
            else:
                for b in beta_grid:
                    if not is_infinite(b) and b > 0:
                        etas.append(estimate_eta_cp(ch, h, b, starts, seed).to_dict())
    if theory in ("p", "both"):
        verdicts.append(check_Ei(ch, h, trials, seed, tol))
        verdicts.append(check_Eii(ch, h, trials, seed, tol))
        verdicts.append(check_Eiii(ch, h, trials, seed, tol))
    return {
        "channel": label,
        "theory": theory,
        "verdicts": [v.to_dict() for v in verdicts],
        "eta": etas,
        "seed": seed,
        "trials": trials,
        "passed": all(v.passed for v in verdicts),
    }
