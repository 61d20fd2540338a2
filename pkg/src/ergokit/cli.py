"""Command-line front end.

Exit codes: 0 success or all checks passed, 1 a certified failure,
2 malformed input, 3 a quantity undefined for valid input.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import math
import platform
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .certify import classify, nearest_gibbs
from .channels import apply, coherent_gibbs, dephasing, lambda_beta_map
from .exceptions import DomainError, PreconditionError, ValidationError
from .geometry import (
    distance_to_free,
    family_Mcp,
    family_Mp,
    monotone_Mcp,
    monotone_Mp,
    noneq_temperature,
)
from .io import channel_from_json, dumps, hamiltonian_from_json, loads, state_from_json
from .spectra import Hamiltonian, PassiveState, gibbs, passive_rearrangement, random_state
from .workfn import beta_of_state, ergotropy, ergotropy_ncopy, free_energy

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_DOMAIN = 0, 1, 2, 3


@dataclass
class RunConfig:
    seed: int = 0
    trials: int = 1000
    tolerance: float = 1e-9
    beta_min: float = 0.5
    beta_max: float = 2.0
    beta_points: int = 3
    beta_log: bool = True
    ncopy_cap: int = 2_000_000
    starts: int = 8
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValidationError("--trials must be >= 1")
        if not self.tolerance > 0:
            raise ValidationError("--tol must be positive")
        if self.beta_min < 0 or self.beta_max < self.beta_min or self.beta_points < 1:
            raise ValidationError("beta grid needs 0 <= min <= max and points >= 1")
        if self.beta_log and self.beta_min == 0:
            raise ValidationError("a log-spaced beta grid needs --beta-min > 0 (or use --beta-linear)")

    def beta_grid(self) -> np.ndarray:
        if self.beta_points == 1:
            return np.array([self.beta_min])
        if self.beta_log:
            return np.geomspace(self.beta_min, self.beta_max, self.beta_points)
        return np.linspace(self.beta_min, self.beta_max, self.beta_points)


def provenance(cfg: RunConfig | None = None) -> dict:
    import scipy

    out = {
        "versions": {
            "ergokit": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        }
    }
    if cfg is not None:
        out["config"] = {k: v for k, v in asdict(cfg).items() if k != "output"}
        out["config"]["beta_grid"] = cfg.beta_grid()
    return out


# ---------------------------------------------------------------- compute


def compute(h: Hamiltonian, rho, what: str, alpha: float = 1.0, nu: float = 1.0,
            theory: str = "p", seed: int = 0) -> dict:
    if what == "ergotropy":
        return {"value": ergotropy(h, rho)}
    if what == "free-energy":
        return {"value": free_energy(h, rho)}
    if what == "beta":
        sol = beta_of_state(h, rho)
        return {"value": sol.beta, "achieved_entropy": sol.achieved_entropy, "residual": sol.residual}
    if what in ("mp", "mcp", "family"):
        if what == "mp":
            res = monotone_Mp(h, rho)
        elif what == "mcp":
            res = monotone_Mcp(h, rho)
        elif theory == "p":
            res = family_Mp(h, rho, alpha, nu, seed=seed)
        else:
            res = family_Mcp(h, rho, alpha, nu)
        out = {"value": res.value, "method": res.method, "boundary": res.boundary,
               "minimizer_populations": res.minimizer.populations}
        if what == "mcp" or (what == "family" and theory == "cp"):
            out["minimizer_beta"] = res.minimizer_param
        if what == "family":
            out.update(alpha=alpha, nu=nu, theory=theory)
        return out
    raise ValidationError(f"unknown quantity {what!r}")


# ------------------------------------------------------------------ ncopy


def ncopy_table(h: Hamiltonian, rho, n_max: int, cap: int = 2_000_000) -> dict:
    if n_max < 1:
        raise ValidationError("n-max must be >= 1")
    if h.dim**n_max > cap:
        raise ValidationError(f"d^n = {h.dim}^{n_max} exceeds the cap {cap}")
    f = free_energy(h, rho)
    rows = []
    for n in range(1, n_max + 1):
        e = ergotropy_ncopy(h, rho, n, cap) / n
        rows.append({"n": n, "ergotropy_per_copy": e, "free_energy": f, "gap": f - e})
    gaps = [r["gap"] for r in rows]
    return {
        "rows": rows,
        "gap_nonincreasing": all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:])),
    }


# ------------------------------------------------------------------ repro


def _witness(eps):
    """Energy-basis pure state (|e_2> + |e_3>)/sqrt(2) and its dephased version."""
    h = Hamiltonian(np.asarray(eps, dtype=float))
    psi = np.array([0.0, 1.0, 1.0]) / math.sqrt(2)
    rho = np.outer(psi, psi).astype(complex)
    return h, rho, dephasing(h)


def _admissible_grid(points: int = 50):
    """Interior grid of p_1 > p_2 > p_3 > 0."""
    out = []
    for p1 in np.linspace(1 / 3, 1, points + 2)[1:-1]:
        lo, hi = (1 - p1) / 2, min(p1, 1 - p1)
        for p2 in np.linspace(lo, hi, points + 2)[1:-1]:
            out.append((p1, p2, 1 - p1 - p2))
    return out


def _pair(h, rho, deph, p, kind):
    pp = PassiveState(np.array(p), h)
    dp = PassiveState(np.real(np.diag(apply(deph, pp.matrix))), h)
    drho = apply(deph, rho)
    if kind == "temperature":
        return noneq_temperature(h, pp, rho), noneq_temperature(h, dp, drho)
    return distance_to_free(h, rho, pp), distance_to_free(h, drho, dp)


def _c(eps):
    e1, e2, e3 = eps
    return (e3 - e1) / (e3 + e2 - 2 * e1)


def temperature_predicate(p, eps) -> float:
    """Positive iff dephasing raises T(P|rho) at the three-level witness."""
    p1, p2, p3 = p
    return _c(eps) * math.log(p1 * p1 / (p2 * p3)) - math.log(p1 / p3)


def distance_predicate(p, eps) -> float:
    """Positive iff dephasing raises D(rho, P) at the three-level witness."""
    p1, p2, p3 = p
    return math.log(p1 / p3) * math.log(p2 * p3) - _c(eps) * math.log(p1 * p1 / (p2 * p3)) * math.log(4 * p2 * p3)


def _sweep(eps, kind, points=50, margin=1e-9):
    h, rho, deph = _witness(eps)
    pred_fn = temperature_predicate if kind == "temperature" else distance_predicate
    disagree, checked, skipped = 0, 0, 0
    for p in _admissible_grid(points):
        try:
            before, after = _pair(h, rho, deph, p, kind)
        except DomainError:
            skipped += 1
            continue
        pred = pred_fn(p, eps)
        diff = after - before
        if abs(pred) <= margin or abs(diff) <= margin:
            skipped += 1
            continue
        checked += 1
        disagree += (pred > 0) != (diff > 0)
    return {"eps": list(eps), "checked": checked, "skipped": skipped, "disagreements": disagree}


def repro_d3(kind: str, points: int = 50) -> dict:
    eps = (0.0, 0.0, 1.0)
    h, rho, deph = _witness(eps)
    before, after = _pair(h, rho, deph, (0.6, 0.2, 0.2), kind)
    sweeps = [_sweep(e, kind, points) for e in (eps, (0.0, 0.4, 1.0))]
    ok = after > before and all(s["disagreements"] == 0 for s in sweeps)
    return {
        "claim": f"dephasing raises the {kind} at p = (0.6, 0.2, 0.2), eps = (0, 0, 1)",
        "before": before,
        "after": after,
        "sweeps": sweeps,
        "status": "pass" if ok else "fail",
    }


def repro_lambda_beta(beta: float = 1.0, seed: int = 0, samples: int = 100) -> dict:
    h = Hamiltonian(np.array([0.0, 0.5, 1.3, 2.0]))
    ch = lambda_beta_map(h, beta, coherent_gibbs(h, beta))
    g = gibbs(h, beta).matrix
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        diag = h.embed(rng.dirichlet(np.ones(h.dim)))
        worst = max(worst, float(np.abs(apply(ch, diag) - g).max()))
    fit = nearest_gibbs(h, apply(ch, gibbs(h, 3.0 * beta).matrix))
    return {
        "claim": "Lambda_beta sends every incoherent state to gamma_beta",
        "max_deviation": worst,
        "gibbs_image_fit": {"beta": fit[0], "residual": fit[1]},
        "status": "pass" if worst <= 1e-10 else "fail",
    }


def repro_decomposition(seed: int = 0, samples: int = 1000) -> dict:
    h, rho, _ = _witness((0.0, 0.0, 1.0))
    p = passive_rearrangement(h, rho).matrix
    parts = {"F": free_energy(h, rho), "ergotropy": ergotropy(h, rho), "F_passive": free_energy(h, p)}
    rng = np.random.default_rng(seed)
    worst = 0.0
    for k in range(samples):
        d = 2 + k % 4
        hk = Hamiltonian(np.sort(rng.uniform(0, 2, d)))
        r = random_state(d, seed=rng)
        pr = passive_rearrangement(hk, r).matrix
        worst = max(worst, abs(free_energy(hk, r) - ergotropy(hk, r) - free_energy(hk, pr)))
    ok = abs(parts["F"] - parts["ergotropy"] - parts["F_passive"]) <= 1e-8 and worst <= 1e-8
    return {
        "claim": "F(rho) = ergotropy(rho) + F(P_rho)",
        "witness": parts,
        "max_residual": worst,
        "samples": samples,
        "status": "pass" if ok else "fail",
    }


def repro(which: str, seed: int = 0) -> dict:
    table = {
        "d3-temperature": lambda: repro_d3("temperature"),
        "d3-contractivity": lambda: repro_d3("distance"),
        "lambda-beta": lambda: repro_lambda_beta(seed=seed),
        "decomposition": lambda: repro_decomposition(seed=seed),
    }
    if which == "all":
        return {k: f() for k, f in table.items()}
    if which not in table:
        raise ValidationError(f"unknown example {which!r}")
    return {which: table[which]()}


# ------------------------------------------------------------------ driver


def _read_json(path: str):
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from None
    return loads(text)


def _hamiltonian(args) -> Hamiltonian:
    if args.energies:
        try:
            eps = [float(x) for x in args.energies.split(",")]
        except ValueError:
            raise ValidationError("--energies must be comma-separated numbers") from None
        return Hamiltonian(np.array(eps))
    if args.hamiltonian:
        data = _read_json(args.hamiltonian)
        return hamiltonian_from_json(data.get("hamiltonian", data))
    raise ValidationError("give --energies or --hamiltonian")


def _config(args) -> RunConfig:
    return RunConfig(
        seed=args.seed,
        trials=args.trials,
        tolerance=args.tol,
        beta_min=args.beta_min,
        beta_max=args.beta_max,
        beta_points=args.beta_points,
        beta_log=not args.beta_linear,
        ncopy_cap=args.ncopy_cap,
        starts=args.starts,
        output=args.out,
    )


def _emit(report, args, csv_rows=None):
    if args.format == "csv":
        if csv_rows is None:
            raise ValidationError("csv output is only available for tabular results")
        buf = _io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(csv_rows[0]), lineterminator="\n")
        w.writeheader()
        for r in csv_rows:
            w.writerow({k: format(v, ".17g") if isinstance(v, float) else v for k, v in r.items()})
        text = buf.getvalue()
    else:
        text = dumps(report)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=1000)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--beta-min", type=float, default=0.5)
    common.add_argument("--beta-max", type=float, default=2.0)
    common.add_argument("--beta-points", type=int, default=3)
    common.add_argument("--beta-linear", action="store_true", help="linear instead of log-spaced beta grid")
    common.add_argument("--ncopy-cap", type=int, default=2_000_000)
    common.add_argument("--starts", type=int, default=8, help="optimizer starts for eta estimates")
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    p = argparse.ArgumentParser(prog="ergokit", description="Ergotropy and free-energy resource toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compute", parents=[common], help="evaluate a functional on a state file")
    c.add_argument("state")
    c.add_argument("--what", required=True, choices=("ergotropy", "free-energy", "beta", "mcp", "mp", "family"))
    c.add_argument("--alpha", type=float, default=1.0)
    c.add_argument("--nu", type=float, default=1.0)
    c.add_argument("--theory", choices=("p", "cp"), default="p", help="free set for --what family")

    k = sub.add_parser("classify", parents=[common], help="certify a channel against the free-operation conditions")
    src = k.add_mutually_exclusive_group(required=True)
    src.add_argument("--channel", help="channel JSON file with Kraus operators")
    src.add_argument("--family", help='named map as JSON, e.g. \'{"family": "dephasing"}\'')
    k.add_argument("--theory", choices=("cp", "p", "both"), default="both")
    k.add_argument("--energies", help="comma-separated energy levels")
    k.add_argument("--hamiltonian", help="JSON file holding a Hamiltonian or a state")
    k.add_argument("--no-eta", action="store_true", help="skip the eta / F.iii optimization")

    n = sub.add_parser("ncopy", parents=[common], help="n-copy ergotropy per copy against F")
    n.add_argument("state")
    n.add_argument("--n-max", type=int, default=8)

    r = sub.add_parser("repro", parents=[common], help="regenerate the worked examples")
    r.add_argument("which", choices=("d3-temperature", "d3-contractivity", "lambda-beta", "decomposition", "all"))
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = _config(args)
        if args.command == "compute":
            h, rho = state_from_json(_read_json(args.state))
            out = compute(h, rho, args.what, args.alpha, args.nu, args.theory, args.seed)
            report = {"command": "compute", "what": args.what, **out, "provenance": provenance()}
            _emit(report, args)
            return EXIT_OK
        if args.command == "ncopy":
            h, rho = state_from_json(_read_json(args.state))
            table = ncopy_table(h, rho, args.n_max, cfg.ncopy_cap)
            _emit({"command": "ncopy", **table, "provenance": provenance(cfg)}, args, table["rows"])
            return EXIT_OK
        if args.command == "classify":
            h = _hamiltonian(args)
            spec = _read_json(args.channel) if args.channel else loads(args.family)
            ch = channel_from_json(spec, h)
            report = classify(ch, h, args.theory, cfg.beta_grid(), cfg.trials, cfg.seed,
                              cfg.tolerance, cfg.starts, eta=not args.no_eta)
            report["provenance"] = provenance(cfg)
            _emit(report, args)
            return EXIT_OK if report["passed"] else EXIT_FAIL
        if args.command == "repro":
            report = repro(args.which, cfg.seed)
            _emit({"command": "repro", "results": report, "provenance": provenance(cfg)}, args)
            return EXIT_OK if all(v["status"] == "pass" for v in report.values()) else EXIT_FAIL
    except (ValidationError, PreconditionError) as exc:
        print(f"ergokit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"ergokit: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
