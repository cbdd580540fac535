"""Command-line front end.

Exit codes: 0 success, 1 malformed configuration, 2 a numerical outcome was
not reached (iteration did not converge, or a verification row failed).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import _io, demos, mixtures, solver, verify
from .errors import ConfigError, DivergenceError
from .linalg import make_subspace

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

DEFAULT_SOFT_N = 8


def _out_dir(args) -> Path | None:
    if args.output is None:
        return None
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(args, name: str, summary: dict):
    out = _out_dir(args)
    if out is None:
        sys.stdout.write(_io.dumps(summary))
    else:
        _io.write_json(out / name, summary)


def _config(args) -> dict:
    return _io.read_json(args.input) if args.input else {}


def _field(cfg: dict, key: str, default=None, kind=float):
    if key not in cfg:
        return default
    try:
        v = cfg[key]
        if kind is float:
            return float(v)
        if kind is bool:
            if not isinstance(v, bool):
                raise ValueError
            return v
        if kind is int:
            if isinstance(v, bool) or int(v) != v:
                raise ValueError
            return int(v)
        return kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"field '{key}': expected {kind.__name__}, got {cfg[key]!r}") from None


def _stop(cfg: dict, args, abs_tol=1e-8, max_iter=100_000) -> solver.StopRule:
    stop = cfg.get("stop", {})
    if not isinstance(stop, dict):
        raise ConfigError("field 'stop': expected an object")
    try:
        return solver.StopRule(
            abs_tol=args.tol if args.tol is not None else _field(stop, "abs_tol", abs_tol),
            rel_tol=_field(stop, "rel_tol", 0.0),
            max_iter=args.max_iter if args.max_iter is not None else _field(stop, "max_iter", max_iter, int),
        )
    except ValueError as exc:
        raise ConfigError(f"field 'stop': {exc}") from None


def _tolerances(stop: solver.StopRule, **extra) -> dict:
    return {"abs_tol": stop.abs_tol, "rel_tol": stop.rel_tol, "max_iter": stop.max_iter, **extra}


# -- solve ------------------------------------------------------------------

SOLVE_IDENTITIES = ["relaxed_stationarity", "exact_relaxation"]


def problem_from_config(cfg: dict, args) -> solver.RelaxedProblem:
    if "family" not in cfg:
        raise ConfigError("missing field 'family'")
    try:
        F = mixtures.family_from_dict(cfg["family"])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"field 'family': {exc}") from None
    V = None
    if cfg.get("subspace") is not None:
        try:
            V = make_subspace(F.x_dim, cfg["subspace"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"field 'subspace': {exc}") from None
    gamma = args.gamma if args.gamma is not None else _field(cfg, "gamma", 1.0)
    lam = args.lam if args.lam is not None else cfg.get("lambda", 1.0)
    stop = _stop(cfg, args)
    try:
        return solver.RelaxedProblem(F, V, gamma, lam, cfg.get("x0"), stop)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"problem: {exc}") from None


def cmd_solve(args) -> int:
    cfg = _config(args)
    P = problem_from_config(cfg, args)
    try:
        trace = solver.solve(P)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    exact = solver.exactness_check(P, trace.x)
    summary = {
        "command": "solve",
        "seed": args.seed,
        "tolerances": _tolerances(P.stop),
        "identities": SOLVE_IDENTITIES,
        "gamma": P.gamma,
        "converged": trace.converged,
        "iterations": trace.iterations,
        "final_step": float(trace.step_norms[-1]) if trace.step_norms.size else 0.0,
        "x": trace.x,
        "in_v_defect": trace.in_v_defect,
        "normal_defect": trace.normal_defect,
        "exactness": [{"atom": i, "residual": r} for i, r in enumerate(exact)],
    }
    out = _out_dir(args)
    if out is not None:
        _io.write_csv(out / "trace.csv", ["iter", "step_norm"],
                      ((i + 1, s) for i, s in enumerate(trace.step_norms)))
    _emit(args, "summary.json", summary)
    return EXIT_OK if trace.converged else EXIT_NUMERIC


# -- verify -----------------------------------------------------------------

def cmd_verify(args) -> int:
    cfg = _config(args)
    n = _field(cfg, "n_families", 50, int)
    result = verify.run_identity_suite(seed=args.seed, n_families=n, fault=args.inject_fault)
    for r in result.rows:
        status = "ok  " if r.passed else "FAIL"
        print(f"{status} {r.name:36s} {r.residual:.3e} <= {r.threshold:.1e}", file=sys.stderr)
    print(f"{len(result.rows)} identities, {result.elapsed:.1f} s", file=sys.stderr)
    summary = {"command": "verify", **result.to_dict()}
    if args.output is None:
        sys.stdout.write(_io.dumps(summary))
    else:
        out = _out_dir(args)
        _io.write_json(out / "verify.json", summary)
        _io.write_csv(out / "verify.csv", ["identity", "residual", "threshold", "passed"],
                      ((r.name, r.residual, r.threshold, r.passed) for r in result.rows))
    if not result.passed:
        print("failing identities: " + ", ".join(result.failing()), file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


# -- demos ------------------------------------------------------------------

SOFT_TOL = 1e-12


def cmd_demo_softthreshold(args) -> int:
    cfg = _config(args)
    rng = np.random.default_rng(args.seed)
    n = _field(cfg, "n", DEFAULT_SOFT_N, int)
    if n < 1:
        raise ConfigError("field 'n': must be positive")
    try:
        weights = np.asarray(cfg.get("weights", [1.0 / n] * n), dtype=float)
        rho = np.asarray(cfg.get("rho", 1.0), dtype=float)
        delta = np.asarray(cfg.get("delta", -rho), dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"weights/delta/rho: {exc}") from None
    if weights.shape != (n,):
        raise ConfigError(f"field 'weights': expected {n} entries")
    basis_kind = cfg.get("basis", "standard")
    if basis_kind not in ("standard", "random"):
        raise ConfigError("field 'basis': expected 'standard' or 'random'")
    basis = np.eye(n) if basis_kind == "standard" else demos.random_orthonormal_basis(rng, n)
    try:
        F = demos.soft_threshold_family(weights, delta, rho, basis)
        mixtures.validate_family(F).raise_if_invalid()
    except ValueError as exc:
        raise ConfigError(f"family: {exc}") from None
    if "x" in cfg:
        try:
            X = np.atleast_2d(np.asarray(cfg["x"], dtype=float))
        except (TypeError, ValueError):
            raise ConfigError("field 'x': expected a vector or a list of vectors") from None
        if X.shape[-1] != n:
            raise ConfigError(f"field 'x': vectors need {n} entries")
    else:
        X = rng.normal(scale=3.0, size=(_field(cfg, "samples", 10, int), n))
    got = mixtures.resolvent_mixture(F, X)
    want = demos.weighted_soft_threshold(X, weights, delta, rho, basis)
    err = float(np.max(np.abs(got - want)))
    summary = {
        "command": "demo-softthreshold",
        "seed": args.seed,
        "tolerances": {"closed_form": SOFT_TOL},
        "identities": ["weighted_soft_threshold"],
        "n": n,
        "basis": basis_kind,
        "max_error": err,
        "passed": err <= SOFT_TOL,
        "pairs": [{"input": x, "output": y} for x, y in zip(X, got)],
    }
    out = _out_dir(args)
    if out is not None:
        rows = ((s, k, X[s, k], got[s, k], want[s, k]) for s in range(len(X)) for k in range(n))
        _io.write_csv(out / "softthreshold.csv", ["sample", "k", "input", "output", "closed_form"], rows)
    _emit(args, "softthreshold.json", summary)
    return EXIT_OK if err <= SOFT_TOL else EXIT_NUMERIC


def cmd_demo_wiener(args) -> int:
    cfg = _config(args)
    rng = np.random.default_rng(args.seed)
    clip = cfg.get("clip", [-1.0, 1.0])
    stop = _stop(cfg, args, abs_tol=1e-12, max_iter=10_000)
    lam = args.lam if args.lam is not None else cfg.get("lambda", 1.0)
    if args.gamma is not None and args.gamma != 1.0:
        raise ConfigError("--gamma: Wiener payloads need gamma = 1")
    try:
        inst = demos.wiener_instance(
            rng,
            n_atoms=_field(cfg, "n_atoms", 20, int),
            x_dim=_field(cfg, "x_dim", 10, int),
            v_dim=_field(cfg, "v_dim", 4, int),
            atom_dim=_field(cfg, "atom_dim", 3, int),
            clip=clip,
            noise=_field(cfg, "noise", 0.0),
            scale=_field(cfg, "scale", 1.0),
            identity_linops=_field(cfg, "identity_linops", False, bool),
            relaxation=lam,
            stop=stop,
        )
    except (ValueError, TypeError, IndexError) as exc:
        raise ConfigError(f"wiener config: {exc}") from None
    start = time.perf_counter()
    trace = solver.solve(inst.problem)
    print(f"solved in {time.perf_counter() - start:.2f} s", file=sys.stderr)
    res = demos.recovery_residuals(inst, trace.x)
    summary = {
        "command": "demo-wiener",
        "seed": args.seed,
        "tolerances": _tolerances(stop),
        "identities": ["relaxed_stationarity", "exact_relaxation"],
        "converged": trace.converged,
        "iterations": trace.iterations,
        "noise": inst.noise,
        "max_recovery_residual": float(res.max()),
        "recovery_residuals": res,
        "stationarity_defect": trace.normal_defect,
        "in_v_defect": trace.in_v_defect,
        "x": trace.x,
        "truth": inst.truth,
    }
    out = _out_dir(args)
    if out is not None:
        _io.write_csv(out / "trace.csv", ["iter", "step_norm"],
                      ((i + 1, s) for i, s in enumerate(trace.step_norms)))
    _emit(args, "wiener.json", summary)
    return EXIT_OK if trace.converged else EXIT_NUMERIC


DEFAULT_PROX_AVERAGE = {
    "functions": [{"type": "abs_sum", "weights": [1.0]}, {"type": "quadratic_kernel", "dim": 1}],
    "weights": [0.5, 0.5],
}


def cmd_prox_average(args) -> int:
    cfg = _config(args) if args.input else dict(DEFAULT_PROX_AVERAGE)
    if "functions" not in cfg or "weights" not in cfg:
        raise ConfigError("prox-average config needs fields 'functions' and 'weights'")
    fs = demos.functions_from_config(cfg["functions"])
    lo, hi = cfg.get("range", [-5.0, 5.0])
    xs = np.linspace(float(lo), float(hi), _field(cfg, "points", 101, int))
    try:
        table = demos.prox_average_table(fs, cfg["weights"], xs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"field 'weights': {exc}") from None
    cols = ["x", "prox", "envelope", "moreau_residual"]
    summary = {
        "command": "prox-average",
        "seed": args.seed,
        "tolerances": {"moreau": verify.CLOSED_FORM_TOL},
        "identities": ["prox_expectation", "envelope_expectation", "moreau_decomposition"],
        "max_moreau_residual": float(table["moreau_residual"].max()),
        "rows": len(xs),
    }
    out = _out_dir(args)
    if out is None:
        sys.stdout.write(_io.dumps({**summary, "table": {c: table[c] for c in cols}}))
    else:
        _io.write_csv(out / "prox_average.csv", cols, zip(*(table[c] for c in cols)))
        _io.write_json(out / "prox_average.json", summary)
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "demo-softthreshold": cmd_demo_softthreshold,
    "demo-wiener": cmd_demo_wiener,
    "prox-average": cmd_prox_average,
}


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--input", help="JSON configuration file")
    common.add_argument("--output", help="directory for JSON/CSV outputs (default: JSON on stdout)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, help="absolute step tolerance")
    common.add_argument("--max-iter", type=int, dest="max_iter")
    common.add_argument("--lambda", type=float, dest="lam", help="constant relaxation parameter in (0, 2)")
    common.add_argument("--gamma", type=float, help="resolvent index gamma > 0")
    common.add_argument("--inject-fault", dest="inject_fault", choices=verify.FAULT_NAMES, help=argparse.SUPPRESS)

    p = _Parser(prog="resmix", description="Resolvent and proximal mixtures toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "run the relaxed solver on a problem file",
        "verify": "run the seeded identity suite",
        "demo-softthreshold": "weighted soft-thresholding as a resolvent mixture",
        "demo-wiener": "signal recovery through clipped Wiener systems",
        "prox-average": "tabulate the proximal average of 1-D functions",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text, description=text)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
