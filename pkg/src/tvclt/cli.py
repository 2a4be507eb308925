"""Command-line entry point: ``tvclt <subcommand> [options]``.

Exit codes: 0 success, 1 verification failure, 2 usage error,
3 numerical nonconvergence.  Outputs are written atomically.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .convolve import DEFAULT_GRID_POINTS, self_convolve
from .decompose import build_certificate
from .dichotomy import DEFAULT_N_VALUES, delta_series, fit_rate
from .distkit import affine, from_spec
from .errors import (
    AtomExplosion,
    GridOverflow,
    InsufficientPoints,
    InvalidParameter,
    MixedBranch,
    QuadratureNonconvergence,
    ShrinkExhausted,
    SingularInput,
    ZeroDensity,
)
from .shiftbound import lemma3_bound
from .stein import random_set, solve_stein, theorem_bound_rhs
from .triangular import TriangularSumLaw, lemma1_bound, shift_tv_exact
from .tvmetric import kolmogorov_distance, tv_distance, tv_to_matched_normal

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NONCONVERGENCE = 0, 1, 2, 3
STEIN_RESIDUAL_TOL = 1e-8
STEIN_DERIVATIVE_TOL = 1e-6


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_atomic(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, path: str | None) -> None:
    if path:
        _write_atomic(path, text)
    else:
        sys.stdout.write(text)


def _json_text(args, payload: dict) -> str:
    echo = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {"tool_version": __version__, "config_echo": echo, **payload}
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def _load_spec(path: str):
    try:
        with open(path) as fh:
            return from_spec(json.load(fh))
    except FileNotFoundError as exc:
        raise UsageError(f"spec file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"spec file {path} is not valid JSON: {exc}") from exc


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("list must be nonempty")
    return vals


def _int_list(text: str) -> list[int]:
    vals = _float_list(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


# subcommands ---------------------------------------------------------------

def cmd_tv(args) -> int:
    A, B = _load_spec(args.spec_a), _load_spec(args.spec_b)
    if args.n > 1:
        A = self_convolve(A, args.n, grid_points=args.grid_points)
        B = self_convolve(B, args.n, grid_points=args.grid_points)
    if args.gamma:
        B = affine(B, 1.0, args.gamma)
    rep = tv_distance(A, B) if args.kind == "tv" else kolmogorov_distance(A, B)
    _emit(_json_text(args, {"value": rep.value, "tolerance": rep.tolerance + args.tolerance, "kind": rep.kind.value}), args.out)
    return EXIT_OK


def cmd_convolve(args) -> int:
    S = self_convolve(_load_spec(args.spec), args.n, grid_points=args.grid_points)
    rows = []
    if S.density is not None:
        d = S.density
        rows = zip(d.grid, d.node_values())
    _emit(_csv_text(["x", "density"], rows), args.out)
    side = {
        "atoms": [[float(x), float(p)] for x, p in S.atomic.atoms],
        "pruned_atom_mass": S.atomic.pruned,
        "error_budget": S.error_budget,
        "mass": S.mass,
    }
    if args.out:
        _write_atomic(args.out + ".json", _json_text(args, side))
    else:
        sys.stdout.write(_json_text(args, side))
    return EXIT_OK


def cmd_delta_series(args) -> int:
    F = _load_spec(args.spec)
    reps = delta_series(F, args.n_list, grid_points=args.grid_points, threads=args.threads)
    rows = [(n, r.value, r.tolerance + args.tolerance) for n, r in zip(args.n_list, reps)]
    _emit(_csv_text(["n", "delta", "tolerance"], rows), args.out)
    return EXIT_OK


def cmd_rate_fit(args) -> int:
    try:
        with open(args.input, newline="") as fh:
            rows = list(csv.DictReader(fh))
        n = [int(r["n"]) for r in rows]
        d = [float(r["delta"]) for r in rows]
        tol = [float(r.get("tolerance") or 0.0) for r in rows]
    except FileNotFoundError as exc:
        raise UsageError(f"series file not found: {args.input}") from exc
    except (KeyError, ValueError) as exc:
        raise UsageError(f"series file must have n, delta[, tolerance] columns: {exc}") from exc
    fit = fit_rate(n, d, tol, args.drop_smallest)
    payload = {
        "slope": fit.slope,
        "c_hat": fit.c_hat,
        "branch": fit.branch.value,
        "fitted_n": list(fit.fitted),
        "dropped_n": list(fit.dropped),
    }
    _emit(_json_text(args, payload), args.out)
    return EXIT_OK


def cmd_lemma1_verify(args) -> int:
    cells = [(a, n, g) for a in args.a_list for n in range(1, args.n_max + 1) for g in args.gamma_list]

    def row(cell):
        a, n, g = cell
        exact = shift_tv_exact(TriangularSumLaw(a, n), g)
        bound = lemma1_bound(a, n, g)
        return a, n, g, exact, bound, exact <= bound + args.tolerance

    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        rows = list(pool.map(row, cells))
    _emit(_csv_text(["a", "n", "gamma", "exact", "bound", "holds"], rows), args.out)
    bad = sum(not r[-1] for r in rows)
    if bad:
        print(f"lemma1-verify: {bad} violations", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_decompose(args) -> int:
    cert = build_certificate(_load_spec(args.spec))
    payload = {
        "u": cert.u,
        "v": cert.v,
        "b": cert.b,
        "theta": cert.theta,
        "a": cert.a,
        "a_capped": cert.a_capped,
        "shrinks": cert.shrinks,
        "reconstruction_l1": cert.reconstruction_l1,
        "residual_min": cert.residual_min,
        "residual_atoms": [[float(x), float(p)] for x, p in cert.residual.atomic.atoms],
    }
    _emit(_json_text(args, payload), args.out)
    d = cert.residual.density
    rows = [] if d is None else zip(d.grid, d.node_values())
    csv_path = args.residual_csv or (args.out + ".residual.csv" if args.out else None)
    if csv_path:
        _write_atomic(csv_path, _csv_text(["x", "density"], rows))
    return EXIT_OK


def cmd_shift_bound(args) -> int:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        b = lemma3_bound(_load_spec(args.spec), args.n, args.gamma)
    for w in caught:
        print(f"shift-bound: warning: {w.message}", file=sys.stderr)
    payload = {
        "m": b.m,
        "theta": b.theta,
        "k0": b.k0,
        "triangular_term": b.triangular_term,
        "binomial_tail": b.binomial_tail,
        "total": b.total,
    }
    _emit(_json_text(args, payload), args.out)
    return EXIT_OK


def cmd_stein_check(args) -> int:
    kind, _, count = args.sets.partition(":")
    if kind != "random" or not count.isdigit():
        raise UsageError(f"--sets must look like random:N, got {args.sets!r}")
    rng = np.random.default_rng(args.seed)
    sets = [random_set(rng) for _ in range(int(count))]
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        sols = list(pool.map(solve_stein, sets))
    rows, bad = [], 0
    for i, s in enumerate(sols):
        res = s.residual()
        ok = res <= STEIN_RESIDUAL_TOL + args.tolerance and s.sup_fprime <= 2 + STEIN_DERIVATIVE_TOL + args.tolerance
        bad += not ok
        spec = ";".join(f"{_fmt(lo)}:{_fmt(hi)}" for lo, hi in s.set.intervals)
        rows.append((i, spec, s.nh, s.sup_fprime, res, ok))
    _emit(_csv_text(["set", "intervals", "nh", "sup_fprime", "residual", "holds"], rows), args.out)
    if bad:
        print(f"stein-check: {bad} sets violate the residual or derivative bound", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def cmd_bound_rhs(args) -> int:
    F = _load_spec(args.spec)
    rhs = theorem_bound_rhs(F, args.n, grid_points=args.grid_points)
    delta = tv_to_matched_normal(F, args.n, grid_points=args.grid_points)
    holds = delta.value <= rhs + delta.tolerance + args.tolerance
    payload = {"rhs": rhs, "delta": delta.value, "tolerance": delta.tolerance, "holds": holds}
    _emit(_json_text(args, payload), args.out)
    return EXIT_OK if holds else EXIT_FAIL


# parser --------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker pool size")
    common.add_argument("--grid-points", type=int, default=DEFAULT_GRID_POINTS, help="grid points for S_n")
    common.add_argument("--tolerance", type=float, default=0.0, help="extra slack added to every check")
    common.add_argument("--seed", type=int, default=0)

    p = _Parser(prog="tvclt", description="TV distances for iid sums and normal approximation.")
    p.add_argument("--version", action="version", version=f"tvclt {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        sp.set_defaults(func=func)
        return sp

    sp = add("tv", cmd_tv, "distance between two laws, optionally after n-fold convolution and a shift")
    sp.add_argument("--spec-a", required=True)
    sp.add_argument("--spec-b", required=True)
    sp.add_argument("--n", type=int, default=1)
    sp.add_argument("--gamma", type=float, default=0.0)
    sp.add_argument("--kind", choices=("tv", "kolmogorov"), default="tv")
    sp.add_argument("--out")

    sp = add("convolve", cmd_convolve, "density of S_n as CSV, atoms and budget in a JSON sidecar")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out")

    sp = add("delta-series", cmd_delta_series, "Delta_n for a list of n")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--n-list", type=_int_list, default=list(DEFAULT_N_VALUES))
    sp.add_argument("--out")

    sp = add("rate-fit", cmd_rate_fit, "log-log slope of a Delta_n series")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--drop-smallest", type=int, default=2)
    sp.add_argument("--out")

    sp = add("lemma1-verify", cmd_lemma1_verify, "exact triangular shift distances against the closed-form bound")
    sp.add_argument("--a-list", type=_float_list, default=[0.5, 1.0, 2.0])
    sp.add_argument("--n-max", type=int, default=50)
    sp.add_argument("--gamma-list", type=_float_list, default=[0.01, 0.1, 1.0])
    sp.add_argument("--out")

    sp = add("decompose", cmd_decompose, "minorization certificate for F*F")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out")
    sp.add_argument("--residual-csv")

    sp = add("shift-bound", cmd_shift_bound, "binomial-mixture bound on d_TV(S_n, S_n + gamma)")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("--out")

    sp = add("stein-check", cmd_stein_check, "Stein solutions for random interval unions")
    sp.add_argument("--sets", default="random:100")
    sp.add_argument("--out")

    sp = add("bound-rhs", cmd_bound_rhs, "right side of the Stein bound on Delta_n")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--out")
    return p


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = build_parser().parse_args(argv)
        if args.threads < 1 or args.grid_points < 1 or args.tolerance < 0:
            raise UsageError("--threads and --grid-points must be positive and --tolerance nonnegative")
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (UsageError, InvalidParameter, SingularInput, ZeroDensity, InsufficientPoints) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QuadratureNonconvergence, ShrinkExhausted, GridOverflow, AtomExplosion) as exc:
        print(f"nonconvergence: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except MixedBranch as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
