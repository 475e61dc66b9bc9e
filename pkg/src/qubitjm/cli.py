"""Command-line front end.

    qubitjm check obs.json            decide joint measurability
    qubitjm construct obs.json -o w   write the explicit joint POVM
    qubitjm sweep dirs.json -o out    critical noise levels as CSV
    qubitjm repro                     recompute the four-observable counterexample
    qubitjm steer states.json         steering test for a state assemblage
    qubitjm oracle obs.json           projection-based cross-check
    qubitjm bench                     timing report on random instances

Exit codes: 0 jointly measurable / necessary condition holds, 1 incompatible,
2 inconclusive, 64 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time

import numpy as np

from . import criterion, oracle, steering
from .construction import construct_joint
from .criterion import DecisionReport, Verdict
from .hypercube import N_MAX, mask_indices
from .povm import Assemblage, BlochObservable, InvalidObservable
from .solver import MAX_ITERS

log = logging.getLogger("qubitjm")

EXIT_OK = 0
EXIT_INCOMPATIBLE = 1
EXIT_INCONCLUSIVE = 2
EXIT_INPUT = 64

EXIT_CODES = {
    Verdict.JOINTLY_MEASURABLE: EXIT_OK,
    Verdict.NECESSARY_HOLDS: EXIT_OK,
    Verdict.INCOMPATIBLE: EXIT_INCOMPATIBLE,
    Verdict.INCONCLUSIVE: EXIT_INCONCLUSIVE,
}


class InputError(ValueError):
    pass


def fmt(x) -> str:
    return f"{float(x):.12g}"


def _round(obj):
    """Recursively round floats to 12 significant digits for printing."""
    if isinstance(obj, (float, np.floating)):
        return float(fmt(obj))
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj


def subset_name(mask: int) -> str:
    return "{" + ",".join(map(str, mask_indices(mask))) + "}"


# ---------------------------------------------------------------------------
# file formats

def _read_json(path: str):
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def assemblage_from_dict(data) -> Assemblage:
    if not isinstance(data, dict) or "observables" not in data:
        raise InputError('expected an object with an "observables" list')
    items = data["observables"]
    if not isinstance(items, list) or not items:
        raise InputError('"observables" must be a non-empty list')
    obs = []
    for k, item in enumerate(items, start=1):
        try:
            bloch = [float(v) for v in item["bloch"]]
            bias = float(item.get("bias", 0.0))
            if len(bloch) != 3:
                raise InputError(f"observable {k}: bloch needs 3 components")
            obs.append(BlochObservable(bias, bloch))
        except InvalidObservable as exc:
            raise InputError(f"observable {k}: {exc}") from exc
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"observable {k}: malformed entry ({exc})") from exc
    if len(obs) > N_MAX:
        raise InputError(f"at most {N_MAX} observables supported")
    return Assemblage(obs)


def assemblage_to_dict(assemblage: Assemblage) -> dict:
    """Full-precision serialisation; ``assemblage_from_dict`` inverts it exactly."""
    return {"observables": [{"bias": o.bias, "bloch": [float(v) for v in o.bloch]} for o in assemblage]}


def state_assemblage_from_dict(data) -> steering.StateAssemblage:
    if not isinstance(data, dict) or not isinstance(data.get("inputs"), list) or not data["inputs"]:
        raise InputError('expected an object with a non-empty "inputs" list')
    pairs = []
    for k, item in enumerate(data["inputs"], start=1):
        try:
            plus = [float(v) for v in item["plus"]]
            minus = [float(v) for v in item["minus"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"input {k}: malformed entry ({exc})") from exc
        if len(plus) != 4 or len(minus) != 4:
            raise InputError(f"input {k}: states need 4 Pauli coordinates")
        pairs.append((plus, minus))
    try:
        return steering.StateAssemblage.from_coords(pairs)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def load_assemblage(path: str) -> Assemblage:
    return assemblage_from_dict(_read_json(path))


def load_families(path: str) -> list[tuple[str, np.ndarray]]:
    """``{"families": [{"id": ..., "directions": [[x,y,z], ...]}, ...]}`` or a bare ``{"directions": ...}``."""
    data = _read_json(path)
    if isinstance(data, dict) and "directions" in data:
        data = {"families": [{"id": data.get("id", "0"), "directions": data["directions"]}]}
    if not isinstance(data, dict) or not isinstance(data.get("families"), list) or not data["families"]:
        raise InputError('expected "families" (non-empty list) or "directions"')
    out = []
    for k, fam in enumerate(data["families"]):
        try:
            d = np.array(fam["directions"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"family {k}: malformed directions ({exc})") from exc
        if d.ndim != 2 or d.shape[1] != 3 or not 1 <= len(d) <= N_MAX:
            raise InputError(f"family {k}: directions must be a list of 3-vectors")
        if not np.all(np.isfinite(d)) or np.linalg.norm(d, axis=1).max() == 0:
            raise InputError(f"family {k}: directions must be finite and not all zero")
        out.append((str(fam.get("id", k)), d))
    return out


# ---------------------------------------------------------------------------
# report rendering

def report_dict(rep: DecisionReport) -> dict:
    out = {
        "verdict": rep.verdict.value,
        "objective": rep.objective,
        "bound": rep.bound,
        "primal_value": rep.primal_value,
        "dual_lower_bound": rep.dual_lower_bound,
        "gap": rep.gap,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "optimal_coefficients": {subset_name(m): v for m, v in rep.optimal_coefficients.items()},
    }
    if rep.note:
        out["note"] = rep.note
    if rep.witness is not None:
        out["witness"] = witness_summary(rep.witness)
    return _round(out)


def witness_summary(w) -> dict:
    return {
        "valid": w.valid,
        "min_effect_eigenvalue": w.min_effect_eigenvalue,
        "marginal_residual": w.marginal_residual,
        "identity_residual": w.identity_residual,
        "system_residual": w.system_residual,
    }


def print_report(d: dict, form: str, out=None) -> None:
    out = out or sys.stdout
    if form == "json":
        json.dump(d, out, indent=2)
        out.write("\n")
        return
    for key, val in d.items():
        if isinstance(val, dict):
            out.write(f"{key}:\n")
            for k2, v2 in val.items():
                out.write(f"  {k2}: {_text(v2)}\n")
        else:
            out.write(f"{key}: {_text(val)}\n")


def _text(v) -> str:
    if isinstance(v, float):
        return fmt(v)
    if isinstance(v, list):
        return "[" + ", ".join(_text(x) for x in v) + "]"
    return str(v)


# ---------------------------------------------------------------------------
# commands

def cmd_check(args) -> int:
    a = load_assemblage(args.input)
    if a.n > args.nmax:
        raise InputError(f"N = {a.n} exceeds --nmax {args.nmax}")
    rep = criterion.decide(a, tol=args.tol, max_iters=args.max_iters, nmax=args.nmax)
    print_report(report_dict(rep), args.format)
    return EXIT_CODES[rep.verdict]


def cmd_construct(args) -> int:
    a = load_assemblage(args.input)
    if not a.unbiased:
        print("error: the explicit construction needs unbiased observables", file=sys.stderr)
        return EXIT_INPUT
    rep = criterion.decide(a, tol=args.tol, max_iters=args.max_iters, nmax=args.nmax)
    if rep.verdict is not Verdict.JOINTLY_MEASURABLE:
        print(f"refused: verdict {rep.verdict.value}, certified interval "
              f"[{fmt(rep.dual_lower_bound)}, {fmt(rep.primal_value)}] vs bound {fmt(rep.bound)}",
              file=sys.stderr)
        return EXIT_CODES[rep.verdict] or EXIT_INCONCLUSIVE
    w = rep.witness if rep.witness is not None else construct_joint(a, rep.optimal_coefficients)
    effects = [{"outcome": list(mu), "coords": op.coords.tolist()} for mu, op in w.joint.items()]
    doc = _round({
        "n": a.n,
        "effects": effects,
        "even_scalars": {subset_name(m): v for m, v in w.even_scalars.items()},
        "odd_vectors": {subset_name(m): v for m, v in w.odd_vectors.items()},
        "verification": witness_summary(w),
    })
    text = json.dumps(doc, indent=2) + "\n"
    if args.output and args.output != "-":
        with open(args.output, "w") as fh:
            fh.write(text)
        print(f"witness written to {args.output} (min eigenvalue {fmt(w.min_effect_eigenvalue)})")
    else:
        sys.stdout.write(text)
    return EXIT_OK


SWEEP_COLUMNS = ["family_id", "N", "eta_star", "objective_at_star", "gap"]


def cmd_sweep(args) -> int:
    families = load_families(args.input)
    rows = []
    for fid, d in families:
        res = criterion.threshold_sweep(d, args.eta_lo, args.eta_hi, args.tol_eta,
                                        tol=args.tol, max_iters=args.max_iters, nmax=args.nmax)
        rows.append({"family_id": fid, "N": len(d), "eta_star": fmt(res.eta_star),
                     "objective_at_star": fmt(res.objective_at_star), "gap": fmt(res.gap)})
    if args.format == "json":
        json.dump(rows, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return EXIT_OK
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.output and args.output != "-":
        with open(args.output, "w", newline="") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def repro_checks(tol: float = criterion.TOL_DECISION) -> list[tuple[str, bool, str]]:
    """Recompute the counterexample numbers; returns ``(name, passed, detail)`` rows."""
    t0 = time.perf_counter()
    a = criterion.counterexample_assemblage()
    chain = criterion.chain_value(a)
    rep = criterion.decide(a, tol=tol)
    elapsed = time.perf_counter() - t0
    w = rep.witness
    rows = [
        ("chain value", abs(chain - criterion.COUNTEREXAMPLE_CHAIN) <= 1e-4,
         f"{fmt(chain)} vs {criterion.COUNTEREXAMPLE_CHAIN} +- 1e-4"),
        ("chain condition fails", criterion.coplanar_chain(a) > 0,
         f"chain - 2 = {fmt(criterion.coplanar_chain(a))}"),
        ("minimised objective", abs(rep.primal_value - criterion.COUNTEREXAMPLE_OBJECTIVE) <= 1e-4,
         f"{fmt(rep.primal_value)} vs {criterion.COUNTEREXAMPLE_OBJECTIVE} +- 1e-4"),
        ("dual gap", rep.gap <= 1e-5, f"{fmt(rep.gap)} <= 1e-5"),
        ("verdict", rep.verdict is Verdict.JOINTLY_MEASURABLE, rep.verdict.value),
        ("witness min eigenvalue", w is not None and w.min_effect_eigenvalue >= -1e-10,
         f"{fmt(w.min_effect_eigenvalue) if w else 'n/a'} >= -1e-10"),
        ("witness marginal residual", w is not None and w.marginal_residual <= 1e-10,
         f"{fmt(w.marginal_residual) if w else 'n/a'} <= 1e-10"),
        ("runtime", elapsed < 1.0, f"{elapsed:.3f} s < 1 s"),
    ]
    return rows


def cmd_repro(args) -> int:
    rows = repro_checks(args.tol)
    if args.format == "json":
        json.dump([{"check": n, "pass": ok, "detail": d} for n, ok, d in rows], sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        for name, ok, detail in rows:
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_INCOMPATIBLE


def cmd_steer(args) -> int:
    sa = state_assemblage_from_dict(_read_json(args.input))
    try:
        mapped = steering.steering_equivalent(sa)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    rep = criterion.decide(mapped, tol=args.tol, max_iters=args.max_iters, nmax=args.nmax)
    d = report_dict(rep)
    d = {"status": steering.lhs_status(rep), **d,
         "mapped": _round(assemblage_to_dict(mapped))["observables"]}
    print_report(d, args.format)
    return EXIT_CODES[rep.verdict]


def cmd_oracle(args) -> int:
    a = load_assemblage(args.input)
    res = oracle.feasibility_oracle(a, max_iters=args.max_iters, method=args.method)
    d = {"result": type(res).__name__, "iterations": res.iterations}
    if isinstance(res, oracle.Feasible):
        d.update(min_effect_eigenvalue=res.check.min_eigenvalue, marginal_residual=res.check.marginal_residual)
        code = EXIT_OK
    elif isinstance(res, oracle.InfeasibleEvidence):
        d.update(distance=res.distance, certified_lower_bound=res.lower_bound)
        code = EXIT_INCOMPATIBLE
    else:
        d.update(distance=res.distance)
        code = EXIT_INCONCLUSIVE
    print_report(_round(d), args.format)
    return code


def random_assemblage(rng: np.random.Generator, n: int) -> Assemblage:
    """Uniform directions with lengths uniform in ``[0, 1]``, unbiased."""
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    return Assemblage.from_blochs(d * rng.uniform(0, 1, size=(n, 1)))


def cmd_bench(args) -> int:
    rng = np.random.default_rng(args.seed)
    rows = []
    for n in range(2, args.nmax + 1):
        times, gaps, verdicts = [], [], {}
        for _ in range(args.samples):
            a = random_assemblage(rng, n)
            t0 = time.perf_counter()
            rep = criterion.decide(a, tol=args.tol, max_iters=args.max_iters, nmax=args.nmax)
            times.append(time.perf_counter() - t0)
            gaps.append(rep.gap / max(1.0, rep.primal_value))
            verdicts[rep.verdict.value] = verdicts.get(rep.verdict.value, 0) + 1
        rows.append({"N": n, "median_s": fmt(np.median(times)), "max_s": fmt(max(times)),
                     "max_rel_gap": fmt(max(gaps)), "verdicts": verdicts})
    if args.format == "json":
        json.dump(rows, sys.stdout, indent=2)
        sys.stdout.write("\n")
    elif args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["N", "median_s", "max_s", "max_rel_gap", "verdicts"])
        for r in rows:
            w.writerow([r["N"], r["median_s"], r["max_s"], r["max_rel_gap"],
                        ";".join(f"{k}={v}" for k, v in sorted(r["verdicts"].items()))])
    else:
        for r in rows:
            print(f"N={r['N']:2d}  median {r['median_s']} s  max {r['max_s']} s  "
                  f"max rel gap {r['max_rel_gap']}  {r['verdicts']}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=criterion.TOL_DECISION,
                        help="relative decision tolerance around the bound (default %(default)g)")
    common.add_argument("--max-iters", type=int, default=MAX_ITERS)
    common.add_argument("--nmax", type=int, default=N_MAX)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=["json", "text", "csv"], default="text")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qubitjm", description="Joint measurability of binary qubit observables.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", parents=[common], help="decide joint measurability")
    s.add_argument("input", help="assemblage JSON file ('-' for stdin)")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("construct", parents=[common], help="write the explicit joint POVM")
    s.add_argument("input")
    s.add_argument("-o", "--output", default="-")
    s.set_defaults(func=cmd_construct)

    s = sub.add_parser("sweep", parents=[common], help="critical noise level per direction family")
    s.add_argument("input", help='JSON with "families" or "directions"')
    s.add_argument("--eta-lo", type=float, default=0.0)
    s.add_argument("--eta-hi", type=float, default=1.0)
    s.add_argument("--tol-eta", type=float, default=1e-8)
    s.add_argument("-o", "--output", default="-")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("repro", parents=[common], help="recompute the four-observable counterexample")
    s.set_defaults(func=cmd_repro)

    s = sub.add_parser("steer", parents=[common], help="steering test for a state assemblage")
    s.add_argument("input")
    s.set_defaults(func=cmd_steer)

    s = sub.add_parser("oracle", parents=[common], help="projection-based feasibility check")
    s.add_argument("input")
    s.add_argument("--method", choices=["alternating", "averaged"], default="alternating")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("bench", parents=[common], help="timing on random unbiased instances")
    s.add_argument("--samples", type=int, default=10)
    s.set_defaults(func=cmd_bench, nmax=6)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not 1 <= args.nmax <= N_MAX:
        print(f"error: --nmax must lie in [1, {N_MAX}]", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
