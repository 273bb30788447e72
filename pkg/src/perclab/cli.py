"""Command-line interface.

Subcommands wire the lattice / exact / estimator / criterion modules into
reproducible runs that emit JSON-lines (default) or CSV records.  Every
run starts with a `config` record echoing the resolved semantic
configuration; scheduling-only knobs (worker count, output path) stay out
of it so records are byte-identical across worker counts.

Exit codes: 0 success, 2 configuration error, 3 budget exceeded,
4 a verification or statistical check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import secrets
import sys
from fractions import Fraction

from . import criterion, estimator, exact
from .exact import BudgetExceededError, EnumerationBudget, frac_str
from .lattice import VertexSet, load_set_file, make_box

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_CHECK = 4

SIGMA_MARGIN = 4.0


class ConfigError(ValueError):
    pass


def _parse_prob(text: str) -> Fraction:
    """Exact probability from 'num/den' or a decimal string.

    Decimal strings are exact rationals ('0.25' is 1/4), so nothing lossy
    ever enters the certified path.
    """
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(
            f"cannot parse probability {text!r}; use a fraction like 2/5 "
            f"or a decimal like 0.4")
    if not 0 <= value <= 1:
        raise ConfigError(f"probability {text!r} outside [0, 1]")
    return value


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"cannot parse integer list {text!r}")


def _resolve_ps(args) -> list[Fraction]:
    ps = [_parse_prob(t) for t in (args.p or [])]
    if args.p_grid:
        start, stop = _parse_prob(args.p_grid[0]), _parse_prob(args.p_grid[1])
        try:
            steps = int(args.p_grid[2])
        except ValueError:
            raise ConfigError("p-grid steps must be an integer")
        if steps < 1:
            raise ConfigError("p-grid needs at least one step")
        if steps == 1:
            ps.append(start)
        else:
            ps.extend(start + (stop - start) * i / (steps - 1)
                      for i in range(steps))
    if not ps:
        raise ConfigError("no probability given; use --p or --p-grid")
    return ps


def _resolve_seed(args, needed: bool) -> int | None:
    if not needed:
        return None
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        return args.seed
    if os.environ.get("PERCLAB_REQUIRE_SEED"):
        raise ConfigError("--seed is required (PERCLAB_REQUIRE_SEED is set)")
    seed = secrets.randbits(64)
    print(f"perclab: seed drawn from system entropy: {seed}", file=sys.stderr)
    return seed


def _resolve_workers(args) -> int:
    if args.workers is not None:
        workers = args.workers
    else:
        try:
            workers = int(os.environ.get("PERCLAB_WORKERS", "1"))
        except ValueError:
            raise ConfigError("PERCLAB_WORKERS must be an integer")
    if workers < 1:
        raise ConfigError("workers must be positive")
    return workers


def _resolve_budget(args) -> EnumerationBudget:
    try:
        return EnumerationBudget(max_configs=args.max_configs,
                                 max_subsets=args.max_subsets)
    except ValueError as e:
        raise ConfigError(str(e))


def _resolve_witness(args, d: int) -> tuple[VertexSet, str]:
    if args.set_file:
        try:
            s = load_set_file(args.set_file)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot load set file: {e}")
        if s.dim != d:
            raise ConfigError(
                f"set file dimension {s.dim} does not match --dim {d}")
        return s, f"file:{args.set_file}"
    k = args.box if args.box is not None else 0
    if k < 0:
        raise ConfigError("--box radius must be >= 0")
    return make_box(d, k), f"box:{k}"


def _estimate_record(p: float, n: int, est, seed: int) -> dict:
    return {
        "kind": "estimate",
        "p": p,
        "n": n,
        "trials": est.trials,
        "successes": est.successes,
        "point": est.point,
        "ci": [est.ci_low, est.ci_high],
        "seed": seed,
    }


# ---------------------------------------------------------------------------
# subcommands

def cmd_phi(args) -> tuple[list[dict], int]:
    d = args.dim
    ps = _resolve_ps(args)
    witness, label = _resolve_witness(args, d)
    budget = _resolve_budget(args)
    mc = args.method == "mc"
    seed = _resolve_seed(args, needed=mc)
    workers = _resolve_workers(args)
    config = {
        "kind": "config", "subcommand": "phi", "dim": d,
        "witness": label, "witness_size": len(witness),
        "method": args.method, "p": [frac_str(p) for p in ps],
        "trials": args.trials if mc else None, "seed": seed,
        "max_configs": budget.max_configs, "max_subsets": budget.max_subsets,
    }
    records = [config]
    if mc:
        for p in ps:
            spec = estimator.SampleSpec(p=float(p), trials=args.trials,
                                        seed=seed, workers=workers)
            est = estimator.estimate_phi(witness, spec)
            records.append({
                "kind": "phi-estimate", "p": float(p), "trials": est.trials,
                "mean": est.mean, "sample_sd": est.sample_sd,
                "ci": [est.ci_low, est.ci_high], "seed": seed,
            })
    else:
        poly = exact.phi_exact(witness, budget)
        records.append({"kind": "phi-poly", "witness": label,
                        **poly.to_json()})
        for p in ps:
            records.append({"kind": "phi-value", "p": frac_str(p),
                            "phi": frac_str(poly(p))})
    return records, EXIT_OK


def cmd_pc_bound(args) -> tuple[list[dict], int]:
    d = args.dim
    budget = _resolve_budget(args)
    width_tol = Fraction(1, 2**args.width_tol_bits)
    config = {
        "kind": "config", "subcommand": "pc-bound", "dim": d,
        "kmax": args.kmax, "width_tol": frac_str(width_tol),
        "max_configs": budget.max_configs, "max_subsets": budget.max_subsets,
    }
    ladder = criterion.pc_lower_bound(d, args.kmax, width_tol, budget)
    records = [config]
    for entry in ladder.entries:
        rec = {"kind": "ladder-entry", "k": entry.k}
        if entry.error is None:
            rec["interval"] = [frac_str(entry.interval[0]),
                               frac_str(entry.interval[1])]
            rec["bound"] = frac_str(entry.bound)
            rec["phi_at_bound"] = frac_str(entry.phi_at_bound)
        else:
            rec["error"] = entry.error
        records.append(rec)
    best = criterion.pc_bound_to_json(ladder.best)
    records.append(best)
    if args.certificate_out:
        _write_json_file(args.certificate_out, best)
    return records, EXIT_OK


def cmd_decay(args) -> tuple[list[dict], int]:
    d = args.dim
    p = _parse_prob(args.p)
    witness, label = _resolve_witness(args, d)
    budget = _resolve_budget(args)
    seed = _resolve_seed(args, needed=True)
    workers = _resolve_workers(args)
    cert = None
    refusal = None
    try:
        cert = criterion.decay_certificate(d, p, witness, budget)
    except criterion.CertificateError as e:
        refusal = str(e)
    length = cert.length if cert else witness.max_norm() + 1
    if args.n_list:
        ns = _parse_int_list(args.n_list)
        ks = [n // length if n % length == 0 else None for n in ns]
    else:
        ks = list(range(1, args.kmax + 1))
        ns = [k * length for k in ks]
    if any(n < 1 for n in ns):
        raise ConfigError("box radii must be >= 1")
    config = {
        "kind": "config", "subcommand": "decay", "dim": d,
        "p": frac_str(p), "witness": label, "witness_size": len(witness),
        "L": length, "n": ns, "trials": args.trials, "seed": seed,
        "max_configs": budget.max_configs, "max_subsets": budget.max_subsets,
    }
    records = [config]
    if cert:
        records.append(criterion.decay_certificate_to_json(cert))
    else:
        records.append({"kind": "certificate-refused", "reason": refusal})
    points = []
    for n, k in zip(ns, ks):
        spec = estimator.SampleSpec(p=float(p), trials=args.trials,
                                    seed=seed, workers=workers)
        est = estimator.estimate_reach(d, n, spec)
        records.append(_estimate_record(float(p), n, est, seed))
        if cert and k is not None and k >= 1:
            bound = cert.bound_at(k)
            records.append({"kind": "decay-bound", "k": k, "n": n,
                            "bound": frac_str(bound),
                            "bound_float": float(bound)})
        points.append((n, est.point))
    try:
        fit = estimator.fit_decay(points)
        records.append({"kind": "decay-fit", "slope": fit.slope,
                        "intercept": fit.intercept,
                        "r_squared": fit.r_squared,
                        "dropped": list(fit.dropped)})
    except ValueError as e:
        records.append({"kind": "decay-fit-skipped", "reason": str(e)})
    if args.certificate_out and cert:
        _write_json_file(args.certificate_out,
                         criterion.decay_certificate_to_json(cert))
    return records, EXIT_OK


def cmd_meanfield(args) -> tuple[list[dict], int]:
    d = args.dim
    p = _parse_prob(args.p)
    budget = _resolve_budget(args)
    if args.pc_ref is not None:
        pc_ref = _parse_prob(args.pc_ref)
        source = "flag"
    elif d == 2:
        pc_ref = Fraction(1, 2)
        source = "exact critical point of the planar lattice"
    else:
        ladder = criterion.pc_lower_bound(d, 0, budget=budget)
        pc_ref = ladder.best.bound
        source = ("certified ladder lower bound; the floor is only a valid "
                  "check when p exceeds the true critical point")
    try:
        floor = criterion.meanfield_floor(p, pc_ref)
    except ValueError as e:
        raise ConfigError(str(e))
    seed = _resolve_seed(args, needed=True)
    workers = _resolve_workers(args)
    config = {
        "kind": "config", "subcommand": "meanfield", "dim": d,
        "p": frac_str(p), "n": args.n, "trials": args.trials, "seed": seed,
        "pc_ref": frac_str(pc_ref), "pc_ref_source": source,
        "max_configs": budget.max_configs, "max_subsets": budget.max_subsets,
    }
    records = [config]
    records.append({"kind": "meanfield-floor", "p": frac_str(p),
                    "pc_ref": frac_str(pc_ref),
                    "floor": frac_str(floor.floor),
                    "floor_float": float(floor.floor)})
    spec = estimator.SampleSpec(p=float(p), trials=args.trials, seed=seed,
                                workers=workers)
    est = estimator.estimate_reach(d, args.n, spec)
    records.append(_estimate_record(float(p), args.n, est, seed))
    threshold = float(floor.floor) - SIGMA_MARGIN * est.std_err
    ok = est.point >= threshold
    records.append({"kind": "meanfield-check", "point": est.point,
                    "floor_float": float(floor.floor),
                    "sigma_margin": SIGMA_MARGIN, "threshold": threshold,
                    "pass": ok})
    return records, EXIT_OK if ok else EXIT_CHECK


def cmd_verify(args) -> tuple[list[dict], int]:
    budget = _resolve_budget(args)
    if args.certificate:
        try:
            with open(args.certificate, "r", encoding="utf-8") as fh:
                obj = json.load(fh)
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read certificate: {e}")
        result = criterion.verify_certificate_json(obj, budget)
        records = [
            {"kind": "config", "subcommand": "verify",
             "certificate": args.certificate,
             "max_configs": budget.max_configs,
             "max_subsets": budget.max_subsets},
            {"kind": "certificate-verify", "certificate_kind": result.kind,
             "pass": result.ok, **result.details},
        ]
        return records, EXIT_OK if result.ok else EXIT_CHECK

    d, n = args.dim, args.n
    if n is None:
        raise ConfigError("identity checks need --n (or use --certificate)")
    if args.p:
        ps = [_parse_prob(t) for t in args.p]
    else:
        ps = [Fraction(1, 10), Fraction(1, 4), Fraction(1, 2),
              Fraction(3, 4), Fraction(9, 10)]
    config = {
        "kind": "config", "subcommand": "verify", "dim": d, "n": n,
        "p": [frac_str(p) for p in ps],
        "max_configs": budget.max_configs,
        "max_subsets": budget.max_subsets,
    }
    records = [config]
    all_ok = True

    residual = exact.russo_residual(d, n, budget)
    russo_ok = residual.is_zero()
    all_ok &= russo_ok
    records.append({"kind": "russo-check", "n": n,
                    "residual": frac_str(residual(Fraction(1, 2))),
                    "residual_is_zero_poly": russo_ok,
                    "pass": russo_ok})

    for p in ps:
        table = exact.blocking_decomposition(d, n, p, budget)
        ok = table.identity_ok
        all_ok &= ok
        records.append({
            "kind": "blocking-check", "p": frac_str(p),
            "reassembled": frac_str(table.reassembled),
            "target": frac_str(table.target),
            "residual": frac_str(table.reassembled - table.target),
            "blocked_total": frac_str(table.blocked_total),
            "not_reached": frac_str(table.not_reached),
            "pass": ok,
        })

    for p in ps:
        if n < 1 or p == 0 or p == 1:
            records.append({"kind": "lemma-check", "p": frac_str(p),
                            "applicable": False,
                            "reason": "stated for n >= 1 and 0 < p < 1"})
            continue
        check = exact.lemma_check(d, n, p, budget)
        all_ok &= check.ok
        records.append({
            "kind": "lemma-check", "p": frac_str(p), "applicable": True,
            "lhs": frac_str(check.lhs), "rhs": frac_str(check.rhs),
            "inf_phi": frac_str(check.inf_phi), "pass": check.ok,
        })
    return records, EXIT_OK if all_ok else EXIT_CHECK


# ---------------------------------------------------------------------------
# emission

def _default_json(value):
    raise TypeError(f"unserializable value {value!r}")


def _records_to_json_lines(records: list[dict]) -> str:
    return "".join(json.dumps(r, default=_default_json) + "\n"
                   for r in records)


def _records_to_csv(records: list[dict]) -> str:
    fields: list[str] = []
    for rec in records:
        for key in rec:
            if key not in fields:
                fields.append(key)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(fields)
    for rec in records:
        row = []
        for key in fields:
            if key not in rec:
                row.append("")
            else:
                value = rec[key]
                row.append(value if isinstance(value, str)
                           else json.dumps(value))
        writer.writerow(row)
    return buf.getvalue()


def _emit(records: list[dict], args) -> None:
    text = (_records_to_csv(records) if args.format == "csv"
            else _records_to_json_lines(records))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _write_json_file(path: str, obj: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# parser

def _add_common(sub, mc: bool) -> None:
    sub.add_argument("--dim", type=int, default=2,
                     help="lattice dimension (default 2)")
    sub.add_argument("--max-configs", type=int, default=2**22,
                     help="enumeration budget for edge configurations")
    sub.add_argument("--max-subsets", type=int, default=2**20,
                     help="enumeration budget for vertex subsets")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--out", help="write records to this file")
    if mc:
        sub.add_argument("--trials", type=int, default=10000)
        sub.add_argument("--seed", type=int)
        sub.add_argument("--workers", type=int,
                         help="trial scheduling only; results unaffected "
                              "(default $PERCLAB_WORKERS or 1)")


def _add_witness(sub) -> None:
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--box", type=int,
                       help="use the box Λ_k as the vertex set")
    group.add_argument("--set-file",
                       help="load the vertex set from a text file "
                            "(one vertex per line, integer coordinates)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perclab",
        description="Percolation laboratory: exact phi functionals, "
                    "certified critical-point bounds, seeded Monte Carlo.")
    subs = parser.add_subparsers(dest="subcommand", required=True)

    p_phi = subs.add_parser("phi", help="evaluate the phi functional")
    _add_common(p_phi, mc=True)
    _add_witness(p_phi)
    p_phi.add_argument("--method", choices=("exact", "mc"), default="exact")
    p_phi.add_argument("--p", action="append",
                       help="probability (fraction or decimal); repeatable")
    p_phi.add_argument("--p-grid", nargs=3, metavar=("START", "STOP", "STEPS"),
                       help="evenly spaced probability grid")
    p_phi.set_defaults(func=cmd_phi)

    p_pc = subs.add_parser("pc-bound",
                           help="certified lower bounds on the critical point")
    _add_common(p_pc, mc=False)
    p_pc.add_argument("--kmax", type=int, default=1,
                      help="largest box radius in the witness ladder")
    p_pc.add_argument("--width-tol-bits", type=int, default=30,
                      help="bisection stops at interval width 2^-BITS")
    p_pc.add_argument("--certificate-out",
                      help="write the best bound certificate to this file")
    p_pc.set_defaults(func=cmd_pc_bound)

    p_decay = subs.add_parser("decay",
                              help="reach estimates against the decay "
                                   "certificate and a log-linear fit")
    _add_common(p_decay, mc=True)
    _add_witness(p_decay)
    p_decay.add_argument("--p", required=True)
    p_decay.add_argument("--kmax", type=int, default=4,
                         help="check radii n = k·L for k = 1..kmax")
    p_decay.add_argument("--n-list",
                         help="explicit comma-separated radii instead")
    p_decay.add_argument("--certificate-out")
    p_decay.set_defaults(func=cmd_decay)

    p_mf = subs.add_parser("meanfield",
                           help="finite-volume mean-field floor check")
    _add_common(p_mf, mc=True)
    p_mf.add_argument("--p", required=True)
    p_mf.add_argument("--n", type=int, default=32)
    p_mf.add_argument("--pc-ref",
                      help="reference critical point (default: 1/2 in d=2, "
                           "else the certified ladder bound)")
    p_mf.set_defaults(func=cmd_meanfield)

    p_ver = subs.add_parser("verify",
                            help="exact identity checks, or re-check a "
                                 "certificate file")
    _add_common(p_ver, mc=False)
    p_ver.add_argument("--n", type=int,
                       help="box radius for the identity checks")
    p_ver.add_argument("--p", action="append",
                       help="probabilities for the per-p identities "
                            "(default 1/10, 1/4, 1/2, 3/4, 9/10)")
    p_ver.add_argument("--certificate",
                       help="re-check this certificate file from scratch")
    p_ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        records, code = args.func(args)
    except ConfigError as e:
        print(f"perclab: error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceededError as e:
        print(f"perclab: budget exceeded: {e}", file=sys.stderr)
        return EXIT_BUDGET
    _emit(records, args)
    return code


if __name__ == "__main__":
    sys.exit(main())
