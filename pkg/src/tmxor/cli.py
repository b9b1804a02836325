"""Command line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 a verification or
assertion failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from tmxor import acceptance, dtmc, lab
from tmxor.core import SUBPATTERN_A, SUBPATTERN_B, MachineConfig, get_dataset
from tmxor.seeding import SEED_ENV, resolve_seed

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2

DTMC_PRESETS = {
    "theorem1": dict(single_clause=False, dataset="xor-full", expect="theorem1"),
    "lemma1": dict(single_clause=True, dataset="subpattern-a", expect="absorbing", target=[7]),
    "lemma2": dict(single_clause=True, dataset="subpattern-b", expect="absorbing", target=[10]),
    "lemma3": dict(single_clause=True, dataset="xor-full", expect="recurrent"),
}
TRAIN_PRESETS = ("theorem6", "remark2", "lemma4", "lemma1", "lemma2")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        print(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tmxor", description="Tsetlin Machine XOR convergence lab")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    d = sub.add_parser("dtmc", help="exact Markov-chain verification")
    d.add_argument("--s", type=float, default=10.0)
    d.add_argument("--T", type=int, default=1)
    d.add_argument("--single-clause", action="store_true")
    d.add_argument("--dataset", default=None)
    d.add_argument("--u1", type=float, default=0.5)
    d.add_argument("--u2", type=float, default=0.5)
    d.add_argument("--tol", type=float, default=1e-12, help="squaring convergence tolerance")
    d.add_argument("--expect", choices=["theorem1", "absorbing", "recurrent"], default=None)
    d.add_argument("--assert", dest="preset", choices=sorted(DTMC_PRESETS), default=None)
    d.add_argument("--out", help="ChainReport JSON path (stdout if omitted)")
    d.add_argument("--matrix-out", help="also dump the one-step matrix here")
    d.add_argument("--format", choices=["json", "csv"], default="json", help="matrix dump format")

    t = sub.add_parser("train", help="seeded Monte Carlo experiment")
    t.add_argument("--m", type=int, default=4)
    t.add_argument("--T", type=int, default=2)
    t.add_argument("--s", type=float, default=10.0)
    t.add_argument("--N", type=int, default=None, help="automaton half-depth (default 1; remark2 uses 100)")
    t.add_argument("--Th", type=int, default=1)
    t.add_argument("--seed", type=int, default=None, help=f"master seed (falls back to ${SEED_ENV})")
    t.add_argument("--steps", type=int, default=acceptance.MC_STEPS)
    t.add_argument("--runs", type=int, default=acceptance.MC_RUNS)
    t.add_argument("--dataset", default="xor-full")
    t.add_argument("--u1", type=float, default=None, help="fixed Type I gate (disables T)")
    t.add_argument("--u2", type=float, default=None, help="fixed Type II gate (disables T)")
    t.add_argument("--dwell", type=int, default=1000)
    t.add_argument("--stride", type=int, default=1000)
    t.add_argument("--assert", dest="preset", choices=TRAIN_PRESETS, default=None)
    t.add_argument("--out", help="CoverageReport JSON path (stdout if omitted)")
    t.add_argument("--trajectories", help="write per-run coverage trajectories here")
    t.add_argument("--format", choices=["json", "csv"], default="csv", help="trajectory format")

    v = sub.add_parser("verify-all", help="run the acceptance checks")
    v.add_argument("--only", action="append", choices=acceptance.GROUPS,
                   help="restrict to one check group (repeatable)")
    v.add_argument("--out", help="write results as JSON")
    return p


def cmd_dtmc(args) -> int:
    target = None
    single, dataset_name, expect = args.single_clause, args.dataset, args.expect
    if args.preset:
        pre = DTMC_PRESETS[args.preset]
        single, dataset_name, expect = pre["single_clause"], pre["dataset"], pre["expect"]
        target = pre.get("target")
    dataset = get_dataset(dataset_name or ("subpattern-a" if single else "xor-full"))
    if single:
        P = dtmc.build_single_clause_matrix(dataset, args.u1, args.u2, args.s)
        config = {"m": 1, "N": 1, "s": args.s, "fixed_gates": [args.u1, args.u2], "dataset": dataset.name}
    else:
        if dataset.name != "xor-full":
            raise UsageError("the two-clause chain is defined on the full XOR dataset")
        P = dtmc.build_two_clause_matrix(args.s, args.T)
        config = {"m": 2, "N": 1, "s": args.s, "T": args.T, "dataset": dataset.name}
    try:
        report = dtmc.analyze(P, tol=args.tol, config=config)
    except dtmc.NonConvergence as exc:
        print(f"tmxor dtmc: {exc}", file=sys.stderr)
        return EXIT_FAILED
    expect = expect or ("absorbing" if single else "theorem1")
    if expect == "theorem1":
        ok = report.verdict and report.absorbing == [106, 151]
    elif expect == "recurrent":
        ok = report.absorbing == []
    else:
        ok = report.verdict and bool(report.absorbing) and (target is None or report.absorbing == target)
    payload = report.to_dict() | {"expect": expect, "passed": ok}
    _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    if args.matrix_out:
        Path(args.matrix_out).write_text(P.to_csv() if args.format == "csv" else P.to_json())
    return EXIT_OK if ok else EXIT_FAILED


def _train_spec(args) -> tuple[lab.ExperimentSpec, str | None]:
    preset = args.preset
    if args.T > args.m:
        raise UsageError(f"T={args.T} exceeds the clause count m={args.m}")
    if preset == "lemma4" and not args.T < args.m:
        raise UsageError("lemma4 needs T < m")
    if preset == "theorem6" and not 2 * args.T <= args.m:
        raise UsageError("theorem6 needs T <= m/2")
    if preset == "remark2" and not 2 * args.T > args.m:
        raise UsageError("remark2 needs T > m/2")
    N = args.N if args.N is not None else (acceptance.REMARK2_N if preset == "remark2" else 1)
    gates = None
    dataset = get_dataset(args.dataset)
    if preset in ("lemma1", "lemma2"):
        dataset = SUBPATTERN_A if preset == "lemma1" else SUBPATTERN_B
        gates = (args.u1 or 0.5, args.u2 or 0.5)
    elif args.u1 is not None or args.u2 is not None:
        if args.u1 is None or args.u2 is None:
            raise UsageError("--u1 and --u2 must be given together")
        gates = (args.u1, args.u2)
    try:
        cfg = MachineConfig(m=args.m, T=args.T, s=args.s, N=N, Th=args.Th, fixed_gates=gates)
        stop = lab.StopRule.BOTH_SUBPATTERNS_AT_T if preset == "theorem6" else lab.StopRule.BUDGET
        spec = lab.ExperimentSpec(
            cfg, dataset, runs=args.runs, steps=args.steps, stride=args.stride, stop=stop,
            dwell=args.dwell, level=(args.m - args.T) if preset == "remark2" else None,
            keep_trajectories=bool(args.trajectories),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    return spec, preset


def cmd_train(args) -> int:
    spec, preset = _train_spec(args)
    seed = resolve_seed(args.seed)
    report = lab.run_experiment(spec, seed)
    payload = report.to_dict()
    ok = True
    if preset:
        m, T = spec.config.m, spec.config.T
        if preset == "theorem6":
            value, need = report.fraction_sustained, acceptance.MC_FRACTION
        elif preset == "remark2":
            value, need = report.fraction_both(m - T), acceptance.MC_FRACTION
        elif preset == "lemma4":
            value, need = report.fraction_hit, 0.99
        else:
            col = 0 if preset == "lemma1" else 1
            value, need = float(report.counts[:, col].sum() / (spec.runs * m)), 0.99
        ok = value >= need
        payload["assertion"] = {"preset": preset, "value": value, "threshold": need, "passed": ok}
    _emit(json.dumps(payload, indent=2, sort_keys=True), args.out)
    if args.trajectories:
        if args.format == "csv":
            text = report.trajectories_csv()
        else:
            text = json.dumps([list(r) for r in report.trajectories])
        Path(args.trajectories).write_text(text)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_verify_all(args) -> int:
    results = acceptance.run_checks(args.only)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    if args.out:
        Path(args.out).write_text(json.dumps(
            [{"name": r.name, "group": r.group, "passed": r.passed, "detail": r.detail, "seconds": r.seconds}
             for r in results], indent=2))
    if failed:
        print(f"first failing group: {failed[0].group}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"dtmc": cmd_dtmc, "train": cmd_train, "verify-all": cmd_verify_all}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        print(f"tmxor {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"tmxor {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
