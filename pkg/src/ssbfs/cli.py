"""``ssbfs`` command line: simulation sweeps, property suites and encoding sizes."""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path


from .analysis import (
    ALL_CLOSURE_PROPERTIES,
    BASIC_CLOSURES,
    ClosureProperty,
    Stage,
    bound_report,
    closure_check,
    first_index,
    legitimate_step_check,
    model_check_basics,
    move_language_check,
    stage_label,
)
from .attractors import L_A1, L_A2, L_A3, L_A4, L_AL
from .daemon import ALL_POLICIES, DaemonPolicy, Stop, StopReason, execute, trace_records
from .model import (
    Configuration,
    Topology,
    load_configuration,
    load_topology,
    pack,
    packed_width,
    random_configuration,
    unpack,
)
from .predicates import LITERAL_STRONG_CONFLICT, predicate_table
from .rules import GuardExclusivityError
from .topologies import named_graph, parse_topology

CSV_VERSION = 1
CSV_COLUMNS = (
    "n", "D", "topology_kind", "seed", "policy",
    "rounds_to_A1", "rounds_to_A2", "rounds_to_A3", "rounds_to_A4", "rounds_to_Al",
    "max_root_gap", "construction_rounds", "max_moves_per_process",
)
SUITES = ("basics", "closures", "recovery", "stages", "languages")
EXIT_VIOLATION = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class ExperimentSpec:
    topology: str
    trials: int
    daemon: str
    seed: int
    stop: str
    init: str = "random"
    max_steps: int | None = None
    max_rounds: int | None = None
    strict: bool = False
    flags: int = 0


@dataclass
class TrialResult:
    row: dict[str, object]
    met_stop: bool
    stop_reason: str
    violations: list[str]
    trace: list[dict] | None = None


def _topology_for(text: str, seed: int) -> tuple[Topology, str]:
    if Path(text).is_file():
        return load_topology(text), "file"
    return parse_topology(text, seed)


def _initial(spec: ExperimentSpec, topology: Topology, seed: int) -> Configuration:
    if spec.init == "random":
        return random_configuration(topology, seed)
    if spec.init.startswith("file:"):
        return load_configuration(spec.init[5:], topology)
    raise ValueError(f"bad --init value {spec.init!r}")


def run_trial(spec: ExperimentSpec, index: int, keep_trace: bool = False) -> TrialResult:
    """One isolated trial with seed ``spec.seed + index``."""
    seed = spec.seed + index
    topology, kind = _topology_for(spec.topology, seed)
    policy = DaemonPolicy.parse(spec.daemon, seed)
    trace = execute(
        topology, _initial(spec, topology, seed), policy, spec.stop, spec.max_steps,
        max_rounds=spec.max_rounds, strict=spec.strict, record=False, flags=spec.flags,
    )
    report = bound_report(trace)
    row = {
        "n": topology.n,
        "D": topology.diameter,
        "topology_kind": kind,
        "seed": seed,
        "policy": policy.label(),
        **{f"rounds_to_{k}": v for k, v in report.rounds_to.items()},
        "max_root_gap": max(report.max_root_gap, report.open_root_gap),
        "construction_rounds": report.construction_rounds,
        "max_moves_per_process": report.max_moves_per_process,
    }
    met = trace.stop_reason is StopReason.TARGET_REACHED
    return TrialResult(
        row, met, trace.stop_reason.value, report.violations,
        list(trace_records(trace)) if keep_trace else None,
    )


def _run_trials(spec: ExperimentSpec, keep_trace: bool, jobs: int) -> list[TrialResult]:
    if jobs <= 1:
        return [run_trial(spec, i, keep_trace) for i in range(spec.trials)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_trial, [spec] * spec.trials, range(spec.trials), [keep_trace] * spec.trials))


def format_csv(results: list[TrialResult]) -> str:
    buf = io.StringIO()
    buf.write(f"# ssbfs-trials v{CSV_VERSION}\n")
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in results:
        writer.writerow({k: "" if r.row[k] is None else r.row[k] for k in CSV_COLUMNS})
    return buf.getvalue()


def format_structured(results: list[TrialResult]) -> str:
    lines = []
    for r in results:
        rec = dict(r.row, stop_reason=r.stop_reason, violations=r.violations)
        lines.append(json.dumps(rec, sort_keys=True))
    return "\n".join(lines) + "\n"


def cmd_simulate(args: argparse.Namespace) -> int:
    spec = ExperimentSpec(
        topology=args.topology,
        trials=args.trials,
        daemon=args.daemon,
        seed=args.seed,
        stop=args.stop,
        init=args.init,
        max_steps=args.max_steps,
        max_rounds=args.max_rounds,
        strict=args.strict_guards == "on",
        flags=LITERAL_STRONG_CONFLICT if args.literal_strong_conflict else 0,
    )
    Stop.parse(spec.stop)
    try:
        results = _run_trials(spec, args.trace is not None, args.jobs)
    except GuardExclusivityError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VIOLATION
    text = format_csv(results) if args.format == "csv" else format_structured(results)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.trace:
        with open(args.trace, "w") as fh:
            for i, r in enumerate(results):
                for rec in r.trace or ():
                    fh.write(json.dumps({"trial": i, **rec}) + "\n")
    missed = [i for i, r in enumerate(results) if not r.met_stop]
    flagged = sum(1 for r in results if r.violations)
    if flagged:
        print(f"{flagged} trial(s) violated a proven bound", file=sys.stderr)
    if missed:
        print(f"{len(missed)} trial(s) missed the stop condition: {missed[:10]}", file=sys.stderr)
        return EXIT_VIOLATION
    return 0


# --- check ---------------------------------------------------------------------


@dataclass
class Verdict:
    name: str
    violations: int
    checked: int
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        tail = f"  [{self.note}]" if self.note else ""
        return f"{status}  {self.name}: {self.violations} violations / {self.checked} checked{tail}"


def suite_basics(topology: Topology, args) -> list[Verdict]:
    rep = model_check_basics(topology)
    out = [
        Verdict("liveness (some process enabled)", rep.liveness_violations, rep.configurations),
        Verdict("guard exclusivity", rep.exclusivity_violations, rep.configurations),
    ]
    if rep.strong_conflict_readings_differ:
        out[1].note = (
            f"single-witness StrongConflict would change guards in "
            f"{rep.guards_differ_under_literal_reading} configurations"
        )
    return out


def suite_closures(topology: Topology, args) -> list[Verdict]:
    out = []
    rep = closure_check(topology, ALL_CLOSURE_PROPERTIES)
    for p in ALL_CLOSURE_PROPERTIES:
        out.append(Verdict(f"closure {p.value}", rep.counts[p], rep.steps_checked))
    guarded = (ClosureProperty.NOT_UNSAFE, ClosureProperty.BECOMING_INFLUENTIAL_COLOR)
    rep = closure_check(topology, guarded, within="A1")
    for p in guarded:
        out.append(Verdict(f"closure {p.value} (steps from A1)", rep.counts[p], rep.steps_checked))
    rep = closure_check(topology, BASIC_CLOSURES, "randomized", trials=args.trials, steps=200, seed=args.seed)
    for p in BASIC_CLOSURES:
        out.append(Verdict(f"closure {p.value} (random walks)", rep.counts[p], rep.steps_checked))
    return out


def _sweep(topology: Topology, args, stop: str, record: bool):
    """Random initial configurations under every daemon kind, in turn."""
    for i in range(args.trials):
        seed = args.seed + i
        base = ALL_POLICIES[i % len(ALL_POLICIES)]
        policy = DaemonPolicy(base.kind, seed, base.probability, base.script)
        yield execute(topology, random_configuration(topology, seed), policy, stop, record=record)


def suite_recovery(topology: Topology, args) -> list[Verdict]:
    counts = {"StrongE": [0, 0], "WeakE": [0, 0], "Power": [0, 0], "PIC": [0, 0], "PIR": [0, 0]}
    gaps = bounds = runs = 0
    for trace in _sweep(topology, args, "constructions:1", False):
        rep = bound_report(trace)
        runs += 1
        for name, (checked, bad) in {**rep.recovery, **rep.potentials}.items():
            counts[name][0] += checked
            counts[name][1] += bad
        gaps += max(rep.max_root_gap, rep.open_root_gap) > rep.root_gap_bound
        bounds += any(v.startswith("rounds to") for v in rep.violations)
    out = [
        Verdict("StrongE leaves within 2 rounds", counts["StrongE"][1], counts["StrongE"][0]),
        Verdict("WeakE reaches Idle or StrongE within 2 rounds", counts["WeakE"][1], counts["WeakE"][0]),
        Verdict("Power resolves within 4 rounds from A1", counts["Power"][1], counts["Power"][0]),
        Verdict("PIC potential decreases over 4 rounds", counts["PIC"][1], counts["PIC"][0]),
        Verdict("PIR potential decreases over 4 rounds", counts["PIR"][1], counts["PIR"][0]),
        Verdict("root moves at least every 2n+3 rounds in A4", gaps, runs),
        Verdict("rounds to A1..Al within bounds", bounds, runs),
    ]
    return out


def suite_stages(topology: Topology, args) -> list[Verdict]:
    step_bad = nesting_bad = stage_bad = checked = 0
    for trace in _sweep(topology, args, "constructions:2", True):
        checked += trace.step_count
        step_bad += len(legitimate_step_check(trace))
        for lv in trace.levels:
            chain = [bool(lv & b) for b in (L_A1, L_A2, L_A3, L_A4, L_AL)]
            nesting_bad += any(b and not a for a, b in zip(chain, chain[1:]))
        al = first_index(trace, L_AL)
        if al is not None:
            for i in range(al, trace.step_count + 1):
                stage_bad += stage_label(trace.configuration(i), topology).stage is Stage.NOT_IN_PHASE
    return [
        Verdict("attractor nesting", nesting_bad, checked + args.trials),
        Verdict("legitimate-regime step lemmas", step_bad, checked),
        Verdict("every configuration after Al has a stage", stage_bad, checked),
    ]


def suite_languages(topology: Topology, args) -> list[Verdict]:
    bad = total = 0
    for trace in _sweep(topology, args, "constructions:2", False):
        al = first_index(trace, L_AL)
        if al is None:
            continue
        verdict = move_language_check(trace, al)
        total += len(verdict)
        bad += sum(not ok for ok in verdict.values())
    return [Verdict("move languages from Al", bad, total)]


_SUITE_FUNCS = {
    "basics": suite_basics,
    "closures": suite_closures,
    "recovery": suite_recovery,
    "stages": suite_stages,
    "languages": suite_languages,
}


def cmd_check(args: argparse.Namespace) -> int:
    if args.graph:
        topology = named_graph(args.graph)
    else:
        topology, _ = _topology_for(args.topology, args.seed)
    suites = SUITES if args.suite == "all" else (args.suite,)
    failed = 0
    for suite in suites:
        print(f"== {suite}")
        for verdict in _SUITE_FUNCS[suite](topology, args):
            print(verdict)
            failed += not verdict.passed
    print(f"{failed} failing check(s)")
    return EXIT_VIOLATION if failed else 0


def cmd_pack(args: argparse.Namespace) -> int:
    topology, _ = _topology_for(args.topology, 0)
    config = load_configuration(args.config, topology)
    total = 0
    for u in range(topology.n):
        deg = topology.degree(u)
        nbrs = topology.neighbors(u)
        packed = pack(config[u], deg, nbrs)
        if unpack(packed, deg, nbrs) != config[u]:
            print(f"node {u}: round trip failed", file=sys.stderr)
            return EXIT_VIOLATION
        assert packed.width == packed_width(deg)
        total += packed.width
        print(f"node {u}: degree {deg}, {packed.width} bits")
    print(f"total: {total} bits")
    return 0


def cmd_predicates(args: argparse.Namespace) -> int:
    topology, _ = _topology_for(args.topology, 0)
    config = load_configuration(args.config, topology)
    for row in predicate_table(config, topology):
        print(json.dumps(row))
    return 0


def _positive(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssbfs", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run seeded trials and emit one report row per trial")
    sim.add_argument("--topology", required=True, help="path:N | cycle:N | star:N | grid:WxH | random:N,P | complete:N | file:PATH")
    sim.add_argument("--init", default="random", help="random | file:PATH")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--daemon", default="sync")
    sim.add_argument("--stop", default="Al", help="A1..A4 | Al | rounds:N | constructions:N")
    sim.add_argument("--max-steps", type=_positive)
    sim.add_argument("--max-rounds", type=_positive)
    sim.add_argument("--trials", type=_positive, default=1)
    sim.add_argument("--out")
    sim.add_argument("--format", choices=("csv", "structured"), default="csv")
    sim.add_argument("--trace", help="write every step of every trial as JSON lines")
    sim.add_argument("--strict-guards", choices=("on", "off"), default="off")
    sim.add_argument("--literal-strong-conflict", action="store_true")
    sim.add_argument("--jobs", type=_positive, default=1)
    sim.set_defaults(func=cmd_simulate)

    chk = sub.add_parser("check", help="run property suites")
    where = chk.add_mutually_exclusive_group(required=True)
    where.add_argument("--graph", choices=("p2", "p3", "triangle", "star4"))
    where.add_argument("--topology")
    chk.add_argument("--suite", choices=SUITES + ("all",), default="all")
    chk.add_argument("--trials", type=_positive, default=21)
    chk.add_argument("--seed", type=int, default=0)
    chk.set_defaults(func=cmd_check)

    pk = sub.add_parser("pack", help="bit widths of the packed local states")
    pk.add_argument("--config", required=True)
    pk.add_argument("--topology", required=True)
    pk.set_defaults(func=cmd_pack)

    pr = sub.add_parser("predicates", help="every predicate at every node, one JSON line per node")
    pr.add_argument("--config", required=True)
    pr.add_argument("--topology", required=True)
    pr.set_defaults(func=cmd_predicates)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
