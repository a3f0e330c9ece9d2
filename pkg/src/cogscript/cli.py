"""Command line entry point: solve, bench, trace, gen and train.

Exit codes: 0 solved (or success), 1 usage or I/O error, 2 budget
exhausted, 3 frontier exhausted, 4 unsatisfiable generation template.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus
from .emulator import ParseError, execute, format_program
from .model import (MODEL_DIR_ENV, TransitionModel, default_model_path, load_mask, save_mask)
from .render import render_svg, render_trace
from .search import ConceptError, SearchConfig, induce
from .world import Scene, SceneError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_BUDGET = 2
EXIT_FRONTIER = 3
EXIT_UNSAT = 4
STATUS_EXIT = {"solved": EXIT_OK, "budget_exhausted": EXIT_BUDGET, "frontier_exhausted": EXIT_FRONTIER}

log = logging.getLogger("cogscript")


class CliError(Exception):
    pass


def bits(nats: float) -> float:
    return nats / math.log(2)


# -- shared helpers ---------------------------------------------------------

def load_model(args) -> TransitionModel:
    path = Path(args.model) if args.model else default_model_path()
    try:
        model = TransitionModel.load(path)
    except (OSError, ValueError, KeyError) as e:
        raise CliError(f"cannot load model {path}: {e} (set --model or {MODEL_DIR_ENV})") from None
    if args.mask:
        try:
            model = model.masked(load_mask(args.mask))
        except (OSError, ValueError, KeyError) as e:
            raise CliError(f"cannot load mask {args.mask}: {e}") from None
    return model


def load_concept_file(path):
    try:
        return corpus.load_concept(path)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None
    except (corpus.SchemaError, ConceptError) as e:
        raise CliError(f"{path}: {e}") from None


def search_config(args, mode=None, budget=None) -> SearchConfig:
    return SearchConfig(
        n_progs=budget or args.budget,
        mode=mode or args.mode,
        mutation_enabled=not args.no_mutation,
        match_mode="by_id" if args.match_by_id else "by_property",
        epsilon_arg=args.epsilon_arg,
        seed=args.seed,
        parallel_workers=args.workers,
        order_retry=args.order_retry,
    )


def prog_lines(program):
    return [str(i) for i in program]


def result_record(name, cfg: SearchConfig, result) -> dict:
    """Structured solve report.  Contains no timing so that it is
    byte-identical across runs with the same flags."""
    rec = {
        "concept": name,
        "mode": cfg.mode,
        "budget": cfg.n_progs,
        "mutation": cfg.mutation_enabled,
        "match_mode": cfg.match_mode,
        "epsilon_arg": cfg.epsilon_arg,
        "order_retry": cfg.order_retry,
        "seed": cfg.seed,
        "status": result.status,
        "visited": result.visited,
        "mutation_rounds": result.mutation_rounds,
        "program": prog_lines(result.program) if result.program else None,
        "dl_bits": round(bits(result.dl), 9) if result.program else None,
        "subgoals": [{"root": prog_lines(h.root), "new_matches": [list(m) for m in h.new_matches],
                      "visited": h.visited, "via": h.via} for h in result.subgoal_history],
    }
    bp = result.best_partial
    if bp is not None and not result.solved:
        rec["best_partial"] = {
            "program": prog_lines(bp.program),
            "matched": [sorted(r.matched_target_ids) for r in bp.reports],
            "pruned": [{"program": prog_lines(p), "example": i, "lost": lost} for p, i, lost in bp.pruned[:5]],
        }
    return rec


def explain_partial(concept, result) -> str:
    bp = result.best_partial
    if bp is None:
        return "no partial solution"
    lines = ["best partial solution:"]
    lines += [f"  {s}" for s in prog_lines(bp.program)]
    for i, (rep, (_, out)) in enumerate(zip(bp.reports, concept.examples)):
        missing = sorted(o.id for o in out.objects if o.id not in rep.matched_target_ids)
        lines.append(f"  example {i}: matched {sorted(rep.matched_target_ids)} of {len(out.objects)} objects"
                     + (f", unmatched {missing}" if missing else ""))
    for prog, i, lost in bp.pruned[:3]:
        lines.append(f"  pruned (example {i} lost {lost}): " + " ; ".join(prog_lines(prog)))
    return "\n".join(lines)


# -- solve ------------------------------------------------------------------

def cmd_solve(args) -> int:
    concept = load_concept_file(args.concept)
    model = load_model(args)
    cfg = search_config(args)
    result = induce(concept, model, cfg)
    rec = result_record(concept.name, cfg, result)
    if result.solved:
        print(f"solved {concept.name}: {len(result.program)} instructions, "
              f"{bits(result.dl):.2f} bits, {result.visited} programs visited")
        print(format_program(result.program), end="")
        out = Path(args.out) if args.out else Path(args.concept).with_suffix(".solution.program")
        out.write_text(format_program(result.program))
    else:
        print(f"{result.status} on {concept.name} after {result.visited} programs")
        print(explain_partial(concept, result))
    if args.report:
        Path(args.report).write_text(json.dumps(rec, sort_keys=True) + "\n")
    return STATUS_EXIT[result.status]


# -- bench ------------------------------------------------------------------

@dataclass
class BenchRow:
    name: str
    mode: str
    status: str
    visited: int
    seconds: float
    length: int
    mutation_rounds: int
    error: str = ""


@dataclass
class BenchReport:
    rows: list = field(default_factory=list)

    def aggregates(self) -> dict:
        out = {}
        for mode in dict.fromkeys(r.mode for r in self.rows):
            rows = [r for r in self.rows if r.mode == mode]
            solved = [r for r in rows if r.status == "solved"]
            out[mode] = {
                "concepts": len(rows),
                "solved": len(solved),
                "solve_rate": len(solved) / len(rows),
                "median_visited": statistics.median(r.visited for r in rows),
                "median_seconds": statistics.median(r.seconds for r in rows),
            }
        return out

    def table(self) -> str:
        head = f"{'concept':<32} {'mode':<10} {'status':<18} {'visited':>8} {'sec':>8} {'len':>4} {'mut':>4}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.name:<32} {r.mode:<10} {r.status:<18} {r.visited:>8} {r.seconds:>8.2f} "
                         f"{r.length:>4} {r.mutation_rounds:>4}")
        for mode, a in self.aggregates().items():
            lines.append(f"{mode}: solved {a['solved']}/{a['concepts']} ({100 * a['solve_rate']:.0f}%), "
                         f"median visited {a['median_visited']:g}, median time {a['median_seconds']:.2f}s")
        return "\n".join(lines)


def run_bench(entries, modes, args, model) -> BenchReport:
    report = BenchReport()
    for e in entries:
        try:
            concept = corpus.load_concept(e.path)
        except (OSError, corpus.SchemaError, ConceptError) as err:
            for mode in modes:
                report.rows.append(BenchRow(str(e.path), mode, "error", 0, 0.0, 0, 0, str(err)))
            continue
        for mode in modes:
            cfg = search_config(args, mode=mode, budget=e.budget)
            t0 = time.perf_counter()
            r = induce(concept, model, cfg)
            dt = time.perf_counter() - t0
            report.rows.append(BenchRow(concept.name, mode, r.status, r.visited, dt,
                                        len(r.program) if r.program else 0, r.mutation_rounds))
            log.info("%s %s %s visited=%d", concept.name, mode, r.status, r.visited)
    return report


def cmd_bench(args) -> int:
    try:
        entries = corpus.load_manifest(args.manifest)
    except OSError as e:
        raise CliError(f"cannot read {args.manifest}: {e.strerror}") from None
    except corpus.SchemaError as e:
        raise CliError(str(e)) from None
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for m in modes:
        if m not in ("naive", "factorized"):
            raise CliError(f"unknown mode {m!r}")
    report = run_bench(entries, modes, args, load_model(args))
    if report.rows:
        print(report.table())
    else:
        print("empty manifest: nothing to run")
    if args.out:
        with open(args.out, "w") as f:
            for r in report.rows:
                f.write(json.dumps({"record": "concept", **r.__dict__}, sort_keys=True) + "\n")
            for mode, a in report.aggregates().items():
                f.write(json.dumps({"record": "aggregate", "mode": mode, **a}, sort_keys=True) + "\n")
    if args.histogram:
        with open(args.histogram, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["mode", "concept", "status", "visited", "seconds"])
            for r in report.rows:
                w.writerow([r.mode, r.name, r.status, r.visited, f"{r.seconds:.4f}"])
    return EXIT_OK


# -- trace ------------------------------------------------------------------

def load_scene(args) -> Scene:
    path = Path(args.scene)
    try:
        data = json.loads(path.read_text())
    except OSError as e:
        raise CliError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise CliError(f"{path}: line {e.lineno}: {e.msg}") from None
    try:
        if "examples" in data:
            concept = corpus.concept_from_dict(data)
            if not 0 <= args.example < len(concept.examples):
                raise CliError(f"{path}: no example {args.example}")
            return concept.examples[args.example][0]
        return corpus.scene_from_dict(data)
    except corpus.SchemaError as e:
        raise CliError(f"{path}: {e}") from None


def cmd_trace(args) -> int:
    try:
        program = corpus.load_program(args.program)
    except OSError as e:
        raise CliError(f"cannot read {args.program}: {e.strerror}") from None
    except ParseError as e:
        raise CliError(f"{args.program}: {e}") from None
    scene = load_scene(args)
    result = execute(program, scene)
    print(render_trace(result, legend=not args.no_legend), end="")
    if args.svg:
        out = Path(args.svg)
        out.mkdir(parents=True, exist_ok=True)
        for n, t in enumerate(result.trace, 1):
            (out / f"step_{n:03d}.svg").write_text(render_svg(t.state))
    return EXIT_OK if result.ok else EXIT_USAGE


# -- gen --------------------------------------------------------------------

def parse_seeds(text):
    seeds = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-", 1)
            seeds.extend(range(int(a), int(b) + 1))
        elif part:
            seeds.append(int(part))
    return seeds


def templates_from_args(args):
    if args.template:
        try:
            doc = json.loads(Path(args.template).read_text())
        except OSError as e:
            raise CliError(f"cannot read {args.template}: {e.strerror}") from None
        except json.JSONDecodeError as e:
            raise CliError(f"{args.template}: line {e.lineno}: {e.msg}") from None
        specs = doc if isinstance(doc, list) else [doc]
        out = []
        for s in specs:
            seeds = s.pop("seeds", None)
            for seed in ([s.pop("seed", 0)] if seeds is None else parse_seeds(str(seeds))):
                out.append(corpus.ConceptTemplate(**{**s, "seed": seed}))
        return out
    if not args.kind:
        raise CliError("gen needs --kind, --template or --fixture")
    counts = tuple(int(c) for c in args.counts.split(",")) if args.counts else None
    return [corpus.ConceptTemplate(args.kind, n_examples=args.n_examples, k=args.k, counts=counts,
                                   n_objects=args.n_objects, seed=seed)
            for seed in parse_seeds(args.seeds)]


def write_pair(out_dir: Path, concept, gt, force: bool):
    cpath = out_dir / f"{concept.name}.concept"
    ppath = out_dir / f"{concept.name}.program"
    for p in (cpath, ppath):
        if p.exists() and not force:
            raise CliError(f"{p} exists (use --force to overwrite)")
    corpus.save_concept(concept, cpath)
    corpus.save_program(gt, ppath)
    return cpath


def cmd_gen(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if args.fixture:
        names = list(corpus.FIXTURES) if args.fixture == "all" else [args.fixture]
        for n in names:
            if n not in corpus.FIXTURES:
                raise CliError(f"unknown fixture {n!r}; choose from {', '.join(corpus.FIXTURES)}")
            concept, gt = corpus.FIXTURES[n]()
            written.append(write_pair(out_dir, concept, gt, args.force))
    else:
        try:
            templates = templates_from_args(args)
        except (TypeError, ValueError) as e:
            raise CliError(f"bad template: {e}") from None
        for tpl in templates:
            try:
                concept, gt = corpus.generate(tpl)
            except corpus.UnsatisfiableTemplate as e:
                print(f"error: {e}", file=sys.stderr)
                return EXIT_UNSAT
            written.append(write_pair(out_dir, concept, gt, args.force))
    if args.manifest:
        corpus.write_manifest([corpus.ManifestEntry(Path(p.name)) for p in written],
                              out_dir / args.manifest)
    for p in written:
        print(p)
    return EXIT_OK


# -- train ------------------------------------------------------------------

def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    mask, model = corpus.build_default_model(args.alpha)
    save_mask(mask, out / "mask.json")
    model.save(out / "model.json")
    print(f"wrote {out / 'mask.json'} and {out / 'model.json'} "
          f"({int(mask.sum())} allowed transitions, {len(corpus.training_programs())} training programs)")
    return EXIT_OK


# -- argument parsing -------------------------------------------------------

def add_search_flags(p):
    p.add_argument("--budget", type=int, default=4000, help="program budget (emulator executions)")
    p.add_argument("--mode", choices=("naive", "factorized"), default="factorized")
    p.add_argument("--no-mutation", action="store_true", help="disable the mutation step")
    p.add_argument("--match-by-id", action="store_true", help="match objects by persistent id too")
    p.add_argument("--order-retry", action="store_true",
                   help="reserve budget for matching objects in a different order")
    p.add_argument("--epsilon-arg", type=float, default=0.01, help="argument prior floor")
    p.add_argument("--seed", type=int, default=0, help="recorded in reports; the search is deterministic")
    p.add_argument("--workers", type=int, default=1, help="parallel emulator workers")
    p.add_argument("--model", help=f"model file (default: packaged data or ${MODEL_DIR_ENV})")
    p.add_argument("--mask", help="extra dependency mask applied on top of the model")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cogscript", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="induce a program for one concept")
    p.add_argument("--concept", required=True)
    p.add_argument("--out", help="where to write the found program")
    p.add_argument("--report", help="write a JSON result record here")
    add_search_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench", help="run a manifest of concepts under one or more modes")
    p.add_argument("--manifest", required=True)
    p.add_argument("--modes", default="factorized,naive")
    p.add_argument("--out", help="line-delimited JSON report")
    p.add_argument("--histogram", help="CSV of visited counts and run times")
    add_search_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("trace", help="render a program's execution step by step")
    p.add_argument("--program", required=True)
    p.add_argument("--scene", required=True, help="scene file, or concept file with --example")
    p.add_argument("--example", type=int, default=0)
    p.add_argument("--svg", help="directory for one SVG per step")
    p.add_argument("--no-legend", action="store_true")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("gen", help="generate concept files with ground-truth sidecars")
    p.add_argument("--kind", choices=corpus.KINDS)
    p.add_argument("--template", help="JSON template file (one object or a list)")
    p.add_argument("--fixture", help="write a fixed regression concept ('all' for every one)")
    p.add_argument("--seeds", default="0", help="e.g. 0-9 or 1,4,7")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n-examples", type=int, default=2)
    p.add_argument("--n-objects", type=int)
    p.add_argument("--counts", help="per-example object counts for stack_variable, e.g. 2,3,4")
    p.add_argument("--out", default=".")
    p.add_argument("--manifest", help="also write a manifest with this file name")
    p.add_argument("--force", action="store_true", help="overwrite existing files")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="rebuild the dependency mask and Markov model")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--alpha", type=float, default=0.1)
    p.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SceneError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
