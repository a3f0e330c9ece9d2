"""Program induction: Dijkstra search over programs ordered by description length.

Two strategies share one engine.  ``naive`` only checks whole-concept
success.  ``factorized`` scores every candidate per object: once a program
matches a new object in every example it becomes the root of a fresh search,
candidates that lose an already-matched object are pruned, and a mutation
step periodically rewrites the current root to close loops or reorder work.
"""
from __future__ import annotations

import heapq
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .emulator import VARIANTS, Instruction, initial_state, run
from .model import ArgumentPrior, CostTable, TransitionModel, argument_prior, state_of
from .world import match_objects, matched_targets

log = logging.getLogger(__name__)

SCENE_PARSE = Instruction("scene_parse")
LOOP_START = Instruction("loop_start")
LOOP_END = Instruction("loop_end")


class ConceptError(ValueError):
    pass


@dataclass(frozen=True)
class Concept:
    name: str
    examples: tuple

    def __post_init__(self):
        object.__setattr__(self, "examples", tuple(tuple(e) for e in self.examples))
        validate_concept(self)


def validate_concept(concept: Concept) -> None:
    if not concept.examples:
        raise ConceptError(f"{concept.name}: a concept needs at least one example")
    for i, (inp, out) in enumerate(concept.examples):
        if (inp.width, inp.height) != (out.width, out.height):
            raise ConceptError(f"{concept.name}: example {i} input and output differ in size")
        if {o.id for o in inp.objects} != {o.id for o in out.objects}:
            raise ConceptError(f"{concept.name}: example {i} object ids differ between input and output")


@dataclass
class SearchConfig:
    n_progs: int = 4000
    mode: str = "factorized"
    mutation_enabled: bool = True
    match_mode: str = "by_property"
    epsilon_arg: float = 0.01
    seed: int = 0
    parallel_workers: int = 1
    order_retry: bool = False
    prune_against: str = "baseline"
    exact: bool = True
    max_mutation_rounds: int = 10
    seen_cap_bytes: int = 1 << 30

    def __post_init__(self):
        if self.n_progs < 1:
            raise ValueError("n_progs must be at least 1")
        if self.parallel_workers < 1:
            raise ValueError("parallel_workers must be at least 1")
        if self.mode not in ("naive", "factorized"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.match_mode not in ("by_property", "by_id"):
            raise ValueError(f"unknown match mode {self.match_mode!r}")
        if self.prune_against not in ("baseline", "parent"):
            raise ValueError(f"unknown pruning reference {self.prune_against!r}")


@dataclass
class SearchNode:
    program: tuple
    dl: float
    states: tuple
    matched: tuple
    key: tuple = ()

    @property
    def row(self) -> int:
        return state_of(self.program[-1]) if self.program else 0


@dataclass(frozen=True)
class SubgoalRecord:
    root: tuple
    new_matches: tuple
    visited: int
    via: str = "search"


@dataclass
class PartialSolution:
    program: tuple
    reports: list
    pruned: list = field(default_factory=list)


@dataclass
class InductionResult:
    status: str
    program: Optional[tuple]
    visited: int
    subgoal_history: list
    mutation_rounds: int
    best_partial: Optional[PartialSolution]
    dl: float = math.inf
    pops: list = field(default_factory=list)
    log: list = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.status == "solved"


@dataclass
class MutationOutcome:
    kind: str  # solved | new_roots | enqueue | none
    nodes: list = field(default_factory=list)


def execute_on_examples(program, states):
    """Resume every example state on ``program``; ``None`` if any example errors.

    This is the single emulator entry point of the search: one call is one
    program execution for budget purposes.
    """
    out = []
    for s in states:
        r = run(s, program)
        if not r.ok:
            return None
        out.append(r.final)
    return tuple(out)


def mutation_candidates(program, variants=VARIANTS):
    """All single-edit variants of ``program`` that keep its first and last
    instruction, plus loop_start insertions paired with a later loop_end.

    Yields ``(kind, program)`` pairs in a fixed order; duplicates are not
    removed here.
    """
    p = tuple(program)
    n = len(p)
    interior = range(1, n - 1)
    for i in interior:
        if i + 1 <= n - 2:
            yield "transpose", p[:i] + (p[i + 1], p[i]) + p[i + 2:]
    for i in interior:
        yield "delete", p[:i] + p[i + 1:]
    for i in interior:
        for v in variants:
            if v != p[i]:
                yield "change", p[:i] + (v,) + p[i + 1:]
    for i in interior:
        for v in variants:
            q = p[:i] + (v,) + p[i:]
            yield "insert", q
            if v == LOOP_START:
                for j in range(i + 1, len(q) + 1):
                    yield "insert_loop", q[:j] + (LOOP_END,) + q[j:]


class _Engine:
    def __init__(self, concept, model, config, prior=None):
        self.concept = concept
        self.cfg = config
        self.prior = prior or argument_prior(concept, config.epsilon_arg)
        self.table = CostTable(model, self.prior)
        self.targets = tuple(out for _, out in concept.examples)
        self.starts = tuple(initial_state(inp) for inp, _ in concept.examples)
        self.factorized = config.mode == "factorized"
        self.visited = 0
        self.mutation_rounds = 0
        self.history = []
        self.log = []
        self.pops = []
        self.pruned = []
        self._pruned_sigs = set()
        self._segment = 0
        self._tie = itertools.count()
        self._pool = (ThreadPoolExecutor(config.parallel_workers)
                      if config.parallel_workers > 1 else None)

    # -- evaluation -----------------------------------------------------
    def budget_left(self) -> int:
        return self.cfg.n_progs - self.visited

    def execute(self, program, states):
        self.visited += 1
        return execute_on_examples(program, states)

    def matched(self, states):
        out = []
        for s, t in zip(states, self.targets):
            if s.loop_stack or s.skip_depth:
                # a loop must be closed before it can be credited with anything
                out.append(frozenset())
            else:
                out.append(matched_targets(s.working, t, s.held, self.cfg.match_mode))
        return tuple(out)

    def solved(self, states, matched) -> bool:
        for s, m, t in zip(states, matched, self.targets):
            if s.held is not None or s.loop_stack or s.skip_depth or len(m) != len(t.objects):
                return False
        return True

    def make_node(self, program, dl, states):
        return SearchNode(program, dl, states, self.matched(states))

    # -- frontier ---------------------------------------------------------
    def push(self, frontier, node):
        heapq.heappush(frontier, (node.dl, next(self._tie), node))

    def new_segment(self):
        self._segment += 1

    # -- main loop -----------------------------------------------------------
    def search(self, seen, banned_first=(), limit=None):
        """One search attempt.  Returns (status, solution, root)."""
        cfg = self.cfg
        limit = cfg.n_progs if limit is None else min(limit, cfg.n_progs)
        root_prog = (SCENE_PARSE,)
        dl0 = self.table.dl(root_prog)
        if math.isinf(dl0):
            return "frontier_exhausted", None, None
        if self.visited >= limit:
            return "budget_exhausted", None, None
        states = self.execute(root_prog, self.starts)
        seen.add(root_prog)
        if states is None:
            return "frontier_exhausted", None, None
        root = self.make_node(root_prog, dl0, states)
        if self.solved(root.states, root.matched):
            return "solved", root, root
        self.root = root
        hist0 = len(self.history)
        baseline = root.matched
        first_phase = True
        frontier = []
        self.push(frontier, root)
        pending_roots = []
        pending = None
        threshold = cfg.n_progs / 10
        self.new_segment()

        while True:
            if self.visited >= limit:
                return ("solved", pending, self.root) if pending else ("budget_exhausted", None, self.root)

            if (self.factorized and cfg.mutation_enabled and pending is None
                    and len(self.history) > hist0
                    and self.visited > threshold and self.mutation_rounds < cfg.max_mutation_rounds):
                threshold += cfg.n_progs / 10
                outcome = self.mutate(self.root, seen, limit)
                self.mutation_rounds += 1
                self.log.append({"event": "mutation", "round": self.mutation_rounds,
                                 "visited": self.visited, "outcome": outcome.kind,
                                 "root": [str(i) for i in self.root.program],
                                 "count": len(outcome.nodes)})
                if outcome.kind == "solved":
                    return "solved", outcome.nodes[0], self.root
                if outcome.kind == "new_roots":
                    nodes = sorted(outcome.nodes, key=lambda n: (n.dl, _lex(n.program)))
                    # siblings stay relative to the baseline they improved on
                    pending_roots = [(n, baseline) for n in nodes[1:]] + pending_roots
                    self._restart(nodes[0], baseline, "mutation")
                    baseline = nodes[0].matched
                    first_phase = False
                    frontier = []
                    self.push(frontier, nodes[0])
                    self.new_segment()
                    continue
                if outcome.kind == "enqueue":
                    self.new_segment()
                    for n in outcome.nodes:
                        self.push(frontier, n)

            if not frontier:
                if pending is not None:
                    return "solved", pending, self.root
                if pending_roots:
                    nxt, base = pending_roots.pop(0)
                    self._restart(nxt, base, "mutation")
                    baseline = nxt.matched
                    self.push(frontier, nxt)
                    self.new_segment()
                    continue
                return "frontier_exhausted", None, self.root

            _, _, node = heapq.heappop(frontier)
            if pending is not None and node.dl + self.table.min_cost[node.row] >= pending.dl:
                return "solved", pending, self.root
            self.pops.append((self._segment, node.dl))

            children = self._children(node, seen, limit)
            restart = None
            for child in children:
                prog, dl, states = child
                if states is None:
                    continue
                matched = self.matched(states)
                if self.factorized:
                    ref = baseline if cfg.prune_against == "baseline" else node.matched
                    lost = [i for i, (b, m) in enumerate(zip(ref, matched)) if not b <= m]
                    if lost:
                        # open loops lose everything by construction; not worth reporting
                        if len(self.pruned) < 50 and not states[0].loop_open:
                            i = lost[0]
                            gone = sorted(ref[i] - matched[i])
                            # one example per kind of loss keeps the report readable
                            sig = (i, tuple(gone), prog[-1].opcode)
                            if sig not in self._pruned_sigs:
                                self._pruned_sigs.add(sig)
                                self.pruned.append((prog, i, gone))
                        continue
                cnode = SearchNode(prog, dl, states, matched)
                if self.solved(states, matched):
                    if not cfg.exact:
                        return "solved", cnode, self.root
                    if pending is None or dl < pending.dl:
                        pending = cnode
                    continue
                if (self.factorized and pending is None
                        and all(m - b for m, b in zip(matched, baseline))):
                    if first_phase and _new(matched, baseline) in banned_first:
                        self.push(frontier, cnode)
                        continue
                    restart = cnode
                    break
                self.push(frontier, cnode)
            if restart is not None:
                self._restart(restart, baseline, "search")
                baseline = restart.matched
                first_phase = False
                pending_roots = []
                frontier = []
                self.push(frontier, restart)
                self.new_segment()

    def _restart(self, node, baseline, via):
        rec = SubgoalRecord(node.program, _new(node.matched, baseline), self.visited, via)
        self.history.append(rec)
        self.root = node
        self.log.append({"event": "restart", "via": via, "visited": self.visited,
                         "root": [str(i) for i in node.program],
                         "matched": [len(m) for m in node.matched]})
        log.debug("sub-goal reached after %d programs: %s", self.visited,
                  " ".join(str(i) for i in node.program))

    def _children(self, node, seen, limit):
        """Evaluate every admissible extension of ``node`` (in registry order)."""
        jobs = []
        for inst, _, cost in self.table.succ[node.row]:
            prog = node.program + (inst,)
            if prog in seen:
                continue
            if self.visited + len(jobs) >= limit:
                break
            jobs.append((prog, node.dl + cost))
        for prog, _ in jobs:
            seen.add(prog)
        if self._pool is not None and len(jobs) > 1:
            self.visited += len(jobs)
            results = list(self._pool.map(lambda j: execute_on_examples(j[0], node.states), jobs))
        else:
            results = [self.execute(prog, node.states) for prog, _ in jobs]
        return [(prog, dl, st) for (prog, dl), st in zip(jobs, results)]

    # -- mutation ------------------------------------------------------------
    def mutate(self, root: SearchNode, seen, limit=None) -> MutationOutcome:
        limit = self.cfg.n_progs if limit is None else limit
        root_prog = root.program
        baseline = root_matched = root.matched
        survivors = []
        local = set()
        for _, prog in mutation_candidates(root_prog):
            if prog in seen or prog in local:
                continue
            local.add(prog)
            dl = self.table.dl(prog)
            if math.isinf(dl):
                continue
            survivors.append((prog, dl))
        solved, roots, same = [], [], []
        for prog, dl in survivors:
            if self.visited >= limit:
                break
            seen.add(prog)
            states = self.execute(prog, self.starts)
            if states is None:
                continue
            matched = self.matched(states)
            if any(len(m) < len(r) for m, r in zip(matched, root_matched)):
                continue
            node = SearchNode(prog, dl, states, matched)
            if self.solved(states, matched):
                solved.append(node)
            elif all(m > b for m, b in zip(matched, baseline)):
                roots.append(node)
            elif all(m == b for m, b in zip(matched, baseline)):
                same.append(node)
        if solved:
            solved.sort(key=lambda n: (len(n.program), n.dl, _lex(n.program)))
            return MutationOutcome("solved", solved[:1])
        if roots:
            return MutationOutcome("new_roots", roots)
        if same:
            return MutationOutcome("enqueue", same)
        return MutationOutcome("none")

    def partial(self, root) -> Optional[PartialSolution]:
        if root is None:
            return None
        reports = [match_objects(s.working, t, s.held, self.cfg.match_mode)
                   for s, t in zip(root.states, self.targets)]
        return PartialSolution(root.program, reports, list(self.pruned))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()


class _SeenSet(set):
    """Set of program tuples that stops growing at a byte budget (never evicts)."""

    def __init__(self, cap_bytes):
        super().__init__()
        self.cap = cap_bytes
        self.bytes = 0

    def add(self, prog):
        if self.bytes >= self.cap:
            return
        self.bytes += 120 + 8 * len(prog)
        super().add(prog)


def _new(matched, baseline):
    return tuple(tuple(sorted(m - b)) for m, b in zip(matched, baseline))


def _lex(program):
    return tuple(state_of(i) for i in program)


def induce(concept: Concept, model: TransitionModel, config: Optional[SearchConfig] = None,
           prior: Optional[ArgumentPrior] = None) -> InductionResult:
    """Search for a program that turns every example input into its output."""
    config = config or SearchConfig()
    eng = _Engine(concept, model, config, prior)
    try:
        if config.order_retry and config.mode == "factorized":
            status, sol, root = _with_order_retry(eng)
        else:
            status, sol, root = eng.search(_SeenSet(config.seen_cap_bytes))
    finally:
        eng.close()
    return InductionResult(
        status=status,
        program=sol.program if sol is not None else None,
        visited=eng.visited,
        subgoal_history=list(eng.history),
        mutation_rounds=eng.mutation_rounds,
        best_partial=eng.partial(root),
        dl=sol.dl if sol is not None else math.inf,
        pops=eng.pops,
        log=eng.log,
    )


def _with_order_retry(eng):
    """Split the budget across attempts; each retry forbids the first
    sub-goals chosen by earlier attempts so objects get matched in a
    different order."""
    cfg = eng.cfg
    banned = set()
    best = (None, None, None)
    while eng.budget_left() > 0:
        share = max(1, eng.budget_left() // 2) if eng.budget_left() > cfg.n_progs // 4 else eng.budget_left()
        n_hist = len(eng.history)
        status, sol, root = eng.search(_SeenSet(cfg.seen_cap_bytes), frozenset(banned),
                                       limit=eng.visited + share)
        if status == "solved":
            return status, sol, root
        if root is not None and (best[2] is None or len(root.program) >= len(best[2].program)):
            best = (status, sol, root)
        if len(eng.history) == n_hist:
            break  # no sub-goal found: another ordering cannot help
        banned.add(eng.history[n_hist].new_matches)
        eng.new_segment()
    status = "budget_exhausted" if eng.budget_left() <= 0 else (best[0] or "frontier_exhausted")
    return status, None, best[2]


def induce_naive(concept: Concept, model: TransitionModel, config: Optional[SearchConfig] = None,
                 prior: Optional[ArgumentPrior] = None) -> InductionResult:
    """Whole-scene baseline: no sub-goals, no unmatch pruning, no mutation."""
    config = config or SearchConfig()
    cfg = SearchConfig(**{**config.__dict__, "mode": "naive", "mutation_enabled": False,
                          "order_retry": False})
    return induce(concept, model, cfg, prior)


def expand(node: SearchNode, table: CostTable):
    """Children of ``node`` as (program, dl) pairs, one per nonzero successor."""
    return [(node.program + (inst,), node.dl + cost) for inst, _, cost in table.succ[node.row]]


def verify(program, concept: Concept, match_mode: str = "by_property") -> bool:
    """Independent re-check: execute from scratch and test every example."""
    from .emulator import execute
    from .world import is_solved
    for inp, out in concept.examples:
        r = execute(program, inp, trace=False)
        if not r.ok or r.final.loop_open:
            return False
        if not is_solved(r.final.working, out, r.final.held, match_mode):
            return False
    return True

