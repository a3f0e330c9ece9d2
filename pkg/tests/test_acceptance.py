"""Acceptance criteria 1-8.  Each test records one PASS/FAIL line, printed
in the terminal summary (and to stdout when run with ``-s``)."""
import random
import statistics

import pytest

from cogscript import search
from cogscript.cli import main
from cogscript.corpus import FIXTURES, ConceptTemplate, generate
from cogscript.emulator import OPCODES, execute, run
from cogscript.model import load_default_model
from cogscript.search import SearchConfig, induce, verify
from invariants import SEARCH_STATS, history_violations, pop_violations, report_criterion
from oracle import SMALL_REGISTRY, _n_changed, brute_force_min_dl, random_small_concepts

RESULTS = []  # every InductionResult produced in this module, for criterion 5


@pytest.fixture(scope="module")
def model():
    return load_default_model()


def solve(concept, model, **kw):
    r = induce(concept, model, SearchConfig(**kw))
    RESULTS.append(r)
    return r


def test_criterion_1_ablation_speedup(model):
    corpus = [generate(ConceptTemplate("k_independent_moves", k=2 + i % 2, seed=i)) for i in range(30)]
    lengths = [len(gt) for _, gt in corpus]
    assert min(lengths) >= 10 and max(lengths) <= 18
    concepts = [c for c, _ in corpus]

    f4 = [solve(c, model, n_progs=4000) for c in concepts]
    n4 = [solve(c, model, n_progs=4000, mode="naive") for c in concepts]
    f200 = [solve(c, model, n_progs=200_000) for c in concepts]
    n200 = [solve(c, model, n_progs=200_000, mode="naive") for c in concepts]
    for r, c in zip(f4 + f200, concepts * 2):
        if r.solved:
            assert verify(r.program, c)

    f_rate = sum(r.solved for r in f4) / 30
    n_rate = sum(r.solved for r in n4) / 30
    # unsolved runs count at the full budget
    f_med = statistics.median(r.visited for r in f200)
    n_med = statistics.median(r.visited for r in n200)
    ok = f_rate >= 0.9 and n_rate <= 0.3 and f_med * 20 <= n_med
    report_criterion(1, ok, f"factorized@4000 {f_rate:.0%}, naive@4000 {n_rate:.0%}; "
                            f"median visited @200k factorized {f_med:g} vs naive {n_med:g} "
                            f"(ratio {f_med / n_med:.4f}, need <= 0.05); "
                            f"solved @200k {sum(r.solved for r in f200)}/{sum(r.solved for r in n200)}")
    assert ok


def test_criterion_2_mutation_necessity(model):
    concepts = [generate(ConceptTemplate("stack_variable", n_examples=3, counts=(2, 3, 4), seed=s))[0]
                for s in range(10)]
    for c in concepts:
        assert len({len(i.objects) for i, _ in c.examples}) > 1
    with_mut = [solve(c, model, n_progs=50_000) for c in concepts]
    without = [solve(c, model, n_progs=50_000, mutation_enabled=False) for c in concepts]
    paired = True
    for r, c in zip(with_mut, concepts):
        if r.solved:
            ops = [i.opcode for i in r.program]
            depth = 0
            for op in ops:
                depth += (op == "loop_start") - (op == "loop_end")
                paired &= depth >= 0
            paired &= depth == 0 and verify(r.program, c)
    n_with, n_without = sum(r.solved for r in with_mut), sum(r.solved for r in without)
    ok = n_with >= 8 and n_without == 0 and paired
    report_criterion(2, ok, f"mutation {n_with}/10, no mutation {n_without}/10 at 50000; "
                            f"loops paired: {paired}")
    assert ok


def test_criterion_3_failure_modes(model):
    notes, checks = [], {}

    c, _ = FIXTURES["mistaken_id"]()
    prop = solve(c, model, n_progs=100_000)
    ids = solve(c, model, n_progs=100_000, match_mode="by_id")
    lost_on_move = any(p[-1].opcode in ("grab_object", "move_hand_up") for p, _, _ in prop.best_partial.pruned)
    checks["a"] = prop.status == "budget_exhausted" and ids.solved and lost_on_move
    notes.append(f"(a) by_property {prop.status}, by_id {ids.status} at {ids.visited}")

    c, _ = FIXTURES["wrong_order"]()
    wo = solve(c, model, n_progs=4000)
    partial = [str(i) for i in wo.best_partial.program] if wo.best_partial else []
    retry = solve(c, model, n_progs=4000, order_retry=True)
    checks["b"] = (not wo.solved and partial == ["scene_parse", "set_color_attn(red)",
                                                 "top_down_attend", "fill_color(yellow)"])
    notes.append(f"(b) best_partial {' ; '.join(partial)}; order-retry {retry.status}")

    c, _ = FIXTURES["faulty_arg"]()
    zero = solve(c, model, n_progs=50_000, epsilon_arg=0.0)
    default = solve(c, model, n_progs=50_000)
    checks["c"] = not zero.solved and default.solved
    notes.append(f"(c) eps=0 {zero.status}, default eps {default.status} at {default.visited}")

    c, gt = FIXTURES["swap_locations"]()
    first_match = next(k for k in range(1, len(gt) + 1)
                       if any(verify_partial(gt[:k], inp, out) for inp, out in c.examples))
    small = solve(c, model, n_progs=4000)
    big = solve(c, model, n_progs=500_000)
    checks["d"] = not small.solved and first_match >= 15
    notes.append(f"(d) swap first matches an object after {first_match} instructions; "
                 f"@4000 {small.status}, re-check @500000 {big.status} ({big.visited} visited)")

    ok = all(checks.values())
    report_criterion(3, ok, "; ".join(notes))
    assert ok


def verify_partial(prog, inp, out):
    """True when the program matches at least one object the input did not."""
    from cogscript.world import matched_targets
    r = execute(prog, inp, trace=False)
    if not r.ok or r.final.loop_open:
        return False
    before = matched_targets(inp, out)
    return bool(matched_targets(r.final.working, out, r.final.held) - before)


def test_criterion_4_oracle_optimality(model):
    small = model.restricted(SMALL_REGISTRY)
    worst, multi, restarts = 0.0, 0, 0
    for concept, gt in random_small_concepts(20):
        best, _ = brute_force_min_dl(concept, model)
        multi += all(_n_changed(i, o) > 1 for i, o in concept.examples)
        for mode in ("factorized", "naive"):
            r = solve(concept, small, n_progs=50_000, mode=mode)
            worst = max(worst, abs(r.dl - best))
            restarts += len(r.subgoal_history)
    ok = worst <= 1e-9
    report_criterion(4, ok, f"20 concepts ({multi} changing 2+ objects, {restarts} sub-goal restarts), both modes; "
                            f"max |DL - brute-force min| = {worst:.2e} nats")
    assert ok


def test_criterion_5_search_order():
    pops = sum(len(r.pops) for r in RESULTS)
    bad_pops = sum(len(pop_violations(r.pops)) for r in RESULTS)
    bad_hist = sum(len(history_violations(r.subgoal_history)) for r in RESULTS)
    restarts = sum(len(r.subgoal_history) for r in RESULTS)
    session_bad = len(SEARCH_STATS["violations"])
    ok = pops > 0 and bad_pops == 0 and bad_hist == 0 and session_bad == 0
    report_criterion(5, ok, f"{len(RESULTS)} acceptance searches, {pops} pops, {restarts} restarts; "
                            f"order violations {bad_pops}, baseline violations {bad_hist}; "
                            f"session-wide runs so far {SEARCH_STATS['runs']} with {session_bad} violations")
    assert ok


def test_criterion_6_emulator_conformance():
    import test_emulator as te

    per_op = {op: sum(1 for name in te.COVERED[op] for a in vars(getattr(te, name)) if a.startswith("test_"))
              for op in OPCODES}
    rng = random.Random(2024)
    invariant_runs = 0
    for _ in range(10_000):
        scene = te.random_scene(rng)
        r = execute(te.random_program(rng), scene, check=True)
        for t in r.trace:
            te.assert_conserved(scene, t.state)
        invariant_runs += 1
    prefix_runs = 0
    for _ in range(1_000):
        scene, prog = te.random_scene(rng), te.random_program(rng)
        full = execute(prog, scene)
        for k in range(1, len(prog) + 1):
            part = execute(prog[:k], scene)
            assert part.trace == full.trace[:len(part.trace)]
            if part.ok:
                assert run(part.final, prog).final == full.final
        prefix_runs += 1
    ok = min(per_op.values()) >= 3 and invariant_runs == 10_000 and prefix_runs == 1_000
    report_criterion(6, ok, f"{len(per_op)} opcodes, min {min(per_op.values())} semantic tests each; "
                            f"{invariant_runs} random programs invariant-checked; "
                            f"{prefix_runs} prefix-consistency programs")
    assert ok


def test_criterion_7_determinism(tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["gen", "--kind", "k_independent_moves", "--k", "3", "--seeds", "0-4",
                     "--out", str(tmp_path / d)]) == 0
        assert main(["gen", "--fixture", "all", "--out", str(tmp_path / d)]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    gen_same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    reports_same = True
    for concept in ("k_independent_moves_3.concept", "stack.concept", "wrong_order.concept"):
        for d in ("a", "b"):
            main(["solve", "--concept", str(tmp_path / "a" / concept), "--workers", "1",
                  "--budget", "20000", "--report", str(tmp_path / f"{d}.json"),
                  "--out", str(tmp_path / "x.program")])
        reports_same &= (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    capsys.readouterr()
    ok = gen_same and reports_same
    report_criterion(7, ok, f"{len(names)} generated files byte-identical: {gen_same}; "
                            f"3 solve reports byte-identical: {reports_same}")
    assert ok


def test_criterion_8_budget_accounting(model, monkeypatch):
    calls = {"n": 0}
    real = search.execute_on_examples

    def counted(program, states):
        calls["n"] += 1
        return real(program, states)

    monkeypatch.setattr(search, "execute_on_examples", counted)
    cases = [
        (FIXTURES["stack"]()[0], {"n_progs": 30_000}),
        (FIXTURES["wrong_order"]()[0], {"n_progs": 4000, "order_retry": True}),
        (FIXTURES["mistaken_id"]()[0], {"n_progs": 6000}),
        (generate(ConceptTemplate("k_independent_moves", k=3, seed=7))[0], {"n_progs": 4000, "mode": "naive"}),
        (generate(ConceptTemplate("k_independent_moves", k=3, seed=7))[0], {"n_progs": 999, "parallel_workers": 3}),
        (FIXTURES["swap_locations"]()[0], {"n_progs": 1}),
    ]
    ok, mutation_evals = True, 0
    for concept, kw in cases:
        calls["n"] = 0
        r = solve(concept, model, **kw)
        ok &= r.visited == calls["n"] <= kw["n_progs"]
        mutation_evals += r.mutation_rounds
    ok &= mutation_evals > 0
    report_criterion(8, ok, f"{len(cases)} instrumented runs (mutation rounds {mutation_evals}, order retry, "
                            f"parallel workers): visited == executions <= budget: {ok}")
    assert ok
