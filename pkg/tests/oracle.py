"""Independent brute-force reference used to freeze expected values.

Nothing here calls the search or the cost tables: probabilities are
renormalised over the sub-registry directly from the raw model matrix,
and every program up to a length bound is executed from scratch.
"""
import itertools
import math
import random

from cogscript.emulator import Instruction, execute
from cogscript.search import Concept
from cogscript.model import STATE_INDEX, argument_prior
from cogscript.world import Scene, is_solved, obj

#: restricted registry: eight variants, no motion and no loops
SMALL_REGISTRY = (
    Instruction("scene_parse"),
    Instruction("set_color_attn", "red"),
    Instruction("set_color_attn", "blue"),
    Instruction("top_down_attend"),
    Instruction("next_object"),
    Instruction("fill_color", "yellow"),
    Instruction("fill_color", "green"),
    Instruction("reset_attn"),
)


def restricted_probs(model, variants):
    """P(next | prev) renormalised over ``variants`` (plus the start row)."""
    rows = ["<start>"] + [str(v) for v in variants]
    cols = [str(v) for v in variants]
    out = {}
    for r in rows:
        i = STATE_INDEX[r]
        raw = {c: float(model.probs[i, STATE_INDEX[c]]) if model.allowed[i, STATE_INDEX[c]] else 0.0
               for c in cols}
        z = sum(raw.values())
        out[r] = {c: (p / z if z > 0 else 0.0) for c, p in raw.items()}
    return out


def program_dl(program, probs, prior):
    prev, dl = "<start>", 0.0
    for inst in program:
        f = probs[prev][str(inst)] * prior.factor(inst)
        if f <= 0:
            return math.inf
        dl -= math.log(f)
        prev = str(inst)
    return dl


def solves(program, concept, match_mode="by_property"):
    for inp, out in concept.examples:
        r = execute(program, inp, trace=False)
        if not r.ok or r.final.loop_open:
            return False
        if not is_solved(r.final.working, out, r.final.held, match_mode):
            return False
    return True


def brute_force_min_dl(concept, model, variants=SMALL_REGISTRY, max_len=5, epsilon_arg=0.01):
    """Minimum description length over every solving program of length at
    most ``max_len``; returns (dl, program) or (inf, None)."""
    probs = restricted_probs(model, variants)
    prior = argument_prior(concept, epsilon_arg)
    best = (math.inf, None)
    for n in range(1, max_len + 1):
        for prog in itertools.product(variants, repeat=n):
            dl = program_dl(prog, probs, prior)
            if dl < best[0] and solves(prog, concept):
                best = (dl, prog)
    return best


def _n_changed(inp, out):
    return sum(a.props() != b.props() for a, b in zip(inp.objects, out.objects))


def random_small_concepts(n, seed=5):
    """Concepts from random programs over the restricted registry on 6x6 grids."""
    rng = random.Random(seed)
    palette = ("red", "blue", "green")
    shapes = ("square", "circle", "triangle", "star")

    def scene():
        cells = rng.sample([(x, y) for x in range(6) for y in range(6)], rng.randint(2, 4))
        return Scene(6, 6, tuple(obj(i, rng.choice(shapes), rng.choice(palette), *c)
                                 for i, c in enumerate(cells)))

    out = []
    while len(out) < n:
        length = rng.randint(2, 5)
        gt = (SMALL_REGISTRY[0],) + tuple(rng.choice(SMALL_REGISTRY[1:]) for _ in range(length - 1))
        exs = []
        for _ in range(2):
            s = scene()
            r = execute(gt, s, trace=False)
            if not r.ok:
                break
            exs.append((s, Scene(6, 6, r.final.working.objects)))
        if len(exs) < 2 or any(i == o for i, o in exs):
            continue
        # every other concept must change two or more objects per example,
        # so that factorized search goes through sub-goal restarts
        if len(out) % 2 and min(_n_changed(i, o) for i, o in exs) < 2:
            continue
        out.append((Concept(f"small_{len(out)}", tuple(exs)), gt))
    return out
