"""Concept families, regression fixtures and on-disk formats.

Every generated example is produced by executing the family's ground-truth
program on a random input scene, then checking that the result has the
shape the family promises (the right objects moved, nothing collided).
That makes every generated concept solvable by construction.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Optional

import numpy as np

from .emulator import (ARG_PALETTES, OPCODES, Instruction, execute, format_program,
                       parse_program)
from .model import N_STATES, full_mask, state_of, train
from .search import Concept, ConceptError
from .world import COLORS, SHAPES, GridPos, Scene, SceneError, obj

KINDS = (
    "recolor_by_color",
    "move_to_corner",
    "touch",
    "touch_and_recolor",
    "move_and_replace",
    "swap_locations",
    "stack_variable",
    "k_independent_moves",
)

VERTICAL = ("move_hand_up", "move_hand_down")
HORIZONTAL = ("move_hand_left", "move_hand_right")
MAX_ATTEMPTS = 1000


class UnsatisfiableTemplate(RuntimeError):
    pass


class SchemaError(ValueError):
    pass


@dataclass
class ConceptTemplate:
    kind: str
    n_examples: int = 2
    width: int = 10
    height: int = 10
    n_objects: Optional[int] = None
    counts: Optional[tuple] = None
    k: int = 2
    seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown template kind {self.kind!r}")
        if not (1 <= self.width <= 16 and 1 <= self.height <= 16):
            raise ValueError("grid must be at most 16x16")
        if not 1 <= self.n_examples <= 10:
            raise ValueError("between 1 and 10 examples")
        if self.n_objects is not None and not 1 <= self.n_objects <= 8:
            raise ValueError("at most 8 objects")

    @property
    def name(self) -> str:
        return f"{self.kind}_{self.seed}"


def _prog(*lines) -> tuple:
    return parse_program("\n".join(lines))


def _dist2(p, c):
    return (p[0] - c[0]) ** 2 + (p[1] - c[1]) ** 2


def _random_cells(rng, scene_w, scene_h, n, ok=lambda p: True, distinct_dist=True, center=None):
    cells = [GridPos(x, y) for x in range(scene_w) for y in range(scene_h) if ok(GridPos(x, y))]
    if len(cells) < n:
        return None
    picked = rng.sample(cells, n)
    if distinct_dist and center is not None:
        d = [_dist2(p, center) for p in picked]
        if len(set(d)) != len(d):
            return None
    return picked


def _run_gt(gt, scene):
    r = execute(gt, scene, trace=False)
    if not r.ok or r.final.held is not None or r.final.loop_open:
        return None
    return Scene(scene.width, scene.height, r.final.working.objects)


def _changed(inp, out):
    before = {o.id: o for o in inp.objects}
    return {o.id for o in out.objects if o.props() != before[o.id].props()}


class _Family:
    """Per-kind ground truth plus an example sampler."""

    def __init__(self, tpl: ConceptTemplate, rng: random.Random):
        self.t = tpl
        self.rng = rng
        self.center = GridPos(tpl.width // 2, tpl.height // 2)

    def ground_truth(self):
        raise NotImplementedError

    def sample(self, i):
        """Return an input scene for example ``i`` or ``None`` to retry."""
        raise NotImplementedError

    def accept(self, inp, out, i) -> bool:
        return True


class _Recolor(_Family):
    def __init__(self, tpl, rng):
        super().__init__(tpl, rng)
        p = tpl.params
        self.src = p.get("src") or rng.choice(COLORS)
        self.dst = p.get("dst") or rng.choice([c for c in COLORS if c != self.src])

    def ground_truth(self):
        return _prog("scene_parse", f"set_color_attn({self.src})", "top_down_attend",
                     f"fill_color({self.dst})")

    def sample(self, i):
        n = self.t.n_objects or self.rng.randint(2, 3)
        cells = _random_cells(self.rng, self.t.width, self.t.height, n)
        others = [c for c in COLORS if c != self.src]
        objs = [obj(0, self.rng.choice(SHAPES), self.src, *cells[0])]
        objs += [obj(j, self.rng.choice(SHAPES), self.rng.choice(others), *cells[j]) for j in range(1, n)]
        return Scene(self.t.width, self.t.height, objs)

    def accept(self, inp, out, i):
        return _changed(inp, out) == {0}


class _MoveToCorner(_Family):
    def __init__(self, tpl, rng):
        super().__init__(tpl, rng)
        p = tpl.params
        self.color = p.get("color") or rng.choice(COLORS)
        self.vert = p.get("vertical") or rng.choice(VERTICAL)
        self.horiz = p.get("horizontal") or rng.choice(HORIZONTAL)

    def ground_truth(self):
        return _prog("scene_parse", f"set_color_attn({self.color})", "top_down_attend",
                     "move_hand_to_attended_object", "grab_object", self.vert, self.horiz,
                     "release_object")

    def sample(self, i):
        n = self.t.n_objects or self.rng.randint(2, 3)
        cells = _random_cells(self.rng, self.t.width, self.t.height, n)
        others = [c for c in COLORS if c != self.color]
        objs = [obj(0, self.rng.choice(SHAPES), self.color, *cells[0])]
        objs += [obj(j, self.rng.choice(SHAPES), self.rng.choice(others), *cells[j]) for j in range(1, n)]
        return Scene(self.t.width, self.t.height, objs)

    def accept(self, inp, out, i):
        x = 0 if self.horiz == "move_hand_left" else self.t.width - 1
        y = 0 if self.vert == "move_hand_up" else self.t.height - 1
        return _changed(inp, out) == {0} and out.get(0).pos == (x, y)


def _touching(a, b):
    return abs(a.x - b.x) + abs(a.y - b.y) == 1


class _Touch(_Family):
    def __init__(self, tpl, rng):
        super().__init__(tpl, rng)
        p = tpl.params
        self.mover = p.get("mover") or rng.choice(COLORS)
        self.anchor = p.get("anchor") or rng.choice([c for c in COLORS if c != self.mover])

    def ground_truth(self):
        return _prog("scene_parse", f"set_color_attn({self.mover})", "top_down_attend",
                     "move_hand_to_attended_object", "grab_object", "reset_attn",
                     f"set_color_attn({self.anchor})", "top_down_attend",
                     "move_hand_to_attended_object", "release_object")

    def sample(self, i):
        n = self.t.n_objects or self.rng.randint(2, 3)
        cells = _random_cells(self.rng, self.t.width, self.t.height, n)
        others = [c for c in COLORS if c not in (self.mover, self.anchor)]
        objs = [obj(0, self.rng.choice(SHAPES), self.mover, *cells[0]),
                obj(1, self.rng.choice(SHAPES), self.anchor, *cells[1])]
        objs += [obj(j, self.rng.choice(SHAPES), self.rng.choice(others), *cells[j]) for j in range(2, n)]
        return Scene(self.t.width, self.t.height, objs)

    def accept(self, inp, out, i):
        return _changed(inp, out) == {0} and _touching(out.get(0), out.get(1))


class _TouchAndRecolor(_Family):
    """Mover is grabbed by color; the nearest object to the center is then
    attended without a filter, touched and recolored."""

    def __init__(self, tpl, rng):
        super().__init__(tpl, rng)
        p = tpl.params
        self.mover = p.get("mover") or rng.choice(COLORS)
        self.anchor = p.get("anchor") or rng.choice([c for c in COLORS if c != self.mover])
        self.new = p.get("new") or rng.choice([c for c in COLORS if c not in (self.mover, self.anchor)])

    def ground_truth(self):
        return _prog("scene_parse", f"set_color_attn({self.mover})", "top_down_attend",
                     "move_hand_to_attended_object", "grab_object", "reset_attn",
                     "top_down_attend", "move_hand_to_attended_object", "release_object",
                     f"fill_color({self.new})")

    def sample(self, i):
        n = self.t.n_objects or 2
        cells = _random_cells(self.rng, self.t.width, self.t.height, n, center=self.center)
        if cells is None:
            return None
        cells.sort(key=lambda p: _dist2(p, self.center))
        objs = [obj(1, self.rng.choice(SHAPES), self.anchor, *cells[0]),
                obj(0, self.rng.choice(SHAPES), self.mover, *cells[1])]
        others = [c for c in COLORS if c not in (self.mover, self.anchor)]
        objs += [obj(j, self.rng.choice(SHAPES), self.rng.choice(others), *cells[j]) for j in range(2, n)]
        return Scene(self.t.width, self.t.height, objs)

    def accept(self, inp, out, i):
        return (_changed(inp, out) == {0, 1} and _touching(out.get(0), out.get(1))
                and out.get(1).color == self.new)


class _MoveAndReplace(_Family):
    """The object nearest the center goes to the upper-left corner and the
    next one takes its old place."""

    def __init__(self, tpl, rng):
        super().__init__(tpl, rng)
        self.identical = tpl.params.get("identical", False)

    def ground_truth(self):
        return _prog("scene_parse", "top_down_attend", "fixate_object",
                     "move_hand_to_attended_object", "grab_object", "move_hand_up",
                     "move_hand_left", "release_object", "next_object",
                     "move_hand_to_attended_object", "grab_object", "move_hand_to_fixation",
                     "release_object")

    def sample(self, i):
        n = self.t.n_objects or 2
        cells = _random_cells(self.rng, self.t.width, self.t.height, n, center=self.center)
        if cells is None:
            return None
        cells.sort(key=lambda p: _dist2(p, self.center))
        if self.identical:
            shape, color = self.rng.choice(SHAPES), self.rng.choice(COLORS)
            looks = [(shape, color)] * 2
        else:
            looks = [(s, c) for s, c in zip(self.rng.sample(SHAPES, 2), self.rng.sample(COLORS, 2))]
        looks += [(self.rng.choice(SHAPES), self.rng.choice(COLORS)) for _ in range(n - 2)]
        return Scene(self.t.width, self.t.height,
                     [obj(j, *looks[j], *cells[j]) for j in range(n)])

    def accept(self, inp, out, i):
        return (out.get(0).pos == (0, 0) and out.get(1).pos == inp.get(0).pos
                and _changed(inp, out) == {0, 1})


class _Swap(_Family):
    def ground_truth(self):
        return _prog("scene_parse", "set_shape_attn(square)", "top_down_attend",
                     "move_hand_to_attended_object", "grab_object", "fixate_object",
                     "move_hand_down", "release_object", "next_object",
                     "move_hand_to_attended_object", "grab_object", "fixate_object",
                     "fixate_previous", "move_hand_to_fixation", "release_object",
                     "fixate_next", "move_hand_down", "grab_object",
                     "move_hand_to_fixation", "release_object")

    def sample(self, i):
        n = self.t.n_objects or 3
        cells = _random_cells(self.rng, self.t.width, self.t.height - 2, n, center=self.center)
        if cells is None:
            return None
        objs = [obj(0, "square", self.rng.choice(COLORS), *cells[0]),
                obj(1, "square", self.rng.choice(COLORS), *cells[1])]
        objs += [obj(j, self.rng.choice(SHAPES[1:]), self.rng.choice(COLORS), *cells[j])
                 for j in range(2, n)]
        return Scene(self.t.width, self.t.height, objs)

    def accept(self, inp, out, i):
        a, b = inp.get(0).pos, inp.get(1).pos
        pa, pb = out.get(0).pos, out.get(1).pos
        return {pa, pb} == {a, b} and pa != a and _changed(inp, out) == {0, 1}


class _Stack(_Family):
    """Variable numbers of objects slid right and then down into a column
    stack; needs a loop because counts differ between examples."""

    def __init__(self, tpl, rng):
        super().__init__(tpl, rng)
        n = tpl.n_examples
        self.counts = tuple(tpl.counts) if tpl.counts else tuple(2 + (i % 3) for i in range(n))
        if len(self.counts) != n:
            raise ValueError("counts must list one object count per example")
        self.color = tpl.params.get("color", "red")

    def ground_truth(self):
        return _prog("scene_parse", "loop_start", "top_down_attend",
                     "move_hand_to_attended_object", "grab_object", "move_hand_right",
                     "move_hand_down", "release_object", "loop_end")

    def sample(self, i):
        n = self.counts[i]
        top = self.t.height - 1 - n  # rows reserved for the stack
        # stack cells must stay farther from the center than any loose object
        cells = _random_cells(self.rng, self.t.width - 1, top, n, center=self.center,
                              ok=lambda p: _dist2(p, self.center) <= 9)
        if cells is None:
            return None
        return Scene(self.t.width, self.t.height,
                     [obj(j, self.rng.choice(SHAPES), self.color, *cells[j]) for j in range(n)])

    def accept(self, inp, out, i):
        n = self.counts[i]
        col = {(self.t.width - 1, self.t.height - 1 - j) for j in range(n)}
        return {o.pos for o in out.objects} == col


class _KIndependent(_Family):
    """k objects, each sent to its own edge or corner; the i-th object is the
    i-th nearest to the center."""

    def __init__(self, tpl, rng):
        super().__init__(tpl, rng)
        k = tpl.k
        if not 1 <= k <= 8:
            raise ValueError("k must be between 1 and 8")
        moves = tpl.params.get("moves")
        if moves is None:
            n_corner = tpl.params.get("corners", rng.randint(0, min(k, 2)))
            # two objects can never share a corner
            moves = [tuple(c) for c in rng.sample(list(product(VERTICAL, HORIZONTAL)), n_corner)]
            moves += [(rng.choice(VERTICAL + HORIZONTAL),) for _ in range(k - n_corner)]
            rng.shuffle(moves)
        self.moves = [tuple(m) for m in moves]
        self.colors = tpl.params.get("colors")
        if self.colors is None and k <= len(COLORS):
            self.colors = rng.sample(COLORS, k)

    def ground_truth(self):
        lines = ["scene_parse"]
        for j, m in enumerate(self.moves):
            lines += ["top_down_attend" if j == 0 else "next_object",
                      "move_hand_to_attended_object", "grab_object", *m, "release_object"]
        return _prog(*lines)

    def sample(self, i):
        k = self.t.k
        cells = _random_cells(self.rng, self.t.width, self.t.height, k, center=self.center)
        if cells is None:
            return None
        cells.sort(key=lambda p: _dist2(p, self.center))
        colors = self.colors or [self.rng.choice(COLORS) for _ in range(k)]
        return Scene(self.t.width, self.t.height,
                     [obj(j, self.rng.choice(SHAPES), colors[j], *cells[j]) for j in range(k)])

    def accept(self, inp, out, i):
        if _changed(inp, out) != set(range(self.t.k)):
            return False
        # each object must land exactly where its own moves send it
        for j, m in enumerate(self.moves):
            o = out.get(j)
            for mv in m:
                if mv == "move_hand_up" and o.y != 0:
                    return False
                if mv == "move_hand_down" and o.y != self.t.height - 1:
                    return False
                if mv == "move_hand_left" and o.x != 0:
                    return False
                if mv == "move_hand_right" and o.x != self.t.width - 1:
                    return False
        return True


_FAMILIES = {
    "recolor_by_color": _Recolor,
    "move_to_corner": _MoveToCorner,
    "touch": _Touch,
    "touch_and_recolor": _TouchAndRecolor,
    "move_and_replace": _MoveAndReplace,
    "swap_locations": _Swap,
    "stack_variable": _Stack,
    "k_independent_moves": _KIndependent,
}


def generate(template: ConceptTemplate):
    """Build a concept and its ground-truth program from a template.

    Deterministic in ``template.seed``.  Raises UnsatisfiableTemplate when
    random placement keeps failing the family's acceptance check.
    """
    rng = random.Random(f"{template.kind}:{template.seed}")
    fam = _FAMILIES[template.kind](template, rng)
    gt = fam.ground_truth()
    examples = []
    for i in range(template.n_examples):
        for _ in range(MAX_ATTEMPTS):
            try:
                inp = fam.sample(i)
            except (SceneError, TypeError):
                inp = None
            if inp is None:
                continue
            out = _run_gt(gt, inp)
            if out is not None and fam.accept(inp, out, i) and (inp, out) not in examples:
                examples.append((inp, out))
                break
        else:
            raise UnsatisfiableTemplate(
                f"{template.name}: no valid placement for example {i} in {MAX_ATTEMPTS} attempts")
    return Concept(template.params.get("name", template.name), tuple(examples)), gt


# -- fixed regression fixtures ----------------------------------------------

def _scene(objs, w=10, h=10):
    return Scene(w, h, [obj(*o) for o in objs])


def _fixture(name, gt, inputs):
    examples = []
    for inp in inputs:
        out = _run_gt(gt, inp)
        if out is None:
            raise RuntimeError(f"fixture {name}: ground truth fails on an input")
        examples.append((inp, out))
    return Concept(name, tuple(examples)), gt


def fixture_wrong_order():
    """Green object must touch the red one, which then turns yellow.  A
    yellow twin of the red object means that once the red one has been
    recolored, neither color nor distance order tells the two apart."""
    gt = _prog("scene_parse", "set_color_attn(green)", "top_down_attend",
               "move_hand_to_object", "grab_object", "set_color_attn(red)", "top_down_attend",
               "move_hand_to_object", "release_object", "fill_color(yellow)")
    return _fixture("wrong_order", gt, [
        _scene([(0, "circle", "green", 1, 8), (1, "square", "red", 5, 3), (2, "square", "yellow", 7, 6),
                (3, "triangle", "blue", 8, 1)]),
        _scene([(0, "square", "green", 8, 8), (1, "triangle", "red", 4, 6), (2, "triangle", "yellow", 2, 2),
                (3, "circle", "blue", 1, 7)]),
        _scene([(0, "triangle", "green", 2, 1), (1, "circle", "red", 7, 7), (2, "circle", "yellow", 4, 5),
                (3, "square", "blue", 9, 2)]),
    ])


def fixture_mistaken_id():
    """Two identical red squares: the central one goes to the upper-left
    corner and the other takes its former cell.  Blue and green blockers
    keep the outer square from reaching the corner by sliding."""
    gt = _prog("scene_parse", "top_down_attend", "fixate_object", "move_hand_to_object",
               "grab_object", "move_hand_up", "move_hand_left", "release_object",
               "next_object", "move_hand_to_object", "grab_object", "move_hand_to_fixation",
               "release_object")
    return _fixture("mistaken_id", gt, [
        _scene([(0, "square", "red", 5, 5), (1, "square", "red", 5, 7),
                (2, "circle", "blue", 0, 3), (3, "triangle", "green", 7, 0)]),
        _scene([(0, "square", "red", 5, 4), (1, "square", "red", 5, 6),
                (2, "circle", "blue", 0, 2), (3, "triangle", "green", 8, 0)]),
    ])


def fixture_faulty_arg():
    """The circle must touch the star.  Only the circle moves, so the star's
    shape never shows up among changed objects."""
    gt = _prog("scene_parse", "set_shape_attn(circle)", "top_down_attend",
               "move_hand_to_object", "grab_object", "reset_attn", "set_shape_attn(star)",
               "top_down_attend", "move_hand_to_object", "release_object")
    return _fixture("faulty_arg", gt, [
        _scene([(0, "circle", "blue", 1, 1), (1, "star", "red", 7, 7),
                (2, "square", "red", 5, 5), (3, "triangle", "green", 4, 6)]),
        _scene([(0, "circle", "blue", 8, 2), (1, "star", "green", 2, 8),
                (2, "triangle", "green", 5, 4), (3, "square", "red", 6, 5)]),
        _scene([(0, "circle", "blue", 1, 7), (1, "star", "red", 8, 3),
                (2, "square", "green", 4, 4), (3, "triangle", "red", 6, 6)]),
    ])


def fixture_swap():
    gt = _FAMILIES["swap_locations"](ConceptTemplate("swap_locations"), random.Random(0)).ground_truth()
    return _fixture("swap_locations", gt, [
        _scene([(0, "square", "red", 3, 4), (1, "square", "blue", 6, 3), (2, "circle", "green", 8, 6)]),
        _scene([(0, "square", "green", 4, 6), (1, "square", "yellow", 2, 4), (2, "star", "red", 7, 2)]),
    ])


def fixture_replace():
    """Distinguishable version of the corner-and-replace concept."""
    gt = _FAMILIES["move_and_replace"](ConceptTemplate("move_and_replace"), random.Random(0)).ground_truth()
    return _fixture("move_and_replace", gt, [
        _scene([(0, "square", "red", 5, 5), (1, "circle", "blue", 5, 7),
                (2, "circle", "green", 0, 3), (3, "triangle", "green", 7, 0)]),
        _scene([(0, "square", "red", 5, 4), (1, "circle", "blue", 5, 6),
                (2, "circle", "green", 0, 2), (3, "triangle", "green", 8, 0)]),
    ])


def fixture_stack():
    return generate(ConceptTemplate("stack_variable", n_examples=3, counts=(2, 3, 4), seed=0,
                                    params={"name": "stack"}))


FIXTURES = {
    "wrong_order": fixture_wrong_order,
    "mistaken_id": fixture_mistaken_id,
    "faulty_arg": fixture_faulty_arg,
    "swap_locations": fixture_swap,
    "move_and_replace": fixture_replace,
    "stack": fixture_stack,
}


# -- model training data ----------------------------------------------------

#: families whose ground truths make up the model's training corpus; loop,
#: swap and replace families stay held out
TRAINING_KINDS = ("recolor_by_color", "k_independent_moves", "touch")
#: training instances are drawn from seeds disjoint from evaluation corpora
TRAINING_SEED_BASE = 1000


def training_programs(n: int = 20, kinds=TRAINING_KINDS, k_cycle=(1, 1, 1, 1, 2)):
    """Ground truths used to fit the Markov model."""
    progs = []
    i = 0
    while len(progs) < n:
        kind = kinds[i % len(kinds)]
        k = k_cycle[(i // len(kinds)) % len(k_cycle)]
        try:
            progs.append(generate(ConceptTemplate(kind, k=k, seed=TRAINING_SEED_BASE + i))[1])
        except UnsatisfiableTemplate:
            pass  # conflicting moves for this seed
        i += 1
    return progs


_ATTN = ("set_color_attn", "set_shape_attn")
_MOVES = VERTICAL + HORIZONTAL
_POINT = ("next_object", "fixate_object", "move_hand_to_attended_object", "fill_color")

#: static successor grammar: which opcodes may plausibly follow each opcode
STATIC_SUCCESSORS = {
    None: ("scene_parse",),
    "scene_parse": _ATTN + ("top_down_attend", "loop_start"),
    "set_color_attn": ("set_shape_attn", "top_down_attend"),
    "set_shape_attn": ("set_color_attn", "top_down_attend"),
    "top_down_attend": _POINT + ("loop_start",),
    "reset_attn": _ATTN + ("top_down_attend", "fixate_previous", "fixate_next",
                           "move_hand_to_fixation"),
    "next_object": _POINT + ("loop_end",),
    "fixate_object": ("move_hand_to_attended_object", "next_object", "fixate_previous",
                      "move_hand_to_fixation", "reset_attn", "top_down_attend") + _MOVES,
    "fixate_previous": ("move_hand_to_fixation", "top_down_attend", "reset_attn"),
    "fixate_next": ("move_hand_to_fixation", "top_down_attend", "reset_attn"),
    "move_hand_to_attended_object": ("grab_object", "release_object", "fixate_object"),
    "move_hand_to_fixation": ("grab_object", "release_object"),
    "move_hand_up": HORIZONTAL + ("release_object",),
    "move_hand_down": HORIZONTAL + ("release_object",),
    "move_hand_left": VERTICAL + ("release_object",),
    "move_hand_right": VERTICAL + ("release_object",),
    "grab_object": _MOVES + _ATTN + ("reset_attn", "top_down_attend", "next_object",
                                     "fixate_object", "fixate_previous", "fixate_next",
                                     "move_hand_to_fixation"),
    "release_object": _ATTN + ("next_object", "reset_attn", "top_down_attend", "fill_color",
                               "loop_end", "fixate_previous", "fixate_next",
                               "move_hand_to_attended_object"),
    "fill_color": _ATTN + ("next_object", "reset_attn", "top_down_attend", "loop_end"),
    "loop_start": _ATTN + ("top_down_attend", "next_object", "move_hand_to_attended_object",
                           "fill_color", "reset_attn"),
    "loop_end": _ATTN + ("top_down_attend", "reset_attn", "next_object", "fill_color"),
}

#: transitions that can never execute, whatever the corpus contains
STATIC_FORBIDDEN = [
    ("scene_parse", op) for op in (
        "loop_end", "release_object", "next_object", "fixate_object", "fixate_previous",
        "fixate_next", "move_hand_to_attended_object", "fill_color")
] + [
    ("reset_attn", op) for op in ("next_object", "fixate_object", "move_hand_to_attended_object",
                                  "fill_color")
] + [
    ("grab_object", "grab_object"), ("release_object", "release_object"),
    ("loop_start", "loop_end"),
]


def _skeleton_ground_truths():
    """Every ground truth structure the families and fixtures can produce."""
    gts = []
    for src, dst in product(COLORS, COLORS):
        if src != dst:
            gts.append(_Recolor(ConceptTemplate("recolor_by_color", params={"src": src, "dst": dst}),
                                random.Random(0)).ground_truth())
    for v, h in product(VERTICAL, HORIZONTAL):
        gts.append(_MoveToCorner(ConceptTemplate("move_to_corner", params={"vertical": v, "horizontal": h}),
                                 random.Random(0)).ground_truth())
    moves = [(d,) for d in VERTICAL + HORIZONTAL] + list(product(VERTICAL, HORIZONTAL))
    for a, b in product(moves, moves):
        gts.append(_KIndependent(ConceptTemplate("k_independent_moves", k=2, params={"moves": [a, b]}),
                                 random.Random(0)).ground_truth())
    for kind in ("touch", "touch_and_recolor", "move_and_replace", "swap_locations", "stack_variable"):
        gts.append(_FAMILIES[kind](ConceptTemplate(kind, n_examples=3), random.Random(0)).ground_truth())
    for f in FIXTURES.values():
        gts.append(f()[1])
    return gts


def dependency_mask() -> np.ndarray:
    """Dependency graph over opcodes: the static successor grammar plus every
    transition used by a ground truth (all argument values allowed), minus
    transitions that can never execute."""
    used = {(a, b) for a, succ in STATIC_SUCCESSORS.items() for b in succ}
    for gt in _skeleton_ground_truths():
        prev = None
        for inst in gt:
            used.add((prev, inst.opcode))
            prev = inst.opcode
    for pair in STATIC_FORBIDDEN:
        used.discard(pair)
    mask = np.zeros((N_STATES, N_STATES), dtype=bool)
    variants = {op: [Instruction(op, a) for a in ARG_PALETTES[op]] if op in ARG_PALETTES
                else [Instruction(op)] for op in OPCODES}
    for a, b in used:
        rows = [0] if a is None else [state_of(v) for v in variants[a]]
        for r in rows:
            for v in variants[b]:
                mask[r, state_of(v)] = True
    return mask & full_mask()


def build_default_model(alpha: float = 0.1):
    """Dependency mask plus the Markov model trained on ``training_programs``;
    this is what ships in the package data directory."""
    mask = dependency_mask()
    return mask, train(training_programs(), alpha, mask)


# -- file formats -----------------------------------------------------------

def concept_to_dict(concept: Concept) -> dict:
    return {"name": concept.name,
            "examples": [{"input": i.to_dict(), "output": o.to_dict()} for i, o in concept.examples]}


def dumps_concept(concept: Concept) -> str:
    return json.dumps(concept_to_dict(concept), indent=1, sort_keys=True) + "\n"


def save_concept(concept: Concept, path) -> None:
    Path(path).write_text(dumps_concept(concept))


def _need(d, key, typ, where):
    if not isinstance(d, dict) or key not in d:
        raise SchemaError(f"{where}: missing field '{key}'")
    v = d[key]
    if typ is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise SchemaError(f"{where}.{key}: expected integer, got {v!r}")
    if typ is not int and not isinstance(v, typ):
        raise SchemaError(f"{where}.{key}: expected {typ.__name__}, got {type(v).__name__}")
    return v


def _scene_from(d, where) -> Scene:
    w = _need(d, "width", int, where)
    h = _need(d, "height", int, where)
    objs = []
    for j, o in enumerate(_need(d, "objects", list, where)):
        ow = f"{where}.objects[{j}]"
        objs.append(obj(_need(o, "id", int, ow), _need(o, "shape", str, ow),
                        _need(o, "color", str, ow), _need(o, "x", int, ow), _need(o, "y", int, ow)))
    try:
        return Scene(w, h, objs)
    except SceneError as e:
        raise SchemaError(f"{where}: {e}") from None


def scene_from_dict(d: dict, where: str = "scene") -> Scene:
    """Validated scene; errors name the offending field."""
    return _scene_from(d, where)


def concept_from_dict(d: dict) -> Concept:
    name = _need(d, "name", str, "concept")
    exs = []
    for i, e in enumerate(_need(d, "examples", list, "concept")):
        where = f"examples[{i}]"
        exs.append((_scene_from(_need(e, "input", dict, where), where + ".input"),
                    _scene_from(_need(e, "output", dict, where), where + ".output")))
    try:
        return Concept(name, tuple(exs))
    except ConceptError as e:
        raise SchemaError(str(e)) from None


def loads_concept(text: str) -> Concept:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"line {e.lineno}: {e.msg}") from None
    return concept_from_dict(d)


def load_concept(path) -> Concept:
    return loads_concept(Path(path).read_text())


def save_program(program, path) -> None:
    Path(path).write_text(format_program(program))


def load_program(path):
    return parse_program(Path(path).read_text())


@dataclass
class ManifestEntry:
    path: Path
    budget: Optional[int] = None


def load_manifest(path):
    """Manifest: one concept path per line, optionally followed by a budget."""
    path = Path(path)
    entries = []
    for n, raw in enumerate(path.read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) > 2:
            raise SchemaError(f"{path}:{n}: expected '<concept path> [budget]'")
        p = Path(parts[0])
        if not p.is_absolute():
            p = path.parent / p
        budget = None
        if len(parts) == 2:
            try:
                budget = int(parts[1])
            except ValueError:
                raise SchemaError(f"{path}:{n}: budget must be an integer") from None
        entries.append(ManifestEntry(p, budget))
    return entries


def write_manifest(entries, path) -> None:
    lines = [f"{e.path}{'' if e.budget is None else ' ' + str(e.budget)}" for e in entries]
    Path(path).write_text("".join(line + "\n" for line in lines))
