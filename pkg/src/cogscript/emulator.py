"""Instruction set and virtual machine for cognitive programs.

Programs are tuples of :class:`Instruction`.  Execution is resumable: a
:class:`VmState` carries its own program counter, so a state obtained by
running program ``p`` can be handed to :func:`run` together with any
extension of ``p`` and execution continues exactly where it stopped.  The
search relies on this to evaluate a child program with a single step.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .world import COLORS, SHAPES, GridPos, Scene, SceneObject, _unchecked_scene

STEP_CAP = 1000

ARG_PALETTES = {
    "set_color_attn": COLORS,
    "set_shape_attn": SHAPES,
    "fill_color": COLORS,
}

OPCODES = (
    "scene_parse",
    "set_color_attn",
    "set_shape_attn",
    "top_down_attend",
    "reset_attn",
    "next_object",
    "fixate_object",
    "fixate_previous",
    "fixate_next",
    "move_hand_to_attended_object",
    "move_hand_to_fixation",
    "move_hand_up",
    "move_hand_down",
    "move_hand_left",
    "move_hand_right",
    "grab_object",
    "release_object",
    "fill_color",
    "loop_start",
    "loop_end",
)

ALIASES = {
    "move_hand_to_object": "move_hand_to_attended_object",
    "reset_attention": "reset_attn",
}


class ExecError(Exception):
    kind = "error"


class InvalidTransition(ExecError):
    kind = "invalid_transition"


class StepCapExceeded(ExecError):
    kind = "step_cap_exceeded"


class ParseError(ValueError):
    def __init__(self, msg, line=None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class Instruction(NamedTuple):
    opcode: str
    arg: Optional[str] = None

    def __str__(self):
        return f"{self.opcode}({self.arg})" if self.arg is not None else self.opcode

    @classmethod
    def parse(cls, text: str) -> "Instruction":
        text = text.strip()
        arg = None
        if "(" in text:
            if not text.endswith(")"):
                raise ParseError(f"malformed instruction {text!r}")
            name, arg = text[:-1].split("(", 1)
            name, arg = name.strip(), arg.strip()
            if not arg:
                arg = None
        else:
            name = text
        name = ALIASES.get(name, name)
        if name not in OPCODES:
            raise ParseError(f"unknown opcode {name!r}")
        palette = ARG_PALETTES.get(name)
        if palette is None and arg is not None:
            raise ParseError(f"{name} takes no argument")
        if palette is not None:
            if arg is None:
                raise ParseError(f"{name} requires an argument")
            if arg not in palette:
                raise ParseError(f"{name}: unknown argument {arg!r}")
        return cls(name, arg)


def _build_variants():
    out = []
    for op in OPCODES:
        if op in ARG_PALETTES:
            out.extend(Instruction(op, a) for a in ARG_PALETTES[op])
        else:
            out.append(Instruction(op))
    return tuple(out)


#: every argumented variant, in a fixed order used for expansion and model rows
VARIANTS = _build_variants()
VARIANT_INDEX = {v: i for i, v in enumerate(VARIANTS)}


def I(text: str) -> Instruction:
    return Instruction.parse(text)


def parse_program(text) -> tuple:
    """Parse program text (a string or an iterable of lines).

    One instruction per line; blank lines and ``#`` comments are skipped.
    """
    lines = text.splitlines() if isinstance(text, str) else list(text)
    prog = []
    for n, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            prog.append(Instruction.parse(line))
        except ParseError as e:
            raise ParseError(str(e), n) from None
    check_program(prog)
    return tuple(prog)


def check_program(prog) -> None:
    for i, inst in enumerate(prog):
        if (inst.opcode == "scene_parse") != (i == 0):
            raise ParseError("scene_parse must be the first instruction and appear only once")


def format_program(prog) -> str:
    return "".join(f"{inst}\n" for inst in prog)


class VmState(NamedTuple):
    working: Scene
    hand: GridPos
    held: Optional[int]
    fixation: GridPos
    fixation_history: tuple
    fixation_cursor: int
    color_filter: Optional[str]
    shape_filter: Optional[str]
    attended: tuple
    attended_index: Optional[int]
    loop_stack: tuple
    parsed: bool
    pc: int = 0
    steps: int = 0
    skip_depth: int = 0
    source: Optional[Scene] = None

    @property
    def attended_object(self) -> Optional[SceneObject]:
        if self.attended_index is None or self.attended_index >= len(self.attended):
            return None
        return self.working.get(self.attended[self.attended_index])

    @property
    def loop_open(self) -> bool:
        return bool(self.loop_stack) or self.skip_depth > 0


def initial_state(scene: Scene) -> VmState:
    """State before scene_parse: nothing perceived yet."""
    c = scene.center
    return VmState(
        working=_unchecked_scene(scene.width, scene.height, ()),
        hand=c, held=None, fixation=c, fixation_history=(), fixation_cursor=0,
        color_filter=None, shape_filter=None, attended=(), attended_index=None,
        loop_stack=(), parsed=False, source=scene,
    )


_DIRS = {
    "move_hand_up": (0, -1),
    "move_hand_down": (0, 1),
    "move_hand_left": (-1, 0),
    "move_hand_right": (1, 0),
}


def _occupied(scene, pos, ignore):
    for o in scene.objects:
        if o.pos == pos and o.id != ignore:
            return True
    return False


def _adjacent(a, b):
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def _approach(scene, start, target, held, enter_target):
    """Walk x-then-y from start toward target carrying ``held``.

    Stops on the first cell 4-adjacent to target (unless ``enter_target``),
    before any occupied cell, or on target itself.
    """
    x, y = start
    while (x, y) != tuple(target):
        if not enter_target and _adjacent((x, y), target):
            break
        if x != target[0]:
            nxt = (x + (1 if target[0] > x else -1), y)
        else:
            nxt = (x, y + (1 if target[1] > y else -1))
        if _occupied(scene, nxt, held):
            break
        x, y = nxt
    return GridPos(x, y)


def _carry(state, pos):
    """Move the hand to pos, dragging the held object along."""
    if state.held is None:
        return state._replace(hand=pos)
    o = state.working.get(state.held)
    return state._replace(hand=pos, working=state.working.replace_object(o.moved(pos)))


def _fail(msg):
    raise InvalidTransition(msg)


def step(state: VmState, inst: Instruction, program_index: int = 0) -> VmState:
    """Apply one instruction.  Returns a new state; raises ExecError on failure.

    ``pc`` normally advances by one; a repeating ``loop_end`` jumps back to
    just after its ``loop_start``.  Exhaustion of ``next_object`` inside a
    loop and skipping are resolved by :func:`run`.
    """
    op = inst.opcode
    if op == "scene_parse":
        if state.parsed or program_index != 0:
            _fail("scene_parse is only legal as the first instruction")
        scene = state.source
        c = scene.center
        return state._replace(
            working=scene, hand=c, held=None, fixation=c, fixation_history=(),
            fixation_cursor=0, color_filter=None, shape_filter=None, attended=(),
            attended_index=None, parsed=True, pc=program_index + 1)
    if not state.parsed:
        _fail(f"{op} before scene_parse")
    nxt = program_index + 1
    w = state.working

    if op == "set_color_attn":
        return state._replace(color_filter=inst.arg, pc=nxt)
    if op == "set_shape_attn":
        return state._replace(shape_filter=inst.arg, pc=nxt)
    if op == "top_down_attend":
        fx, fy = state.fixation
        cands = [o for o in w.objects
                 if (state.color_filter is None or o.color == state.color_filter)
                 and (state.shape_filter is None or o.shape == state.shape_filter)]
        if not cands:
            _fail("top_down_attend found no object passing the filters")
        cands.sort(key=lambda o: ((o.x - fx) ** 2 + (o.y - fy) ** 2, o.y, o.x))
        return state._replace(attended=tuple(o.id for o in cands), attended_index=0, pc=nxt)
    if op == "reset_attn":
        return state._replace(color_filter=None, shape_filter=None, attended=(),
                              attended_index=None, pc=nxt)
    if op == "next_object":
        if state.attended_index is None:
            _fail("next_object with nothing attended")
        # exhaustion is detected by run(); here we only advance
        return state._replace(attended_index=state.attended_index + 1, pc=nxt)

    if op == "fixate_object":
        a = state.attended_object
        if a is None:
            _fail("fixate_object with no attended object")
        hist = state.fixation_history + (a.pos,)
        return state._replace(fixation=a.pos, fixation_history=hist,
                              fixation_cursor=len(hist) - 1, pc=nxt)
    if op in ("fixate_previous", "fixate_next"):
        cur = state.fixation_cursor + (-1 if op == "fixate_previous" else 1)
        if not state.fixation_history or not 0 <= cur < len(state.fixation_history):
            _fail(f"{op} at fixation history boundary")
        return state._replace(fixation=state.fixation_history[cur], fixation_cursor=cur, pc=nxt)

    if op == "move_hand_to_attended_object":
        a = state.attended_object
        if a is None:
            _fail("no attended object to move to")
        if state.held is None:
            return state._replace(hand=a.pos, pc=nxt)
        if a.id == state.held:
            _fail("attended object is the held object")
        dest = _approach(w, state.hand, a.pos, state.held, enter_target=False)
        return _carry(state, dest)._replace(pc=nxt)
    if op == "move_hand_to_fixation":
        f = state.fixation
        if state.held is None:
            return state._replace(hand=f, pc=nxt)
        blocked = _occupied(w, f, state.held)
        dest = _approach(w, state.hand, f, state.held, enter_target=not blocked)
        return _carry(state, dest)._replace(pc=nxt)
    if op in _DIRS:
        dx, dy = _DIRS[op]
        x, y = state.hand
        if state.held is None:
            if dx:
                x = 0 if dx < 0 else w.width - 1
            else:
                y = 0 if dy < 0 else w.height - 1
            return state._replace(hand=GridPos(x, y), pc=nxt)
        while True:
            n = (x + dx, y + dy)
            if not w.in_bounds(n) or _occupied(w, n, state.held):
                break
            x, y = n
        return _carry(state, GridPos(x, y))._replace(pc=nxt)

    if op == "grab_object":
        if state.held is not None:
            _fail("grab_object while already holding")
        o = w.at(state.hand)
        if o is None:
            _fail("grab_object with nothing under the hand")
        return state._replace(held=o.id, pc=nxt)
    if op == "release_object":
        if state.held is None:
            _fail("release_object with an empty hand")
        return state._replace(held=None, pc=nxt)
    if op == "fill_color":
        a = state.attended_object
        if a is None:
            _fail("fill_color with no attended object")
        return state._replace(working=w.replace_object(a.recolored(inst.arg)), pc=nxt)

    if op == "loop_start":
        return state._replace(loop_stack=state.loop_stack + ((program_index, 0),), pc=nxt)
    if op == "loop_end":
        if not state.loop_stack:
            _fail("loop_end without an open loop")
        start, count = state.loop_stack[-1]
        count += 1
        if count > len(w.objects) + 1:
            return state._replace(loop_stack=state.loop_stack[:-1], pc=nxt)
        return state._replace(loop_stack=state.loop_stack[:-1] + ((start, count),), pc=start + 1)
    raise InvalidTransition(f"unknown opcode {op!r}")


class TraceStep(NamedTuple):
    index: int
    instruction: Instruction
    state: VmState


@dataclass
class ExecResult:
    ok: bool
    final: VmState
    error_kind: Optional[str] = None
    error_step: Optional[int] = None
    error_index: Optional[int] = None
    message: str = ""
    trace: list = field(default_factory=list)

    @property
    def outcome(self) -> str:
        return "ok" if self.ok else f"error({self.error_kind}, {self.error_step})"


def run(state: VmState, program, trace: Optional[list] = None, check=False) -> ExecResult:
    """Run ``program`` from ``state.pc`` to the end (or the first error).

    ``next_object`` running off the end of the attended list inside an open
    loop transfers control past the matching ``loop_end``.  When that
    ``loop_end`` is not in the program (yet), the machine keeps skipping
    instructions until it appears, so extending the program later resumes
    correctly.
    """
    n = len(program)
    while state.pc < n:
        pc = state.pc
        inst = program[pc]
        if state.skip_depth:
            d = state.skip_depth
            if inst.opcode == "loop_start":
                d += 1
            elif inst.opcode == "loop_end":
                d -= 1
            state = state._replace(skip_depth=d, pc=pc + 1)
            continue
        if state.steps >= STEP_CAP:
            return ExecResult(False, state, StepCapExceeded.kind, state.steps, pc,
                              "step cap exceeded", trace if trace is not None else [])
        try:
            new = step(state, inst, pc)
            if inst.opcode == "next_object" and new.attended_index >= len(new.attended):
                if not new.loop_stack:
                    raise InvalidTransition("next_object ran past the attended list")
                # LoopExhausted: leave the innermost loop
                new = new._replace(attended_index=len(new.attended) - 1,
                                   loop_stack=new.loop_stack[:-1], skip_depth=1)
        except ExecError as e:
            return ExecResult(False, state, e.kind, state.steps, pc, str(e),
                              trace if trace is not None else [])
        state = new._replace(steps=state.steps + 1)
        if check:
            check_state(state)
        if trace is not None:
            trace.append(TraceStep(pc, inst, state))
    return ExecResult(True, state, trace=trace if trace is not None else [])


def execute(program, scene: Scene, trace=True, check=False) -> ExecResult:
    return run(initial_state(scene), program, [] if trace else None, check)


def check_state(state: VmState) -> None:
    """Assert every VM invariant; used by the test-suite on each step."""
    w = state.working
    cells = set()
    for o in w.objects:
        assert w.in_bounds(o.pos), f"object {o.id} out of bounds"
        assert o.pos not in cells, f"cell {o.pos} doubly occupied"
        cells.add(o.pos)
    assert w.in_bounds(state.hand), "hand out of bounds"
    assert w.in_bounds(state.fixation), "fixation out of bounds"
    if state.held is not None:
        h = w.get(state.held)
        assert h is not None and h.pos == state.hand, "held object not under hand"
    ids = {o.id for o in w.objects}
    assert all(a in ids for a in state.attended)
    assert 0 <= state.fixation_cursor <= len(state.fixation_history)
    for _, count in state.loop_stack:
        assert count <= len(w.objects) + 1

