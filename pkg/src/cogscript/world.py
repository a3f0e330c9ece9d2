"""Symbolic scenes and the object-matching predicate.

A scene is a bounded grid holding at most one object per cell.  Objects keep
a persistent integer id across execution, so the same id refers to the same
physical object in an input scene, in the emulator's working copy, and in
the expected output.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

SHAPES = ("square", "circle", "triangle", "star")
COLORS = ("red", "green", "blue", "yellow")


class DimensionMismatch(ValueError):
    pass


class SceneError(ValueError):
    pass


class GridPos(NamedTuple):
    x: int
    y: int


@dataclass(frozen=True)
class SceneObject:
    id: int
    shape: str
    color: str
    pos: GridPos

    @property
    def x(self) -> int:
        return self.pos.x

    @property
    def y(self) -> int:
        return self.pos.y

    def props(self) -> tuple:
        return (self.shape, self.color, self.pos)

    def moved(self, pos: GridPos) -> "SceneObject":
        return SceneObject(self.id, self.shape, self.color, pos)

    def recolored(self, color: str) -> "SceneObject":
        return SceneObject(self.id, self.shape, color, self.pos)


def obj(id: int, shape: str, color: str, x: int, y: int) -> SceneObject:
    """Shorthand constructor used heavily by fixtures and tests."""
    return SceneObject(id, shape, color, GridPos(x, y))


@dataclass(frozen=True)
class Scene:
    width: int
    height: int
    objects: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not isinstance(self.objects, tuple):
            object.__setattr__(self, "objects", tuple(self.objects))
        validate_scene(self)

    def at(self, pos) -> Optional[SceneObject]:
        for o in self.objects:
            if o.pos == pos:
                return o
        return None

    def get(self, oid: int) -> Optional[SceneObject]:
        for o in self.objects:
            if o.id == oid:
                return o
        return None

    def in_bounds(self, pos) -> bool:
        return 0 <= pos[0] < self.width and 0 <= pos[1] < self.height

    @property
    def center(self) -> GridPos:
        return GridPos(self.width // 2, self.height // 2)

    def replace_object(self, new: SceneObject) -> "Scene":
        objs = tuple(new if o.id == new.id else o for o in self.objects)
        return _unchecked_scene(self.width, self.height, objs)

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "objects": [
                {"id": o.id, "shape": o.shape, "color": o.color, "x": o.x, "y": o.y}
                for o in self.objects
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scene":
        objs = [obj(o["id"], o["shape"], o["color"], o["x"], o["y"]) for o in d["objects"]]
        return cls(d["width"], d["height"], tuple(objs))


def _unchecked_scene(width, height, objects) -> Scene:
    # hot path for the emulator: callers guarantee the invariants
    s = object.__new__(Scene)
    object.__setattr__(s, "width", width)
    object.__setattr__(s, "height", height)
    object.__setattr__(s, "objects", objects)
    return s


def validate_scene(scene: Scene) -> None:
    if scene.width < 1 or scene.height < 1:
        raise SceneError(f"grid must be at least 1x1, got {scene.width}x{scene.height}")
    ids, cells = set(), set()
    for o in scene.objects:
        if o.shape not in SHAPES:
            raise SceneError(f"object {o.id}: unknown shape {o.shape!r}")
        if o.color not in COLORS:
            raise SceneError(f"object {o.id}: unknown color {o.color!r}")
        if not scene.in_bounds(o.pos):
            raise SceneError(f"object {o.id} at {tuple(o.pos)} is out of bounds")
        if o.id in ids:
            raise SceneError(f"duplicate object id {o.id}")
        if o.pos in cells:
            raise SceneError(f"two objects share cell {tuple(o.pos)}")
        ids.add(o.id)
        cells.add(o.pos)


@dataclass(frozen=True)
class MatchReport:
    matched_work_ids: frozenset
    matched_target_ids: frozenset
    pairing: dict

    def __len__(self) -> int:
        return len(self.pairing)


def match_objects(work: Scene, target: Scene, held_id: Optional[int] = None,
                  mode: str = "by_property") -> MatchReport:
    """Maximum bipartite matching of work objects onto target objects.

    A pair is admissible when shape, color and position agree (and, in
    ``by_id`` mode, the ids as well).  The held object never matches.
    Augmenting paths are tried in ascending id order, which makes the
    chosen pairing deterministic.
    """
    if work.width != target.width or work.height != target.height:
        raise DimensionMismatch(
            f"work is {work.width}x{work.height}, target is {target.width}x{target.height}")
    if mode not in ("by_property", "by_id"):
        raise ValueError(f"unknown match mode {mode!r}")
    by_id = mode == "by_id"

    targets = sorted(target.objects, key=lambda o: o.id)
    adj = {}
    for w in sorted(work.objects, key=lambda o: o.id):
        if w.id == held_id:
            continue
        wp = w.props()
        adj[w.id] = [t.id for t in targets
                     if t.props() == wp and (not by_id or t.id == w.id)]

    owner = {}  # target id -> work id

    def augment(wid, seen):
        for tid in adj[wid]:
            if tid in seen:
                continue
            seen.add(tid)
            if tid not in owner or augment(owner[tid], seen):
                owner[tid] = wid
                return True
        return False

    for wid in adj:
        if adj[wid]:
            augment(wid, set())

    pairing = {w: t for t, w in sorted(owner.items(), key=lambda kv: kv[1])}
    return MatchReport(frozenset(pairing), frozenset(pairing.values()), pairing)


def matched_targets(work: Scene, target: Scene, held_id: Optional[int] = None,
                    mode: str = "by_property") -> frozenset:
    """Target ids matched by ``work``; same result as ``match_objects`` but faster.

    Cell occupancy is exclusive in both scenes, so an admissible pair is
    fully determined by position and the maximum matching is simply the
    set of admissible pairs.
    """
    tmap = {o.pos: o for o in target.objects}
    by_id = mode == "by_id"
    out = []
    for w in work.objects:
        if w.id == held_id:
            continue
        t = tmap.get(w.pos)
        if t is not None and t.shape == w.shape and t.color == w.color and (not by_id or t.id == w.id):
            out.append(t.id)
    return frozenset(out)


def is_solved(work: Scene, target: Scene, held_id: Optional[int] = None,
              mode: str = "by_property") -> bool:
    if work.width != target.width or work.height != target.height:
        raise DimensionMismatch("scenes differ in size")
    if held_id is not None or len(work.objects) != len(target.objects):
        return False
    return len(matched_targets(work, target, None, mode)) == len(target.objects)

