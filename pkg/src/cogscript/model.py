"""Program prior: first-order Markov transitions plus per-concept argument priors.

Description length (DL) is measured in nats.  Every term is a negative log
probability and therefore nonnegative, so DL never decreases as a program
grows, which is what makes Dijkstra ordering valid.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .emulator import ARG_PALETTES, VARIANT_INDEX, VARIANTS, Instruction
from .world import COLORS, SHAPES

START = "<start>"
STATES = (START,) + tuple(str(v) for v in VARIANTS)
STATE_INDEX = {s: i for i, s in enumerate(STATES)}
N_STATES = len(STATES)
MODEL_DIR_ENV = "COGSCRIPT_MODEL_DIR"


class EmptyTrainingSet(ValueError):
    pass


class AllMaskedRow(ValueError):
    pass


def state_of(inst: Optional[Instruction]) -> int:
    """Row/column index of an instruction; ``None`` is the start symbol."""
    return 0 if inst is None else VARIANT_INDEX[inst] + 1


def full_mask() -> np.ndarray:
    """All transitions allowed except the structurally impossible ones."""
    m = np.ones((N_STATES, N_STATES), dtype=bool)
    m[:, 0] = False
    sp = state_of(Instruction("scene_parse"))
    m[0, :] = False
    m[0, sp] = True
    m[1:, sp] = False
    return m


def restricted_mask(variants: Iterable[Instruction], base: Optional[np.ndarray] = None) -> np.ndarray:
    """Mask limited to a sub-registry (used for exhaustive-oracle checks)."""
    m = full_mask() if base is None else base.copy()
    keep = np.zeros(N_STATES, dtype=bool)
    keep[0] = True
    for v in variants:
        keep[state_of(v)] = True
    m[~keep, :] = False
    m[:, ~keep] = False
    return m


def load_mask(path) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    m = full_mask()
    for a, b in data["forbidden"]:
        m[STATE_INDEX[a], STATE_INDEX[b]] = False
    return m


def save_mask(mask: np.ndarray, path) -> None:
    forbidden = [[STATES[i], STATES[j]]
                 for i in range(N_STATES) for j in range(1, N_STATES)
                 if not mask[i, j] and full_mask()[i, j]]
    Path(path).write_text(json.dumps({"forbidden": forbidden}, indent=1) + "\n")


@dataclass(frozen=True)
class TransitionModel:
    probs: np.ndarray
    allowed: np.ndarray
    states: tuple = STATES

    def prob(self, prev: Optional[Instruction], nxt: Instruction) -> float:
        return float(self.probs[state_of(prev), state_of(nxt)])

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "probs": [[float(p) for p in row] for row in self.probs],
            "mask": [[bool(a) for a in row] for row in self.allowed],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TransitionModel":
        if tuple(d["states"]) != STATES:
            raise ValueError("model states do not match the instruction registry")
        return cls(np.array(d["probs"], dtype=float), np.array(d["mask"], dtype=bool))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "TransitionModel":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def restricted(self, variants) -> "TransitionModel":
        """Same probabilities renormalised over a sub-registry."""
        return self.masked(restricted_mask(variants))

    def masked(self, mask: np.ndarray) -> "TransitionModel":
        """Same probabilities with extra cells forbidden, rows renormalised."""
        allowed = self.allowed & mask
        probs = np.where(allowed, self.probs, 0.0)
        sums = probs.sum(axis=1, keepdims=True)
        probs = np.divide(probs, sums, out=np.zeros_like(probs), where=sums > 0)
        return TransitionModel(probs, allowed)


def train(programs, alpha: float = 0.1, mask: Optional[np.ndarray] = None) -> TransitionModel:
    """Count transitions (start symbol included), add ``alpha`` to every allowed
    cell and normalise each row.  Masked cells stay exactly zero."""
    programs = [p for p in programs]
    if not programs:
        raise EmptyTrainingSet("no training programs")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    mask = full_mask() if mask is None else np.asarray(mask, dtype=bool)
    counts = np.zeros((N_STATES, N_STATES))
    for prog in programs:
        prev = 0
        for inst in prog:
            cur = state_of(inst)
            counts[prev, cur] += 1
            prev = cur
    counts = np.where(mask, counts + alpha, 0.0)
    probs = np.zeros_like(counts)
    if not mask[0].any():
        raise AllMaskedRow("the start row has no allowed transition")
    for i in range(N_STATES):
        if not mask[i].any():
            continue  # terminal instruction in the dependency graph
        total = counts[i].sum()
        probs[i] = counts[i] / total if total > 0 else mask[i] / mask[i].sum()
    return TransitionModel(probs, mask.copy())


@dataclass(frozen=True)
class ArgumentPrior:
    """Per-opcode distributions over argument values."""
    dists: dict

    def factor(self, inst: Instruction) -> float:
        if inst.arg is None:
            return 1.0
        return self.dists[inst.opcode][inst.arg]

    @classmethod
    def uniform(cls) -> "ArgumentPrior":
        return cls({op: {a: 1.0 / len(pal) for a in pal} for op, pal in ARG_PALETTES.items()})


def _concentrate(support, palette, eps):
    if not support:
        return {a: 1.0 / len(palette) for a in palette}
    rest = len(palette) - len(support)
    if rest * eps < 1.0:
        # off-support entries keep exactly eps; the support shares the remainder
        share = (1.0 - rest * eps) / len(support)
        return {a: (share if a in support else eps) for a in palette}
    w = {a: (1.0 / len(support) if a in support else eps) for a in palette}
    z = sum(w.values())
    return {a: v / z for a, v in w.items()}


def argument_prior(concept, epsilon_arg: float = 0.01) -> ArgumentPrior:
    """Deterministic stand-in for learned argument prediction.

    Colors (shapes) carried by any object that differs between an example's
    input and output, on either side, receive equal mass; every other
    palette entry gets exactly ``epsilon_arg``.  When the floors alone would
    reach 1, all weights are renormalised proportionally instead.
    """
    if epsilon_arg < 0:
        raise ValueError("epsilon_arg must be nonnegative")
    colors, shapes = set(), set()
    for inp, out in concept.examples:
        before = {o.id: o for o in inp.objects}
        after = {o.id: o for o in out.objects}
        for oid in before.keys() | after.keys():
            a, b = before.get(oid), after.get(oid)
            if a is not None and b is not None and a.props() == b.props():
                continue
            for o in (a, b):
                if o is not None:
                    colors.add(o.color)
                    shapes.add(o.shape)
    cdist = _concentrate(colors, COLORS, epsilon_arg)
    sdist = _concentrate(shapes, SHAPES, epsilon_arg)
    return ArgumentPrior({"set_color_attn": cdist, "fill_color": dict(cdist),
                          "set_shape_attn": sdist})


def description_length(program, model: TransitionModel, prior: Optional[ArgumentPrior] = None) -> float:
    """Negative log-probability of ``program`` in nats (``inf`` if impossible)."""
    prior = prior or ArgumentPrior.uniform()
    dl = 0.0
    prev = 0
    for inst in program:
        cur = state_of(inst)
        f = model.probs[prev, cur] * prior.factor(inst)
        if f <= 0:
            return math.inf
        dl -= math.log(f)
        prev = cur
    return dl


class CostTable:
    """Per-concept step costs: ``succ[row]`` lists ``(variant, state, cost)``
    for every successor with a nonzero combined factor, in registry order."""

    def __init__(self, model: TransitionModel, prior: Optional[ArgumentPrior] = None):
        prior = prior or ArgumentPrior.uniform()
        factors = np.array([prior.factor(v) for v in VARIANTS])
        self.succ = []
        self.min_cost = []
        for row in range(N_STATES):
            out = []
            for j, v in enumerate(VARIANTS):
                f = model.probs[row, j + 1] * factors[j]
                if f > 0:
                    out.append((v, j + 1, -math.log(f)))
            self.succ.append(out)
            self.min_cost.append(min((c for _, _, c in out), default=math.inf))
        self._cost = {(row, s): c for row, lst in enumerate(self.succ) for _, s, c in lst}

    def cost(self, prev_state: int, inst: Instruction) -> float:
        return self._cost.get((prev_state, state_of(inst)), math.inf)

    def dl(self, program) -> float:
        total, prev = 0.0, 0
        for inst in program:
            s = state_of(inst)
            c = self._cost.get((prev, s))
            if c is None:
                return math.inf
            total += c
            prev = s
        return total


def _model_dir() -> Path:
    env = os.environ.get(MODEL_DIR_ENV)
    if env:
        return Path(env)
    return Path(str(resources.files("cogscript") / "data"))


def default_mask_path() -> Path:
    return _model_dir() / "mask.json"


def default_model_path() -> Path:
    return _model_dir() / "model.json"


def load_default_model() -> TransitionModel:
    return TransitionModel.load(default_model_path())
