"""Cognitive-program induction over symbolic grid scenes."""
from .emulator import Instruction, execute, format_program, parse_program
from .estimator import CognitiveProgramInducer
from .model import TransitionModel, argument_prior, description_length, load_default_model, train
from .search import Concept, InductionResult, SearchConfig, induce, induce_naive, verify
from .world import GridPos, Scene, SceneObject, is_solved, match_objects, obj

__version__ = "0.1.0"

__all__ = [
    "CognitiveProgramInducer", "Concept", "GridPos", "InductionResult", "Instruction", "Scene",
    "SceneObject", "SearchConfig", "TransitionModel", "argument_prior", "description_length",
    "execute", "format_program", "induce", "induce_naive", "is_solved", "load_default_model",
    "match_objects", "obj", "parse_program", "train", "verify",
]
