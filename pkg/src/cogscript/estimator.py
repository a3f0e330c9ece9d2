"""scikit-learn style wrapper: ``fit`` induces a program from example
pairs, ``predict`` runs it on new input scenes."""
from __future__ import annotations

from typing import Optional

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .emulator import execute
from .model import TransitionModel, load_default_model
from .search import Concept, SearchConfig, induce
from .world import Scene, is_solved


def _check_scenes(X, name):
    if isinstance(X, Scene):
        raise TypeError(f"{name} must be a sequence of Scene objects, not a single Scene")
    X = list(X)
    if not X:
        raise ValueError(f"{name} is empty")
    for i, s in enumerate(X):
        if not isinstance(s, Scene):
            raise TypeError(f"{name}[{i}] is {type(s).__name__}, expected Scene")
    return X


class CognitiveProgramInducer(BaseEstimator):
    """Induce one program mapping every ``X[i]`` to ``y[i]``.

    Hyperparameters mirror :class:`SearchConfig`; ``model`` may be a
    :class:`TransitionModel`, a path to a model file, or ``None`` for the
    packaged default.
    """

    def __init__(self, n_progs: int = 4000, mode: str = "factorized", mutation: bool = True,
                 match_mode: str = "by_property", epsilon_arg: float = 0.01,
                 order_retry: bool = False, workers: int = 1, model=None):
        self.n_progs = n_progs
        self.mode = mode
        self.mutation = mutation
        self.match_mode = match_mode
        self.epsilon_arg = epsilon_arg
        self.order_retry = order_retry
        self.workers = workers
        self.model = model

    def _config(self) -> SearchConfig:
        return SearchConfig(n_progs=self.n_progs, mode=self.mode, mutation_enabled=self.mutation,
                            match_mode=self.match_mode, epsilon_arg=self.epsilon_arg,
                            order_retry=self.order_retry, parallel_workers=self.workers)

    def _model(self) -> TransitionModel:
        if self.model is None:
            return load_default_model()
        if isinstance(self.model, TransitionModel):
            return self.model
        return TransitionModel.load(self.model)

    def fit(self, X, y, name: Optional[str] = None):
        X = _check_scenes(X, "X")
        y = _check_scenes(y, "y")
        if len(X) != len(y):
            raise ValueError(f"X has {len(X)} scenes but y has {len(y)}")
        concept = Concept(name or "fitted", tuple(zip(X, y)))
        self.result_ = induce(concept, self._model(), self._config())
        self.program_ = self.result_.program
        self.status_ = self.result_.status
        self.n_visited_ = self.result_.visited
        self.description_length_ = self.result_.dl
        return self

    def predict(self, X):
        """Output scene per input, or ``None`` where the program errors.
        Raises if ``fit`` found no program."""
        check_is_fitted(self, "program_")
        if self.program_ is None:
            raise RuntimeError(f"no program was found during fit (status {self.status_})")
        out = []
        for s in _check_scenes(X, "X"):
            r = execute(self.program_, s, trace=False)
            if not r.ok or r.final.held is not None or r.final.loop_open:
                out.append(None)
            else:
                out.append(Scene(s.width, s.height, r.final.working.objects))
        return out

    def score(self, X, y) -> float:
        """Fraction of pairs whose predicted output matches ``y``."""
        y = _check_scenes(y, "y")
        pred = self.predict(X)
        if len(pred) != len(y):
            raise ValueError(f"X has {len(pred)} scenes but y has {len(y)}")
        hits = sum(p is not None and is_solved(p, t, None, self.match_mode) for p, t in zip(pred, y))
        return hits / len(y)
