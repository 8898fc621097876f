from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from app.domain.errors import PreconditionError, StagnationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepControl:
    armijo: float = 1e-4
    shrink: float = 0.5
    growth: float = 1.2
    growth_after: int = 5
    max_backtracks: int = 50

    def __post_init__(self) -> None:
        if not (0.0 < self.armijo < 0.5):
            raise PreconditionError("Armijo constant must lie in (0, 0.5)", {"armijo": self.armijo})
        if not (0.0 < self.shrink < 1.0):
            raise PreconditionError("shrink factor must lie in (0, 1)", {"shrink": self.shrink})
        if self.growth < 1.0:
            raise PreconditionError("growth factor must be >= 1", {"growth": self.growth})


@dataclass(frozen=True)
class LineSearchStep:
    step: float
    x: np.ndarray
    value: float
    backtracks: int


class ArmijoBacktracking:
    """
    Backtracking line search on a manifold: candidates are
    ``retract(x + t d)`` and must satisfy f <= f0 + c t <g, d>.
    The trial step persists across calls and grows after a run of
    accepted steps that needed no backtracking.
    """

    def __init__(self, initial_step: float, control: Optional[StepControl] = None) -> None:
        if initial_step <= 0.0:
            raise PreconditionError("initial step must be positive", {"initial_step": initial_step})
        self.control = control or StepControl()
        self.step = float(initial_step)
        self._clean_streak = 0

    def search(
        self,
        f: Callable[[np.ndarray], float],
        retract: Callable[[np.ndarray], np.ndarray],
        x: np.ndarray,
        fx: float,
        direction: np.ndarray,
        slope: float,
    ) -> LineSearchStep:
        if slope >= 0.0:
            raise PreconditionError("search direction is not a descent direction", {"slope": slope})
        c = self.control
        t = self.step
        for backtracks in range(c.max_backtracks):
            candidate = retract(x + t * direction)
            value = f(candidate)
            if value <= fx + c.armijo * t * slope:
                self._accept(t, backtracks)
                return LineSearchStep(t, candidate, value, backtracks)
            t *= c.shrink
        raise StagnationError(
            f"line search failed {c.max_backtracks} consecutive times",
            {"value": fx, "slope": slope, "last_step": t, "initial_step": self.step},
        )

    def _accept(self, t: float, backtracks: int) -> None:
        self.step = t
        if backtracks:
            self._clean_streak = 0
            return
        self._clean_streak += 1
        if self._clean_streak >= self.control.growth_after:
            self.step *= self.control.growth
            self._clean_streak = 0
