"""
Base Transient Solver

Abstract base class for the field and circuit solvers. The base owns the
fixed-step time loop, trace collection and statistics; concrete solvers
only know how to build an initial state and advance it by one step.
"""

import logging
import time
from abc import ABC, abstractmethod
from typing import Any, List, Optional, Tuple

import numpy as np

from .config import SolverSettings
from .models import StepInfo, TransientTrace

logger = logging.getLogger(__name__)


class TransientSolver(ABC):
    """
    Fixed-step transient driver.

    Each solver inherits from this and implements:
    - initial_state(): state at t = 0
    - advance(): one implicit step from t to t + dt
    - observe(): (phi, T, q_el) grid-node vectors of a state
    """

    name = "base"

    def __init__(self, settings: SolverSettings):
        self.settings = settings

        # Statistics
        self.steps_taken = 0
        self.total_iterations = 0
        self.total_halvings = 0
        self.wall_seconds = 0.0

    @abstractmethod
    def initial_state(self) -> Any:
        """Return the state at t = 0."""
        pass

    @abstractmethod
    def advance(self, state: Any, t_new: float, dt: float) -> Tuple[Any, StepInfo]:
        """Advance state to t_new; returns the new state and its Newton bookkeeping."""
        pass

    @abstractmethod
    def observe(self, state: Any) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return (phi, T, q_el) on the grid nodes."""
        pass

    def time_points(self) -> np.ndarray:
        dt = self.settings.step
        return dt * np.arange(self.settings.num_steps + 1)

    def run(self, settings: Optional[SolverSettings] = None) -> TransientTrace:
        """
        Integrate from t = 0 to tstop on the fixed time grid.

        Raises:
            NoConvergence: a step's Newton iteration failed
            SingularSystem: a step's linear system could not be factorized
        """
        if settings is not None:
            self.settings = settings
        times = self.time_points()
        dt = self.settings.step
        start = time.perf_counter()

        state = self.initial_state()
        phi0, T0, q0 = self.observe(state)
        phi: List[np.ndarray] = [phi0]
        T: List[np.ndarray] = [T0]
        q_el: List[np.ndarray] = [q0]
        meta: List[StepInfo] = []

        logger.info(
            f"[{self.name}] transient: {times.size - 1} steps of {self.settings.step:.4e}s "
            f"({self.settings.mode}, {self.settings.integrator})"
        )
        for k in range(1, times.size):
            state, info = self.advance(state, times[k], dt)
            p, temp, q = self.observe(state)
            phi.append(p)
            T.append(temp)
            q_el.append(q)
            meta.append(info)
            self.steps_taken += 1
            self.total_iterations += info.iterations
            self.total_halvings += info.halvings

        self.wall_seconds += time.perf_counter() - start
        logger.info(f"[{self.name}] done in {self.wall_seconds:.3f}s, {self.total_iterations} Newton iterations")
        return TransientTrace(
            times=times,
            phi=np.vstack(phi),
            T=np.vstack(T),
            q_el=np.vstack(q_el),
            step_meta=meta,
            source=self.name,
        )

    def get_stats(self) -> dict:
        """Get solver statistics."""
        return {
            "name": self.name,
            "steps": self.steps_taken,
            "newton_iterations": self.total_iterations,
            "damping_halvings": self.total_halvings,
            "wall_seconds": round(self.wall_seconds, 6),
        }
