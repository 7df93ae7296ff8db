"""
Damped Newton Iteration

Shared by the field and circuit solvers. Convergence is measured with the
componentwise scaled residual

    eta = max_i |F_i(x)| / (|J(x)| |x| + |F(x_start)|)_i

so both solvers accept a step by the same rule. A Newton update that drives
a resistivity non-physical is halved up to SolverConfig.MAX_DAMPING_HALVINGS
times before the step is given up.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .config import SolverConfig
from .errors import NoConvergence, NonphysicalResistivity, SingularSystem

logger = logging.getLogger(__name__)

ResidualFn = Callable[[np.ndarray], Tuple[np.ndarray, sp.spmatrix]]
Factorize = Callable[[sp.spmatrix], Callable[[np.ndarray], np.ndarray]]


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual: float
    halvings: int = 0
    # block name -> first iteration at which that block met the tolerance
    block_iterations: Dict[str, int] = field(default_factory=dict)


def sparse_lu(J: sp.spmatrix) -> Callable[[np.ndarray], np.ndarray]:
    """Factorize J with SuperLU and return its solve callable."""
    try:
        return splu(sp.csc_matrix(J)).solve
    except RuntimeError as e:
        raise SingularSystem(f"Jacobian is singular: {e}") from e


def scaled_residual(
    F: np.ndarray, J: sp.spmatrix, x: np.ndarray, F_start: np.ndarray,
    rows: Optional[Sequence[int]] = None,
) -> float:
    """Componentwise backward error of F at x, optionally over a subset of rows."""
    if F.size == 0:
        return 0.0
    scale = abs(J) @ np.abs(x) + np.abs(F_start)
    ratio = np.abs(F) / np.maximum(scale, SolverConfig.RESIDUAL_FLOOR)
    if rows is not None:
        ratio = ratio[rows]
        if ratio.size == 0:
            return 0.0
    return float(np.max(ratio))


def newton_solve(
    residual: ResidualFn,
    x0: np.ndarray,
    t: float,
    tol: float = SolverConfig.NEWTON_TOL,
    max_iter: int = SolverConfig.MAX_ITER,
    factorize: Factorize = sparse_lu,
    blocks: Optional[Dict[str, np.ndarray]] = None,
) -> NewtonResult:
    """
    Solve residual(x) = 0 starting from x0.

    At least one Newton update is always taken, so a linear system reports
    exactly one iteration.

    Args:
        residual: x -> (F, J)
        x0: starting iterate (usually the previous time point)
        t: time of the step, for error reporting
        factorize: J -> solve callable
        blocks: named row subsets whose convergence iteration is recorded

    Raises:
        NoConvergence: tolerance not met after max_iter updates, or a step
            could not be damped into the physical range
        SingularSystem: Jacobian factorization failed
    """
    x = np.array(x0, dtype=float)
    F, J = residual(x)
    F_start = np.abs(F)
    eta = scaled_residual(F, J, x, F_start)
    if x.size == 0:
        return NewtonResult(x=x, iterations=0, residual=0.0)

    total_halvings = 0
    block_iterations: Dict[str, int] = {}

    for iteration in range(1, max_iter + 1):
        dx = factorize(J)(-F)
        if not np.all(np.isfinite(dx)):
            raise SingularSystem(f"non-finite Newton update at t={t:.6e}s")

        step = 1.0
        halvings = 0
        while True:
            candidate = x + step * dx
            try:
                F_new, J_new = residual(candidate)
                break
            except NonphysicalResistivity as e:
                halvings += 1
                if halvings > SolverConfig.MAX_DAMPING_HALVINGS:
                    raise NoConvergence(t, eta, iteration) from e
                step *= 0.5
        if halvings:
            total_halvings += halvings
            logger.warning(f"t={t:.6e}s: Newton step damped by 2^-{halvings}")

        x, F, J = candidate, F_new, J_new
        if not np.all(np.isfinite(F)):
            raise NoConvergence(t, float("inf"), iteration)

        eta = scaled_residual(F, J, x, F_start)
        for name, rows in (blocks or {}).items():
            if name not in block_iterations and scaled_residual(F, J, x, F_start, rows) < tol:
                block_iterations[name] = iteration

        logger.debug(f"t={t:.6e}s iteration {iteration}: scaled residual {eta:.3e}")
        if eta < tol:
            return NewtonResult(
                x=x,
                iterations=iteration,
                residual=eta,
                halvings=total_halvings,
                block_iterations=block_iterations,
            )

    raise NoConvergence(t, eta, max_iter)
