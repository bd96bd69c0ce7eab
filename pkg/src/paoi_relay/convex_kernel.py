"""
small dense log-barrier interior-point solver for convex QCQPs.

problem form:
    maximize    c^T z
    subject to  z^T A_k z + b_k^T z + d_k <= 0,   k = 1..m,   A_k PSD
                z_i = v_i for i in fixed

fixed components are substituted out before solving. each centering step
runs damped Newton on  t (-c^T z) - sum_k log(-g_k(z))  with a backtracking
line search that keeps every iterate strictly feasible; t grows by mu until
m/t drops below the duality-gap target.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .constants import (BARRIER_ALPHA, BARRIER_BETA, BARRIER_EPS, BARRIER_MU, BARRIER_T0, MAX_NEWTON,
                        NEWTON_TOL, SLACK_REL)
from .errors import InvalidProblemError, NumericError, SolverStallError, SubproblemInfeasibleError

logger = logging.getLogger(__name__)

_MAX_BACKTRACK = 200
_MAX_PULLBACK = 64
_PHASE_ONE_RADIUS = 1e3


@dataclass(frozen=True)
class QuadConstraint:
    """z^T A z + b^T z + d <= 0; A may be None for a linear constraint."""
    A: Optional[np.ndarray]
    b: np.ndarray
    d: float


@dataclass(frozen=True, eq=False)
class Qcqp:
    """
    a convex QCQP in stacked form.

    attributes:
        c (np.ndarray): objective coefficients, the solver maximizes c^T z.
        quad (np.ndarray): (m, n, n) stack of symmetric PSD matrices A_k.
        lin (np.ndarray): (m, n) stack of b_k.
        const (np.ndarray): (m,) constants d_k.
        fixed (Mapping[int, float]): components pinned to a value.
    """
    c: np.ndarray
    quad: np.ndarray
    lin: np.ndarray
    const: np.ndarray
    fixed: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        n = len(c)
        quad = np.asarray(self.quad, dtype=float).reshape(-1, n, n)
        lin = np.asarray(self.lin, dtype=float).reshape(-1, n)
        const = np.asarray(self.const, dtype=float).reshape(-1)
        if not (quad.shape[0] == lin.shape[0] == const.shape[0]):
            raise InvalidProblemError("constraint stacks have different lengths")
        if not np.allclose(quad, np.transpose(quad, (0, 2, 1)), rtol=0, atol=1e-12 * max(1.0, np.abs(quad).max(initial=0))):
            raise InvalidProblemError("quadratic forms must be symmetric")
        for k, a in enumerate(quad):
            if not a.any():
                continue
            eig = np.linalg.eigvalsh(a)
            if eig[0] < -1e-10 * np.abs(eig).max():
                raise InvalidProblemError(f"constraint {k} is not convex (min eigenvalue {eig[0]:g})")
        fixed = {int(k): float(v) for k, v in dict(self.fixed).items()}
        if any(not 0 <= k < n for k in fixed):
            raise InvalidProblemError("fixed index out of range")
        for name, value in (('c', c), ('quad', quad), ('lin', lin), ('const', const)):
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'fixed', fixed)

    @classmethod
    def from_constraints(cls, c, constraints, fixed=None):
        c = np.asarray(c, dtype=float)
        n = len(c)
        quad = np.zeros((len(constraints), n, n))
        lin = np.zeros((len(constraints), n))
        const = np.zeros(len(constraints))
        for k, con in enumerate(constraints):
            if con.A is not None:
                quad[k] = con.A
            lin[k] = con.b
            const[k] = con.d
        return cls(c, quad, lin, const, fixed or {})

    @property
    def n(self):
        return len(self.c)

    @property
    def m(self):
        return len(self.const)

    @property
    def free_dimension(self):
        return self.n - len(self.fixed)

    def values(self, z):
        """g_k(z) for every constraint."""
        z = np.asarray(z, dtype=float)
        return np.einsum('i,kij,j->k', z, self.quad, z) + self.lin @ z + self.const

    def slack_floor(self):
        """per-constraint eps_slack = SLACK_REL * (1 + |d_k|)."""
        return SLACK_REL * (1.0 + np.abs(self.const))

    def relaxed(self, amount):
        """copy with every d_k lowered by amount (a scalar or per-constraint array)."""
        return Qcqp(self.c, self.quad, self.lin, self.const - amount, self.fixed)

    def with_fixed(self, z):
        z = np.array(z, dtype=float)
        for k, v in self.fixed.items():
            z[k] = v
        return z

    def reduce(self):
        """substitute the fixed components; returns (reduced problem, free indices)."""
        free = np.array([i for i in range(self.n) if i not in self.fixed], dtype=int)
        if not self.fixed:
            return self, free
        fixed_idx = np.array(sorted(self.fixed), dtype=int)
        v = np.array([self.fixed[i] for i in fixed_idx])
        a_ff = self.quad[:, free][:, :, free]
        a_fx = self.quad[:, free][:, :, fixed_idx]
        a_xx = self.quad[:, fixed_idx][:, :, fixed_idx]
        lin = self.lin[:, free] + 2.0 * a_fx @ v
        const = self.const + np.einsum('i,kij,j->k', v, a_xx, v) + self.lin[:, fixed_idx] @ v
        return Qcqp(self.c[free], a_ff, lin, const), free


@dataclass(frozen=True)
class BarrierSettings:
    """
    barrier method parameters.

    attributes:
        t0 (float): initial barrier weight, > 0.
        mu (float): growth factor of t, > 1.
        eps (float): stop once m/t <= eps.
        newton_tol (float): stop centering once lambda^2/2 <= newton_tol.
        max_newton (int): Newton steps allowed per centering.
        alpha (float): Armijo fraction, in (0, 0.5).
        beta (float): backtracking factor, in (0, 1).
    """
    t0: float = BARRIER_T0
    mu: float = BARRIER_MU
    eps: float = BARRIER_EPS
    newton_tol: float = NEWTON_TOL
    max_newton: int = MAX_NEWTON
    alpha: float = BARRIER_ALPHA
    beta: float = BARRIER_BETA

    def __post_init__(self):
        if not (self.t0 > 0 and self.mu > 1 and 0 < self.alpha < 0.5 and 0 < self.beta < 1):
            raise InvalidProblemError(f"invalid barrier settings {self}")


class StartPoint(NamedTuple):
    z: np.ndarray
    problem: Qcqp
    relaxed: bool


class KernelResult(NamedTuple):
    z: np.ndarray
    gap: float
    newton_iterations: int
    decrements: list


def _phi(q, t, z):
    g = q.values(z)
    if np.any(g >= 0):
        return np.inf
    return -t * (q.c @ z) - np.sum(np.log(-g))


def _newton_system(q, t, z):
    g = q.values(z)
    grads = 2.0 * np.einsum('kij,j->ki', q.quad, z) + q.lin
    inv = -1.0 / g
    grad = -t * q.c + grads.T @ inv
    hess = (grads.T * inv ** 2) @ grads + 2.0 * np.einsum('k,kij->ij', inv, q.quad)
    return grad, hess


def _solve_symmetric(hess, rhs):
    try:
        return cho_solve(cho_factor(hess), rhs)
    except LinAlgError:
        n = hess.shape[0]
        reg = 1e-12 * max(np.trace(hess), np.finfo(float).tiny) / n
        for _ in range(12):
            try:
                return cho_solve(cho_factor(hess + reg * np.eye(n)), rhs)
            except LinAlgError:
                reg *= 10.0
        raise NumericError("Newton system could not be factorized")


def _barrier(q, settings, z0, stop: Optional[Callable] = None):
    """barrier method on an unfixed problem; z0 must be strictly feasible."""
    z = np.array(z0, dtype=float)
    m = q.m
    t = settings.t0
    decrements = []
    total = 0
    outer = 0
    while True:
        outer += 1
        history = []
        for it in range(settings.max_newton + 1):
            grad, hess = _newton_system(q, t, z)
            step = _solve_symmetric(hess, -grad)
            lam2 = float(-grad @ step)
            if not np.isfinite(lam2):
                raise NumericError("non-finite Newton decrement")
            history.append(np.sqrt(max(lam2, 0.0)))
            if lam2 / 2.0 <= settings.newton_tol:
                break
            if it == settings.max_newton:
                raise SolverStallError("Newton centering did not converge", {
                    'outer_iteration': outer, 't': t, 'newton_decrement': history[-1],
                    'newton_iterations': total})
            phi0 = _phi(q, t, z)
            s = 1.0
            for _ in range(_MAX_BACKTRACK):
                if np.all(q.values(z + s * step) < 0):
                    break
                s *= settings.beta
            for _ in range(_MAX_BACKTRACK):
                if _phi(q, t, z + s * step) <= phi0 - settings.alpha * s * lam2:
                    break
                s *= settings.beta
            z_next = z + s * step
            if not np.all(np.isfinite(z_next)):
                raise NumericError("iterate left the finite range")
            if np.array_equal(z_next, z):
                # step underflowed; the center is as good as floating point allows
                break
            z = z_next
            total += 1
        decrements.append(history)
        logger.debug("centering %d done: t=%g, %d Newton steps, decrement %.3g",
                     outer, t, len(history) - 1, history[-1])
        if stop is not None and stop(z):
            return z, m / t, total, decrements
        if m == 0 or m / t <= settings.eps:
            return z, (m / t if m else 0.0), total, decrements
        t *= settings.mu


def _phase_one(q, z0, settings):
    """
    look for z with g_k(z) <= -eps_k for all k.

    solves  min s  s.t.  g_k(z) + eps_k <= s,  s >= -1,  |z - z0| <= rho
    and stops after the first centering that ends with s < 0. the ball keeps
    the search bounded when some variable only enters linear constraints.
    returns None when the optimum s is not negative.
    """
    n, m = q.n, q.m
    eps_k = q.slack_floor()
    rho = _PHASE_ONE_RADIUS * (1.0 + float(np.max(np.abs(z0), initial=0.0)))
    quad = np.zeros((m + 2, n + 1, n + 1))
    quad[:m, :n, :n] = q.quad
    quad[m + 1, :n, :n] = np.eye(n)
    lin = np.zeros((m + 2, n + 1))
    lin[:m, :n] = q.lin
    lin[:m, n] = -1.0
    lin[m, n] = -1.0
    lin[m + 1, :n] = -2.0 * z0
    const = np.concatenate((q.const + eps_k, [-1.0, float(z0 @ z0) - rho * rho]))
    c = np.zeros(n + 1)
    c[n] = -1.0
    aux = Qcqp(c, quad, lin, const)
    s0 = max(float(np.max(q.values(z0) + eps_k)), -0.5) + 1.0
    start = np.append(z0, s0)
    try:
        w, _, _, _ = _barrier(aux, settings, start, stop=lambda w: w[-1] < 0)
    except (SolverStallError, NumericError) as e:
        logger.debug("phase I gave up: %s", e)
        return None
    if w[-1] < 0 and np.all(q.values(w[:n]) <= -eps_k):
        return w[:n]
    return None


def strictly_feasible_start(q, hint, pullback_index=None, settings=None):
    """
    turn a hint into a strictly feasible starting point.

    args:
        q (Qcqp): the problem to start.
        hint (np.ndarray): full-dimension guess, usually the current iterate.
        pullback_index (int | None): index of an auxiliary objective variable
            (a max-min level) that may simply be lowered to create slack.
        settings (BarrierSettings | None): used by the phase I search.

    returns:
        StartPoint: the point, the problem to solve from it (relaxed by
        eps_slack when the hint's feasible set has no interior) and a flag.

    raises:
        SubproblemInfeasibleError: the hint violates a constraint by more
        than eps_slack and no strictly feasible point could be found.
    """
    settings = settings or BarrierSettings()
    z = q.with_fixed(hint)
    eps_k = q.slack_floor()
    if np.all(q.values(z) <= -eps_k):
        return StartPoint(z, q, False)

    if pullback_index is not None:
        involved = (q.lin[:, pullback_index] != 0) | np.any(q.quad[:, pullback_index, :] != 0, axis=1)
        delta = float(eps_k.max())
        for _ in range(_MAX_PULLBACK):
            trial = z.copy()
            trial[pullback_index] -= delta
            if np.all(q.values(trial)[involved] <= -eps_k[involved]):
                z = trial
                break
            delta *= 2.0
        if np.all(q.values(z) <= -eps_k):
            return StartPoint(z, q, False)

    reduced, free = q.reduce()
    inner = _phase_one(reduced, z[free], settings) if reduced.m else None
    if inner is not None:
        z = z.copy()
        z[free] = inner
        return StartPoint(z, q, False)

    g = q.values(z)
    if np.any(g > eps_k):
        raise SubproblemInfeasibleError(
            f"hint violates constraints by up to {float(np.max(g)):g}; no interior point found")
    logger.warning("feasible set has no usable interior at the hint; relaxing constraints by eps_slack")
    relaxed = q.relaxed(2.0 * eps_k)
    return StartPoint(z, relaxed, True)


def solve(q, settings=None, start=None):
    """
    maximize c^T z over the QCQP from a strictly feasible start.

    args:
        q (Qcqp): problem (fixed components are eliminated internally).
        settings (BarrierSettings | None): barrier parameters.
        start (np.ndarray): strictly feasible full-dimension point.

    returns:
        KernelResult: optimum z (fixed components restored), duality gap
        bound m/t, Newton step count and the decrement history per centering.

    raises:
        SubproblemInfeasibleError: start is not strictly feasible.
        SolverStallError: a centering step ran out of Newton iterations.
        NumericError: NaN or overflow.
    """
    settings = settings or BarrierSettings()
    z0 = q.with_fixed(start)
    if np.any(q.values(z0) >= 0):
        raise SubproblemInfeasibleError("solve needs a strictly feasible start")
    reduced, free = q.reduce()
    z_free, gap, iters, decrements = _barrier(reduced, settings, z0[free])
    z = z0.copy()
    z[free] = z_free
    if not np.all(np.isfinite(z)):
        raise NumericError("solution is not finite")
    return KernelResult(z, float(gap), iters, decrements)
