"""
energy and service-time allocation for a fixed trajectory.

the allocation problem splits into two independent phase problems (uplink
with budget E_S, downlink with budget E_U). each one is solved either in
closed form, when the budget covers the mobility-limited minimum service
times, or through its one-dimensional dual: for a multiplier lambda every
packet's optimal time follows from a scalar root of
f(x) = 2^x (ln2 x - 1) + 1, and lambda is bisected until the budget binds.
"""
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .constants import (ENERGY_TOL, LAMBDA_CAP, LAMBDA_HI_START, LAMBDA_LO, LAMBDA_MAX_ITER,
                        LAMBDA_WIDTH_TOL, ROOT_MAX_ITER, ROOT_TOL)
from .errors import BranchError, DomainError, InfeasibleError, NumericError, SolverStallError
from .model import LN2, Allocation, Phase, gamma_sequence, min_energy, theta_sequence

logger = logging.getLogger(__name__)

# f(1000) ~ 7e303 is the last doubling bracket that stays finite
_X_CEILING = 1000.0


class Branch(str, enum.Enum):
    MIN_TIME = 'min-time'
    DUAL = 'dual'


@dataclass(frozen=True, eq=False)
class PhaseProblem:
    """
    one half (uplink or downlink) of the allocation problem.

    attributes:
        thetas (np.ndarray): minimum service times from the UAV's mobility.
        gammas (np.ndarray): SNR coefficients g/(Gamma sigma^2), > 0.
        s_bar (float): bits per Hz each packet has to carry.
        budget (float): total energy available for the phase.
    """
    thetas: np.ndarray
    gammas: np.ndarray
    s_bar: float
    budget: float

    def __post_init__(self):
        thetas = np.array(self.thetas, dtype=float).reshape(-1)
        gammas = np.array(self.gammas, dtype=float).reshape(-1)
        if thetas.shape != gammas.shape:
            raise DomainError("thetas and gammas must have the same length")
        if len(thetas) < 2:
            raise DomainError("a phase problem needs at least 2 packets")
        if np.any(gammas <= 0) or np.any(thetas < 0):
            raise DomainError("need gamma > 0 and theta >= 0 for every packet")
        if not self.s_bar > 0:
            raise DomainError(f"s_bar must be > 0, got {self.s_bar}")
        if not self.budget >= 0:
            raise DomainError(f"budget must be >= 0, got {self.budget}")
        object.__setattr__(self, 'thetas', thetas)
        object.__setattr__(self, 'gammas', gammas)

    @property
    def n(self):
        return len(self.thetas)

    @property
    def weights(self):
        """c_i: 1 for the first and last packet, 2 for the ones in between."""
        c = np.full(self.n, 2.0)
        c[0] = c[-1] = 1.0
        return c

    @property
    def min_energy(self):
        return min_energy(self.thetas, self.gammas, self.s_bar)

    @property
    def energy_floor(self):
        """energy needed as every service time goes to infinity."""
        return float(np.sum(self.s_bar * LN2 / self.gammas))

    def objective(self, d):
        """the phase's share of the average PAoI, sum c_i d_i / (N-1)."""
        return float(self.weights @ np.asarray(d) / (self.n - 1))


@dataclass
class DualState:
    """
    bookkeeping of the lambda search.

    residual is the sub-gradient of the dual function: energy used at
    d(lambda) minus the budget. it is non-increasing in lambda, so once
    bracketed residual(lo) >= 0 >= residual(hi).
    """
    lam: float = 0.0
    bracket: tuple = (LAMBDA_LO, LAMBDA_HI_START)
    residual: float = math.inf
    iterations: int = 0
    history: list = field(default_factory=list)


@dataclass(frozen=True, eq=False)
class PhaseSolution:
    d: np.ndarray
    e: np.ndarray
    lam_opt: Optional[float]
    branch: Branch
    dual: Optional[DualState] = None


def energy_for_time(d, gamma, s_bar):
    """
    least energy that carries s_bar bits/Hz in time d.

    args:
        d (float | np.ndarray): service time(s), strictly positive.
        gamma (float | np.ndarray): SNR coefficient(s).
        s_bar (float): bits per Hz.

    returns:
        d/gamma * (2^(s_bar/d) - 1); overflows to inf for very short times.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("energy_for_time needs d > 0")
    with np.errstate(over='ignore'):
        e = d / np.asarray(gamma, dtype=float) * np.expm1(s_bar * LN2 / d)
    return float(e) if np.ndim(e) == 0 else e


def solve_min_time(p):
    """
    closed-form allocation when energy is not the bottleneck.

    every packet runs at its minimum time theta_i with the energy that makes
    its throughput constraint tight.

    raises:
        BranchError: when E_min is infinite or exceeds the budget.
    """
    e_min = p.min_energy
    if not math.isfinite(e_min) or p.budget < e_min:
        raise BranchError(f"minimum-time branch needs budget >= E_min ({p.budget} < {e_min})")
    e = energy_for_time(p.thetas, p.gammas, p.s_bar)
    return PhaseSolution(d=p.thetas.copy(), e=np.atleast_1d(e), lam_opt=None, branch=Branch.MIN_TIME)


def _f(x):
    u = x * LN2
    if u < 1e-3:
        # series of e^u (u - 1) + 1, free of the cancellation near 0
        return u * u * (0.5 + u * (1.0 / 3 + u * (0.125 + u * (1.0 / 30 + u / 144.0))))
    try:
        return math.expm1(u) * (u - 1.0) + u
    except OverflowError:
        return math.inf


def root_find_f(psi, tol=ROOT_TOL):
    """
    solve f(x) = psi for x > 0 with f(x) = 2^x (ln2 x - 1) + 1.

    f is strictly increasing on x >= 0 with f(0) = 0, so the root is unique.
    the bracket [0, x_hi] is found by doubling, then refined with brentq.

    args:
        psi (float): target value, strictly positive.
        tol (float): accept |f(x) - psi| <= tol * max(1, psi).
    """
    if not psi > 0:
        raise DomainError(f"root_find_f needs psi > 0, got {psi}")
    x_hi = 1.0
    while _f(x_hi) < psi:
        if x_hi >= _X_CEILING:
            raise NumericError(f"psi={psi} is beyond the representable range of f")
        x_hi = min(2.0 * x_hi, _X_CEILING)
    x = brentq(lambda x: _f(x) - psi, 0.0, x_hi, xtol=np.finfo(float).tiny,
               rtol=4 * np.finfo(float).eps, maxiter=ROOT_MAX_ITER)
    if abs(_f(x) - psi) > tol * max(1.0, psi):
        raise NumericError(f"root of f for psi={psi} missed tolerance: f(x)={_f(x)}")
    return x


def times_given_lambda(p, lam):
    """
    minimizer of the Lagrangian for a fixed multiplier.

    d_i = max(theta_i, s_bar / x_i) where x_i solves f(x_i) = psi_i and
    psi_i = c_i gamma_i / (lam (N-1)).
    """
    if not lam > 0:
        raise DomainError(f"lambda must be > 0, got {lam}")
    psi = p.weights * p.gammas / (lam * (p.n - 1))
    x = np.array([root_find_f(v) for v in psi])
    return np.maximum(p.thetas, p.s_bar / x)


def _residual(p, lam):
    d = times_given_lambda(p, lam)
    used = float(np.sum(energy_for_time(d, p.gammas, p.s_bar)))
    return d, used - p.budget


def solve_phase_dual(p, tol=ENERGY_TOL):
    """
    solve a phase through its dual when the budget is the binding constraint.

    energy use is non-increasing in lambda, so lambda is bracketed (lo fixed
    small, hi doubled from 1) and then bisected on the energy residual,
    which is exactly the sub-gradient of the dual function.

    args:
        p (PhaseProblem): phase with budget below E_min (possibly infinite).
        tol (float): relative tolerance on the energy balance.

    returns:
        PhaseSolution: times, energies and the optimal multiplier.

    raises:
        InfeasibleError: budget <= 0 or below the energy floor
                         sum s_bar ln2 / gamma_i.
        SolverStallError: the bisection did not settle.
    """
    if not p.budget > 0:
        raise InfeasibleError("no positive-energy allocation exists for a zero budget")
    if p.budget <= p.energy_floor:
        raise InfeasibleError(
            f"budget {p.budget} J is below the asymptotic minimum {p.energy_floor} J")

    state = DualState()
    target = tol * p.budget
    lo, hi = LAMBDA_LO, LAMBDA_HI_START
    _, r_lo = _residual(p, lo)
    if r_lo <= 0:
        logger.warning("energy budget does not bind at lambda=%g (residual %g)", lo, r_lo)

    d_hi, r_hi = _residual(p, hi)
    while r_hi > 0:
        lo, r_lo = hi, r_hi
        hi *= 2.0
        if hi > LAMBDA_CAP:
            state.bracket = (lo, hi)
            raise InfeasibleError(f"no multiplier up to {LAMBDA_CAP:g} meets the budget")
        d_hi, r_hi = _residual(p, hi)
    state.bracket = (lo, hi)
    logger.debug("lambda bracketed in [%g, %g]", lo, hi)

    lam, d, residual = hi, d_hi, r_hi
    while abs(residual) > target and hi - lo > LAMBDA_WIDTH_TOL * hi:
        if state.iterations >= LAMBDA_MAX_ITER:
            raise SolverStallError("lambda bisection did not converge",
                                   {'bracket': (lo, hi), 'residual': residual})
        state.iterations += 1
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        d_mid, r_mid = _residual(p, mid)
        state.history.append(r_mid)
        if r_mid > 0:
            lo = mid
        else:
            hi, d_hi, r_hi = mid, d_mid, r_mid
        lam, d, residual = mid, d_mid, r_mid
        if residual > target and hi - lo <= LAMBDA_WIDTH_TOL * hi:
            # bracket collapsed on the over-budget side; hi is within budget
            lam, d, residual = hi, d_hi, r_hi

    state.lam, state.bracket, state.residual = lam, (lo, hi), residual
    logger.debug("dual search done: lambda=%g residual=%g after %d steps", lam, residual, state.iterations)
    e = energy_for_time(d, p.gammas, p.s_bar)
    return PhaseSolution(d=d, e=np.atleast_1d(e), lam_opt=lam, branch=Branch.DUAL, dual=state)


def solve_phase(p, tol=ENERGY_TOL):
    """closed form when budget >= E_min (ties included), dual search otherwise."""
    e_min = p.min_energy
    if math.isfinite(e_min) and p.budget >= e_min:
        return solve_min_time(p)
    return solve_phase_dual(p, tol)


def phase_problem(scn, traj, phase):
    """assemble the phase problem of one half of the relay for a given trajectory."""
    return PhaseProblem(thetas=theta_sequence(traj, scn.v_max, phase),
                        gammas=gamma_sequence(scn, traj, phase),
                        s_bar=scn.s_bar,
                        budget=scn.budget(phase))


def solve_p2(scn, traj, tol=ENERGY_TOL):
    """
    optimal allocation for a fixed trajectory.

    the uplink and downlink problems share no variables and are solved one
    after the other.

    raises:
        InfeasibleError: either phase cannot meet its budget (phase attribute set).
    """
    traj.validate(scn)
    parts = {}
    for phase in Phase:
        p = phase_problem(scn, traj, phase)
        try:
            parts[phase] = solve_phase(p, tol)
        except InfeasibleError as e:
            raise InfeasibleError(f"{phase.value}link infeasible: {e}", phase=phase.value) from e
        logger.debug("%s phase solved on the %s branch", phase.value, parts[phase].branch.value)
    up, down = parts[Phase.UP], parts[Phase.DOWN]
    return Allocation(d_up=up.d, d_down=down.d, e_up=up.e, e_down=down.e)
