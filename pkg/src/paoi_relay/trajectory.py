"""
trajectory update for fixed allocations by successive convex approximation.

with service times and energies fixed, the joint problem only asks for a
feasible trajectory; we pick the one maximizing the smallest throughput R_bar
over all 2N phases. each throughput is convex in |q - L|^2, so its first-order
expansion in that quantity is a global lower bound that is tight at the
expansion point and concave quadratic in q. maximizing R_bar against those
bounds is a convex QCQP, solved by the barrier kernel and repeated from the
new point until R_bar stops improving.

the QCQP is written in displacements delta = q - q^n so tight mobility
constraints evaluate to ~0 instead of to a difference of large squares.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import convex_kernel
from .constants import MAX_SCA, SCA_EPS, SCA_MONOTONE_SLACK
from .convex_kernel import BarrierSettings, Qcqp, QuadConstraint
from .errors import DomainError, NumericError, SolverStallError, SubproblemInfeasibleError
from .model import Phase, Trajectory, check_feasible, throughput_table

logger = logging.getLogger(__name__)

LOG2E = 1.0 / math.log(2.0)

# mobility radii this close below the segment length count as tight
_TIGHT_REL = 1e-9


@dataclass(frozen=True)
class TaylorBound:
    """
    concave quadratic lower bound on one phase's throughput.

    R_lb(q) = c1 - c2 * (|q - L|^2 - |q_ref - L|^2), with c3 = h^2 + |q_ref - L|^2.
    """
    c1: float
    c2: float
    c3: float
    q_ref: tuple
    ground: tuple

    def value(self, q):
        q = np.asarray(q, dtype=float)
        ground = np.asarray(self.ground)
        ref = np.sum((np.asarray(self.q_ref) - ground) ** 2)
        return self.c1 - self.c2 * (np.sum((q - ground) ** 2, axis=-1) - ref)


def taylor_bound(q_ref, L, d, E, scn):
    """
    first-order expansion of d*log2(1 + nu0 E / (Gamma sigma^2 (h^2 + |q-L|^2) d))
    in |q - L|^2 around q_ref.

    args:
        q_ref (array-like): expansion point q^n.
        L (array-like): ground node of the phase.
        d (float): service time, > 0.
        E (float): energy, >= 0.
        scn (Scenario): supplies h, nu0, Gamma and sigma^2.
    """
    if not d > 0:
        raise DomainError(f"taylor_bound needs d > 0, got {d}")
    q_ref = np.asarray(q_ref, dtype=float)
    L = np.asarray(L, dtype=float)
    c3 = scn.altitude_m ** 2 + float(np.sum((q_ref - L) ** 2))
    nu0, noise = scn.gain_ref, scn.noise_floor
    c1 = d * math.log1p(nu0 * E / (noise * c3 * d)) * LOG2E
    c2 = nu0 * LOG2E * d * E / (c3 * (noise * c3 * d + nu0 * E))
    return TaylorBound(c1, c2, c3, tuple(q_ref), tuple(L))


@dataclass
class ScaState:
    """
    progress of the SCA loop.

    attributes:
        current (Trajectory): expansion point Q^n.
        r_bar (float): true smallest throughput at Q^n in bits/Hz.
        iteration (int): SCA steps taken.
        r_bar_trace (list): r_bar after every step, starting at Q^0.
    """
    current: Trajectory
    r_bar: float
    iteration: int = 0
    r_bar_trace: list = field(default_factory=list)


def min_throughput(scn, traj, alloc):
    return float(throughput_table(scn, traj, alloc).min())


def _block(k):
    """columns of waypoint k (flight order) in z = (R_bar, delta_1, ..., delta_2N)."""
    return slice(1 + 2 * k, 3 + 2 * k)


def build_subproblem(state, alloc, scn):
    """
    the convex QCQP of one SCA step.

    variables are z = (R_bar, delta_{1,1}, delta_{1,2}, ..., delta_{N,2}) with
    delta = q - q^n; the first and last displacements are fixed to 0, which
    pins q_{1,1} = q_0 and q_{N,2} = q_f and leaves 4N - 3 free components.

    constraints:
        R_bar - R_lb_{i,j}(q_{i,j}) <= 0 for all 2N phases;
        |q_{i,2} - q_{i,1}|^2 <= (d_{i,1} V_max)^2 for every packet;
        |q_{i+1,1} - q_{i,2}|^2 <= (d_{i,2} V_max)^2 for i < N.
    """
    points = state.current.flat
    n_way = len(points)
    n = 1 + 2 * n_way
    c = np.zeros(n)
    c[0] = 1.0
    constraints = []

    for k, q_ref in enumerate(points):
        i, j = divmod(k, 2)
        phase = Phase.UP if j == 0 else Phase.DOWN
        L = np.asarray(scn.ground(phase))
        bound = taylor_bound(q_ref, L, alloc.times(phase)[i], alloc.energies(phase)[i], scn)
        # R_bar - c1 + c2 (|delta|^2 + 2 delta^T (q_ref - L)) <= 0
        A = np.zeros((n, n))
        A[_block(k), _block(k)] = bound.c2 * np.eye(2)
        b = np.zeros(n)
        b[0] = 1.0
        b[_block(k)] = 2.0 * bound.c2 * (q_ref - L)
        constraints.append(QuadConstraint(A, b, -bound.c1))

    radii = np.empty(n_way - 1)
    radii[0::2] = alloc.d_up * scn.v_max
    radii[1::2] = alloc.d_down[:-1] * scn.v_max
    for k, r in enumerate(radii):
        # |delta_{k+1} - delta_k + gap|^2 - r^2 <= 0
        gap = points[k + 1] - points[k]
        length = float(np.linalg.norm(gap))
        if length * (1 - _TIGHT_REL) <= r < length:
            # d = theta exactly up to the round trip through V_max
            r = length
        A = np.zeros((n, n))
        a, b_ = _block(k), _block(k + 1)
        A[a, a] = A[b_, b_] = np.eye(2)
        A[a, b_] = A[b_, a] = -np.eye(2)
        b = np.zeros(n)
        b[a] = -2.0 * gap
        b[b_] = 2.0 * gap
        constraints.append(QuadConstraint(A, b, (length - r) * (length + r)))

    fixed = {idx: 0.0 for k in (0, n_way - 1) for idx in range(_block(k).start, _block(k).stop)}
    return Qcqp.from_constraints(c, constraints, fixed)


def start_hint(state, n_vars):
    """z0 = (min R - delta, 0, ..., 0) with delta = max(1e-6, 1e-3 min R)."""
    z = np.zeros(n_vars)
    z[0] = state.r_bar - max(1e-6, 1e-3 * abs(state.r_bar))
    return z


def _step(state, alloc, scn, settings):
    q = build_subproblem(state, alloc, scn)
    try:
        start = convex_kernel.strictly_feasible_start(q, start_hint(state, q.n), pullback_index=0,
                                                      settings=settings)
    except SubproblemInfeasibleError as e:
        report = check_feasible(scn, state.current, alloc)
        worst = report.worst
        raise SubproblemInfeasibleError(
            f"SCA subproblem at iteration {state.iteration} has no feasible point; "
            f"worst constraint at the expansion point: {worst.name}[{worst.index}] "
            f"violated by {worst.violation:.3g}", report=report) from e
    try:
        result = convex_kernel.solve(start.problem, settings, start.z)
    except (SolverStallError, NumericError):
        if not start.relaxed:
            raise
        # no interior: the mobility chain is stretched straight, nothing can move
        logger.info("trajectory pinned by tight mobility constraints; keeping Q^n")
        return state.current
    points = state.current.flat + result.z[1:].reshape(-1, 2)
    points[0] = scn.uav_start
    points[-1] = scn.uav_end
    return Trajectory.from_flat(points)


def run_sca(traj0, alloc, scn, eps_sca=SCA_EPS, max_sca=MAX_SCA, settings=None):
    """
    iterate SCA steps until the fractional gain of R_bar drops below eps_sca.

    args:
        traj0 (Trajectory): start, feasible for the mobility constraints of alloc.
        alloc (Allocation): fixed service times and energies.
        scn (Scenario): problem instance.
        eps_sca (float): fractional-increase threshold.
        max_sca (int): iteration cap.
        settings (BarrierSettings | None): kernel parameters.

    returns:
        ScaState: final trajectory and the R_bar trace.
    """
    settings = settings or BarrierSettings()
    traj0.validate(scn)
    r0 = min_throughput(scn, traj0, alloc)
    state = ScaState(current=traj0, r_bar=r0, r_bar_trace=[r0])
    while state.iteration < max_sca:
        candidate = _step(state, alloc, scn, settings)
        r_new = min_throughput(scn, candidate, alloc)
        state.iteration += 1
        if r_new < state.r_bar - SCA_MONOTONE_SLACK * max(1.0, abs(state.r_bar)):
            logger.warning("SCA step lowered min throughput %.12g -> %.12g; keeping Q^n",
                           state.r_bar, r_new)
            break
        gain = (r_new - state.r_bar) / max(abs(state.r_bar), np.finfo(float).tiny)
        state.current, state.r_bar = candidate, r_new
        state.r_bar_trace.append(r_new)
        logger.debug("SCA iteration %d: R_bar=%.10g (gain %.3g)", state.iteration, r_new, gain)
        if gain < eps_sca:
            break
    return state


def solve_p3(traj0, alloc, scn, eps_sca=SCA_EPS, max_sca=MAX_SCA, settings=None):
    """trajectory that (locally) maximizes the smallest throughput for a fixed allocation."""
    return run_sca(traj0, alloc, scn, eps_sca, max_sca, settings).current
