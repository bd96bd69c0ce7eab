"""
block coordinate descent over allocation and trajectory.

each outer iteration moves the trajectory with SCA for the current
allocation and then re-solves the allocation on the new trajectory. the
allocation step is exact, so the average PAoI never goes up as long as a
trajectory update is only accepted when it does not hurt.
"""
import logging
from dataclasses import dataclass, field

from .allocation import solve_p2
from .constants import BCD_EPS, ENERGY_TOL, MAX_OUTER, MAX_SCA, SCA_EPS
from .convex_kernel import BarrierSettings
from .errors import InvalidScenarioError, NumericError, SolverStallError, SubproblemInfeasibleError
from .model import Solution, Trajectory, peak_aoi
from .trajectory import solve_p3

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BcdSettings:
    """
    knobs of the outer loop and of the solvers it calls.

    attributes:
        eps (float): stop when the relative PAoI decrease falls below this.
        max_outer (int): outer iteration cap.
        eps_sca (float): SCA stopping threshold.
        max_sca (int): SCA iteration cap.
        energy_tol (float): relative tolerance of the dual energy balance.
        barrier (BarrierSettings): convex kernel parameters.
    """
    eps: float = BCD_EPS
    max_outer: int = MAX_OUTER
    eps_sca: float = SCA_EPS
    max_sca: int = MAX_SCA
    energy_tol: float = ENERGY_TOL
    barrier: BarrierSettings = field(default_factory=BarrierSettings)

    def __post_init__(self):
        if not self.eps > 0 or not self.eps_sca > 0 or not self.energy_tol > 0:
            raise InvalidScenarioError("tolerances must be > 0")
        if self.max_outer < 1 or self.max_sca < 1:
            raise InvalidScenarioError("iteration caps must be >= 1")


def solve_fixed_trajectory(scn, traj, settings=None):
    """
    optimal allocation on a given trajectory, packaged as a Solution.

    raises:
        InfeasibleError: a phase budget cannot carry the packets on traj.
    """
    settings = settings or BcdSettings()
    alloc = solve_p2(scn, traj, settings.energy_tol)
    aoi = peak_aoi(alloc)
    return Solution(traj, alloc, aoi, 0, (aoi,), status='fixed')


def run(scn, traj0=None, settings=None):
    """
    minimize the average peak AoI jointly over allocation and trajectory.

    args:
        scn (Scenario): problem instance.
        traj0 (Trajectory | None): initial path, the straight line q_0 -> q_f by default.
        settings (BcdSettings | None): loop and solver parameters.

    returns:
        Solution: best iterate with its PAoI trace. status is 'converged',
        'max_outer' or 'stalled' (then degraded is True).

    raises:
        InfeasibleError: no allocation exists even on traj0.
    """
    settings = settings or BcdSettings()
    traj = traj0 if traj0 is not None else Trajectory.straight(scn.uav_start, scn.uav_end, scn.n_packets)
    traj.validate(scn)

    alloc = solve_p2(scn, traj, settings.energy_tol)
    aoi = peak_aoi(alloc)
    trace = [aoi]
    iterations = 0
    status = 'max_outer'
    degraded = False
    logger.info("BCD start: average PAoI %.6f s", aoi)

    for n in range(1, settings.max_outer + 1):
        try:
            traj_next = solve_p3(traj, alloc, scn, settings.eps_sca, settings.max_sca, settings.barrier)
            alloc_next = solve_p2(scn, traj_next, settings.energy_tol)
        except (SolverStallError, SubproblemInfeasibleError, NumericError) as e:
            logger.warning("BCD iteration %d stopped early (%s); returning best iterate", n, e)
            status, degraded = 'stalled', True
            break
        aoi_next = peak_aoi(alloc_next)
        if aoi_next > aoi:
            logger.info("BCD iteration %d would raise PAoI to %.6f s; keeping previous iterate", n, aoi_next)
            status = 'converged'
            break
        improvement = (aoi - aoi_next) / aoi
        traj, alloc, aoi = traj_next, alloc_next, aoi_next
        trace.append(aoi)
        iterations = n
        logger.info("BCD iteration %d: average PAoI %.6f s (relative decrease %.3g)", n, aoi, improvement)
        if improvement < settings.eps:
            status = 'converged'
            break

    return Solution(traj, alloc, aoi, iterations, tuple(trace), status=status, degraded=degraded)
