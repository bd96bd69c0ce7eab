"""
domain types and closed-form quantities of the relay link.

everything in here is a pure function over immutable inputs: age of
information, peak age, LoS channel gains, Shannon throughput, mobility-imposed
minimum service times and the feasibility report for the full problem.
units are strict SI throughout (seconds, joules, watts, meters, linear ratios).
"""
import dataclasses
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import FEASIBILITY_TOL, TRACE_SLACK
from .errors import DomainError, InvalidScenarioError

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


class Phase(str, enum.Enum):
    """uplink (source -> UAV) or downlink (UAV -> destination) half of a service."""
    UP = 'up'
    DOWN = 'down'


def _point(value, name):
    try:
        x, y = (float(v) for v in value)
    except (TypeError, ValueError) as e:
        raise InvalidScenarioError(f"{name} must be a planar point (x, y), got {value!r}") from e
    return (x, y)


@dataclass(frozen=True)
class Scenario:
    """
    a full problem instance: geometry, radio parameters, energy budgets and packets.

    attributes:
        n_packets (int): number of update packets N, at least 2.
        packet_size_bits (float): packet size S in bits.
        bandwidth_hz (float): channel bandwidth B.
        source_pos, dest_pos (tuple): ground positions L_S and L_D in meters.
        uav_start, uav_end (tuple): launch and landing points q_0 and q_f.
        altitude_m (float): fixed flight height h.
        v_max (float): maximum UAV speed in m/s.
        e_source_j, e_uav_j (float): energy budgets E_S and E_U.
        gain_ref (float): channel power gain at 1 m (linear).
        snr_gap (float): SNR gap of the modulation/coding scheme (linear, >= 1).
        noise_w (float): noise power in watts.
    """
    n_packets: int
    packet_size_bits: float
    bandwidth_hz: float
    source_pos: tuple
    dest_pos: tuple
    uav_start: tuple
    uav_end: tuple
    altitude_m: float
    v_max: float
    e_source_j: float
    e_uav_j: float
    gain_ref: float
    snr_gap: float
    noise_w: float

    def __post_init__(self):
        for name in ('source_pos', 'dest_pos', 'uav_start', 'uav_end'):
            object.__setattr__(self, name, _point(getattr(self, name), name))
        if int(self.n_packets) != self.n_packets or self.n_packets < 2:
            raise InvalidScenarioError(f"n_packets must be an integer >= 2, got {self.n_packets}")
        object.__setattr__(self, 'n_packets', int(self.n_packets))
        positive = ('packet_size_bits', 'bandwidth_hz', 'altitude_m', 'v_max', 'gain_ref', 'noise_w')
        for name in positive:
            if not getattr(self, name) > 0:
                raise InvalidScenarioError(f"{name} must be > 0, got {getattr(self, name)}")
        for name in ('e_source_j', 'e_uav_j'):
            if not getattr(self, name) >= 0:
                raise InvalidScenarioError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not self.snr_gap >= 1:
            raise InvalidScenarioError(f"snr_gap must be >= 1, got {self.snr_gap}")

    @property
    def s_bar(self):
        """normalized packet size S/B in bits/Hz."""
        return self.packet_size_bits / self.bandwidth_hz

    @property
    def noise_floor(self):
        """Gamma * sigma^2, the denominator that turns a gain into gamma."""
        return self.snr_gap * self.noise_w

    def ground(self, phase):
        return self.source_pos if Phase(phase) is Phase.UP else self.dest_pos

    def budget(self, phase):
        return self.e_source_j if Phase(phase) is Phase.UP else self.e_uav_j

    def replace(self, **changes):
        """return a re-validated copy with the given fields changed."""
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    the UAV path as N pairs of hovering points (q_{i,1}, q_{i,2}).

    attributes:
        waypoints (np.ndarray): shape (N, 2, 2) indexed [packet, phase, xy].
    """
    waypoints: np.ndarray

    def __post_init__(self):
        wp = np.array(self.waypoints, dtype=float)
        if wp.ndim != 3 or wp.shape[1:] != (2, 2) or wp.shape[0] < 1:
            raise InvalidScenarioError(f"waypoints must have shape (N, 2, 2), got {wp.shape}")
        if not np.all(np.isfinite(wp)):
            raise InvalidScenarioError("waypoints must be finite")
        wp.setflags(write=False)
        object.__setattr__(self, 'waypoints', wp)

    @classmethod
    def from_flat(cls, points):
        """build from the 2N points q_{1,1}, q_{1,2}, ..., q_{N,2} in flight order."""
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] % 2:
            raise InvalidScenarioError(f"flat trajectory must have shape (2N, 2), got {pts.shape}")
        return cls(pts.reshape(-1, 2, 2))

    @classmethod
    def straight(cls, start, end, n_packets):
        """
        evenly spaced waypoints along the segment start -> end.

        q_{i,1} sits at fraction (2i-2)/(2N-1) and q_{i,2} at (2i-1)/(2N-1),
        so consecutive waypoints are |end - start|/(2N-1) apart and both
        endpoints are hit exactly.
        """
        start = np.asarray(start, dtype=float)
        end = np.asarray(end, dtype=float)
        k = 2 * n_packets
        frac = np.arange(k) / (k - 1)
        pts = start + frac[:, None] * (end - start)
        pts[0] = start
        pts[-1] = end
        return cls.from_flat(pts)

    @property
    def n_packets(self):
        return self.waypoints.shape[0]

    @property
    def flat(self):
        return self.waypoints.reshape(-1, 2)

    @property
    def uplink(self):
        return self.waypoints[:, 0, :]

    @property
    def downlink(self):
        return self.waypoints[:, 1, :]

    def points(self, phase):
        return self.uplink if Phase(phase) is Phase.UP else self.downlink

    def validate(self, scn):
        """raise InvalidScenarioError unless length and endpoints match the scenario."""
        if self.n_packets != scn.n_packets:
            raise InvalidScenarioError(
                f"trajectory has {self.n_packets} packets, scenario has {scn.n_packets}")
        if not np.array_equal(self.flat[0], scn.uav_start) or not np.array_equal(self.flat[-1], scn.uav_end):
            raise InvalidScenarioError("trajectory endpoints must equal uav_start and uav_end exactly")
        return self


@dataclass(frozen=True, eq=False)
class Allocation:
    """
    per-packet service times and energies for both phases.

    attributes:
        d_up, d_down (np.ndarray): service times d_{i,1}, d_{i,2} in seconds, > 0.
        e_up, e_down (np.ndarray): energies E_{i,1}, E_{i,2} in joules, >= 0.
    """
    d_up: np.ndarray
    d_down: np.ndarray
    e_up: np.ndarray
    e_down: np.ndarray

    def __post_init__(self):
        arrays = {}
        for name in ('d_up', 'd_down', 'e_up', 'e_down'):
            arr = np.array(getattr(self, name), dtype=float).reshape(-1)
            if not np.all(np.isfinite(arr)):
                raise InvalidScenarioError(f"{name} must be finite")
            arr.setflags(write=False)
            arrays[name] = arr
        n = {len(a) for a in arrays.values()}
        if len(n) != 1:
            raise InvalidScenarioError("allocation vectors must share one length")
        if np.any(arrays['d_up'] <= 0) or np.any(arrays['d_down'] <= 0):
            raise InvalidScenarioError("service times must be strictly positive")
        if np.any(arrays['e_up'] < 0) or np.any(arrays['e_down'] < 0):
            raise InvalidScenarioError("energies must be non-negative")
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def n_packets(self):
        return len(self.d_up)

    @property
    def service_times(self):
        """d_i = d_{i,1} + d_{i,2}."""
        return self.d_up + self.d_down

    def times(self, phase):
        return self.d_up if Phase(phase) is Phase.UP else self.d_down

    def energies(self, phase):
        return self.e_up if Phase(phase) is Phase.UP else self.e_down


@dataclass(frozen=True, eq=False)
class Solution:
    """
    output of the block coordinate descent (or of a fixed-trajectory solve).

    attributes:
        trajectory (Trajectory): final waypoints.
        allocation (Allocation): allocation re-solved on that trajectory.
        avg_paoi_s (float): average peak AoI of the allocation.
        iterations (int): accepted trajectory updates.
        objective_trace (tuple): average PAoI after every allocation solve.
        status (str): 'converged', 'max_outer', 'stalled' or 'fixed'.
        degraded (bool): True when an inner solver stalled and the best
                         iterate so far was returned instead.
    """
    trajectory: Trajectory
    allocation: Allocation
    avg_paoi_s: float
    iterations: int
    objective_trace: tuple = field(default_factory=tuple)
    status: str = 'converged'
    degraded: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'objective_trace', tuple(float(a) for a in self.objective_trace))
        expected = peak_aoi(self.allocation)
        if abs(self.avg_paoi_s - expected) > 1e-9 * abs(expected):
            raise InvalidScenarioError(
                f"avg_paoi_s {self.avg_paoi_s} does not match the allocation ({expected})")
        trace = self.objective_trace
        for prev, cur in zip(trace, trace[1:]):
            if cur > prev + TRACE_SLACK * prev:
                raise InvalidScenarioError(f"objective trace increases: {prev} -> {cur}")


def peak_aoi(alloc):
    """
    average peak age of information under the just-in-time policy.

    args:
        alloc (Allocation): service times of the N packets.

    returns:
        float: (1/(N-1)) * sum_{i<N} (d_i + d_{i+1}) in seconds.
    """
    d = alloc.service_times
    n = len(d)
    if n < 2:
        raise InvalidScenarioError(f"average peak AoI needs at least 2 packets, got {n}")
    return float((d[:-1] + d[1:]).sum() / (n - 1))


def aoi_trace(alloc, t):
    """
    instantaneous age a(t) of the sawtooth with a(0) = 0.

    a(t) = t before the first delivery; at t_i = d_1 + ... + d_i it resets to
    d_i and then grows with slope 1 until the next delivery.

    args:
        alloc (Allocation): service times of the N packets.
        t (float): time in seconds, 0 <= t <= t_N.

    returns:
        float: a(t) in seconds.
    """
    d = alloc.service_times
    resets = np.cumsum(d)
    if not 0 <= t <= resets[-1]:
        raise DomainError(f"t={t} outside [0, {resets[-1]}]")
    k = int(np.searchsorted(resets, t, side='right'))
    if k == 0:
        return float(t)
    return float(d[k - 1] + (t - resets[k - 1]))


def aoi_curve(alloc, samples_per_packet=20):
    """
    sample the AoI sawtooth for plotting.

    both sides of every reset instant are included so a line plot shows the
    vertical drops.

    returns:
        tuple[np.ndarray, np.ndarray]: times and a(t) values.
    """
    d = alloc.service_times
    resets = np.concatenate(([0.0], np.cumsum(d)))
    ts, ages = [], []
    for k in range(len(d)):
        lo, hi = resets[k], resets[k + 1]
        base = 0.0 if k == 0 else d[k - 1]
        grid = np.linspace(lo, hi, samples_per_packet + 1)
        ts.extend(grid)
        ages.extend(base + (grid - lo))
        # reset at the end of the interval
        ts.append(hi)
        ages.append(d[k])
    return np.asarray(ts), np.asarray(ages)


def channel_gain(q, ground, h, nu0):
    """
    line-of-sight power gain nu0 / (h^2 + |q - ground|^2).

    args:
        q (array-like): UAV ground projection(s), shape (2,) or (..., 2).
        ground (array-like): ground node position.
        h (float): flight altitude, > 0.
        nu0 (float): gain at the 1 m reference distance.
    """
    if not h > 0:
        raise DomainError(f"altitude must be > 0, got {h}")
    diff = np.asarray(q, dtype=float) - np.asarray(ground, dtype=float)
    gain = nu0 / (h * h + np.sum(diff * diff, axis=-1))
    return float(gain) if np.ndim(gain) == 0 else gain


def throughput(d, E, gamma):
    """
    Shannon throughput d * log2(1 + gamma*E/d) in bits/Hz.

    args:
        d (float | np.ndarray): service time, strictly positive.
        E (float | np.ndarray): transmit energy, >= 0.
        gamma (float | np.ndarray): g / (Gamma sigma^2), in 1/joule.
    """
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise DomainError("throughput is undefined for d <= 0")
    if np.any(np.asarray(E) < 0):
        raise DomainError("energy must be >= 0")
    r = d * np.log1p(np.asarray(gamma) * np.asarray(E) / d) / LN2
    return float(r) if np.ndim(r) == 0 else r


def theta_sequence(traj, v_max, phase):
    """
    mobility-imposed minimum service times.

    up: theta_i = |q_{i,2} - q_{i,1}| / V_max for every packet.
    down: theta'_i = |q_{i+1,1} - q_{i,2}| / V_max, and theta'_N = 0 because
    nothing follows the last downlink.
    """
    if Phase(phase) is Phase.UP:
        dist = np.linalg.norm(traj.downlink - traj.uplink, axis=1)
    else:
        dist = np.zeros(traj.n_packets)
        dist[:-1] = np.linalg.norm(traj.uplink[1:] - traj.downlink[:-1], axis=1)
    return dist / v_max


def gamma_sequence(scn, traj, phase):
    """per-packet gamma_{i,j} = g_{i,j} / (Gamma sigma^2) for one phase."""
    gains = channel_gain(traj.points(phase), scn.ground(phase), scn.altitude_m, scn.gain_ref)
    return np.atleast_1d(gains) / scn.noise_floor


def min_energy(thetas, gammas, s_bar):
    """
    E_min = sum_i theta_i/gamma_i * (2^(S/theta_i) - 1).

    any theta_i = 0 makes the sum diverge; the result is then math.inf.
    """
    thetas = np.asarray(thetas, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    if thetas.shape != gammas.shape:
        raise DomainError("theta and gamma sequences must have the same length")
    if np.any(thetas <= 0):
        return math.inf
    with np.errstate(over='ignore'):
        total = float(np.sum(thetas / gammas * np.expm1(s_bar * LN2 / thetas)))
    return total


def throughput_table(scn, traj, alloc):
    """(N, 2) array of R_{i,j}; column 0 is the uplink, column 1 the downlink."""
    table = np.empty((scn.n_packets, 2))
    for col, phase in enumerate(Phase):
        gammas = gamma_sequence(scn, traj, phase)
        table[:, col] = throughput(alloc.times(phase), alloc.energies(phase), gammas)
    return table


@dataclass(frozen=True)
class ConstraintCheck:
    """
    one row of a feasibility report.

    violation is positive when the constraint is broken (in the constraint's
    own units) and passed already accounts for the tolerance.
    """
    name: str
    index: int
    violation: float
    passed: bool


@dataclass(frozen=True)
class FeasibilityReport:
    checks: tuple

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    @property
    def worst(self):
        """the check with the largest violation."""
        return max(self.checks, key=lambda c: c.violation)

    def failures(self, name=None):
        return [c for c in self.checks if not c.passed and (name is None or c.name == name)]


def check_feasible(scn, traj, alloc, tol=FEASIBILITY_TOL):
    """
    verify every constraint of the joint problem for a candidate solution.

    args:
        scn (Scenario): problem instance.
        traj (Trajectory): candidate waypoints.
        alloc (Allocation): candidate service times and energies.
        tol (float): relative tolerance.

    returns:
        FeasibilityReport: one ConstraintCheck per throughput, energy,
        mobility and endpoint constraint.
    """
    if traj.n_packets != scn.n_packets or alloc.n_packets != scn.n_packets:
        raise InvalidScenarioError("scenario, trajectory and allocation sizes differ")
    checks = []
    s_bar = scn.s_bar
    rates = throughput_table(scn, traj, alloc)
    for col, phase in enumerate(Phase):
        for i, r in enumerate(rates[:, col]):
            checks.append(ConstraintCheck(f'throughput_{phase.value}', i, float(s_bar - r),
                                          bool(r >= s_bar * (1 - tol))))
        budget = scn.budget(phase)
        used = float(alloc.energies(phase).sum())
        checks.append(ConstraintCheck(f'energy_{phase.value}', 0, used - budget,
                                      used <= budget + tol * max(1.0, budget)))

    v = scn.v_max
    up_len = np.linalg.norm(traj.downlink - traj.uplink, axis=1)
    for i, (length, d) in enumerate(zip(up_len, alloc.d_up)):
        checks.append(ConstraintCheck('mobility_up', i, float(length - d * v),
                                      bool(length <= d * v + tol * v)))
    down_len = np.linalg.norm(traj.uplink[1:] - traj.downlink[:-1], axis=1)
    for i, (length, d) in enumerate(zip(down_len, alloc.d_down[:-1])):
        checks.append(ConstraintCheck('mobility_down', i, float(length - d * v),
                                      bool(length <= d * v + tol * v)))

    for name, got, want in (('endpoint_start', traj.flat[0], scn.uav_start),
                            ('endpoint_end', traj.flat[-1], scn.uav_end)):
        gap = float(np.linalg.norm(got - np.asarray(want)))
        checks.append(ConstraintCheck(name, 0, gap, gap <= tol * (1.0 + float(np.linalg.norm(want)))))

    report = FeasibilityReport(tuple(checks))
    if not report.ok:
        logger.debug("infeasible candidate, worst constraint %s", report.worst)
    return report
