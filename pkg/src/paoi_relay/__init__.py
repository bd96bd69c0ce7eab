from .bcd import BcdSettings, run, solve_fixed_trajectory
from .model import Allocation, Phase, Scenario, Solution, Trajectory, check_feasible, peak_aoi

__version__ = '0.2'
