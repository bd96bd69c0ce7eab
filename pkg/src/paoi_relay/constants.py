# Reference scenario: source/UAV/destination geometry and radio parameters
N_PACKETS = 10
PACKET_SIZE_BITS = 1e6
BANDWIDTH_HZ = 1e6
SOURCE_POS = (-800.0, 800.0)
DEST_POS = (800.0, 800.0)
UAV_START = (-800.0, 0.0)
UAV_END = (800.0, 0.0)
ALTITUDE_M = 100.0
V_MAX = 50.0
E_SOURCE_J = 1.25
E_UAV_J = 1.25
GAIN_REF_DB = -47.0
SNR_GAP_DB = 10.0
NOISE_DBM = -100.0

# Feasibility and allocation tolerances (relative)
FEASIBILITY_TOL = 1e-7
ENERGY_TOL = 1e-8
ROOT_TOL = 1e-12
ROOT_MAX_ITER = 200
LAMBDA_LO = 1e-12
LAMBDA_HI_START = 1.0
LAMBDA_CAP = 2.0 ** 100
LAMBDA_WIDTH_TOL = 1e-12
LAMBDA_MAX_ITER = 500

# Barrier method defaults
BARRIER_T0 = 1.0
BARRIER_MU = 10.0
BARRIER_EPS = 1e-8
BARRIER_ALPHA = 0.25
BARRIER_BETA = 0.5
NEWTON_TOL = 1e-10
MAX_NEWTON = 100
SLACK_REL = 1e-9

# SCA and BCD loops
SCA_EPS = 1e-4
MAX_SCA = 50
SCA_MONOTONE_SLACK = 1e-9
BCD_EPS = 1e-3
MAX_OUTER = 30
TRACE_SLACK = 1e-9

# Output
SWEEP_HEADER = ('param', 'value', 'paoi_optimized_s', 'paoi_straight_s',
                'outer_iters', 'wall_time_s', 'status')
TRAJECTORY_HEADER = ('i', 'phase', 'x_m', 'y_m', 'd_s', 'E_j')
AOI_CURVE_HEADER = ('t_s', 'aoi_s')
WORKERS_ENV = 'PAOI_WORKERS'
