import pathlib
import os

home = os.getenv('CN_DATA_DIR')
if home is None:
    home = str(pathlib.Path.home())
RESULTS_DIR = home + '/cn_results/'

VERSION = '0.3.0'

# Guards
MATERIALIZATION_CAP = 10 ** 8  # digits
RANDOM_ACCESS_CHECK = 10 ** 5
PREFIX_FACTOR_GUARD = 10 ** 5
COUNT_LIMIT = 2 ** 63 - 1

# Denominators with more bits than this are treated as underflowed doubles
UNDERFLOW_BITS = 1000

# Statistics
CHECKPOINT_GROWTH = 1.5
MIN_DENOMINATOR = 10.0
LIMIT_TOLERANCE = 0.05

PLAIN = 'plain'
AP_I = 'apI'
AP_II = 'apII'
MODES = (PLAIN, AP_I, AP_II)
TYPE_I = 'typeI'
TYPE_II = 'typeII'
VARIANTS = (TYPE_I, TYPE_II)

SERIES_COLUMNS = ['n', 'mode', 'm', 'r', 'block', 'count', 'denominator', 'ratio']

# Box solver
NEWTON_TOL = 1e-9
NEWTON_HALVINGS = 30
NEWTON_MAX_ITER = 200
BOX_STARTS = 16
BOX_MARGIN = 1e-12

# Exact search defaults
DEFAULT_MAX_H = 4
DEFAULT_MAX_D = 10

# CLI exit codes
EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_GUARD = 2
EXIT_DESCRIPTOR = 3

PRESETS = ('thm1_7', 'thm1_10', 'thm1_11', 'thm1_13', 'thm1_15')
# digits covered by a desk-scale preset schedule
DESK_DIGITS = 10 ** 6
