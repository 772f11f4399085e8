from .log import get_logger, log_level
from .util import MaskbookError, FlagCounter, init_seeds, to_tensor, check_same_shape, time_cost, \
                    check_file_and_remake, save_yaml, write2log, write_csv
