import sys

from .config import ConfigError, parse_args
from .experiments import RUNNERS
from .grad import FitDivergedError
from .utils import get_logger, MaskbookError, write2log

logger = get_logger(__name__)


def main(input_args=None):
    """
    Runs one subcommand. Exit status: 0 success; 1 degeneracy flags above max_flags,
    a failed gradient check, a diverged fit or an unexpected failure; 2 bad configuration or input.
    """
    try:
        config = parse_args(input_args)
    except ConfigError as error:
        logger.error(str(error))
        return 2
    runner = None
    try:
        runner = RUNNERS[config.command](config)
        runner.run()
    except FitDivergedError as error:
        return _failed(runner, 'fit diverged: {} ({} iterations traced)'.format(error, len(error.trace)), 1)
    except (MaskbookError, ValueError, OSError) as error:
        return _failed(runner, '{}: {}'.format(config.command, error), 2)
    except Exception as error:
        logger.exception('{} failed'.format(config.command))
        return _failed(runner, '{} failed: {!r}'.format(config.command, error), 1, logged=True)
    return runner.exit_status()


def _failed(runner, message, status, logged=False):
    if not logged:
        logger.error(message)
    if runner is not None:
        write2log(runner.log_file, message + '\n')
    return status


if __name__ == '__main__':
    sys.exit(main())
