import logging
import os

LOG_ENV = 'MASKBOOK_LOG'
LOG_LEVELS = {
    'error': logging.ERROR,
    'warn': logging.WARNING,
    'warning': logging.WARNING,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}


def log_level():
    name = os.environ.get(LOG_ENV, 'info').strip().lower()
    return LOG_LEVELS.get(name, logging.INFO)


def get_logger(name='maskbook'):
    root = logging.getLogger('maskbook')
    if not root.handlers:
        formatter = logging.Formatter(
            fmt='%(asctime)s [%(levelname)s]: %(message)s', datefmt='%Y-%m-%d %H:%M:%S')
        handler = logging.StreamHandler()
        handler.setFormatter(formatter)
        root.addHandler(handler)
        root.propagate = False
    root.setLevel(log_level())
    return logging.getLogger(name)
