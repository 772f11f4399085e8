import os
import csv
import random
from collections import Counter
from functools import wraps
from time import time

import numpy as np
import torch
import yaml

from .log import get_logger

logger = get_logger(__name__)


class MaskbookError(Exception):
    """Base of the errors raised for invalid configuration, input files or diverging runs."""


class FlagCounter(Counter):
    """Counts numerical degeneracies resolved by convention (guarded bins, clamps, ridges)."""

    def flag(self, name, count=1):
        count = int(count)
        if count > 0:
            self[name] += count
        return count

    def merge(self, other):
        for key, value in other.items():
            self[key] += value
        return self

    def exceeded(self, max_flags):
        return {key: value for key, value in self.items() if value > max_flags}


def init_seeds(seed=0):
    random.seed(seed)
    np.random.seed(seed)
    torch.manual_seed(seed)


def to_tensor(value, dtype=None):
    if isinstance(value, torch.Tensor):
        return value if dtype is None else value.to(dtype)
    value = torch.as_tensor(np.asarray(value))
    if dtype is not None:
        return value.to(dtype)
    if value.is_complex():
        return value.to(torch.complex128)
    if value.is_floating_point() or value.dtype in (torch.int16, torch.int32, torch.int64):
        return value.to(torch.float64)
    return value


def check_same_shape(*tensors, names=None):
    shapes = [tuple(t.shape) for t in tensors if t is not None]
    if len(set(shapes)) > 1:
        label = ', '.join(names) if names else 'inputs'
        raise ValueError('shape mismatch between {}: {}'.format(label, shapes))


def time_cost(name='maskbook'):
    def time_counter(func):
        @wraps(func)
        def wrap_func(*args, **kwargs):
            t1 = time()
            result = func(*args, **kwargs)
            logger.info('{} {!r} executed in {:.4f}s'.format(name, func.__name__, time() - t1))
            return result
        return wrap_func
    return time_counter


def check_file_and_remake(path):
    if path and not os.path.isdir(path):
        os.makedirs(path)


def save_yaml(dict_file, path):
    with open(path, 'w') as file:
        yaml.safe_dump(dict_file, file, sort_keys=False)


def write2log(log_file, message):
    with open(log_file, 'a') as f:
        f.write(message)


def write_csv(path, rows, fieldnames=None):
    rows = list(rows)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    check_file_and_remake(os.path.dirname(path))
    with open(path, 'w', newline='') as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator='\n')
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path
