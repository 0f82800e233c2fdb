# PLATECELL
# This module is a helper module that provides multiple generic functions that can be used all over PLATECELL.
# None of these functions are specific to plates.

import os
from concurrent.futures import ThreadPoolExecutor

import psutil

import lib.logging_helper as logging_helper

THREADS_ENV_VAR = "PLATECELL_THREADS"  # Caps the number of worker threads
FLOAT_FORMAT = "%.17g"  # Lossless double round trip in text outputs

mlog = logging_helper.Log("lib.generic_helper")


def dict_set(dictionary, keys, value):
    """Sets a value in a nested dictionary, creating intermediate dictionaries as needed."""
    parts = keys.split(".")
    current = dictionary
    for key in parts[:-1]:
        if not isinstance(current.get(key), dict):
            current[key] = {}
        current = current[key]
    current[parts[-1]] = value


def del_none_from_dict(d):
    """Delete keys with the value ``None`` in a dictionary, recursively.

    This alters the input so you may wish to ``copy`` the dict first.

    Args:
        d (dict): The dictionary to remove the keys from

    Returns:
        dict: The cleaned dictionary
    """
    if not isinstance(d, dict):
        return d
    for key, value in list(d.items()):
        if value is None:
            del d[key]
        elif isinstance(value, dict):
            del_none_from_dict(value)
        elif isinstance(value, list):
            for item in value:
                if isinstance(item, dict):
                    del_none_from_dict(item)
    return d


def worker_count():
    """Returns the number of worker threads to use.

    The environment variable PLATECELL_THREADS caps the count; otherwise the number of physical cores is used.

    Returns:
        int: Number of workers (at least 1)
    """
    cores = psutil.cpu_count(logical=False) or psutil.cpu_count() or 1
    value = os.environ.get(THREADS_ENV_VAR)
    if value is None or value == "":
        return max(1, cores)
    try:
        count = int(value)
    except ValueError:
        mlog.warning(f"{THREADS_ENV_VAR}='{value}' is not an integer. Using {cores} worker(s).")
        return max(1, cores)
    if count < 1:
        mlog.warning(f"{THREADS_ENV_VAR}={count} is below 1. Using a single worker.")
        return 1
    return count


def parallel_map(function, items, workers=None):
    """Maps function over items with a thread pool, keeping the input order.

    Args:
        function (callable): The function to apply
        items (list): The inputs
        workers (int): Thread count (default: worker_count())

    Returns:
        list: The results in input order
    """
    items = list(items)
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(function, items))


def parse_pair(text, separator="x"):
    """Parses 'K1xK2' style values into a tuple of ints.

    Args:
        text (str): The text, e.g. '2x1' or '16x44x96'
        separator (str): The separator character

    Returns:
        tuple: The parsed integers

    Raises:
        ValueError: If a part is not an integer
    """
    parts = str(text).lower().split(separator)
    try:
        return tuple(int(part) for part in parts)
    except ValueError:
        raise ValueError(f"'{text}' is not of the form N{separator}M")
