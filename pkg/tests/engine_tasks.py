"""Module-level task functions so worker processes can unpickle them."""

import os
import time


def square(x):
    return x * x


def boom(msg="boom"):
    raise RuntimeError(msg)


def blob(n):
    return b"\x01" * n


def sleep_then(seconds, value):
    time.sleep(seconds)
    return value


def burn(seconds):
    """Busy-loop on the CPU for ``seconds`` of wall time."""
    end = time.perf_counter() + seconds
    n = 0
    while time.perf_counter() < end:
        n += 1
    return n


def pid(_=None):
    return os.getpid()


def cpu_work(n):
    """A fixed amount of CPU work, independent of scheduling."""
    acc = 0
    for i in range(n):
        acc = (acc + i * i) % 1_000_003
    return acc
