import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from logbook import Logger

logger = Logger("phasetnn")

THREADS_ENV_VAR = "PHASETNN_NUM_THREADS"

# Offset that keeps signed band indices non-negative inside seed entropy.
_INDEX_OFFSET = 1 << 20


class PhaseTNNError(Exception):
    """Base class for errors raised by phasetnn."""


class ConfigError(PhaseTNNError, ValueError):
    """Invalid configuration or parameter value."""


class InterfaceGeometryError(ConfigError):
    """Interface collocation point does not lie on the interface curve."""


class NumericalError(PhaseTNNError, ArithmeticError):
    """Non-finite data or a failed numerical contract."""


class IllConditionedSolveWarning(RuntimeWarning):
    """Used to warn when a collocation solve leaves a large residual."""


class PicardConvergenceWarning(RuntimeWarning):
    """Used to warn when Picard iteration stops at ``max_iter``."""


class ConjugateSymmetryWarning(RuntimeWarning):
    """Used to warn when paired PPTNN bands lose their conjugate structure."""


def seed_sequence(seed, *key):
    """Build a :class:`numpy.random.SeedSequence` for a named substream.

    ``key`` entries are integers (possibly negative, e.g. band indices) that
    select an independent stream for the same master ``seed``.
    """
    if seed < 0:
        raise ConfigError(f"seed must be non-negative, got {seed}")
    entropy = [int(seed)] + [int(k) + _INDEX_OFFSET for k in key]
    return np.random.SeedSequence(entropy)


def generators(seed, *key, count=1):
    """Return ``count`` Philox generators spawned from one substream.

    Each sampled array gets its own child stream, so adding an array never
    shifts the values of another.
    """
    children = seed_sequence(seed, *key).spawn(count)
    return [np.random.Generator(np.random.Philox(child)) for child in children]


def worker_count(workers=None):
    """Resolve the worker pool size.

    An explicit ``workers`` wins, then ``PHASETNN_NUM_THREADS``, then the CPU
    count.
    """
    if workers is None:
        env = os.environ.get(THREADS_ENV_VAR)
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}")
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise ConfigError(f"worker count must be at least 1, got {workers}")
    return workers


def parallel_map(func, items, workers=None):
    """Map ``func`` over ``items`` and return results in input order.

    Runs inline when a single worker is requested so sequential and parallel
    runs share one code path.
    """
    items = list(items)
    workers = min(worker_count(workers), max(len(items), 1))
    if workers == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))
