import enum
import itertools
import typing

import numpy as np
from numpy import ndarray

from ebsesim.errors import DimensionError


@enum.unique
class Norm(enum.Enum):
    TWO = 'two'
    INF = 'inf'


def as_vector(name: str, value: typing.Any, dim: typing.Optional[int] = None) -> ndarray:
    vector = np.asarray(value, dtype=np.float64)
    if vector.ndim == 0:
        vector = vector.reshape(1)
    if vector.ndim != 1:
        raise DimensionError(name, f'({dim if dim is not None else "n"},)', vector.shape)
    if dim is not None and vector.shape[0] != dim:
        raise DimensionError(name, (dim,), vector.shape)

    return vector


def as_matrix(name: str, value: typing.Any, shape: typing.Optional[typing.Tuple[int, int]] = None) -> ndarray:
    matrix = np.asarray(value, dtype=np.float64)
    if matrix.ndim == 0:
        matrix = matrix.reshape(1, 1)
    if matrix.ndim != 2:
        raise DimensionError(name, shape or '(rows, cols)', matrix.shape)
    if shape is not None and matrix.shape != shape:
        raise DimensionError(name, shape, matrix.shape)

    return matrix


def vector_norm(vector: ndarray, norm: Norm = Norm.TWO) -> float:
    if vector.size == 0:
        return 0.0
    if norm == Norm.INF:
        return float(np.max(np.abs(vector)))

    return float(np.linalg.norm(vector))


def induced_norm(matrix: ndarray) -> float:
    """Induced 2-norm (largest singular value)."""
    if matrix.size == 0:
        return 0.0

    return float(np.linalg.norm(matrix, 2))


def spectral_radius(matrix: ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix))))


def subsets(count: int) -> typing.Iterator[typing.Tuple[int, ...]]:
    """All subsets of range(count), smallest first: (), (0,), (1,), ..., (0, ..., count-1)."""
    for size in range(count + 1):
        yield from itertools.combinations(range(count), size)


def moving_average(values: ndarray, window: int) -> ndarray:
    """Trailing mean over the last ``window`` entries (fewer at the start)."""
    data = np.asarray(values, dtype=np.float64)
    cumulative = np.concatenate(([0.0], np.cumsum(data)))
    ends = np.arange(1, data.shape[0] + 1)
    starts = np.maximum(0, ends - window)

    return (cumulative[ends] - cumulative[starts]) / (ends - starts)


def philox(seed: int, *words: int) -> np.random.Generator:
    """Counter-based generator for ``(seed, words)``; draws never depend on call order."""
    counter = np.zeros(4, dtype=np.uint64)
    for i, word in enumerate(words[:3]):
        counter[3 - i] = np.uint64(word)

    return np.random.Generator(np.random.Philox(key=int(seed), counter=counter))
