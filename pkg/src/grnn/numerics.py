"""Dense float64 linear algebra, activations, and seeded RNG.

Everything downstream (cells, networks, optimizers, TPE) works on plain
``numpy.float64`` arrays: matrices are 2-D row-major, vectors are 1-D.
All randomness flows through :class:`Rng`, a Philox-backed counter-based
generator, so that any run is replayable from a single 64-bit seed.
"""

from __future__ import annotations

import numpy as np

FLOAT = np.float64


class ShapeError(ValueError):
    """Operand shapes violate an operation's precondition."""


def as_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=FLOAT)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def as_vector(a) -> np.ndarray:
    a = np.asarray(a, dtype=FLOAT)
    if a.ndim != 1:
        raise ShapeError(f"expected a 1-D vector, got ndim={a.ndim}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dims differ, {a.shape} x {b.shape}")
    return a @ b


def sigmoid(x):
    """Logistic function, stable for any finite input.

    Branches on the sign of x so exp() never sees a large positive
    argument (overflow starts near x = -710 otherwise).
    """
    x = np.asarray(x, dtype=FLOAT)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + z), z / (1.0 + z))


def tanh(x):
    return np.tanh(np.asarray(x, dtype=FLOAT))


def relu(x):
    return np.maximum(np.asarray(x, dtype=FLOAT), 0.0)


def sigmoid_grad(y):
    """d sigmoid/dx expressed in terms of the output y = sigmoid(x)."""
    return y * (1.0 - y)


def tanh_grad(y):
    """d tanh/dx in terms of the output y = tanh(x)."""
    return 1.0 - y * y


def relu_grad(x):
    """d relu/dx in terms of the *input* x (subgradient 0 at x=0)."""
    return (np.asarray(x) > 0.0).astype(FLOAT)


class Rng:
    """Deterministic Philox (counter-based) random generator.

    Identical seeds give identical draw sequences on every platform.
    ``child(i)`` derives an independent stream, so concurrent consumers
    (e.g. per-trial samplers) never share state.
    """

    def __init__(self, seed: int, _spawn_key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._spawn_key = _spawn_key
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=_spawn_key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    def child(self, index: int) -> "Rng":
        """Independent stream number `index` derived from this seed."""
        return Rng(self.seed, self._spawn_key + (int(index),))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._gen.uniform(low, high, size=size)

    def standard_normal(self, size=None):
        return self._gen.standard_normal(size=size)

    def integers(self, low, high_inclusive, size=None):
        return self._gen.integers(low, high_inclusive, size=size, endpoint=True)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def glorot_uniform(rng: Rng, fan_in: int, fan_out: int) -> np.ndarray:
    """(fan_out, fan_in) matrix, i.i.d. uniform on +/- sqrt(6/(fan_in+fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise ShapeError(f"glorot_uniform: fans must be >= 1, got {fan_in}, {fan_out}")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))
