"""Shared builders and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np

from tempus.calculus import MatrixSignal


def sequence_signal(mats: np.ndarray, envelope: np.ndarray | None = None, name: str = "seq") -> MatrixSignal:
    """Signal on the integers with ``A(n) = mats[n]`` (last entry repeated beyond the table)."""
    mats = np.asarray(mats, dtype=float)
    last = len(mats) - 1

    def idx(t):
        return np.clip(np.floor(np.asarray(t, dtype=float) + 1e-9).astype(int), 0, last)

    env = None if envelope is None else (lambda t: np.asarray(envelope)[idx(t)])
    return MatrixSignal(mats.shape[1], lambda t: mats[idx(t)], env, vectorized=True, name=name)


def unit_frobenius(rng: np.random.Generator, n: int) -> np.ndarray:
    m = rng.standard_normal((n, n))
    return m / np.linalg.norm(m)


def product_oracle(mats: np.ndarray, mu: float = 1.0) -> np.ndarray:
    """``prod_k (I + mu A_k)`` accumulated left-to-right in a plain loop."""
    x = np.eye(mats.shape[1])
    for a in mats:
        x = (np.eye(len(a)) + mu * a) @ x
    return x


def summable_system(rng: np.random.Generator, horizon: int, c_max: float = 0.9):
    """``A(n)`` with ``|A(n)|_F <= C (n + 1)^-2``; returns ``(signal, C, dim)``."""
    n = int(rng.integers(1, 4))
    c = float(rng.uniform(0.05, c_max))
    k = np.arange(horizon + 1, dtype=float)
    scale = c * (k + 1.0) ** -2 * rng.uniform(0.0, 1.0, horizon + 1)
    raw = rng.standard_normal((horizon + 1, n, n))
    mats = raw / np.linalg.norm(raw, axis=(1, 2), keepdims=True) * scale[:, None, None]
    return sequence_signal(mats, c * (k + 1.0) ** -2, name=f"summable(C={c:.3g})"), c, n
