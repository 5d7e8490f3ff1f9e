"""Curated coefficient systems used by the scenario runner."""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Any

import numpy as np

from .calculus import MatrixSignal
from .oscillator import G_FUNCTIONS, OscillatorSpec, oscillator_reduce
from .solver import NonlinearField


def _matrix(params: dict[str, Any], key: str = "M", default: Any = ((1.0,),)) -> np.ndarray:
    m = np.atleast_2d(np.asarray(params.get(key, default), dtype=float))
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"'{key}' must be a square matrix")
    return m


def _parity(t: np.ndarray) -> np.ndarray:
    return np.where(np.floor(t) % 2 == 0, 1.0, -1.0)


def zero(dim: int = 2) -> MatrixSignal:
    return MatrixSignal(dim, lambda t: np.zeros((np.size(t), dim, dim)), lambda t: np.zeros(np.shape(t)), vectorized=True, name="zero")


def decay(m: np.ndarray, p: float, shift: float = 1.0) -> MatrixSignal:
    """``A(t) = (t + shift)^(-p) M``."""
    nrm = float(np.linalg.norm(m))

    def fn(t):
        t = np.asarray(t, dtype=float)
        return (t + shift)[:, None, None] ** -p * m

    return MatrixSignal(m.shape[0], fn, lambda t: nrm * (np.asarray(t, dtype=float) + shift) ** -p, vectorized=True, name=f"decay(p={p})")


def alternating_harmonic(m: np.ndarray) -> MatrixSignal:
    """``A(t) = (-1)^floor(t) / (t + 1) M``."""

    def fn(t):
        t = np.asarray(t, dtype=float)
        return (_parity(t) / (t + 1.0))[:, None, None] * m

    return MatrixSignal(m.shape[0], fn, vectorized=True, name="alternating-harmonic")


def exponential_decay(m: np.ndarray, rate: float) -> MatrixSignal:
    nrm = float(np.linalg.norm(m))
    return MatrixSignal(
        m.shape[0],
        lambda t: np.exp(-rate * np.asarray(t, dtype=float))[:, None, None] * m,
        lambda t: nrm * np.exp(-rate * np.asarray(t, dtype=float)),
        vectorized=True,
        name=f"exp-decay({rate})",
    )


def table(path: str | Path, dim: int | None = None) -> MatrixSignal:
    """Piecewise-constant signal from a CSV with columns ``t, a_00, a_01, ...``.

    The value at ``t`` is the row with the largest tabulated time ``<= t``.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    data = np.array([[float(v) for v in r] for r in rows])
    if data.ndim != 2 or len(data) == 0:
        raise ValueError(f"table {path} is empty")
    n = dim or int(round(math.sqrt(data.shape[1] - 1)))
    if n * n != data.shape[1] - 1:
        raise ValueError(f"table {path} has {data.shape[1] - 1} entries per row, not a square matrix")
    times = data[:, 0]
    if np.any(np.diff(times) <= 0):
        raise ValueError(f"table {path} times must increase")
    mats = data[:, 1:].reshape(-1, n, n)

    def fn(t):
        idx = np.searchsorted(times, np.asarray(t, dtype=float), side="right") - 1
        return mats[np.clip(idx, 0, None)]

    return MatrixSignal(n, fn, vectorized=True, name=f"table({Path(path).name})")


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def sine_field(dim: int, p: float, delta: float, jit: bool = True) -> NonlinearField:
    """``f(t, x) = (t + 1)^(-p) sin(x)`` componentwise, ``K(t) = (t + 1)^(-p)``."""
    k = MatrixSignal.scalar(lambda t: (np.asarray(t, dtype=float) + 1.0) ** -p, vectorized=True, name="K")
    kernel = None
    if jit:
        import numba

        @numba.njit
        def kernel(t, x, out):
            c = (t + 1.0) ** -p
            for j in range(len(x)):
                out[j] = c * math.sin(x[j])

    return NonlinearField(dim, lambda t, x: (t + 1.0) ** -p * np.sin(x), k, delta, kernel)


LINEAR = ("zero", "constant", "decay", "diagonal-decay", "alternating-harmonic", "exp-decay", "oscillator")
NONLINEAR = ("sine",)
BUILTINS = LINEAR + NONLINEAR


def build(system: dict[str, Any], base: Path | None = None) -> MatrixSignal | NonlinearField:
    """Instantiate a system record ``{"builtin": name, "params": {...}}`` or ``{"table": path}``."""
    if "table" in system:
        path = Path(system["table"])
        if base is not None and not path.is_absolute():
            path = base / path
        return table(path, system.get("dim"))
    name = system.get("builtin")
    p = system.get("params", {}) or {}
    if name == "zero":
        return zero(int(p.get("dim", 2)))
    if name == "constant":
        return MatrixSignal.constant(_matrix(p), name="constant")
    if name == "decay":
        return decay(_matrix(p), float(p.get("p", 2.0)))
    if name == "diagonal-decay":
        return decay(np.diag(np.asarray(p.get("diag", [1.0]), dtype=float)), float(p.get("p", 2.0)))
    if name == "alternating-harmonic":
        return alternating_harmonic(_matrix(p))
    if name == "exp-decay":
        return exponential_decay(_matrix(p), float(p.get("rate", math.log(2.0))))
    if name == "oscillator":
        return oscillator_reduce(oscillator_spec(p))
    if name == "sine":
        return sine_field(int(p.get("dim", 1)), float(p.get("p", 2.0)), float(p.get("delta", 1.0)))
    raise ValueError(f"unknown builtin system {name!r}")


def oscillator_spec(p: dict[str, Any]) -> OscillatorSpec:
    g = p.get("g", "inverse-square")
    if g not in G_FUNCTIONS:
        raise ValueError(f"unknown g function {g!r}; choose from {sorted(G_FUNCTIONS)}")
    return OscillatorSpec(float(p.get("alpha", math.pi / 2)), G_FUNCTIONS[g], g)
