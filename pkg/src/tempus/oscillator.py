"""Discrete adiabatic oscillator ``x(n+2) - 2cos(α) x(n+1) + (1 + g(n)) x(n) = 0``.

Variation of constants with ``x(n) = C1(n) cos nα + C2(n) sin nα`` and
``x(n+1) = C1(n) cos(n+1)α + C2(n) sin(n+1)α`` turns the recursion into the
first-order system ``Δu(n) = g(n) B(n) u(n)`` for ``u = (C1, C2)``, where

    B(n) = (A0 + A1(n)) / (2 sin α)
    A0    = [[ sin α,  cos α], [-cos α,  sin α]]
    A1(n) = [[ sin(2n+1)α, -cos(2n+1)α], [-cos(2n+1)α, -sin(2n+1)α]]

Equivalently ``B(n) = [sin(n+1)α, -cos(n+1)α]^T [cos nα, sin nα] / sin α``.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Any

import numpy as np

from .calculus import MatrixSignal
from .errors import AlphaDegenerate


@dataclass(frozen=True)
class OscillatorSpec:
    alpha: float
    g: Callable[[Any], Any]
    g_name: str = "g"
    vectorized: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < math.pi:
            raise AlphaDegenerate(f"alpha must lie in (0, pi), got {self.alpha!r}")
        if abs(math.sin(self.alpha)) < 1e-12:
            raise AlphaDegenerate(f"sin(alpha) vanishes for alpha={self.alpha!r}")

    def g_values(self, n: np.ndarray) -> np.ndarray:
        n = np.asarray(n, dtype=float)
        if self.vectorized:
            return np.broadcast_to(np.asarray(self.g(n), dtype=float), n.shape).astype(float)
        return np.array([float(self.g(k)) for k in n.tolist()])


def oscillator_matrices(alpha: float, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``A0`` (2x2) and ``A1(n)`` stacked as ``(len(n), 2, 2)``."""
    s, c = math.sin(alpha), math.cos(alpha)
    a0 = np.array([[s, c], [-c, s]])
    ph = (2 * np.asarray(n, dtype=float) + 1) * alpha
    sp, cp = np.sin(ph), np.cos(ph)
    a1 = np.stack([np.stack([sp, -cp], -1), np.stack([-cp, -sp], -1)], -2)
    return a0, a1


def oscillator_reduce(spec: OscillatorSpec) -> MatrixSignal:
    """Coefficient ``C(n) = g(n) B(n)`` of the amplitude system on the integers."""
    alpha = spec.alpha
    inv = 1.0 / (2.0 * math.sin(alpha))

    def fn(n):
        n = np.atleast_1d(np.asarray(n, dtype=float))
        a0, a1 = oscillator_matrices(alpha, n)
        return spec.g_values(n)[:, None, None] * inv * (a0 + a1)

    return MatrixSignal(2, fn, vectorized=True, name=f"oscillator({alpha:.6g},{spec.g_name})")


def amplitudes_from_state(alpha: float, x0: float, x1: float) -> np.ndarray:
    """``(C1(0), C2(0))`` reproducing ``x(0) = x0`` and ``x(1) = x1``."""
    return np.array([x0, (x1 - x0 * math.cos(alpha)) / math.sin(alpha)])


def reconstruct(alpha: float, n: np.ndarray, u: np.ndarray) -> np.ndarray:
    """``x(n) = C1(n) cos nα + C2(n) sin nα``; phases are formed in extended precision."""
    ph = np.asarray(n, dtype=np.longdouble) * np.longdouble(alpha)
    x = u[:, 0] * np.cos(ph) + u[:, 1] * np.sin(ph)
    return np.asarray(x, dtype=float)


def direct_recursion(alpha: float, g: np.ndarray, x0: float, x1: float) -> np.ndarray:
    """Run the second-order recursion for ``len(g) + 1`` values, in extended precision."""
    ld = np.longdouble
    two_c = 2 * np.cos(ld(alpha))
    x = np.empty(len(g) + 1, dtype=ld)
    x[0] = x0
    if len(x) > 1:
        x[1] = x1
    gl = np.asarray(g, dtype=ld)
    for k in range(len(g) - 1):
        x[k + 2] = two_c * x[k + 1] - (1 + gl[k]) * x[k]
    return x.astype(float)


@dataclass(frozen=True, eq=False)
class OscillatorRun:
    n: np.ndarray
    u: np.ndarray
    x: np.ndarray
    x_direct: np.ndarray
    residual: np.ndarray  # |x - x_direct| / max(|u(n)|, tiny)

    @property
    def max_residual(self) -> float:
        return float(self.residual.max())

    def drift(self, fraction: float = 0.1) -> float:
        """``|u(N) - u(N - ⌈fraction N⌉)|``: amplitude change over the final window."""
        N = len(self.n) - 1
        m = max(1, math.ceil(fraction * N))
        return float(np.linalg.norm(self.u[N] - self.u[N - m]))


def run_oscillator(spec: OscillatorSpec, u0: np.ndarray, horizon: int) -> OscillatorRun:
    """Integrate the amplitude system to ``horizon`` and compare with the direct recursion."""
    from .solver import solve_linear
    from .timescale import GridSpec, integers

    u0 = np.asarray(u0, dtype=float)
    traj = solve_linear(integers(), oscillator_reduce(spec), u0, 0, GridSpec(float(horizon)))
    n = traj.t
    u = traj.values
    x = reconstruct(spec.alpha, n, u)
    x0 = float(u0[0])
    x1 = float(u0[0] * math.cos(spec.alpha) + u0[1] * math.sin(spec.alpha))
    xd = direct_recursion(spec.alpha, spec.g_values(n[:-1]), x0, x1)
    scale = np.maximum(np.linalg.norm(u, axis=1), np.finfo(float).tiny)
    return OscillatorRun(n, u, x, xd, np.abs(x - xd) / scale)


G_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "zero": lambda n: np.zeros_like(np.asarray(n, dtype=float)),
    "inverse-square": lambda n: (np.asarray(n, dtype=float) + 1.0) ** -2,
    "alternating-harmonic": lambda n: (-1.0) ** np.asarray(n, dtype=float) / (np.asarray(n, dtype=float) + 1.0),
    "harmonic": lambda n: 1.0 / (np.asarray(n, dtype=float) + 1.0),
}
