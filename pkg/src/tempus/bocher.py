"""Bôcher-type sufficient conditions for class (S) and the Wintner transforms.

The iterated tails are built by the uniform recursion

    Y_0 = I,    Y_j(t) = -∫_t^∞ A(s) Y_{j-1}(s) Δs,

so that ``Y_j^Δ = A Y_{j-1}``.  The order-``j`` condition concerns the
improper integral of ``A(t) Y_{j-1}(t)``; if orders ``1..k-1`` converge and
order ``k`` converges absolutely, the change of variables
``x = (I + Y_1 + ... + Y_{k-1}) y`` yields ``y^Δ = B(t) y`` with ``B``
absolutely integrable, hence class (S).
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .calculus import (
    DEFAULT_TOL,
    ConvergenceVerdict,
    MatrixSignal,
    Tolerances,
    improper_delta_integral,
    ominus,
    step_contributions,
    tail_sums,
    verdict_on_grid,
)
from .errors import HorizonExceeded, NoValidityWindow, NotInScale, PrerequisiteNotConvergent
from .timescale import Grid, GridSpec, TimeScale, doubling_schedule


def _schedule_within(ts: TimeScale, a: float, horizon: float, schedule: Sequence[float] | None) -> list[float]:
    if schedule is None:
        schedule = [h for h in doubling_schedule(ts, a, k_max=62) if h <= horizon]
    hs = [ts.snap(h) for h in schedule]
    if any(h > horizon for h in hs):
        raise HorizonExceeded("schedule extends past the tail horizon")
    if any(b <= a_ for a_, b in zip(hs, hs[1:])):
        raise ValueError("schedule not increasing")
    return hs


class TailLadder:
    """Memoised iterated tails ``Y_1, Y_2, ...`` of ``A`` on one shared grid.

    Tails are truncated at ``horizon``; the remainder beyond it is replaced by
    the extrapolated tail of each order's convergence verdict (a constant
    matrix, so the Delta-derivatives ``Y_j^Δ`` are unaffected).
    """

    def __init__(
        self,
        ts: TimeScale,
        a_sig: MatrixSignal,
        a: float,
        horizon: float,
        spec: GridSpec | None = None,
        tol: Tolerances = DEFAULT_TOL,
        schedule: Sequence[float] | None = None,
    ):
        self.ts = ts
        self.A = a_sig
        self.a = ts.snap(a)
        self.horizon = ts.snap(horizon)
        self.tol = tol
        self.spec = GridSpec(self.horizon) if spec is None else spec.with_horizon(self.horizon)
        self.schedule = _schedule_within(ts, self.a, self.horizon, schedule)
        self.grid: Grid = ts.enumerate_grid(self.a, self.spec)
        self.a_vals = a_sig.sample(self.grid.t)
        n = a_sig.dim
        self._Y: list[np.ndarray | None] = [np.broadcast_to(np.eye(n), self.a_vals.shape)]
        self._verdicts: list[ConvergenceVerdict | None] = [None]

    @property
    def dim(self) -> int:
        return self.A.dim

    def integrand(self, j: int) -> np.ndarray:
        """Samples of ``A(t) Y_{j-1}(t)``."""
        return self.a_vals @ self.Y(j - 1)

    def verdict(self, j: int) -> ConvergenceVerdict:
        while len(self._verdicts) <= j:
            self._build(len(self._verdicts))
        return self._verdicts[j]

    def Y(self, j: int) -> np.ndarray:
        if j == 0:
            return self._Y[0]
        v = self.verdict(j)
        if not v.convergent:
            raise PrerequisiteNotConvergent(f"order-{j} integral is {v.kind.value}")
        return self._Y[j]

    def _build(self, j: int) -> None:
        f = self.integrand(j)
        env = self.A.sample_envelope(self.grid.t) if j == 1 else None
        verdict, c = verdict_on_grid(self.grid, f, self.schedule, self.tol, env)
        y = None
        if verdict.convergent:
            tails = tail_sums(c)
            rest = verdict.limit - c.sum(axis=0)
            y = -(tails + rest)
        self._verdicts.append(verdict)
        self._Y.append(y)

    def eval(self, j: int, t: float) -> np.ndarray:
        """``Y_j(t)`` at any scale point in ``[a, horizon]``."""
        if j == 0:
            return np.eye(self.dim)
        ys = self.Y(j)
        ts = self.ts
        t = ts.snap(t)
        g = self.grid
        if t > self.horizon:
            raise HorizonExceeded(f"t={t!r} beyond tail horizon {self.horizon!r}")
        if t < self.a:
            raise NotInScale(t, f"t={t!r} before the lower limit {self.a!r}")
        i = int(np.searchsorted(g.t, t))
        if g.t[i] == t:
            return ys[i].copy()
        # inside a continuous step t_{i-1} < t < t_i: trapezoid back from t_i
        f_t = self.A(t) @ self.eval(j - 1, t)
        f_i = self.a_vals[i] @ self.Y(j - 1)[i]
        return ys[i] - (g.t[i] - t) * 0.5 * (f_t + f_i)


@dataclass(frozen=True, eq=False)
class TailMatrix:
    order: int
    eval: Callable[[float], np.ndarray]
    horizon_used: float
    grid: Grid = field(repr=False)
    values: np.ndarray = field(repr=False)
    verdict: ConvergenceVerdict = field(repr=False)


def tail_matrix(
    ts: TimeScale,
    a_sig: MatrixSignal,
    k: int,
    horizon: float,
    spec: GridSpec | None = None,
    a: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
    ladder: TailLadder | None = None,
) -> TailMatrix:
    """The order-``k`` iterated tail ``Y_k`` (``Y_1(t) = -∫_t^∞ A``)."""
    if k < 1:
        raise ValueError("order must be >= 1")
    if ladder is None:
        ladder = TailLadder(ts, a_sig, ts.min_point if a is None else a, horizon, spec, tol)
    for j in range(1, k):
        if not ladder.verdict(j).convergent:
            raise PrerequisiteNotConvergent(f"order-{j} integral is {ladder.verdict(j).kind.value}")
    values = ladder.Y(k)
    return TailMatrix(k, lambda t: ladder.eval(k, t), ladder.horizon, ladder.grid, values, ladder.verdict(k))


# ---------------------------------------------------------------------------
# condition reports


@dataclass(frozen=True)
class ConditionReport:
    orders_convergent: list[tuple[int, ConvergenceVerdict]]
    first_absolute_order: int | None
    ominus_variant: ConvergenceVerdict | None
    implied_class_s: str
    horizons: tuple[float, ...]
    t_star: float | None = None

    def to_record(self) -> dict[str, Any]:
        return {
            "implied_class_s": self.implied_class_s,
            "first_absolute_order": self.first_absolute_order,
            "orders": [{"order": k, **v.to_record()} for k, v in self.orders_convergent],
            "ominus_variant": None if self.ominus_variant is None else self.ominus_variant.to_record(),
            "horizons": list(self.horizons),
            "t_star": self.t_star,
        }


def check_theorem1(
    ts: TimeScale,
    a_sig: MatrixSignal,
    a: float,
    schedule: Sequence[float] | None = None,
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> ConditionReport:
    """Absolute convergence of ``∫_a^∞ A Δs`` implies class (S)."""
    _, v = improper_delta_integral(ts, a_sig, a, schedule, spec, tol)
    yes = v.absolute
    return ConditionReport([(1, v)], 1 if yes else None, None, "Yes" if yes else "NotImplied", v.horizons_tested)


def check_order_k(
    ts: TimeScale,
    a_sig: MatrixSignal,
    a: float,
    k_max: int,
    schedule: Sequence[float] | None = None,
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
    include_ominus: bool = False,
    ladder: TailLadder | None = None,
) -> ConditionReport:
    """Scan orders ``1..k_max``; stop at the first absolutely convergent one."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if ladder is None:
        if schedule is None:
            schedule = doubling_schedule(ts, a)
        ladder = TailLadder(ts, a_sig, a, schedule[-1], spec, tol, schedule)
    orders = []
    first = None
    for j in range(1, k_max + 1):
        v = ladder.verdict(j)
        orders.append((j, v))
        if v.absolute:
            first = j
            break
        if not v.convergent:
            break
    variant = None
    if include_ominus:
        variant = check_ominus_variant(ts, a_sig, ladder.a, ladder.schedule, ladder.spec, tol)
    return ConditionReport(
        orders, first, variant, "Yes" if first is not None else "NotImplied", tuple(ladder.schedule)
    )


def check_ominus_variant(
    ts: TimeScale,
    a_sig: MatrixSignal,
    a: float,
    schedule: Sequence[float] | None = None,
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> ConvergenceVerdict:
    """Verdict on ``∫_a^∞ (∫_t^∞ (⊖A)(s) Δs) A(t) Δt``.

    If the inner integral of ``⊖A`` does not converge its verdict is returned.
    """
    a = ts.snap(a)
    if schedule is None:
        schedule = doubling_schedule(ts, a)
    hs = [ts.snap(h) for h in schedule]
    spec = GridSpec(hs[-1]) if spec is None else spec.with_horizon(hs[-1])
    grid = ts.enumerate_grid(a, spec)
    oa = ominus(a_sig, ts, tol).sample(grid.t)
    inner, c = verdict_on_grid(grid, oa, hs, tol)
    if not inner.convergent:
        return inner
    z = tail_sums(c) + (inner.limit - c.sum(axis=0))
    outer, _ = verdict_on_grid(grid, z @ a_sig.sample(grid.t), hs, tol)
    return outer


# ---------------------------------------------------------------------------
# changes of variables


@dataclass(frozen=True, eq=False)
class Transform:
    """Result of ``x = (I + Y_1 + ... + Y_k) y``.

    ``B`` is defined on ``[t_star, horizon)``; ``B_values`` holds its grid
    samples (NaN outside the validity window) and ``S_values`` the backmap
    ``I + sum Y_j`` at every grid point.
    """

    order: int
    B: MatrixSignal
    backmap: Callable[[float], np.ndarray]
    t_star: float
    start: int
    grid: Grid = field(repr=False)
    B_values: np.ndarray = field(repr=False)
    S_values: np.ndarray = field(repr=False)
    unshifted: bool = False
    ladder: TailLadder | None = field(default=None, repr=False)


def higher_transform(
    ts: TimeScale,
    a_sig: MatrixSignal,
    k: int,
    horizon: float,
    spec: GridSpec | None = None,
    a: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
    unshifted: bool = False,
    ladder: TailLadder | None = None,
    threshold: float = 0.5,
) -> Transform:
    """``B(t) = (I + sum_j Y_j(sigma(t)))^{-1} A(t) Y_k(t)`` for ``t >= t_star``.

    ``t_star`` is the first grid point from which ``|sum_j Y_j(sigma(t))|``
    stays below ``threshold``.  ``unshifted=True`` evaluates the inverse
    factor at ``t`` instead of ``sigma(t)`` (for comparison only; it breaks
    the backmap identity wherever ``mu > 0``).
    """
    if k < 1:
        raise ValueError("order must be >= 1")
    if ladder is None:
        ladder = TailLadder(ts, a_sig, ts.min_point if a is None else a, horizon, spec, tol)
    for j in range(1, k + 1):
        v = ladder.verdict(j)
        if not v.convergent:
            raise PrerequisiteNotConvergent(f"order-{j} integral is {v.kind.value}")
    g = ladder.grid
    n = ladder.dim
    eye = np.eye(n)
    N = len(g)
    ysum = sum(ladder.Y(j) for j in range(1, k + 1))
    S = eye + ysum
    ysig = ysum.copy()
    jump = g.jump
    ysig[:-1][jump] = ysum[1:][jump]
    # sigma of a right-scattered last point is off-grid, so B stops one short
    last = N if g.mu[-1] == 0 else N - 1
    ok = np.linalg.norm(ysig[:last], axis=(1, 2)) <= threshold
    bad = np.nonzero(~ok)[0]
    start = int(bad[-1]) + 1 if len(bad) else 0
    if start >= N - 1:
        raise NoValidityWindow(f"|sum Y_j(sigma(t))| never stays below {threshold} on [{ladder.a}, {ladder.horizon}]")
    factor = S if unshifted else eye + ysig
    rhs = ladder.a_vals @ ladder.Y(k)
    B = np.full((N, n, n), np.nan)
    B[start:last] = np.linalg.solve(factor[start:last], rhs[start:last])
    t_star = float(g.t[start])

    def backmap(t: float) -> np.ndarray:
        return eye + sum(ladder.eval(j, t) for j in range(1, k + 1))

    def b_one(t: float) -> np.ndarray:
        t = ts.snap(t)
        if t < t_star or t > g.t[last - 1]:
            raise HorizonExceeded(f"B is only defined on [{t_star}, {g.t[last - 1]}]")
        i = int(np.searchsorted(g.t, t))
        if g.t[i] == t:
            return B[i]
        s = backmap(t)  # interior of an interval: sigma(t) = t
        return np.linalg.solve(s, a_sig(t) @ ladder.eval(k, t))

    def b_fn(t):
        return np.array([b_one(x) for x in np.atleast_1d(t).tolist()])

    sig = MatrixSignal(n, b_fn, vectorized=True, name=f"B{k}({a_sig.name})")
    return Transform(k, sig, backmap, t_star, start, g, B, S, unshifted, ladder)


def wintner_transform(
    ts: TimeScale,
    a_sig: MatrixSignal,
    horizon: float,
    spec: GridSpec | None = None,
    a: float | None = None,
    tol: Tolerances = DEFAULT_TOL,
    unshifted: bool = False,
    ladder: TailLadder | None = None,
) -> Transform:
    """``x = (I + Y_1) y`` with ``B = (I + Y_1(sigma))^{-1} A Y_1``."""
    return higher_transform(ts, a_sig, 1, horizon, spec, a, tol, unshifted, ladder)


@dataclass(frozen=True, eq=False)
class TransformResidual:
    t: np.ndarray
    y: np.ndarray
    x: np.ndarray
    residual: np.ndarray  # relative, per step; NaN on continuous steps

    @property
    def max_residual(self) -> float:
        r = self.residual[np.isfinite(self.residual)]
        return float(r.max()) if len(r) else 0.0


def transform_residual(
    tr: Transform, a_sig: MatrixSignal, y0: np.ndarray | None = None, substeps: int = 2
) -> TransformResidual:
    """Solve ``y^Δ = B y`` from ``t_star``, map back and measure how well
    ``x = (I + sum Y_j) y`` satisfies ``x(sigma) = (I + mu A) x`` on jump steps."""
    g = tr.grid
    n = a_sig.dim
    y = np.eye(n) if y0 is None else np.asarray(y0, dtype=float)
    N = len(g)
    ys = np.empty((N - tr.start,) + y.shape)
    ys[0] = y
    for i in range(tr.start, N - 1):
        mu = g.mu[i]
        if mu > 0:
            y = y + mu * (tr.B_values[i] @ y)
        else:
            h = (g.t[i + 1] - g.t[i]) / substeps
            for j in range(substeps):
                t0 = g.t[i] + j * h
                b0, b1, b2 = (tr.B(min(t0 + c * h, g.t[i + 1]))[0] for c in (0.0, 0.5, 1.0))
                k1 = b0 @ y
                k2 = b1 @ (y + 0.5 * h * k1)
                k3 = b1 @ (y + 0.5 * h * k2)
                k4 = b2 @ (y + h * k3)
                y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        ys[i + 1 - tr.start] = y
    S = tr.S_values[tr.start:]
    xs = S @ ys if ys.ndim == 3 else np.einsum("nij,nj->ni", S, ys)
    a_vals = a_sig.sample(g.t[tr.start:])
    res = np.full(len(xs) - 1, np.nan)
    tiny = np.finfo(float).tiny
    for m in range(len(xs) - 1):
        mu = g.mu[tr.start + m]
        if mu > 0:
            pred = xs[m] + mu * (a_vals[m] @ xs[m])
            scale = max(np.linalg.norm(xs[m + 1]), np.linalg.norm(xs[m]), tiny)
            res[m] = np.linalg.norm(xs[m + 1] - pred) / scale
    return TransformResidual(g.t[tr.start:], ys, xs, res)
