"""Delta calculus on time scales.

Delta integrals (proper and improper, with numerical convergence verdicts),
time-scale exponentials ``e_A(t, a)``, regressivity checks and the circle-minus
operator ``(⊖A)(t) = -A(t) [I + mu(t) A(t)]^{-1}``.

Conventions
-----------
* Matrix norms are Frobenius norms, vector norms Euclidean.
* On a grid step ``t_i -> t_{i+1}`` the Delta integral contributes
  ``mu(t_i) F(t_i)`` if the step is a jump, and the trapezoid value
  ``h (F(t_i) + F(t_{i+1})) / 2`` if it lies inside an interval.
* Exponentials advance by ``X <- X + mu A X`` across jumps (exact) and by the
  classical fourth-order Runge-Kutta method inside intervals.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numba
import numpy as np

from .errors import DimensionMismatch, NotRegressive, ScheduleTooShort
from .timescale import Grid, GridSpec, TimeScale, doubling_schedule


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared by all verdicts.

    A sequence of values taken at a doubling schedule is *Cauchy* if its last
    ``window`` consecutive differences are all below
    ``cauchy_abs + cauchy_rel * |last value|`` or decay geometrically with
    ratio at most ``decay_ratio`` (so their sum, the remaining tail, is
    finite).  Ratios at or above ``growth_ratio`` mean no decay.
    """

    cauchy_abs: float = 1e-8
    cauchy_rel: float = 1e-6
    sing: float = 1e-8
    regress: float = 1e-10
    decay_ratio: float = 0.75
    growth_ratio: float = 0.9
    window: int = 3

    def replace(self, **kw: Any) -> Tolerances:
        return Tolerances(**{**self.__dict__, **kw})


DEFAULT_TOL = Tolerances()


class MatrixSignal:
    """Coefficient map ``t -> n x n`` matrix.

    ``fn`` must be pure.  With ``vectorized=True`` it is called once with a
    1-d array of times and must return an ``(N, n, n)`` array (or ``(N,)`` for
    ``dim == 1``).  ``envelope`` optionally bounds ``|fn(t)|`` for
    ``t >= t_env``.
    """

    __slots__ = ("dim", "fn", "envelope", "t_env", "vectorized", "name")

    def __init__(
        self,
        dim: int,
        fn: Callable[[Any], Any],
        envelope: Callable[[Any], Any] | None = None,
        t_env: float = -math.inf,
        vectorized: bool = False,
        name: str | None = None,
    ):
        if dim < 1:
            raise DimensionMismatch(f"dimension must be positive, got {dim}")
        self.dim = int(dim)
        self.fn = fn
        self.envelope = envelope
        self.t_env = t_env
        self.vectorized = vectorized
        self.name = name

    def __repr__(self) -> str:
        return f"MatrixSignal(dim={self.dim}, name={self.name!r})"

    def __call__(self, t: float) -> np.ndarray:
        if self.vectorized:
            return self.sample(np.array([t], dtype=float))[0]
        return self._shape(self.fn(t), 1)[0]

    def _shape(self, val: Any, count: int) -> np.ndarray:
        arr = np.asarray(val, dtype=float)
        n = self.dim
        if arr.shape == (count, n, n):
            return arr
        if n == 1 and arr.size == count:
            return arr.reshape(count, 1, 1)
        if count == 1 and arr.shape == (n, n):
            return arr.reshape(1, n, n)
        raise DimensionMismatch(f"signal {self.name!r} returned shape {arr.shape}, expected ({n}, {n})")

    def sample(self, ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self.vectorized:
            return self._shape(self.fn(ts), len(ts))
        out = np.empty((len(ts), self.dim, self.dim))
        for i, t in enumerate(ts.tolist()):
            out[i] = self._shape(self.fn(t), 1)[0]
        return out

    def sample_envelope(self, ts: np.ndarray) -> np.ndarray | None:
        if self.envelope is None:
            return None
        ts = np.asarray(ts, dtype=float)
        if self.vectorized:
            return np.broadcast_to(np.asarray(self.envelope(ts), dtype=float), ts.shape).copy()
        return np.array([float(self.envelope(t)) for t in ts.tolist()])

    @classmethod
    def constant(cls, m: Any, name: str | None = None) -> MatrixSignal:
        m = np.atleast_2d(np.asarray(m, dtype=float))
        if m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"constant matrix must be square, got {m.shape}")
        n = m.shape[0]
        nrm = float(np.linalg.norm(m))
        return cls(
            n,
            lambda t: np.broadcast_to(m, (np.size(t), n, n)),
            envelope=lambda t: np.full(np.shape(t), nrm),
            vectorized=True,
            name=name or "constant",
        )

    @classmethod
    def scalar(cls, fn: Callable[[Any], Any], vectorized: bool = False, **kw: Any) -> MatrixSignal:
        return cls(1, fn, vectorized=vectorized, **kw)


def as_signal(obj: Any) -> MatrixSignal:
    """Promote a callable or constant to a signal (callables are scalar)."""
    if isinstance(obj, MatrixSignal):
        return obj
    if callable(obj):
        return MatrixSignal.scalar(obj)
    return MatrixSignal.constant(obj)


def norm_signal(a: MatrixSignal) -> MatrixSignal:
    """Scalar signal ``t -> |A(t)|`` (Frobenius)."""

    def fn(t):
        return np.linalg.norm(a.sample(np.atleast_1d(t)), axis=(1, 2))

    return MatrixSignal(1, fn, vectorized=True, name=f"|{a.name}|")


def scaled(a: MatrixSignal, c: float) -> MatrixSignal:
    return MatrixSignal(
        a.dim, lambda t: c * a.sample(np.atleast_1d(t)), vectorized=True, name=f"{c}*{a.name}"
    )


# ---------------------------------------------------------------------------
# integrals


@dataclass(frozen=True)
class IntegralResult:
    value: np.ndarray
    abs_value: float
    error_estimate: float
    grid_used: GridSpec


def step_contributions(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Per-step Delta-integral contributions of samples ``f`` (shape ``(N, ...)``)."""
    mu = grid.mu[:-1]
    h = np.diff(grid.t)
    jump = mu > 0
    shape = (-1,) + (1,) * (f.ndim - 1)
    jump_part = mu.reshape(shape) * f[:-1]
    trap = h.reshape(shape) * 0.5 * (f[:-1] + f[1:])
    return np.where(jump.reshape(shape), jump_part, trap)


def partial_sums(contrib: np.ndarray) -> np.ndarray:
    """Cumulative integrals from the first grid point (leading zero included)."""
    out = np.zeros((len(contrib) + 1,) + contrib.shape[1:])
    np.cumsum(contrib, axis=0, out=out[1:])
    return out


def tail_sums(contrib: np.ndarray) -> np.ndarray:
    """``out[i] = sum_{j >= i} contrib[j]`` (trailing zero included)."""
    out = np.zeros((len(contrib) + 1,) + contrib.shape[1:])
    np.cumsum(contrib[::-1], axis=0, out=out[-2::-1])
    return out


def _trapezoid_error(grid: Grid, f: np.ndarray, contrib: np.ndarray) -> float:
    cont = grid.mu[:-1] == 0
    if len(cont) < 2:
        return 0.0
    both = cont[:-1] & cont[1:]
    if not both.any():
        return 0.0
    idx = np.nonzero(both)[0]
    h2 = grid.t[idx + 2] - grid.t[idx]
    shape = (-1,) + (1,) * (f.ndim - 1)
    coarse = h2.reshape(shape) * 0.5 * (f[idx] + f[idx + 2])
    fine = contrib[idx] + contrib[idx + 1]
    diff = (fine - coarse).reshape(len(idx), -1)
    return float(np.linalg.norm(diff, axis=1).sum() / 6.0)


def delta_integral(
    ts: TimeScale, f: MatrixSignal, a: float, b: float, spec: GridSpec | None = None
) -> IntegralResult:
    """``∫_a^b F(s) Δs``; exact sums over isolated points, trapezoid inside intervals."""
    spec = GridSpec(b) if spec is None else spec.with_horizon(b)
    a, b = ts.snap(a), ts.snap(b)
    n = f.dim
    if b == a:
        return IntegralResult(np.zeros((n, n)), 0.0, 0.0, spec)
    grid = ts.enumerate_grid(a, spec)
    vals = f.sample(grid.t)
    c = step_contributions(grid, vals)
    c_abs = step_contributions(grid, np.linalg.norm(vals, axis=(1, 2)))
    err = _trapezoid_error(grid, vals, c)
    return IntegralResult(c.sum(axis=0), float(c_abs.sum()), err, spec)


# ---------------------------------------------------------------------------
# convergence verdicts


class Convergence(str, Enum):
    ABSOLUTE = "AbsolutelyConvergent"
    CONDITIONAL = "ConditionallyConvergent"
    DIVERGENT = "Divergent"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class SequenceState:
    """Behaviour of values sampled along a horizon schedule.

    ``state`` is one of ``settled`` (differences below tolerance), ``decaying``
    (differences shrink geometrically), ``growing`` (no decay) or ``plateau``.
    """

    state: str
    differences: tuple[float, ...]
    ratio: float
    tail: float

    @property
    def cauchy(self) -> bool:
        return self.state in ("settled", "decaying")


def sequence_state(values: Sequence[Any], tol: Tolerances = DEFAULT_TOL) -> SequenceState:
    vals = [np.asarray(v, dtype=float) for v in values]
    with np.errstate(invalid="ignore", over="ignore"):
        diffs = [float(np.linalg.norm(np.ravel(b - a))) for a, b in zip(vals, vals[1:])]
    if not diffs:
        return SequenceState("plateau", (), math.nan, math.inf)
    if not all(math.isfinite(d) for d in diffs) or not np.all(np.isfinite(vals[-1])):
        return SequenceState("growing", tuple(diffs), math.inf, math.inf)
    scale = float(np.linalg.norm(np.ravel(vals[-1])))
    thresh = tol.cauchy_abs + tol.cauchy_rel * scale
    last = diffs[-tol.window:]
    if max(last) <= thresh:
        return SequenceState("settled", tuple(diffs), 0.0, diffs[-1])
    if len(diffs) < 3:
        return SequenceState("plateau", tuple(diffs), math.nan, diffs[-1])
    window = diffs[-(tol.window + 1):]
    ratios = [b / a if a > 0 else (0.0 if b == 0 else math.inf) for a, b in zip(window, window[1:])]
    # contraction of the upper envelope of the differences, robust to sign noise in single steps
    if len(diffs) >= 2 * tol.window:
        blocks = [max(b) for b in np.array_split(np.array(diffs[-2 * tol.window:]), 3)]
        span = 2 * (2 * tol.window // 3)
        shrinking = blocks[0] > blocks[1] and blocks[2] <= math.sqrt(tol.decay_ratio) * blocks[1]
    else:
        blocks = [max(window[:2]), max(window[-2:])]
        span = len(window) - 2
        shrinking = True
    head, end = blocks[0], blocks[-1]
    rho = (end / head) ** (1.0 / span) if head > 0 else 0.0
    if shrinking and rho <= tol.decay_ratio:
        return SequenceState("decaying", tuple(diffs), rho, end * rho / (1.0 - rho))
    if min(ratios) >= tol.growth_ratio:
        return SequenceState("growing", tuple(diffs), rho, math.inf)
    return SequenceState("plateau", tuple(diffs), rho, diffs[-1])


def _aitken(values: np.ndarray) -> np.ndarray:
    """One entrywise Aitken delta-squared pass (length shrinks by two)."""
    d1 = values[2:] - values[1:-1]
    d2 = values[2:] - 2.0 * values[1:-1] + values[:-2]
    with np.errstate(divide="ignore", invalid="ignore"):
        acc = values[2:] - d1 * d1 / d2
    return np.where((d2 != 0) & np.isfinite(acc), acc, values[2:])


def extrapolate(values: Sequence[Any], st: SequenceState, depth: int = 7) -> np.ndarray | None:
    """Limit estimate from values along a doubling schedule.

    The geometric remainder of the last differences is the baseline.  Repeated
    Aitken passes over the last ``depth`` values refine it while each pass
    moves the estimate by less than half the previous correction, which strips
    the sub-leading terms of algebraic tails without trusting noisy sequences.
    """
    if not st.cauchy:
        return None
    last = np.asarray(values[-1], dtype=float)
    if st.state == "settled" or len(values) < 3:
        return last.copy()
    prev = np.asarray(values[-2], dtype=float)
    d_prev = float(np.linalg.norm(np.ravel(prev - np.asarray(values[-3], dtype=float))))
    d_last = float(np.linalg.norm(np.ravel(last - prev)))
    r = d_last / d_prev if d_prev > 0 else 0.0
    r = min(r, st.ratio)
    best = last + (last - prev) * (r / (1.0 - r))
    step = float(np.linalg.norm(np.ravel(best - last)))
    seq = np.stack([np.asarray(v, dtype=float) for v in values[-depth:]])
    seq = _aitken(seq)
    while len(seq) >= 3:
        seq = _aitken(seq)
        move = float(np.linalg.norm(np.ravel(seq[-1] - best)))
        if not move <= 0.5 * step:
            break
        best, step = seq[-1], move
    return best


@dataclass(frozen=True)
class ConvergenceVerdict:
    kind: Convergence
    tail_estimate: float
    horizons_tested: tuple[float, ...]
    limit: np.ndarray | None = field(default=None, repr=False)
    partial_values: tuple[np.ndarray, ...] = field(default=(), repr=False)
    value_state: SequenceState | None = field(default=None, repr=False)
    abs_state: SequenceState | None = field(default=None, repr=False)

    @property
    def convergent(self) -> bool:
        return self.kind in (Convergence.ABSOLUTE, Convergence.CONDITIONAL)

    @property
    def absolute(self) -> bool:
        return self.kind is Convergence.ABSOLUTE

    def to_record(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "tail_estimate": self.tail_estimate,
            "horizons": list(self.horizons_tested),
            "value_differences": list(self.value_state.differences) if self.value_state else [],
            "abs_differences": list(self.abs_state.differences) if self.abs_state else [],
            "limit": None if self.limit is None else np.asarray(self.limit).tolist(),
        }


def classify(
    partials: Sequence[Any],
    abs_partials: Sequence[float],
    horizons: Sequence[float],
    tol: Tolerances = DEFAULT_TOL,
    envelope_windows: Sequence[float] | None = None,
) -> ConvergenceVerdict:
    """Verdict on an improper integral from its values along a horizon schedule."""
    vs = sequence_state(partials, tol)
    ab = sequence_state(abs_partials, tol)
    if ab.cauchy:
        # |S(h2) - S(h1)| <= A(h2) - A(h1), so Cauchy absolute sums carry the values
        kind = Convergence.ABSOLUTE
    elif vs.cauchy:
        if ab.state == "growing":
            kind = Convergence.CONDITIONAL
        else:
            kind = Convergence.INCONCLUSIVE
    elif vs.state == "growing":
        kind = Convergence.DIVERGENT
    else:
        kind = Convergence.INCONCLUSIVE
    tail = vs.tail if vs.cauchy else ab.tail
    if envelope_windows is not None and len(envelope_windows) >= 2:
        e_prev, e_last = envelope_windows[-2], envelope_windows[-1]
        r = e_last / e_prev if e_prev > 0 else 0.0
        tail = e_last * r / (1.0 - r) if r < 1 else math.inf
    return ConvergenceVerdict(
        kind,
        float(tail),
        tuple(float(h) for h in horizons),
        extrapolate(partials, vs) if vs.cauchy else np.asarray(partials[-1], dtype=float).copy(),
        tuple(np.asarray(p, dtype=float) for p in partials),
        vs,
        ab,
    )


def check_schedule(ts: TimeScale, a: float, schedule: Sequence[float] | None, minimum: int = 2) -> list[float]:
    if schedule is None:
        schedule = doubling_schedule(ts, a)
    hs = [ts.snap(h) for h in schedule]
    if len(hs) < minimum:
        raise ScheduleTooShort(f"schedule needs at least {minimum} horizons, got {len(hs)}")
    if any(b <= a for a, b in zip(hs, hs[1:])):
        raise ValueError("schedule not increasing")
    if hs[0] <= ts.snap(a):
        raise ValueError("schedule must start after the lower limit")
    return hs


def verdict_on_grid(
    grid: Grid,
    f: np.ndarray,
    horizons: Sequence[float],
    tol: Tolerances = DEFAULT_TOL,
    envelope: np.ndarray | None = None,
) -> tuple[ConvergenceVerdict, np.ndarray]:
    """Classify ``∫ f`` for samples ``f`` on ``grid``; also return step contributions."""
    c = step_contributions(grid, f)
    c_abs = step_contributions(grid, np.linalg.norm(f.reshape(len(f), -1), axis=1))
    idx = grid.indices(horizons)
    ps = partial_sums(c)
    pa = partial_sums(c_abs)
    env = None
    if envelope is not None:
        pe = partial_sums(step_contributions(grid, envelope))
        env = [float(pe[j] - pe[i]) for i, j in zip(idx, idx[1:])]
    return classify([ps[i] for i in idx], [float(pa[i]) for i in idx], horizons, tol, env), c


def improper_delta_integral(
    ts: TimeScale,
    f: MatrixSignal,
    a: float,
    schedule: Sequence[float] | None = None,
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> tuple[IntegralResult, ConvergenceVerdict]:
    """Partial integrals ``∫_a^h F Δs`` along ``schedule`` and a convergence verdict.

    The returned :class:`IntegralResult` is the partial integral at the last
    horizon; ``verdict.limit`` extrapolates it when the values are Cauchy.
    """
    a = ts.snap(a)
    hs = check_schedule(ts, a, schedule)
    spec = GridSpec(hs[-1]) if spec is None else spec.with_horizon(hs[-1])
    grid = ts.enumerate_grid(a, spec)
    vals = f.sample(grid.t)
    env = f.sample_envelope(grid.t)
    verdict, c = verdict_on_grid(grid, vals, hs, tol, env)
    c_abs = step_contributions(grid, np.linalg.norm(vals, axis=(1, 2)))
    res = IntegralResult(c.sum(axis=0), float(c_abs.sum()), _trapezoid_error(grid, vals, c), spec)
    return res, verdict


# ---------------------------------------------------------------------------
# exponentials


def _regressivity_dets(grid: Grid, a_vals: np.ndarray) -> np.ndarray:
    n = a_vals.shape[-1]
    m = np.eye(n) + grid.mu[:, None, None] * a_vals
    return np.abs(np.linalg.det(m))


def _stage_times(grid: Grid, substeps: int) -> tuple[np.ndarray, np.ndarray]:
    """Times ``t_i + k h / (2m)`` (k = 0..2m) for every continuous step ``i``."""
    cont = np.nonzero(grid.mu[:-1] == 0)[0]
    h = grid.t[cont + 1] - grid.t[cont]
    frac = np.arange(2 * substeps + 1) / (2 * substeps)
    times = grid.t[cont, None] + h[:, None] * frac[None, :]
    times[:, -1] = grid.t[cont + 1]
    return cont, times


def propagate_linear(
    ts: TimeScale,
    a_sig: MatrixSignal,
    x0: np.ndarray,
    a: float,
    spec: GridSpec,
    tol: Tolerances = DEFAULT_TOL,
    grid: Grid | None = None,
) -> tuple[Grid, np.ndarray]:
    """Advance ``x^Δ = A(t) x`` from ``x(a) = x0`` over the grid of ``spec``.

    ``x0`` may be a vector ``(n,)`` or a matrix ``(n, m)``; the returned
    array has one entry per grid point.
    """
    x0 = np.asarray(x0, dtype=float)
    n = a_sig.dim
    if x0.shape[0] != n:
        raise DimensionMismatch(f"initial value has leading dimension {x0.shape[0]}, system has {n}")
    if grid is None:
        grid = ts.enumerate_grid(a, spec)
    a_vals = a_sig.sample(grid.t)
    jump = grid.jump
    if jump.any():
        dets = _regressivity_dets(grid.slice(0, len(grid) - 1), a_vals[:-1])
        bad = np.nonzero(jump & (dets <= tol.regress))[0]
        if len(bad):
            i = int(bad[0])
            raise NotRegressive(float(grid.t[i]), float(dets[i]))
    m = spec.rk_substeps
    cont, times = _stage_times(grid, m)
    if len(cont):
        stage_vals = a_sig.sample(times.ravel()).reshape(len(cont), 2 * m + 1, n, n)
    else:
        stage_vals = np.zeros((1, 2 * m + 1, n, n))
    pos = np.full(len(grid), -1, dtype=np.int64)
    pos[cont] = np.arange(len(cont))
    x2 = x0.reshape(n, -1)
    out = np.empty((len(grid),) + x2.shape)
    with np.errstate(over="ignore", invalid="ignore"):  # growing solutions may overflow
        _propagate(np.ascontiguousarray(a_vals), grid.mu, grid.t, stage_vals, pos, m, x2, out)
    return grid, out.reshape((len(grid),) + x0.shape)


@numba.njit(cache=True)
def _matvec_step(a, x, scale, base, out):
    """``out = base + scale * (a @ x)`` for ``x`` of shape ``(n, c)``."""
    n, c = x.shape
    for r in range(n):
        for q in range(c):
            acc = 0.0
            for k in range(n):
                acc += a[r, k] * x[k, q]
            out[r, q] = base[r, q] + scale * acc


@numba.njit(cache=True)
def _propagate(a_vals, mu, t, stage_vals, pos, m, x0, out):
    n, c = x0.shape
    x = x0.copy()
    out[0] = x
    y = np.empty_like(x)
    k1 = np.empty_like(x)
    k2 = np.empty_like(x)
    k3 = np.empty_like(x)
    k4 = np.empty_like(x)
    zero = np.zeros_like(x)
    for i in range(len(t) - 1):
        if mu[i] > 0:
            _matvec_step(a_vals[i], x, mu[i], x, y)
            x[:, :] = y
        else:
            st = stage_vals[pos[i]]
            h = (t[i + 1] - t[i]) / m
            for j in range(m):
                _matvec_step(st[2 * j], x, 1.0, zero, k1)
                _matvec_step(st[2 * j + 1], x + 0.5 * h * k1, 1.0, zero, k2)
                _matvec_step(st[2 * j + 1], x + 0.5 * h * k2, 1.0, zero, k3)
                _matvec_step(st[2 * j + 2], x + h * k3, 1.0, zero, k4)
                x[:, :] = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = x


def exp_matrix(
    ts: TimeScale,
    a_sig: MatrixSignal,
    a: float,
    t: float,
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> np.ndarray:
    """The exponential ``e_A(t, a)``: fundamental matrix with ``X(a) = I``."""
    a, t = ts.snap(a), ts.snap(t)
    if t < a:
        raise ValueError("exp_matrix needs a <= t")
    eye = np.eye(a_sig.dim)
    if t == a:
        return eye
    spec = GridSpec(t) if spec is None else spec.with_horizon(t)
    _, vals = propagate_linear(ts, a_sig, eye, a, spec, tol)
    return vals[-1]


def exp_scalar_path(
    ts: TimeScale,
    k: MatrixSignal | Callable[[float], float],
    a: float,
    spec: GridSpec,
    tol: Tolerances = DEFAULT_TOL,
    grid: Grid | None = None,
) -> tuple[Grid, np.ndarray]:
    """``e_k(t, a)`` at every grid point of ``T ∩ [a, horizon]``."""
    k = as_signal(k)
    if k.dim != 1:
        raise DimensionMismatch("exp_scalar needs a scalar signal")
    grid, vals = propagate_linear(ts, k, np.ones(1), a, spec, tol, grid)
    return grid, vals[:, 0]


def exp_scalar(
    ts: TimeScale,
    k: MatrixSignal | Callable[[float], float],
    a: float,
    t: float,
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> float:
    k = as_signal(k)
    a, t = ts.snap(a), ts.snap(t)
    if t == a:
        return 1.0
    spec = GridSpec(t) if spec is None else spec.with_horizon(t)
    return float(exp_scalar_path(ts, k, a, spec, tol)[1][-1])


def ominus(a_sig: MatrixSignal, ts: TimeScale, tol: Tolerances = DEFAULT_TOL) -> MatrixSignal:
    """``t -> -A(t) [I + mu(t) A(t)]^{-1}``; equals ``-A(t)`` where ``mu(t) = 0``."""
    n = a_sig.dim
    eye = np.eye(n)

    def fn(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        av = a_sig.sample(t)
        mu = ts.mu_array(t)
        out = -av
        for i in np.nonzero(mu > 0)[0]:
            m = eye + mu[i] * av[i]
            d = abs(np.linalg.det(m))
            if d <= tol.regress:
                raise NotRegressive(float(t[i]), d)
            # -A M^{-1} = -(M^{-T} A^T)^T
            out[i] = -np.linalg.solve(m.T, av[i].T).T
        return out

    return MatrixSignal(n, fn, vectorized=True, name=f"ominus({a_sig.name})")


def regressivity_check(
    ts: TimeScale,
    a_sig: MatrixSignal,
    a: float,
    horizon: float,
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> tuple[bool, float]:
    """``(min |det(I + mu A)| > tol.regress, min |det(I + mu A)|)`` over the grid."""
    spec = GridSpec(horizon) if spec is None else spec.with_horizon(horizon)
    grid = ts.enumerate_grid(a, spec)
    dets = _regressivity_dets(grid, a_sig.sample(grid.t))
    m = float(dets.min())
    return m > tol.regress, m
