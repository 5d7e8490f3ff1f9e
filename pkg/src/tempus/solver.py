"""Linear and nonlinear dynamic equations on time scales.

Solves ``x^Δ = A(t) x`` and ``x^Δ = f(t, x)``, builds fundamental matrices,
estimates limits along a horizon schedule (class (S) verdicts) and evaluates
the Gronwall envelopes that sandwich every solution.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, TextIO

import numpy as np

from .calculus import (
    DEFAULT_TOL,
    MatrixSignal,
    Tolerances,
    as_signal,
    check_schedule,
    exp_scalar_path,
    propagate_linear,
    sequence_state,
)
from .errors import DimensionMismatch, DomainEscape, ScheduleTooShort
from .timescale import Grid, GridSpec, TimeScale


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Solution sampled on the scale grid.

    ``values`` has shape ``(N, n)`` for ``kind == "vector"`` and ``(N, n, n)``
    for ``kind == "fundamental"``.
    """

    grid: Grid
    values: np.ndarray
    scale: TimeScale = field(repr=False)
    kind: str = "vector"

    def __len__(self) -> int:
        return len(self.grid)

    @property
    def t(self) -> np.ndarray:
        return self.grid.t

    def at(self, t: float) -> np.ndarray:
        return self.values[self.grid.index(t, self.scale.epsilon_member)]

    def norms(self) -> np.ndarray:
        """Euclidean norms of vectors, Frobenius norms of matrices."""
        return np.linalg.norm(self.values.reshape(len(self.values), -1), axis=1)

    def header(self) -> list[str]:
        n = self.values.shape[1]
        if self.kind == "fundamental":
            return ["t"] + [f"X_{i}{j}" for i in range(n) for j in range(n)]
        return ["t"] + [f"component_{i}" for i in range(n)]

    def write_csv(self, fh: TextIO) -> None:
        """Header row then one row per grid point, 17 significant digits."""
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.header())
        flat = self.values.reshape(len(self.values), -1)
        for t, row in zip(self.grid.t.tolist(), flat.tolist()):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


class ClassS(str, Enum):
    CLASS_S = "ClassS"
    NOT_CLASS_S = "NotClassS"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ClassSVerdict:
    limit: np.ndarray
    cauchy_residuals: tuple[float, ...]
    min_singular_value: float
    verdict: ClassS
    horizons: tuple[float, ...] = ()
    relative_singular_value: float = math.nan
    state: str = ""

    def to_record(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "limit": np.asarray(self.limit).tolist(),
            "cauchy_residuals": list(self.cauchy_residuals),
            "min_singular_value": self.min_singular_value,
            "relative_singular_value": self.relative_singular_value,
            "horizons": list(self.horizons),
            "state": self.state,
        }


def solve_linear(
    ts: TimeScale,
    a_sig: MatrixSignal,
    x0: Sequence[float] | np.ndarray,
    a: float,
    spec: GridSpec,
    tol: Tolerances = DEFAULT_TOL,
) -> Trajectory:
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1:
        raise DimensionMismatch("solve_linear expects a vector initial value")
    grid, vals = propagate_linear(ts, a_sig, x0, a, spec, tol)
    return Trajectory(grid, vals, ts, "vector")


def fundamental_matrix(
    ts: TimeScale, a_sig: MatrixSignal, a: float, spec: GridSpec, tol: Tolerances = DEFAULT_TOL
) -> Trajectory:
    """Fundamental matrix path with ``X(a) = I``."""
    grid, vals = propagate_linear(ts, a_sig, np.eye(a_sig.dim), a, spec, tol)
    return Trajectory(grid, vals, ts, "fundamental")


def classify_limit(
    horizons: Sequence[float],
    values: Sequence[np.ndarray],
    kind: str = "fundamental",
    tol: Tolerances = DEFAULT_TOL,
    identically_zero: bool = False,
) -> ClassSVerdict:
    """Class-(S) verdict from solution values at the schedule horizons.

    For fundamental matrices the limit must be nonsingular: the smallest
    singular value relative to the spectral norm must exceed ``tol.sing``.
    For vector solutions the limit must be nonzero unless the solution is
    identically zero.
    """
    if len(horizons) < 3:
        raise ScheduleTooShort(f"limit estimation needs >= 3 horizons, got {len(horizons)}")
    vals = [np.asarray(v, dtype=float) for v in values]
    st = sequence_state(vals, tol)
    x_inf = vals[-1]
    with np.errstate(invalid="ignore", over="ignore"):
        if not np.all(np.isfinite(x_inf)):
            smin, rel = math.nan, math.nan
        elif kind == "fundamental":
            sv = np.linalg.svd(x_inf, compute_uv=False)
            smin = float(sv[-1])
            rel = smin / float(sv[0]) if sv[0] > 0 else 0.0
        else:
            smin = float(np.linalg.norm(x_inf))
            peak = max(float(np.linalg.norm(v)) for v in vals)
            rel = smin / peak if peak > 0 else 0.0
    if st.cauchy:
        nonsingular = rel > tol.sing or (kind == "vector" and identically_zero)
        verdict = ClassS.CLASS_S if nonsingular else ClassS.NOT_CLASS_S
    elif st.state == "growing":
        verdict = ClassS.NOT_CLASS_S
    else:
        verdict = ClassS.INCONCLUSIVE
    return ClassSVerdict(
        x_inf, st.differences, smin, verdict, tuple(float(h) for h in horizons), rel, st.state
    )


def limit_estimate(
    traj: Trajectory, schedule: Sequence[float], tol: Tolerances = DEFAULT_TOL
) -> ClassSVerdict:
    """Limit ``X_inf`` (value at the last horizon) and class-(S) verdict."""
    if len(schedule) < 3:
        raise ScheduleTooShort(f"limit estimation needs >= 3 horizons, got {len(schedule)}")
    hs = [traj.scale.snap(h) for h in schedule]
    vals = [traj.at(h) for h in hs]
    zero = traj.kind == "vector" and not np.any(traj.values)
    return classify_limit(hs, vals, traj.kind, tol, zero)


# ---------------------------------------------------------------------------
# Gronwall bounds


def gronwall_envelope_path(
    ts: TimeScale, norm_a: Any, x0_norm: float, a: float, spec: GridSpec, tol: Tolerances = DEFAULT_TOL
) -> tuple[Grid, np.ndarray]:
    grid, e = exp_scalar_path(ts, as_signal(norm_a), a, spec, tol)
    return grid, x0_norm * e


def gronwall_envelope(
    ts: TimeScale,
    norm_a: Any,
    x0_norm: float,
    a: float,
    t: float,
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> float:
    """Upper bound ``|x(a)| e_{|A|}(t, a)`` on every solution norm."""
    a, t = ts.snap(a), ts.snap(t)
    if t == a:
        return float(x0_norm)
    spec = GridSpec(t) if spec is None else spec.with_horizon(t)
    return float(gronwall_envelope_path(ts, norm_a, x0_norm, a, spec, tol)[1][-1])


def _lower_factors(ts: TimeScale, k: MatrixSignal, s: float, spec: GridSpec, tol: Tolerances, grid=None):
    """``e_{-k}(t, s)`` along the grid with jump factors ``max(1 - mu k, 0)``."""
    if grid is None:
        grid = ts.enumerate_grid(s, spec)
    kv = k.sample(grid.t)[:, 0, 0]
    if grid.purely_discrete:
        factors = np.maximum(1.0 - grid.mu[:-1] * kv[:-1], 0.0)
        return grid, np.concatenate(([1.0], np.cumprod(factors)))
    out = np.empty(len(grid))
    out[0] = val = 1.0
    m = spec.rk_substeps
    for i in range(len(grid) - 1):
        mu = grid.mu[i]
        if mu > 0:
            val *= max(1.0 - mu * kv[i], 0.0)
        else:
            h = grid.t[i + 1] - grid.t[i]
            stages = k.sample(grid.t[i] + h * np.arange(2 * m + 1) / (2 * m))[:, 0, 0]
            hh = h / m
            for j in range(m):
                k0, k1, k2 = stages[2 * j], stages[2 * j + 1], stages[2 * j + 2]
                d1 = -k0 * val
                d2 = -k1 * (val + 0.5 * hh * d1)
                d3 = -k1 * (val + 0.5 * hh * d2)
                d4 = -k2 * (val + hh * d3)
                val = val + hh / 6.0 * (d1 + 2 * d2 + 2 * d3 + d4)
        out[i + 1] = val
    return grid, out


def gronwall_lower_path(
    ts: TimeScale,
    norm_a: Any,
    xs_norm: float,
    s: float,
    spec: GridSpec,
    tol: Tolerances = DEFAULT_TOL,
    form: str = "safe",
) -> tuple[Grid, np.ndarray]:
    k = as_signal(norm_a)
    if form == "inverse":
        grid, e = exp_scalar_path(ts, k, s, spec, tol)
        return grid, xs_norm / e
    if form != "safe":
        raise ValueError(f"unknown lower-bound form {form!r}")
    grid, f = _lower_factors(ts, k, s, spec, tol)
    return grid, xs_norm * f


def gronwall_lower(
    ts: TimeScale,
    norm_a: Any,
    xs_norm: float,
    s: float,
    t: float,
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
    form: str = "safe",
) -> float:
    """Lower bound on ``|x(t)|`` given ``|x(s)| = xs_norm``, ``s <= t``.

    ``form="safe"`` returns ``xs_norm * e_{-|A|}(t, s)``, i.e. the product of
    ``max(1 - mu |A|, 0)`` over jumps times ``exp(-∫|A|)`` over intervals.
    This holds on every time scale.  ``form="inverse"`` returns
    ``xs_norm / e_{|A|}(t, s)``, which coincides on ``T = R`` but can exceed
    ``|x(t)|`` when ``mu |A|`` is not small (e.g. ``A = -0.9`` on the
    integers).
    """
    s, t = ts.snap(s), ts.snap(t)
    if t < s:
        raise ValueError("gronwall_lower needs s <= t")
    if t == s:
        return float(xs_norm)
    spec = GridSpec(t) if spec is None else spec.with_horizon(t)
    return float(gronwall_lower_path(ts, norm_a, xs_norm, s, spec, tol, form)[1][-1])


# ---------------------------------------------------------------------------
# nonlinear systems


@dataclass(frozen=True)
class NonlinearField:
    """Right-hand side ``f(t, x)`` with ``|f(t, x)| <= K(t) |x|`` for ``|x| < delta``.

    ``kernel`` is an optional numba-compiled ``kernel(t, x, out)`` computing
    ``f(t, x)`` into ``out``; :func:`advance_nonlinear` uses it to march long
    runs of isolated points without Python overhead.
    """

    dim: int
    eval: Callable[[float, np.ndarray], np.ndarray]
    K: MatrixSignal
    delta_bound: float = math.inf
    kernel: Any = None

    def __post_init__(self):
        object.__setattr__(self, "K", as_signal(self.K))


def _rk4_field(f: NonlinearField, t0: float, h: float, x: np.ndarray, m: int) -> np.ndarray:
    hh = h / m
    for j in range(m):
        t = t0 + j * hh
        k1 = f.eval(t, x)
        k2 = f.eval(t + 0.5 * hh, x + 0.5 * hh * k1)
        k3 = f.eval(t + 0.5 * hh, x + 0.5 * hh * k2)
        k4 = f.eval(t + hh, x + hh * k3)
        x = x + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def _march(f: NonlinearField, grid: Grid, x: np.ndarray, m: int, store: np.ndarray | None) -> np.ndarray:
    delta = f.delta_bound
    mu, t = grid.mu, grid.t
    for i in range(len(grid) - 1):
        if mu[i] > 0:
            x = x + mu[i] * np.asarray(f.eval(float(t[i]), x), dtype=float)
        else:
            x = _rk4_field(f, float(t[i]), float(t[i + 1] - t[i]), x, m)
        nrm = float(np.linalg.norm(x))
        if not nrm < delta:
            raise DomainEscape(float(t[i + 1]), nrm, delta)
        if store is not None:
            store[i + 1] = x
    return x


def solve_nonlinear(
    ts: TimeScale, f: NonlinearField, x0: Sequence[float] | np.ndarray, a: float, spec: GridSpec
) -> Trajectory:
    """Solve ``x^Δ = f(t, x)``: ``x(sigma) = x + mu f(t, x)`` across jumps, RK4 inside intervals."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (f.dim,):
        raise DimensionMismatch(f"initial value shape {x0.shape}, field dimension {f.dim}")
    if not np.linalg.norm(x0) < f.delta_bound:
        raise DomainEscape(float(a), float(np.linalg.norm(x0)), f.delta_bound)
    grid = ts.enumerate_grid(a, spec)
    vals = np.empty((len(grid), f.dim))
    vals[0] = x0
    _march(f, grid, x0.copy(), spec.rk_substeps, vals)
    return Trajectory(grid, vals, ts, "vector")


_jit_cache: dict[str, Any] = {}


def _jit_runner():
    if "run" not in _jit_cache:
        import numba

        @numba.njit(cache=False)
        def run(kernel, t, mu, x, delta):
            buf = np.empty_like(x)
            for i in range(len(t) - 1):
                kernel(t[i], x, buf)
                s = 0.0
                for j in range(len(x)):
                    x[j] += mu[i] * buf[j]
                    s += x[j] * x[j]
                if not math.sqrt(s) < delta:
                    return i + 1
            return -1

        _jit_cache["run"] = run
    return _jit_cache["run"]


def advance_nonlinear(
    ts: TimeScale,
    f: NonlinearField,
    x0: Sequence[float] | np.ndarray,
    a: float,
    horizons: Sequence[float],
    spec: GridSpec | None = None,
    chunk: int = 1 << 22,
) -> np.ndarray:
    """States ``x(h)`` at the given horizons, without storing the trajectory.

    Same arithmetic as :func:`solve_nonlinear`; chunks consisting only of
    jump steps run through ``f.kernel`` when one is provided.
    """
    x = np.asarray(x0, dtype=float).copy()
    if x.shape != (f.dim,):
        raise DimensionMismatch(f"initial value shape {x.shape}, field dimension {f.dim}")
    hs = [ts.snap(h) for h in horizons]
    if any(b <= a_ for a_, b in zip(hs, hs[1:])):
        raise ValueError("schedule not increasing")
    spec = GridSpec(hs[-1]) if spec is None else spec.with_horizon(hs[-1])
    out = np.empty((len(hs), f.dim))
    runner = _jit_runner() if f.kernel is not None else None
    k = 0
    while k < len(hs) and hs[k] <= ts.snap(a):
        out[k] = x
        k += 1
    for g in ts.iter_grid(a, spec, chunk):
        # split the chunk at horizons so their states can be recorded
        cuts = [0]
        for h in hs[k:]:
            if h > g.t[-1]:
                break
            cuts.append(g.index(h, ts.epsilon_member))
        if cuts[-1] != len(g) - 1:
            cuts.append(len(g) - 1)
        for i, j in zip(cuts, cuts[1:]):
            sub = g.slice(i, j + 1)
            if runner is not None and sub.purely_discrete:
                bad = runner(f.kernel, sub.t, sub.mu, x, float(f.delta_bound))
                if bad >= 0:
                    raise DomainEscape(float(sub.t[bad]), float(np.linalg.norm(x)), f.delta_bound)
            else:
                x = _march(f, sub, x, spec.rk_substeps, None)
            if k < len(hs) and sub.t[-1] == hs[k]:
                out[k] = x
                k += 1
    return out


def theorem4_gate(
    ts: TimeScale,
    K: Any,
    x0_norm: float,
    delta: float,
    t0: float,
    schedule: Sequence[float],
    spec: GridSpec | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> tuple[bool, float]:
    """Smallness gate ``|x0| e_K(h, t0) < delta`` at every horizon, with ``e_K`` Cauchy.

    Returns ``(passed, sup of the envelope over the schedule)``.
    """
    t0 = ts.snap(t0)
    hs = check_schedule(ts, t0, schedule)
    spec = GridSpec(hs[-1]) if spec is None else spec.with_horizon(hs[-1])
    with np.errstate(over="ignore", invalid="ignore"):
        grid, e = exp_scalar_path(ts, as_signal(K), t0, spec, tol)
        env = x0_norm * e[grid.indices(hs, ts.epsilon_member)]
    sup = float(np.max(env)) if np.all(np.isfinite(env)) else math.inf
    stable = sequence_state(list(e[grid.indices(hs, ts.epsilon_member)]), tol).cauchy
    return bool(stable and sup < delta), sup
