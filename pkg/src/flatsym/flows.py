"""Flows of the frame fields on U and the Jacobi pair along Y-orbits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .metrics import DEFAULT_STEP, FinslerModel, UPoint, frame_fast, frame_vectors

Y_MIN = 1e-6
FIELDS = ("X", "Y", "Z")


class StiffnessError(RuntimeError):
    pass


class CurvatureSignError(RuntimeError):
    pass


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class Solution:
    """Accepted nodes of an adaptive run with cubic Hermite dense output."""

    ts: np.ndarray
    ys: np.ndarray
    dys: np.ndarray
    truncated: bool = False
    rejected: int = 0

    def __call__(self, t: float) -> np.ndarray:
        ts = self.ts
        forward = ts[-1] >= ts[0]
        key = ts if forward else -ts
        tt = t if forward else -t
        if not key[0] - 1e-12 <= tt <= key[-1] + 1e-12:
            raise ValueError(f"t={t} outside integrated range")
        i = int(np.clip(np.searchsorted(key, tt) - 1, 0, len(ts) - 2))
        t0, t1 = ts[i], ts[i + 1]
        h = t1 - t0
        s = (t - t0) / h
        y0, y1, d0, d1 = self.ys[i], self.ys[i + 1], self.dys[i], self.dys[i + 1]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        return h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t_end: float,
    tol: float = 1e-10,
    h0: float | None = None,
    stop: Callable[[np.ndarray], bool] | None = None,
    h_min: float = 1e-14,
    max_steps: int = 100000,
) -> Solution:
    """Adaptive Dormand-Prince 5(4) from t = 0 to t_end (either sign).

    Local error is held below tol * (1 + |y|) componentwise. ``stop`` ends
    the run early (flagged as truncated) once it returns True on a state.
    """
    y = np.array(y0, dtype=float)
    direction = 1.0 if t_end >= 0 else -1.0
    span = abs(t_end)
    ts, ys = [0.0], [y.copy()]
    f = np.asarray(rhs(0.0, y), dtype=float)
    dys = [f.copy()]
    if span == 0:
        return Solution(np.array(ts), np.array(ys), np.array(dys))
    h = h0 if h0 else min(span, 0.01 * span + 1e-3, 0.1)
    t = 0.0
    rejected = 0
    truncated = False
    for _ in range(max_steps):
        if t >= span * (1 - 1e-14):
            break
        h = min(h, span - t)
        k = np.zeros((7, y.size))
        k[0] = f
        for stage in range(1, 7):
            yi = y + direction * h * (np.array(_A[stage]) @ k[:stage])
            k[stage] = rhs(direction * (t + _C[stage] * h), yi)
        y5 = y + direction * h * (_B5 @ k)
        err = direction * h * ((_B5 - _B4) @ k)
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y5)))
        ratio = float(np.max(np.abs(err) / scale))
        if not np.isfinite(ratio):
            ratio = 1e10
        if ratio <= 1.0:
            t += h
            y = y5
            f = k[6]
            ts.append(direction * t)
            ys.append(y.copy())
            dys.append(f.copy())
            if stop is not None and stop(y):
                truncated = True
                break
        else:
            rejected += 1
        factor = 0.9 * ratio ** (-0.2) if ratio > 0 else 5.0
        h *= min(5.0, max(0.2, factor))
        if h < h_min and span - t > h_min:
            raise StiffnessError(f"step size underflow at t={direction * t}")
    else:
        raise StiffnessError("maximum number of steps exceeded")
    return Solution(np.array(ts), np.array(ys), np.array(dys), truncated, rejected)


@dataclass
class Trajectory:
    ts: np.ndarray
    states: np.ndarray
    field_id: str
    tolerance: float
    truncated: bool = False
    solution: Solution | None = field(default=None, repr=False)

    def point(self, i: int) -> UPoint:
        x, y, phi = self.states[i, :3]
        return UPoint(x, y, phi)

    def endpoint(self) -> np.ndarray:
        return self.states[-1, :3]

    def at(self, t: float) -> np.ndarray:
        return self.solution(t)


def _field_index(field_id: str) -> int:
    if field_id not in FIELDS:
        raise ValueError(f"field must be one of {FIELDS}")
    return FIELDS.index(field_id)


def vector_field(model: FinslerModel, field_id: str, h: float = DEFAULT_STEP):
    col = _field_index(field_id)

    def rhs(t, q):
        return frame_vectors(model, q[:3], h)[:, col]

    return rhs


def flow(model: FinslerModel, field_id: str, start: UPoint, t_end: float, tol: float = 1e-10) -> Trajectory:
    if not tol > 0:
        raise ValueError("tol must be positive")
    rhs = vector_field(model, field_id)
    sol = integrate(rhs, start.as_array(), t_end, tol, stop=lambda q: q[1] <= Y_MIN)
    return Trajectory(sol.ts, sol.ys, field_id, tol, sol.truncated, sol)


def flow_map(model: FinslerModel, field_id: str, q, t: float, tol: float = 1e-10) -> np.ndarray:
    """Endpoint of the flow as raw (x, y, phi) coordinates (phi not wrapped)."""
    if t == 0:
        return np.array(q, dtype=float)
    sol = integrate(vector_field(model, field_id), q, t, tol, stop=lambda s: s[1] <= Y_MIN)
    if sol.truncated:
        raise StiffnessError("flow left the half-plane")
    return sol.ys[-1]


@dataclass
class JacobiPair:
    """Samples (t, f1, f2, f1', f2', C, K) along the Y-orbit through ``anchor``."""

    anchor: UPoint
    ts: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f1p: np.ndarray
    f2p: np.ndarray
    C: np.ndarray
    K: np.ndarray
    states: np.ndarray
    solution: Solution | None = field(default=None, repr=False)

    def wronskian(self) -> np.ndarray:
        return self.f1 * self.f2p - self.f1p * self.f2

    def at(self, t: float):
        """(x, y, phi, f1, f1', f2, f2') at t via dense output."""
        if t == 0.0:
            return np.concatenate([self.anchor.as_array(), [1.0, 0.0, 0.0, -1.0]])
        neg, pos = self.solution
        return (neg if t < 0 else pos)(t)


def _jacobi_rhs(model: FinslerModel):
    def rhs(t, s):
        q = s[:3]
        fr = frame_fast(model, UPoint(q[0], q[1], q[2]))
        if fr.K >= 0:
            raise CurvatureSignError(f"K = {fr.K} >= 0 at {q}")
        f1, f1p, f2, f2p = s[3:]
        # f'' = C f' - K f
        return np.concatenate(
            [fr.Yvec, [f1p, fr.C * f1p - fr.K * f1, f2p, fr.C * f2p - fr.K * f2]]
        )

    return rhs


def jacobi(model: FinslerModel, anchor: UPoint, t_range=(-1.0, 1.0), tol: float = 1e-10) -> JacobiPair:
    """Integrate f'' - C f' + K f = 0 along the Y-flow with the canonical data."""
    t_lo, t_hi = t_range
    if t_lo > 0 or t_hi < 0:
        raise ValueError("t_range must contain 0")
    start = np.concatenate([anchor.as_array(), [1.0, 0.0, 0.0, -1.0]])
    rhs = _jacobi_rhs(model)
    stop = lambda s: s[1] <= Y_MIN  # noqa: E731
    neg = integrate(rhs, start, t_lo, tol, stop=stop)
    pos = integrate(rhs, start, t_hi, tol, stop=stop)
    ts = np.concatenate([neg.ts[:0:-1], pos.ts])
    states = np.vstack([neg.ys[:0:-1], pos.ys])
    cs, ks = [], []
    for s in states:
        fr = frame_fast(model, UPoint(*s[:3]))
        cs.append(fr.C)
        ks.append(fr.K)
    return JacobiPair(
        anchor,
        ts,
        states[:, 3],
        states[:, 5],
        states[:, 4],
        states[:, 6],
        np.array(cs),
        np.array(ks),
        states[:, :3],
        (neg, pos),
    )


def jacobi_at(model: FinslerModel, anchor: UPoint, t: float, tol: float = 1e-10):
    """(f1, f2, f1', f2') at a single t."""
    if t == 0:
        return 1.0, 0.0, 0.0, -1.0
    sol = integrate(_jacobi_rhs(model), np.concatenate([anchor.as_array(), [1.0, 0.0, 0.0, -1.0]]), t, tol)
    s = sol.ys[-1]
    return s[3], s[5], s[4], s[6]


def trajectory_rows(traj: Trajectory | JacobiPair):
    """Rows for the CSV export: t,x,y,phi[,f1,f2,f1p,f2p,C,K]."""
    if isinstance(traj, JacobiPair):
        for i, t in enumerate(traj.ts):
            x, y, phi = traj.states[i]
            yield (t, x, y, phi % (2 * math.pi), traj.f1[i], traj.f2[i], traj.f1p[i], traj.f2p[i], traj.C[i], traj.K[i])
    else:
        for t, s in zip(traj.ts, traj.states):
            yield (t, s[0], s[1], s[2] % (2 * math.pi))


def _transport_rhs(model: FinslerModel, theta_rate_sign: int):
    def rhs(t, s):
        fr = frame_fast(model, UPoint(s[0], s[1], s[2]))
        if fr.K >= 0:
            raise CurvatureSignError(f"K = {fr.K} >= 0 at {s[:3]}")
        f1, f1p, f2, f2p = s[3:7]
        rate = theta_rate_sign * fr.S
        # theta-bar = c omega + theta + e eta with d/dt theta-bar = rate * eta-bar
        # and eta-bar = -(f1' omega + f2' eta)
        return np.concatenate(
            [fr.Yvec, [f1p, fr.C * f1p - fr.K * f1, f2p, fr.C * f2p - fr.K * f2, -rate * f1p, -rate * f2p]]
        )

    return rhs


@dataclass(frozen=True)
class TransportCoefficients:
    f1: float
    f2: float
    f1p: float
    f2p: float
    c: float = 0.0
    e: float = 0.0


def transport_coefficients(
    model: FinslerModel, q, t: float, tol: float = 1e-10, theta_rate_sign: int = 1
) -> TransportCoefficients:
    """f1, f2, their t-derivatives and the theta-bar corrections c, e at (q, t)."""
    if model.kind == "hyperbolic":
        return TransportCoefficients(math.cosh(t), -math.sinh(t), math.sinh(t), -math.cosh(t))
    if t == 0:
        return TransportCoefficients(1.0, 0.0, 0.0, -1.0)
    start = np.concatenate([np.asarray(q, dtype=float), [1.0, 0.0, 0.0, -1.0, 0.0, 0.0]])
    sol = integrate(_transport_rhs(model, theta_rate_sign), start, t, tol)
    s = sol.ys[-1]
    return TransportCoefficients(s[3], s[5], s[4], s[6], s[7], s[8])


class JacobiFunctions:
    """f1, f2 and derivatives as functions of t for one anchor.

    Closed form cosh/-sinh for the hyperbolic model, dense output otherwise.
    """

    def __init__(self, model: FinslerModel, anchor: UPoint, half_width: float, tol: float = 1e-11):
        self.model = model
        self.anchor = anchor
        self.half_width = half_width
        self.pair = None
        if model.kind != "hyperbolic":
            self.pair = jacobi(model, anchor, (-half_width, half_width), tol)

    def values(self, t: float):
        """(f1, f2, f1', f2') at t."""
        if self.pair is None:
            return math.cosh(t), -math.sinh(t), math.sinh(t), -math.cosh(t)
        if abs(t) > self.half_width:
            raise ValueError(f"t={t} outside +-{self.half_width}")
        s = self.pair.at(t)
        return s[3], s[5], s[4], s[6]

    def f1(self, t):
        return self.values(t)[0]

    def f2(self, t):
        return self.values(t)[1]
