"""Dormand-Prince 5(4) integrator with continuous output.

Autonomous systems only.  Steps are propagated with the fifth-order
solution (local extrapolation), the error is estimated from the embedded
fourth-order solution, and every accepted step carries a quartic interpolant
built from the FSAL stage.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Callable, Iterator

import numpy as np

from ..errors import DomainError, StepSizeUnderflow

__all__ = ["Step", "Trajectory", "DormandPrince", "integrate"]

# Butcher tableau
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# fifth minus fourth order weights
E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# quartic continuous extension, y(t0 + s h) = y0 + h * K^T P [s, s^2, s^3, s^4]
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_A_ROWS = [np.array(row) for row in A]

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@dataclasses.dataclass
class Step:
    """One accepted step with its interpolant."""

    t0: float
    y0: np.ndarray
    t1: float
    y1: np.ndarray
    K: np.ndarray
    _Q: np.ndarray | None = dataclasses.field(default=None, repr=False)

    @property
    def h(self) -> float:
        return self.t1 - self.t0

    def __call__(self, t: float) -> np.ndarray:
        h = self.t1 - self.t0
        if h == 0:
            return self.y0.copy()
        if self._Q is None:
            self._Q = self.K.T @ P
        s = (t - self.t0) / h
        return self.y0 + h * (self._Q @ np.array([s, s * s, s**3, s**4]))


@dataclasses.dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    n_accepted: int
    n_rejected: int
    status: str = "success"
    steps: list = dataclasses.field(default_factory=list, repr=False)

    @property
    def success(self) -> bool:
        return self.status == "success"

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    def __call__(self, t: float) -> np.ndarray:
        """Evaluate the continuous output (only if steps were kept)."""
        if not self.steps:
            raise ValueError("trajectory was built without dense output")
        idx = int(np.searchsorted(self.times, t, side="left"))
        idx = min(max(idx, 1), len(self.steps))
        return self.steps[idx - 1](t)


def _rms(x: np.ndarray) -> float:
    return math.sqrt(float(np.dot(x, x)) / x.size)


class DormandPrince:
    """Adaptive stepper; iterate :meth:`steps` to advance.

    ``floor`` enables the negative-coordinate guard: a step producing a
    component below ``floor`` is rejected and retried with half the step.
    """

    def __init__(
        self,
        f: Callable[[np.ndarray], np.ndarray],
        y0,
        t0: float,
        t_end: float,
        rtol: float = 1e-10,
        atol: float = 1e-12,
        floor: float | None = None,
        h0: float | None = None,
        max_step: float = math.inf,
        max_steps: int = 2_000_000,
    ):
        if rtol <= 0 or atol <= 0:
            raise ValueError("tolerances must be positive")
        if not (math.isfinite(t0) and math.isfinite(t_end)) or t_end < t0:
            raise ValueError("need finite t0 <= t_end")
        self.f = f
        self.t = float(t0)
        self.y = np.array(y0, dtype=float)
        self.t_end = float(t_end)
        self.rtol = rtol
        self.atol = atol
        self.floor = floor
        self.max_step = max_step
        self.max_steps = max_steps
        self.n_accepted = 0
        self.n_rejected = 0
        self.fy = np.asarray(f(self.y), dtype=float)
        self.h = h0 if h0 is not None else self._initial_step()

    def _initial_step(self) -> float:
        span = self.t_end - self.t
        if span == 0:
            return 0.0
        scale = self.atol + self.rtol * np.abs(self.y)
        d0 = _rms(self.y / scale)
        d1 = _rms(self.fy / scale)
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
        try:
            f1 = np.asarray(self.f(self.y + h0 * self.fy), dtype=float)
            d2 = _rms((f1 - self.fy) / scale) / h0
        except DomainError:
            return h0 * 1e-3
        if d1 <= 1e-15 and d2 <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, span, self.max_step)

    def _attempt(self, h: float):
        f, y = self.f, self.y
        K = np.empty((7, y.size))
        K[0] = self.fy
        for i in range(1, 7):
            yi = y + h * (_A_ROWS[i] @ K[:i])
            K[i] = f(yi)
        y_new = y + h * (B[:6] @ K[:6])
        # K[6] is f(y_new) because the last stage row equals B
        err = h * (E @ K)
        scale = self.atol + self.rtol * np.maximum(np.abs(y), np.abs(y_new))
        return y_new, K, _rms(err / scale)

    def steps(self) -> Iterator[Step]:
        while self.t < self.t_end:
            if self.n_accepted >= self.max_steps:
                raise StepSizeUnderflow(f"maximum number of steps ({self.max_steps}) exceeded")
            h = min(self.h, self.max_step, self.t_end - self.t)
            domain_failure = None
            while True:
                if h <= 16 * np.finfo(float).eps * max(1.0, abs(self.t)):
                    if domain_failure is not None:
                        raise DomainError(f"cannot step past t = {self.t}: {domain_failure}")
                    raise StepSizeUnderflow(f"step size underflow at t = {self.t}")
                try:
                    y_new, K, err = self._attempt(h)
                except DomainError as exc:
                    domain_failure = exc
                    self.n_rejected += 1
                    h *= 0.5
                    continue
                if not np.all(np.isfinite(y_new)) or not np.isfinite(err):
                    self.n_rejected += 1
                    h *= 0.5
                    continue
                if self.floor is not None and np.any(y_new < self.floor):
                    self.n_rejected += 1
                    h *= 0.5
                    continue
                if err <= 1.0:
                    break
                self.n_rejected += 1
                h *= max(MIN_FACTOR, SAFETY * err ** (-0.2))

            t_new = self.t + h
            if self.t_end - t_new <= 16 * np.finfo(float).eps * max(1.0, abs(self.t_end)):
                t_new = self.t_end
            step = Step(self.t, self.y, t_new, y_new, K)
            factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** (-0.2))
            self.h = h * max(MIN_FACTOR, factor)
            self.t, self.y, self.fy = t_new, y_new, K[6]
            self.n_accepted += 1
            yield step


def integrate(
    rhs: Callable[[np.ndarray], np.ndarray],
    x0,
    t_span: tuple[float, float],
    rel_tol: float = 1e-10,
    abs_tol: float = 1e-12,
    *,
    floor: float | None = None,
    dense: bool = False,
    max_step: float = math.inf,
) -> Trajectory:
    """Integrate ``x' = rhs(x)`` over ``t_span`` recording every accepted step.

    Errors from the stepper propagate; ``StepSizeUnderflow`` is raised for
    stiff or invalid regions and ``DomainError`` if the vector field cannot
    be evaluated even at tiny steps.
    """
    t0, t1 = map(float, t_span)
    x0 = np.array(x0, dtype=float)
    stepper = DormandPrince(rhs, x0, t0, t1, rel_tol, abs_tol, floor=floor, max_step=max_step)
    times = [t0]
    states = [x0]
    kept = []
    for step in stepper.steps():
        times.append(step.t1)
        states.append(step.y1)
        if dense:
            kept.append(step)
    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        n_accepted=stepper.n_accepted,
        n_rejected=stepper.n_rejected,
        steps=kept,
    )
