"""Limit cycles as fixed points of a Poincaré return map."""

from __future__ import annotations

import dataclasses
import logging
import math
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from ..equilibria import NoEndemic, disease_free_equilibrium, endemic_closed_form
from ..errors import (
    ContinuationBroken,
    DomainError,
    MaxReturnsExceeded,
    NegativeCoordinate,
    NoCrossing,
    StepSizeUnderflow,
)
from ..model import CoreState, ModelParams, reduced_field
from .integrator import integrate
from .poincare import SectionSpec, iter_crossings

__all__ = [
    "CycleResult",
    "NoCycle",
    "HomoclinicTable",
    "limit_cycle",
    "find_limit_cycle",
    "model_section",
    "homoclinic_proximity",
]

log = logging.getLogger(__name__)

_ESCAPES = (DomainError, StepSizeUnderflow, NegativeCoordinate)


@dataclasses.dataclass
class CycleResult:
    fixed_point: np.ndarray
    period: float
    amplitude: float
    min_distance: float | None
    closure: float
    history: list
    n_returns: int

    found = True

    def to_dict(self) -> dict:
        return {
            "found": True,
            "fixed_point": [float(v) for v in self.fixed_point],
            "period": float(self.period),
            "amplitude": float(self.amplitude),
            "min_distance_to_E0": None if self.min_distance is None else float(self.min_distance),
            "closure": float(self.closure),
            "n_returns": self.n_returns,
            "history": [float(h) for h in self.history],
        }


@dataclasses.dataclass
class NoCycle:
    reason: str
    history: list = dataclasses.field(default_factory=list)

    found = False

    def to_dict(self) -> dict:
        return {"found": False, "reason": self.reason, "history": [float(h) for h in self.history]}


class _ReturnMap:
    def __init__(self, rhs, section, t_return, rtol, atol, floor):
        self.rhs = rhs
        self.section = section
        self.t_return = t_return
        self.rtol, self.atol, self.floor = rtol, atol, floor
        self.last_state = None
        self.steps = None

    def __call__(self, x, keep_steps=False):
        self.steps = [] if keep_steps else None
        last = [None]

        def on_step(step):
            last[0] = step
            if self.steps is not None:
                self.steps.append(step)

        it = iter_crossings(
            self.rhs, x, self.section, self.t_return,
            rtol=self.rtol, atol=self.atol, floor=self.floor, on_step=on_step,
        )
        c = next(it, None)
        self.last_state = None if last[0] is None else last[0].y1
        if c is None:
            raise NoCrossing("no return to the section")
        return c


def _aitken(x0, x1, x2):
    d1 = x1 - x0
    d2 = x2 - 2.0 * x1 + x0
    out = x2.copy()
    mask = np.abs(d2) > 1e-14 * (1.0 + np.abs(x2))
    out[mask] = x2[mask] - (x2[mask] - x1[mask]) ** 2 / d2[mask]
    if not np.all(np.isfinite(out)) or not np.any(mask) or np.allclose(d1, 0):
        return None
    return out


def limit_cycle(
    rhs: Callable[[np.ndarray], np.ndarray],
    section: SectionSpec,
    seed,
    *,
    tol: float = 1e-9,
    equilibrium=None,
    reference=None,
    scale: float = 1.0,
    amplitude_index: int = 1,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    floor: float | None = None,
    max_returns: int = 200,
    t_return: float = 1000.0,
    contraction_radius: float = 1e-3,
    contraction_count: int = 5,
    refine: bool = True,
) -> CycleResult | NoCycle:
    """Locate a periodic orbit through ``section`` by iterating the return map.

    Plain fixed-point iteration with Aitken acceleration runs until two
    successive returns differ by at most ``tol`` (max norm); a Newton solve
    with a finite-difference return-map Jacobian then polishes the point.
    Returns :class:`NoCycle` when the returns contract onto ``equilibrium``
    (``contraction_count`` successive decreases ending inside
    ``contraction_radius * scale``) or when the orbit leaves the domain.
    """
    P = _ReturnMap(rhs, section, t_return, rtol, atol, floor)
    eq = None if equilibrium is None else np.asarray(equilibrium, dtype=float)
    history: list[float] = []

    def near_eq(x):
        return eq is not None and x is not None and np.max(np.abs(x - eq)) < contraction_radius * scale

    def no_return():
        if near_eq(P.last_state):
            return NoCycle("converges-to-equilibrium", history)
        return NoCycle("no-return", history)

    try:
        x = P(seed).state
    except NoCrossing:
        return no_return()
    except _ESCAPES:
        return NoCycle("escaped", history)

    window = [x]
    shrinking = 0
    d_prev = math.inf
    converged = False
    n_returns = 0
    for _ in range(max_returns):
        try:
            c = P(x)
        except NoCrossing:
            return no_return()
        except _ESCAPES:
            return NoCycle("escaped", history)
        n_returns += 1
        x_new = c.state
        delta = float(np.max(np.abs(x_new - x)))
        history.append(delta)
        if delta <= tol:
            x = x_new
            converged = True
            break

        if eq is not None:
            d = float(np.max(np.abs(x_new - eq)))
            shrinking = shrinking + 1 if d < d_prev else 0
            d_prev = d
            if shrinking >= contraction_count and d < contraction_radius * scale:
                return NoCycle("converges-to-equilibrium", history)

        window.append(x_new)
        x = x_new
        if len(window) >= 3:
            x_acc = _aitken(*window[-3:])
            window = [x]
            if x_acc is not None:
                x_acc = section.from_coords(section.to_coords(x_acc))
            # extrapolation also points at repelling foci; never jump onto one
            if x_acc is not None and not near_eq(x_acc):
                try:
                    c_acc = P(x_acc)
                except (NoCrossing, *_ESCAPES):
                    continue
                n_returns += 1
                r_acc = float(np.max(np.abs(c_acc.state - x_acc)))
                if r_acc < delta:
                    x = c_acc.state
                    window = [x]
                    history.append(r_acc)
                    if r_acc <= tol:
                        converged = True
                        break
    if not converged:
        raise MaxReturnsExceeded(f"return map not converged after {max_returns} returns")
    if near_eq(x):
        # Aitken can land exactly on a spiral's focus
        return NoCycle("converges-to-equilibrium", history)

    if refine:
        x, extra = _newton_refine(P, section, x, tol, scale)
        n_returns += extra

    c = P(x, keep_steps=True)
    steps = P.steps
    period = c.t
    dense = _Dense(steps, period)
    k = amplitude_index
    hi = -dense.extremum(lambda y: -y[k])
    lo = dense.extremum(lambda y: y[k])
    amp = float(hi - lo)
    min_dist = None
    if reference is not None:
        ref = np.asarray(reference, dtype=float)
        min_dist = float(dense.extremum(lambda y: float(np.linalg.norm(y - ref))))
    tr = integrate(rhs, x, (0.0, period), rtol, atol, floor=floor)
    closure = float(np.max(np.abs(tr.final - x)))
    return CycleResult(
        fixed_point=np.asarray(x, dtype=float),
        period=float(period),
        amplitude=amp,
        min_distance=min_dist,
        closure=closure,
        history=history,
        n_returns=n_returns,
    )


class _Dense:
    """Continuous output over ``[0, t_end]`` assembled from accepted steps."""

    def __init__(self, steps, t_end, per_step: int = 8):
        self.steps = steps
        self.t_end = t_end
        self.starts = np.array([st.t0 for st in steps])
        ts = []
        for st in steps:
            for s in np.linspace(0.0, 1.0, per_step, endpoint=False):
                t = st.t0 + s * (st.t1 - st.t0)
                if t <= t_end:
                    ts.append(t)
        ts.append(t_end)
        self.ts = np.array(ts)

    def __call__(self, t):
        i = int(np.searchsorted(self.starts, t, side="right")) - 1
        i = min(max(i, 0), len(self.steps) - 1)
        return self.steps[i](t)

    def extremum(self, g) -> float:
        """Minimum of ``g(y(t))`` over the period, polished by Brent's method."""
        vals = np.array([g(self(t)) for t in self.ts])
        i = int(np.argmin(vals))
        a = self.ts[max(i - 1, 0)]
        b = self.ts[min(i + 1, len(self.ts) - 1)]
        if b <= a:
            return float(vals[i])
        r = minimize_scalar(lambda t: g(self(t)), bounds=(a, b), method="bounded",
                            options={"xatol": 1e-12 * max(1.0, b)})
        return float(min(r.fun, vals[i]))


def _newton_refine(P, section, x, tol, scale, max_iter: int = 3):
    # Newton on G(c) = coords(P(c)) - c, Jacobian by forward differences
    c = section.to_coords(x)
    extra = 0

    def G(cc):
        return section.to_coords(P(section.from_coords(cc)).state) - cc

    try:
        g = G(c)
        extra += 1
        for _ in range(max_iter):
            res = float(np.max(np.abs(g)))
            if res <= 1e-3 * tol:
                break
            h = max(1e-7 * scale, 1e3 * res)
            J = np.empty((c.size, c.size))
            for j in range(c.size):
                e = np.zeros(c.size)
                e[j] = h
                J[:, j] = (G(c + e) - g) / h
                extra += 1
            dc = np.linalg.solve(J, -g)
            c_new = c + dc
            g_new = G(c_new)
            extra += 1
            if float(np.max(np.abs(g_new))) >= res:
                break
            c, g = c_new, g_new
    except (NoCrossing, np.linalg.LinAlgError, *_ESCAPES):
        pass
    return section.from_coords(c), extra


# ---------------------------------------------------------------------------
# model wrappers


def model_section(params: ModelParams, anchor=None) -> SectionSpec:
    """Plane ``I = I1`` through the endemic equilibrium, crossed upward."""
    if anchor is None:
        e1 = endemic_closed_form(params)
        if isinstance(e1, NoEndemic):
            raise ValueError("no endemic equilibrium to anchor the section")
        anchor = e1.x
    return SectionSpec(normal=(0.0, 1.0, 0.0), anchor=tuple(anchor), direction="+")


def find_limit_cycle(
    params: ModelParams,
    section: SectionSpec | None = None,
    seed_state: Sequence[float] | None = None,
    tol: float | None = None,
    *,
    rtol: float = 1e-10,
    atol: float | None = None,
    max_returns: int = 200,
    t_return: float = 2000.0,
) -> CycleResult | NoCycle:
    """Look for a periodic orbit of the reduced model around ``E1``.

    Defaults: section ``I = I1`` crossed upward, seed ``E1 + 0.01 T e_S``,
    tolerances ``tol = 1e-9 T`` and ``atol = 1e-12 T``.
    """
    T = params.T_total
    e1 = endemic_closed_form(params)
    if isinstance(e1, NoEndemic):
        return NoCycle("no-endemic-equilibrium")
    if section is None:
        section = model_section(params, e1.x)
    if seed_state is None:
        seed_state = e1.x + np.array([0.01 * T, 0.0, 0.0])
    if tol is None:
        tol = 1e-9 * T
    if atol is None:
        atol = 1e-12 * T
    e0 = disease_free_equilibrium(params)
    return limit_cycle(
        reduced_field(params),
        section,
        np.asarray(seed_state, dtype=float),
        tol=tol,
        equilibrium=e1.x,
        reference=e0.x,
        scale=T,
        amplitude_index=1,
        rtol=rtol,
        atol=atol,
        floor=-100 * atol,
        max_returns=max_returns,
        t_return=t_return,
    )


@dataclasses.dataclass
class HomoclinicTable:
    param: str
    rows: list  # (value, period, min_distance_to_E0, amplitude)
    stop_value: float | None = None
    stop_reason: str | None = None
    violations: list = dataclasses.field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "param": self.param,
            "rows": [
                {"value": v, "period": p, "min_distance_to_E0": d, "amplitude": a}
                for v, p, d, a in self.rows
            ],
            "stop_value": self.stop_value,
            "stop_reason": self.stop_reason,
            "violations": self.violations,
        }


def homoclinic_proximity(
    params: ModelParams,
    param_name: str,
    values: Sequence[float],
    **cycle_kwargs,
) -> HomoclinicTable:
    """Continue a cycle along a parameter ramp toward a homoclinic loop.

    Each step is seeded with the previous fixed point.  Growth of the period
    and shrinking distance to ``E0`` are expected but only checked softly;
    violations are logged and kept on the table.  The ramp ends at the
    first value where no cycle is found.
    """
    table = HomoclinicTable(param=param_name, rows=[])
    seed = None
    for i, v in enumerate(values):
        p = params.replace(**{param_name: float(v)})
        try:
            res = find_limit_cycle(p, seed_state=seed, **cycle_kwargs)
        except (MaxReturnsExceeded, *_ESCAPES) as exc:
            raise ContinuationBroken(f"continuation failed at {param_name} = {v}: {exc}") from exc
        if not res.found:
            if i == 0:
                raise ContinuationBroken(f"no cycle at ramp start ({param_name} = {v}): {res.reason}")
            table.stop_value = float(v)
            table.stop_reason = res.reason
            break
        table.rows.append((float(v), res.period, res.min_distance, res.amplitude))
        seed = res.fixed_point

    for (v0, p0, d0, _), (v1, p1, d1, _) in zip(table.rows, table.rows[1:]):
        if p1 < p0:
            msg = f"period decreased from {p0:.6g} to {p1:.6g} between {v0} and {v1}"
            log.warning(msg)
            table.violations.append(msg)
        if d1 > d0:
            msg = f"distance to E0 grew from {d0:.6g} to {d1:.6g} between {v0} and {v1}"
            log.warning(msg)
            table.violations.append(msg)
    return table
