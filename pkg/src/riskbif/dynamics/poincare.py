"""Poincaré sections and crossing detection on the continuous output."""

from __future__ import annotations

import dataclasses
import math
import warnings
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from ..errors import NoCrossing, TangencyWarning
from .integrator import DormandPrince

__all__ = ["SectionSpec", "Crossing", "section_crossings", "iter_crossings"]

TANGENCY_TOL = 1e-8


@dataclasses.dataclass(frozen=True)
class SectionSpec:
    """Affine plane ``normal . (x - anchor) = 0`` with a crossing direction.

    ``direction`` is ``"+"`` (normal component of the flow positive),
    ``"-"`` or ``"both"``.  The normal is stored normalised.
    """

    normal: tuple
    anchor: tuple
    direction: str = "+"

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = float(np.linalg.norm(n))
        if norm == 0 or not math.isfinite(norm):
            raise ValueError("section normal must be a nonzero finite vector")
        if self.direction not in ("+", "-", "both"):
            raise ValueError(f"direction must be '+', '-' or 'both', got {self.direction!r}")
        a = np.asarray(self.anchor, dtype=float)
        if a.shape != n.shape:
            raise ValueError("normal and anchor must have the same dimension")
        object.__setattr__(self, "normal", tuple(float(v) for v in n / norm))
        object.__setattr__(self, "anchor", tuple(float(v) for v in a))

    @property
    def n(self) -> np.ndarray:
        return np.array(self.normal)

    @property
    def a(self) -> np.ndarray:
        return np.array(self.anchor)

    def value(self, x) -> float:
        return float(np.dot(self.n, np.asarray(x, dtype=float) - self.a))

    def basis(self) -> np.ndarray:
        """Orthonormal basis of the plane, one vector per row."""
        n = self.n
        # complete n to an orthonormal frame; rows 1.. span the plane
        _, _, vt = np.linalg.svd(n[None, :])
        return vt[1:]

    def to_coords(self, x) -> np.ndarray:
        return self.basis() @ (np.asarray(x, dtype=float) - self.a)

    def from_coords(self, c) -> np.ndarray:
        return self.a + np.asarray(c, dtype=float) @ self.basis()

    def accepts(self, g_before: float, g_after: float) -> bool:
        if self.direction == "+":
            return g_before < 0 < g_after
        if self.direction == "-":
            return g_before > 0 > g_after
        return g_before * g_after < 0


class Crossing(NamedTuple):
    t: float
    state: np.ndarray


def iter_crossings(
    rhs: Callable[[np.ndarray], np.ndarray],
    x0,
    section: SectionSpec,
    t_max: float,
    *,
    t0: float = 0.0,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    floor: float | None = None,
    on_step=None,
):
    """Yield crossings lazily; ``on_step(step)`` sees every accepted step.

    A start point lying on the section (to within roundoff) is not reported
    as a crossing.
    """
    n, a = section.n, section.a
    x0 = np.asarray(x0, dtype=float)
    g_scale = max(1.0, float(np.max(np.abs(x0))))
    g_prev = float(np.dot(n, x0 - a))
    if abs(g_prev) <= 1e-12 * g_scale:
        g_prev = 0.0
    xtol = min(2e-12, 1e-10 * t_max)
    stepper = DormandPrince(rhs, x0, t0, t0 + t_max, rtol, atol, floor=floor)
    for step in stepper.steps():
        if on_step is not None:
            on_step(step)
        g_new = float(np.dot(n, step.y1 - a))
        if g_prev != 0.0 and g_new != 0.0 and section.accepts(g_prev, g_new):
            tc = brentq(lambda t: float(np.dot(n, step(t) - a)), step.t0, step.t1, xtol=xtol)
            xc = step(tc)
            flow = float(np.dot(n, rhs(xc)))
            if abs(flow) < TANGENCY_TOL:
                warnings.warn(
                    f"near-tangent crossing at t = {tc} (normal flow {flow:.2e})",
                    TangencyWarning,
                    stacklevel=2,
                )
            yield Crossing(tc, xc)
        if g_new != 0.0:
            g_prev = g_new


def section_crossings(
    rhs: Callable[[np.ndarray], np.ndarray],
    x0,
    section: SectionSpec,
    t_max: float,
    max_crossings: int = 100,
    *,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    floor: float | None = None,
) -> list[Crossing]:
    """Integrate from ``x0`` and collect up to ``max_crossings`` crossings.

    Raises ``NoCrossing`` if nothing matching the requested direction is
    found before ``t_max``.
    """
    out = []
    for c in iter_crossings(rhs, x0, section, t_max, rtol=rtol, atol=atol, floor=floor):
        out.append(c)
        if len(out) >= max_crossings:
            break
    if not out:
        raise NoCrossing(f"no section crossing within t_max = {t_max}")
    return out
