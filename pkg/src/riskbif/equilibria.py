"""Equilibria of the reduced system, their spectra and stability.

The disease-free point and its eigenvalues are known in closed form.  The
endemic point has a closed form too, valid for ``R0 > 1``; it is always
checked against the vector field and a damped Newton iteration serves as
the independent oracle.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateError,
    DiscriminantError,
    DomainError,
    NegativeCoordinate,
    NoConvergence,
    SingularJacobian,
)
from .model import CoreState, ModelParams, jacobian_analytic, reduced_field

__all__ = [
    "HYPERBOLICITY_EPS",
    "ENDEMIC_THRESHOLD",
    "Equilibrium",
    "EndemicConstants",
    "NoEndemic",
    "r0",
    "endemic_constants",
    "discriminant",
    "disease_free_equilibrium",
    "endemic_closed_form",
    "newton_equilibrium",
    "eigenvalues_3x3",
    "char_poly",
    "classify",
]

HYPERBOLICITY_EPS = 1e-9
# relative to T_total
ENDEMIC_THRESHOLD = 1e-10
EQUILIBRIUM_TOL = 1e-8
SINGULAR_COND = 1e12

STABILITY_CLASSES = (
    "stable-node",
    "stable-focus",
    "saddle",
    "unstable-node",
    "unstable-focus",
    "nonhyperbolic",
)


@dataclasses.dataclass
class Equilibrium:
    coords: CoreState
    kind: str
    eigenvalues: np.ndarray
    stability: str
    residual: float
    iterations: int = 0
    note: str = ""

    @property
    def x(self) -> np.ndarray:
        return np.array(self.coords, dtype=float)

    def to_dict(self) -> dict:
        return {
            "coords": dict(self.coords._asdict()),
            "kind": self.kind,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "stability": self.stability,
            "residual": float(self.residual),
            "note": self.note,
        }


@dataclasses.dataclass(frozen=True)
class NoEndemic:
    reason: str
    R0: float

    found = False


@dataclasses.dataclass(frozen=True)
class EndemicConstants:
    R0: float
    D0: float
    C0: float
    C1: float


def r0(params: ModelParams) -> float:
    denom = params.mu + params.tau
    if denom == 0:
        raise DomainError("R0 undefined for mu + tau = 0")
    return params.beta / denom


# ---------------------------------------------------------------------------
# eigenvalues


def char_poly(m) -> tuple[float, float, float]:
    """Coefficients ``(c2, c1, c0)`` of ``det(lambda I - M) = l^3 + c2 l^2 + c1 l + c0``."""
    m = np.asarray(m, dtype=float)
    c2 = -(m[0, 0] + m[1, 1] + m[2, 2])
    c1 = (
        m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
        + m[0, 0] * m[2, 2] - m[0, 2] * m[2, 0]
        + m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1]
    )
    det = (
        m[0, 0] * (m[1, 1] * m[2, 2] - m[1, 2] * m[2, 1])
        - m[0, 1] * (m[1, 0] * m[2, 2] - m[1, 2] * m[2, 0])
        + m[0, 2] * (m[1, 0] * m[2, 1] - m[1, 1] * m[2, 0])
    )
    return c2, c1, -det


def _polish(r: float, c2: float, c1: float, c0: float, iters: int = 4) -> float:
    # Newton on the cubic; keep the iterate only while the residual drops
    best = r
    best_res = abs(((r + c2) * r + c1) * r + c0)
    for _ in range(iters):
        p = ((r + c2) * r + c1) * r + c0
        dp = (3.0 * r + 2.0 * c2) * r + c1
        if dp == 0 or best_res == 0:
            break
        r = r - p / dp
        res = abs(((r + c2) * r + c1) * r + c0)
        if res < best_res:
            best, best_res = r, res
        else:
            break
    return best


def _quadratic_roots(B: float, C: float) -> list[complex]:
    d = B * B - 4.0 * C
    if d < 0:
        re = -0.5 * B
        im = 0.5 * math.sqrt(-d)
        return [complex(re, im), complex(re, -im)]
    s = math.sqrt(d)
    q = -0.5 * (B + math.copysign(s, B))
    if q == 0:
        return [0j, 0j]
    return [complex(q), complex(C / q)]


def _cbrt(x: float) -> float:
    return math.copysign(abs(x) ** (1.0 / 3.0), x)


def eigenvalues_3x3(m) -> np.ndarray:
    """Eigenvalues of a real 3x3 matrix from its characteristic cubic.

    Three real roots use the trigonometric form; otherwise Cardano gives the
    real root and the complex pair comes from the deflated quadratic.  Output
    is sorted by real part (descending), then imaginary part (descending).
    """
    c2, c1, c0 = char_poly(m)
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2**3 / 27.0 - c2 * c1 / 3.0 + c0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3

    if disc <= 0:
        if p == 0:
            roots = [complex(_polish(-shift, c2, c1, c0))] * 3
        else:
            rad = 2.0 * math.sqrt(-p / 3.0)
            arg = max(-1.0, min(1.0, 3.0 * q / (2.0 * p) * math.sqrt(-3.0 / p)))
            phi = math.acos(arg) / 3.0
            roots = [
                complex(_polish(rad * math.cos(phi - 2.0 * math.pi * k / 3.0) - shift, c2, c1, c0))
                for k in range(3)
            ]
    else:
        sq = math.sqrt(disc)
        u = _cbrt(-q / 2.0 - math.copysign(sq, q))
        t = u - p / (3.0 * u) if u != 0 else 0.0
        r = _polish(t - shift, c2, c1, c0)
        # synthetic division by (l - r)
        B = c2 + r
        C = c1 + r * B
        roots = [complex(r)] + _quadratic_roots(B, C)

    return np.array(sorted(roots, key=lambda z: (-z.real, -z.imag)), dtype=complex)


def classify(eigenvalues: Sequence[complex], eps: float = HYPERBOLICITY_EPS) -> str:
    ev = np.asarray(eigenvalues, dtype=complex)
    re = ev.real
    if np.any(np.abs(re) <= eps):
        return "nonhyperbolic"
    has_pair = bool(np.any(np.abs(ev.imag) > eps))
    if np.all(re < 0):
        return "stable-focus" if has_pair else "stable-node"
    if np.all(re > 0):
        return "unstable-focus" if has_pair else "unstable-node"
    return "saddle"


# ---------------------------------------------------------------------------
# equilibria


def _residual(f, x) -> float:
    return float(np.max(np.abs(f(x))))


def _kind(x, params: ModelParams) -> str:
    return "endemic" if x[1] > ENDEMIC_THRESHOLD * params.T_total else "disease-free"


def disease_free_equilibrium(params: ModelParams) -> Equilibrium:
    mu = params.mu
    S0 = params.T_total / (mu + 1.0)
    x = np.array([S0, 0.0, 0.0])
    ev = np.array(
        [-(mu + 1.0), params.beta - (mu + params.tau), -(mu + params.gamma)], dtype=complex
    )
    # the eigenvalues are exact up to one rounding, so the hyperbolicity band
    # shrinks to roundoff and the class flips exactly where R0 crosses 1
    eps = 4 * np.finfo(float).eps * (1.0 + params.beta + mu + params.tau + params.gamma)
    return Equilibrium(
        coords=CoreState(S0, 0.0, 0.0),
        kind="disease-free",
        eigenvalues=ev,
        stability=classify(ev, eps),
        residual=_residual(reduced_field(params), x),
    )


def discriminant(params: ModelParams) -> float:
    """The quantity under the square root in the endemic closed form."""
    R0 = r0(params)
    eta, gamma, mu, tau = params.eta, params.gamma, params.mu, params.tau
    return (
        2 * tau * (gamma * (2 * eta - 1) + eta * mu + (eta - 1) * R0 * (mu + tau))
        + (gamma + eta * mu - (eta - 1) * R0 * (mu + tau)) ** 2
        + tau**2
    )


def endemic_constants(params: ModelParams) -> EndemicConstants:
    R0 = r0(params)
    eta, gamma, mu, tau = params.eta, params.gamma, params.mu, params.tau
    if tau == 0:
        raise DegenerateError("closed form requires tau > 0")
    if R0 == 1:
        raise DegenerateError("closed form is singular at R0 = 1")
    D0 = discriminant(params)
    if D0 < 0:
        raise DiscriminantError(f"D0 = {D0} < 0")
    sD = math.sqrt(D0)
    C0 = (sD + gamma + eta * mu + tau - R0 * (eta - 1) * (mu - tau)) / (2 * tau * (R0 - 1))
    k = R0 * (mu + tau)
    C1 = (
        (R0 - 1)
        * (params.a1 * (gamma + eta * mu + sD - eta * k + k - tau) + 2 * params.a2 * tau)
        / (R0 * (gamma + eta * mu + 2 * eta * tau + sD - eta * k + k - tau))
    )
    return EndemicConstants(R0=R0, D0=D0, C0=C0, C1=C1)


def _closed_form_point(params: ModelParams, c: EndemicConstants) -> np.ndarray:
    R0, eta, mu, tau = c.R0, params.eta, params.mu, params.tau
    sD = math.sqrt(c.D0)
    denom = (
        R0
        * (params.gamma + eta * mu + 2 * eta * tau + sD - (eta - 1) * R0 * (mu + tau) - tau)
        * (mu * math.exp(c.C1) + 1)
    )
    U1 = 2 * params.T_total * (R0 - 1) * tau / denom
    S1 = c.C0 * U1
    I1 = S1 * (R0 - 1) + U1 * (R0 * (1 - eta) - 1)
    return np.array([S1, I1, U1])


def endemic_closed_form(params: ModelParams, tol: float | None = None) -> Equilibrium | NoEndemic:
    """Endemic equilibrium from its closed form.

    The point is accepted when the max-norm residual of the vector field is
    below ``tol`` (default ``1e-8 * T_total``).  Otherwise Newton refinement
    takes over and the result carries a note saying so.
    """
    R0 = r0(params)
    if R0 <= 1:
        return NoEndemic(reason="R0 <= 1", R0=R0)
    if tol is None:
        tol = EQUILIBRIUM_TOL * params.T_total
    c = endemic_constants(params)
    x = _closed_form_point(params, c)
    f = reduced_field(params)
    res = _residual(f, x) if np.all(np.isfinite(x)) and x.sum() > 0 else math.inf
    if res <= tol and np.all(x >= 0):
        ev = eigenvalues_3x3(jacobian_analytic(x, params))
        return Equilibrium(
            coords=CoreState(*map(float, x)),
            kind=_kind(x, params),
            eigenvalues=ev,
            stability=classify(ev),
            residual=res,
            note="closed-form",
        )
    guess = x if np.all(np.isfinite(x)) and np.all(x > 0) else _endemic_guess(params)
    eq = newton_equilibrium(guess, params, tol=tol)
    eq.note = f"closed form inconsistent (residual {res:.3e}); Newton result"
    return eq


def _endemic_guess(params: ModelParams) -> np.ndarray:
    # crude interior point, used only when the closed form is unusable
    T = params.T_total
    return np.array([0.5 * T / (1 + params.mu), 0.1 * T, 0.01 * T])


def newton_equilibrium(
    guess: Sequence[float],
    params: ModelParams,
    tol: float | None = None,
    max_iter: int = 50,
    max_halvings: int = 30,
) -> Equilibrium:
    """Damped Newton iteration on the reduced vector field.

    Steps are halved (up to ``max_halvings`` times) until the iterate stays in
    the nonnegative octant and the residual decreases.  The Jacobian is
    checked for singularity at every iterate, including the starting point.
    """
    T = params.T_total
    if tol is None:
        tol = EQUILIBRIUM_TOL * T
    f = reduced_field(params)
    x = np.array(guess, dtype=float)
    if x.sum() <= 0:
        raise DomainError("guess must have N > 0")
    floor = -1e-13 * T

    F = f(x)
    res = float(np.max(np.abs(F)))
    for it in range(max_iter + 1):
        J = jacobian_analytic(x, params)
        cond = np.linalg.cond(J)
        if not np.isfinite(cond) or cond > SINGULAR_COND:
            raise SingularJacobian(f"Jacobian condition number {cond:.3e} at {x}")
        if res <= tol:
            ev = eigenvalues_3x3(J)
            return Equilibrium(
                coords=CoreState(*map(float, x)),
                kind=_kind(x, params),
                eigenvalues=ev,
                stability=classify(ev),
                residual=res,
                iterations=it,
                note="newton",
            )
        if it == max_iter:
            break
        dx = np.linalg.solve(J, -F)
        lam = 1.0
        accepted = None
        feasible = None
        for _ in range(max_halvings + 1):
            xn = x + lam * dx
            if np.all(xn >= floor) and xn.sum() > 0:
                Fn = f(xn)
                rn = float(np.max(np.abs(Fn)))
                if feasible is None or rn < feasible[2]:
                    feasible = (xn, Fn, rn)
                if rn < res:
                    accepted = (xn, Fn, rn)
                    break
            lam *= 0.5
        if accepted is None:
            if feasible is None:
                raise NegativeCoordinate(f"Newton step leaves the octant from {x}")
            accepted = feasible
        x, F, res = accepted
    raise NoConvergence(f"no convergence after {max_iter} iterations (residual {res:.3e})")
