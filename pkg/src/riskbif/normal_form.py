"""Quadratic normal-form coefficients at a double-zero (Bogdanov-Takens) point.

With the Jordan chain ``A q0 = 0, A q1 = q0`` and its adjoint
``A^T p1 = 0, A^T p0 = p1`` normalised so that ``<p0, q0> = <p1, q1> = 1``
and ``<p0, q1> = <p1, q0> = 0``, the restriction to the centre manifold is

    w1' = w2
    w2' = a2 w1^2 + b2 w1 w2 + ...

with ``a2 = <p1, B(q0, q0)> / 2`` and ``b2 = <p0, B(q0, q0)> + <p1, B(q0, q1)>``.
``B`` is the symmetric second derivative of the vector field.

An independent check samples the vector field on the quadratic centre
manifold graph and reads both coefficients off a least-squares fit.
"""

from __future__ import annotations

import dataclasses
import json
import math
from typing import Callable

import numpy as np

from .equilibria import disease_free_equilibrium, eigenvalues_3x3
from .io import SCHEMA_VERSION
from .errors import FitIllConditioned, IllConditioned, StructureError
from .model import ModelParams, jacobian_analytic, jacobian_fd, reduced_field

__all__ = [
    "SCHEMA_VERSION",
    "JordanChains",
    "TbtReport",
    "FitResult",
    "bilinear_form_B",
    "jordan_chains",
    "stable_pair",
    "quadratic_coefficients",
    "homological_H1",
    "reduced_fit_oracle",
    "bt_quadratic_coeffs",
    "bt_report",
]

STRUCTURE_TOL = 1e-8
HOMOLOGICAL_COND = 1e12
FIT_COND = 1e10
DISCREPANCY_FLAG = 0.05
# relative to 1 + |x0|_inf; balances truncation against cancellation
BILINEAR_STEP = 1e-3

Field = Callable[[np.ndarray], np.ndarray]


def _as_field(field_or_params) -> Field:
    if isinstance(field_or_params, ModelParams):
        return reduced_field(field_or_params)
    return field_or_params


def _vec(x) -> list[float]:
    return [float(v) for v in np.ravel(x)]


# ---------------------------------------------------------------------------
# second derivative


def _polarized(f: Field, x0: np.ndarray, u: np.ndarray, v: np.ndarray, h: float) -> np.ndarray:
    f0 = f(x0)
    plus = (f(x0 + h * (u + v)) + f0) - (f(x0 + h * u) + f(x0 + h * v))
    minus = (f(x0 - h * (u + v)) + f0) - (f(x0 - h * u) + f(x0 - h * v))
    return (plus + minus) / (2.0 * h * h)


def bilinear_form_B(
    x0,
    field_or_params,
    u,
    v,
    step: float = BILINEAR_STEP,
    richardson: bool = False,
) -> np.ndarray:
    """Symmetric second derivative ``B(u, v)`` of the field at ``x0``.

    Central polarisation differences along unit directions; the result is
    rescaled by ``|u| |v|``.  The stencil is symmetric in ``u`` and ``v`` so
    ``B(u, v) == B(v, u)`` exactly.  ``step`` is relative to ``1 + |x0|_inf``.
    """
    f = _as_field(field_or_params)
    x0 = np.asarray(x0, dtype=float)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = float(np.linalg.norm(u)), float(np.linalg.norm(v))
    if nu == 0 or nv == 0:
        return np.zeros_like(x0)
    uh, vh = u / nu, v / nv
    h = step * (1.0 + float(np.max(np.abs(x0))))
    out = _polarized(f, x0, uh, vh, h)
    if richardson:
        half = _polarized(f, x0, uh, vh, 0.5 * h)
        out = (4.0 * half - out) / 3.0
    return out * (nu * nv)


# ---------------------------------------------------------------------------
# Jordan chains


@dataclasses.dataclass(frozen=True)
class JordanChains:
    q0: np.ndarray
    q1: np.ndarray
    p0: np.ndarray
    p1: np.ndarray

    def residuals(self, A) -> dict:
        A = np.asarray(A, dtype=float)
        return {
            "Aq0": float(np.linalg.norm(A @ self.q0)),
            "Aq1_q0": float(np.linalg.norm(A @ self.q1 - self.q0)),
            "ATp1": float(np.linalg.norm(A.T @ self.p1)),
            "ATp0_p1": float(np.linalg.norm(A.T @ self.p0 - self.p1)),
            "p0q0": float(self.p0 @ self.q0),
            "p1q1": float(self.p1 @ self.q1),
            "p0q1": float(self.p0 @ self.q1),
            "p1q0": float(self.p1 @ self.q0),
        }

    def scaled(self, c: float) -> "JordanChains":
        """The chain with ``q`` scaled by ``c`` and ``p`` by ``1/c``."""
        return JordanChains(self.q0 * c, self.q1 * c, self.p0 / c, self.p1 / c)

    def to_dict(self) -> dict:
        return {k: _vec(getattr(self, k)) for k in ("q0", "q1", "p0", "p1")}


def _bordered(M: np.ndarray, col: np.ndarray, row: np.ndarray, rhs: np.ndarray, rhs_last: float) -> np.ndarray:
    n = M.shape[0]
    K = np.zeros((n + 1, n + 1))
    K[:n, :n] = M
    K[:n, n] = col
    K[n, :n] = row
    b = np.append(rhs, rhs_last)
    return np.linalg.solve(K, b)[:n]


def jordan_chains(A, lambda0: float | None = None, tol: float = STRUCTURE_TOL) -> JordanChains:
    """Jordan chain of a nilpotent 2x2 block plus one nonzero eigenvalue.

    ``lambda0`` is the expected nonzero eigenvalue; if given it is checked.
    Raises ``StructureError`` if the zero eigenvalue is not a single 2x2
    Jordan block.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    U, s, Vt = np.linalg.svd(A)
    normA = float(s[0])
    if normA == 0:
        raise StructureError("zero matrix has no Jordan block")
    if s[-1] > tol * normA:
        raise StructureError(f"matrix is nonsingular (smallest singular value {s[-1]:.3e})")
    if n >= 2 and s[-2] <= tol * normA:
        raise StructureError("zero eigenvalue is semisimple (null space has dimension >= 2)")
    if n == 3:
        ev = eigenvalues_3x3(A)
        zeros = sorted(ev, key=abs)
        if abs(zeros[1]) > np.sqrt(tol) * normA:
            raise StructureError(f"zero eigenvalue is simple; spectrum {ev}")
        if lambda0 is not None and abs(zeros[2] - lambda0) > 1e-6 * max(1.0, abs(lambda0)):
            raise StructureError(f"nonzero eigenvalue {zeros[2]} differs from expected {lambda0}")

    v_right = Vt[-1]
    w_left = U[:, -1]
    q0 = _bordered(A, w_left, v_right, np.zeros(n), 1.0)
    q0 /= np.linalg.norm(q0)
    lead = next(c for c in q0 if abs(c) > 1e-12)
    if lead < 0:
        q0 = -q0
    p1 = _bordered(A.T, v_right, w_left, np.zeros(n), 1.0)
    q1 = _bordered(A, p1, q0, q0, 0.0)
    s11 = float(p1 @ q1)
    if abs(s11) <= tol * np.linalg.norm(p1) * np.linalg.norm(q1):
        raise StructureError("<p1, q1> vanishes; zero eigenvalue is not a 2x2 Jordan block")
    p1 = p1 / s11
    p0 = _bordered(A.T, q0, p1, p1, 0.0)
    p0 = p0 - float(p0 @ q1) * p1
    return JordanChains(q0=q0, q1=q1, p0=p0, p1=p1)


def stable_pair(A, lambda0: float) -> tuple[np.ndarray, np.ndarray]:
    """Right and left eigenvectors for ``lambda0`` with ``<l, r> = 1``, ``|r| = 1``."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    M = A - lambda0 * np.eye(n)
    r = np.linalg.svd(M)[2][-1]
    l = np.linalg.svd(M.T)[2][-1]
    lead = next(c for c in r if abs(c) > 1e-12)
    r = r * np.sign(lead)
    d = float(l @ r)
    if abs(d) < 1e-12:
        raise StructureError(f"eigenvalue {lambda0} is not simple")
    return r, l / d


# ---------------------------------------------------------------------------
# coefficients


def quadratic_coefficients(
    f: Field,
    x0,
    chains: JordanChains,
    step: float = BILINEAR_STEP,
    richardson: bool = False,
) -> tuple[float, float, dict]:
    """``(a2, b2, B-values)`` from projections of the bilinear form."""
    B00 = bilinear_form_B(x0, f, chains.q0, chains.q0, step, richardson)
    B01 = bilinear_form_B(x0, f, chains.q0, chains.q1, step, richardson)
    a2 = 0.5 * float(chains.p1 @ B00)
    b2 = float(chains.p0 @ B00) + float(chains.p1 @ B01)
    return a2, b2, {"B00": B00, "B01": B01}


def homological_H1(
    f: Field,
    x0,
    chains: JordanChains,
    r: np.ndarray,
    l: np.ndarray,
    lambda0: float,
    step: float = BILINEAR_STEP,
) -> tuple[np.ndarray, float]:
    """Quadratic term of the centre manifold graph along the stable direction.

    On the manifold ``z = (h11 w1^2 + 2 h12 w1 w2 + h22 w2^2) / 2``; the
    coefficients solve a 3x3 triangular system driven by ``g_ij = <l, B(q_i, q_j)>``.
    Returns ``(H1, relative residual)``.
    """
    g11 = float(l @ bilinear_form_B(x0, f, chains.q0, chains.q0, step))
    g12 = float(l @ bilinear_form_B(x0, f, chains.q0, chains.q1, step))
    g22 = float(l @ bilinear_form_B(x0, f, chains.q1, chains.q1, step))
    M = np.array([
        [-0.5 * lambda0, 0.0, 0.0],
        [1.0, -lambda0, 0.0],
        [0.0, 1.0, -0.5 * lambda0],
    ])
    rhs = np.array([0.5 * g11, g12, 0.5 * g22])
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > HOMOLOGICAL_COND:
        raise IllConditioned(f"homological system condition number {cond:.3e}")
    h = np.linalg.solve(M, rhs)
    res = float(np.linalg.norm(M @ h - rhs)) / max(float(np.linalg.norm(rhs)), 1e-300)
    return np.array([[h[0], h[1]], [h[1], h[2]]]), res


# ---------------------------------------------------------------------------
# fit oracle

# monomials in (w1, w2) of total degree 0..3
_EXPONENTS = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)]


@dataclasses.dataclass
class FitResult:
    a2: float
    b2: float
    H1: np.ndarray
    radius: float
    condition: float
    n_points: int

    def to_dict(self) -> dict:
        return {
            "a2": self.a2,
            "b2": self.b2,
            "H1": self.H1.tolist(),
            "radius": self.radius,
            "condition": self.condition,
            "n_points": self.n_points,
        }


def _fit(design: np.ndarray, scale: np.ndarray, y: np.ndarray) -> np.ndarray:
    coef = np.linalg.lstsq(design, y, rcond=None)[0]
    return coef / scale


def reduced_fit_oracle(
    field_or_params,
    chains: JordanChains,
    radius: float | None = None,
    *,
    x0=None,
    A=None,
    lambda0: float | None = None,
    n_grid: int = 9,
) -> FitResult:
    """Fit ``a2`` and ``b2`` from samples of the field on the centre manifold.

    Points ``x0 + w1 q0 + w2 q1 + z(w) r`` are laid on a symmetric grid with
    ``|w_i| <= radius / |q_i|``.  The quadratic graph ``z(w)`` is obtained by
    fixed-point iteration from a fit of the stable-direction component on the
    plane ``z = 0``.  The ``p1`` and ``p0`` components of the field are then
    fitted with cubic polynomials.  Monomials are fitted in grid-normalised
    variables, so conditioning does not depend on the radius.
    """
    if isinstance(field_or_params, ModelParams):
        p = field_or_params
        f = reduced_field(p)
        if x0 is None:
            x0 = disease_free_equilibrium(p).x
        if A is None:
            A = jacobian_analytic(x0, p)
        if radius is None:
            radius = 1e-3 * p.T_total
    else:
        f = field_or_params
        if x0 is None:
            raise ValueError("x0 is required for a plain vector field")
        if A is None:
            A = jacobian_fd(x0, f)
        if radius is None:
            radius = 1e-3 * (1.0 + float(np.max(np.abs(x0))))
    x0 = np.asarray(x0, dtype=float)
    A = np.asarray(A, dtype=float)
    if lambda0 is None:
        lambda0 = float(max(eigenvalues_3x3(A), key=abs).real) if A.shape == (3, 3) else float(np.trace(A))
    r, l = stable_pair(A, lambda0)

    rho = np.array([radius / np.linalg.norm(chains.q0), radius / np.linalg.norm(chains.q1)])
    s = np.linspace(-1.0, 1.0, n_grid)
    U1, U2 = np.meshgrid(s, s, indexing="ij")
    u1, u2 = U1.ravel(), U2.ravel()
    design = np.column_stack([u1**i * u2**j for i, j in _EXPONENTS])
    # an underdetermined design has a hidden null space that cond() does not see
    cond = float(np.linalg.cond(design)) if design.shape[0] >= design.shape[1] else math.inf
    if not np.isfinite(cond) or cond > FIT_COND:
        raise FitIllConditioned(f"design matrix condition number {cond:.3e}")
    # converts normalised-variable coefficients to coefficients in w
    scale = np.array([rho[0] ** i * rho[1] ** j for i, j in _EXPONENTS])
    w1, w2 = u1 * rho[0], u2 * rho[1]
    plane = x0 + np.outer(w1, chains.q0) + np.outer(w2, chains.q1)

    def col(c, i, j):
        return c[_EXPONENTS.index((i, j))]

    # stable component on the plane -> quadratic graph z(w)
    gz = _fit(design, scale, np.array([l @ f(x) for x in plane]))
    G11, G12, G22 = col(gz, 2, 0), col(gz, 1, 1), col(gz, 0, 2)
    c = np.zeros(3)
    for _ in range(10):
        new = np.array([
            -G11 / lambda0,
            (2 * c[0] - G12) / lambda0,
            (c[1] - G22) / lambda0,
        ])
        done = np.allclose(new, c, rtol=1e-15, atol=0)
        c = new
        if done:
            break
    H1 = np.array([[2 * c[0], c[1]], [c[1], 2 * c[2]]])
    z = c[0] * w1**2 + c[1] * w1 * w2 + c[2] * w2**2
    pts = plane + np.outer(z, r)
    F = np.array([f(x) for x in pts])
    k1 = _fit(design, scale, F @ chains.p1)
    k0 = _fit(design, scale, F @ chains.p0)
    a2 = col(k1, 2, 0)
    # p0-component feeds b2 through the change of variables w1' = w2 + ...
    b2 = col(k1, 1, 1) + 2.0 * col(k0, 2, 0)
    return FitResult(a2=float(a2), b2=float(b2), H1=H1, radius=float(radius), condition=cond, n_points=len(u1))


# ---------------------------------------------------------------------------
# report


@dataclasses.dataclass
class TbtReport:
    point: np.ndarray
    eigenvalues: np.ndarray
    lambda0: float
    chains: JordanChains
    chain_residuals: dict
    a2: float
    b2: float
    a2_is_zero: bool
    H1: np.ndarray
    homological_residual: float
    fit: FitResult | None
    b2_discrepancy: float | None
    flagged: bool
    params: ModelParams | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "params": self.params.to_dict() if self.params is not None else None,
            "point": _vec(self.point),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "lambda0": self.lambda0,
            "chains": self.chains.to_dict(),
            "chain_residuals": self.chain_residuals,
            "a2": self.a2,
            "b2": self.b2,
            "a2_is_zero": self.a2_is_zero,
            "H1": self.H1.tolist(),
            "homological_residual": self.homological_residual,
            "fit": self.fit.to_dict() if self.fit is not None else None,
            "b2_discrepancy": self.b2_discrepancy,
            "flagged": self.flagged,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def bt_quadratic_coeffs(params: ModelParams, step: float = BILINEAR_STEP, richardson: bool = False) -> tuple[float, float]:
    """``(a2, b2)`` at the disease-free point of ``params`` (must be a tBT point)."""
    rep = bt_report(params, step=step, richardson=richardson, fit=False)
    return rep.a2, rep.b2


def bt_report(
    params: ModelParams,
    *,
    step: float = BILINEAR_STEP,
    richardson: bool = False,
    fit: bool = True,
    radius: float | None = None,
) -> TbtReport:
    """Full normal-form report at the disease-free point of ``params``."""
    f = reduced_field(params)
    x0 = disease_free_equilibrium(params).x
    A = jacobian_analytic(x0, params)
    ev = eigenvalues_3x3(A)
    lambda0 = float(max(ev, key=abs).real)
    chains = jordan_chains(A, lambda0)
    a2, b2, Bs = quadratic_coefficients(f, x0, chains, step, richardson)
    r, l = stable_pair(A, lambda0)
    H1, hres = homological_H1(f, x0, chains, r, l, lambda0, step)
    # a2 is numerically zero if it is tiny next to the size of its ingredients
    a2_scale = np.linalg.norm(chains.p1) * max(np.linalg.norm(Bs["B00"]), np.linalg.norm(Bs["B01"]))
    a2_zero = abs(a2) <= 1e-8 * a2_scale
    fit_res = disc = None
    flagged = False
    if fit:
        fit_res = reduced_fit_oracle(params, chains, radius, x0=x0, A=A, lambda0=lambda0)
        disc = abs(b2 - fit_res.b2) / max(abs(fit_res.b2), 1e-300)
        flagged = disc > DISCREPANCY_FLAG
    return TbtReport(
        point=x0,
        eigenvalues=ev,
        lambda0=lambda0,
        chains=chains,
        chain_residuals=chains.residuals(A),
        a2=a2,
        b2=b2,
        a2_is_zero=bool(a2_zero),
        H1=H1,
        homological_residual=hres,
        fit=fit_res,
        b2_discrepancy=disc,
        flagged=flagged,
        params=params,
    )
