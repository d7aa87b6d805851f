"""One-parameter sweeps and detection of transcritical and Hopf points.

The transcritical crossing is pinned by bisection on ``delta1 = R0 - 1``.
Hopf points are found by bisection on the real part of the complex pair of
the endemic equilibrium, with the pair tracked by continuity along the
bracket.  The codimension-two organising point has ``delta1 = delta2 = 0``
with ``delta2 = gamma + mu``.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .equilibria import (
    _endemic_guess,
    Equilibrium,
    NoEndemic,
    discriminant,
    disease_free_equilibrium,
    eigenvalues_3x3,
    endemic_closed_form,
    newton_equilibrium,
    r0,
)
from .errors import (
    BoundaryWarning,
    DegenerateError,
    DiscriminantError,
    NoCrossing,
    PairLost,
    RiskbifError,
)
from .model import ModelParams, jacobian_analytic, reduced_field

__all__ = [
    "SWEEPABLE",
    "UnfoldingParams",
    "BranchRow",
    "TranscriticalReport",
    "HopfPoint",
    "NoHopf",
    "TbtDiagnostics",
    "unfolding",
    "sweep_branch",
    "detect_transcritical",
    "hopf_bisect",
    "find_hopf",
    "locate_tbt_point",
]

SWEEPABLE = ("a1", "a2", "beta", "eta", "gamma", "mu", "tau")
# endemic fields are reported only for delta1 above this
BRANCH_FEASIBILITY = 1e-10
TRANSCRITICAL_RTOL = 1e-10
PAIR_IMAG_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class UnfoldingParams:
    delta1: float
    delta2: float


def unfolding(params: ModelParams) -> UnfoldingParams:
    return UnfoldingParams(delta1=r0(params) - 1.0, delta2=params.gamma + params.mu)


# ---------------------------------------------------------------------------
# branch sweeps


@dataclasses.dataclass
class BranchRow:
    value: float
    R0: float | None
    dfe_class: str | None
    endemic: Equilibrium | None = None
    d0_sign: int | None = None
    error: str | None = None

    @property
    def has_endemic(self) -> bool:
        return self.endemic is not None


def _branch_row(params: ModelParams, name: str, value: float) -> BranchRow:
    try:
        p = params.replace(**{name: value})
        R0 = r0(p)
    except RiskbifError as exc:
        return BranchRow(value, None, None, error=f"{type(exc).__name__}: {exc}")
    dfe = disease_free_equilibrium(p)
    row = BranchRow(value, R0, dfe.stability)
    try:
        row.d0_sign = int(np.sign(discriminant(p)))
    except RiskbifError:
        pass
    if R0 - 1.0 <= BRANCH_FEASIBILITY:
        return row
    try:
        eq = endemic_closed_form(p)
    except (DegenerateError, DiscriminantError) as exc:
        # no usable closed form; Newton from a generic guess decides
        try:
            eq = newton_equilibrium(_endemic_guess(p), p)
            eq.note = f"newton ({type(exc).__name__} in closed form)"
        except RiskbifError as exc2:
            row.error = f"{type(exc).__name__}: {exc}; {type(exc2).__name__}: {exc2}"
            return row
    except RiskbifError as exc:
        row.error = f"{type(exc).__name__}: {exc}"
        return row
    if isinstance(eq, NoEndemic):
        return row
    if eq.note == "closed-form":
        try:
            refined = newton_equilibrium(eq.x, p)
            refined.note = "closed-form+newton"
            eq = refined
        except RiskbifError:
            pass
    if eq.kind == "endemic":
        row.endemic = eq
    return row


def _row_task(args):
    return _branch_row(*args)


def sweep_branch(
    params: ModelParams,
    param_name: str,
    values: Sequence[float],
    max_workers: int | None = None,
) -> list[BranchRow]:
    """Evaluate both equilibrium branches at every value of ``param_name``.

    Rows are independent and returned in input order.  Per-row failures are
    captured in ``BranchRow.error`` instead of aborting the sweep.
    """
    if param_name not in SWEEPABLE:
        raise ValueError(f"cannot sweep {param_name!r}; choose one of {SWEEPABLE}")
    values = [float(v) for v in values]
    if not all(math.isfinite(v) for v in values):
        raise ValueError("sweep values must be finite")
    tasks = [(params, param_name, v) for v in values]
    if max_workers and max_workers > 1 and len(values) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as ex:
            return list(ex.map(_row_task, tasks, chunksize=max(1, len(tasks) // (4 * max_workers))))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return [_branch_row(*t) for t in tasks]


@dataclasses.dataclass
class TranscriticalReport:
    param: str
    critical_value: float
    bracket: tuple[float, float]
    deltas: list[float]
    values: list[float]
    I1: list[float]
    distances: list[float]
    continuity_ok: bool

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _bisect(g: Callable[[float], float], lo: float, hi: float, rtol: float, max_iter: int = 200) -> float:
    glo = g(lo)
    if glo == 0:
        return lo
    for _ in range(max_iter):
        if abs(hi - lo) <= rtol * max(abs(lo), abs(hi), 1e-300):
            break
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            return mid
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def detect_transcritical(
    rows: Sequence[BranchRow],
    params: ModelParams,
    param_name: str,
    deltas: Sequence[float] = (1e-2, 1e-3, 1e-4),
) -> TranscriticalReport:
    """Refine the R0 = 1 crossing found in a sweep and check branch continuity.

    The endemic point is recomputed at ``delta1`` in ``deltas``; its distance
    to the disease-free point must shrink with ``delta1`` and be at most
    ``1e-2 * T_total`` at the smallest value.
    """

    def d1(v):
        return r0(params.replace(**{param_name: v})) - 1.0

    bracket = None
    valid = [r for r in rows if r.R0 is not None]
    for a, b in zip(valid, valid[1:]):
        da, db = a.R0 - 1.0, b.R0 - 1.0
        if da == 0 or da * db < 0:
            bracket = (a.value, b.value)
            break
    if bracket is None:
        raise NoCrossing(f"delta1 does not change sign along the {param_name} sweep")

    crit = _bisect(d1, bracket[0], bracket[1], TRANSCRITICAL_RTOL)

    # parameter values on the endemic side, nearest to the crossing first
    side = sorted((r.value for r in valid if r.R0 - 1.0 > 0), key=lambda v: abs(v - crit))
    T = params.T_total
    out_vals, out_I, out_dist, used = [], [], [], []
    for delta in sorted(deltas, reverse=True):
        far = next((v for v in side if d1(v) >= delta), None)
        if far is None:
            continue
        v = _bisect(lambda x: d1(x) - delta, crit, far, 1e-14)
        p = params.replace(**{param_name: v})
        e1 = endemic_closed_form(p)
        if isinstance(e1, NoEndemic):
            continue
        e0 = disease_free_equilibrium(p)
        used.append(delta)
        out_vals.append(v)
        out_I.append(e1.coords.I)
        out_dist.append(float(np.max(np.abs(e1.x - e0.x))))
    ok = (
        bool(out_dist)
        and out_dist[-1] <= 1e-2 * T
        and all(b < a for a, b in zip(out_dist, out_dist[1:]))
    )
    return TranscriticalReport(
        param=param_name,
        critical_value=crit,
        bracket=bracket,
        deltas=used,
        values=out_vals,
        I1=out_I,
        distances=out_dist,
        continuity_ok=ok,
    )


# ---------------------------------------------------------------------------
# Hopf


@dataclasses.dataclass
class HopfPoint:
    value: float
    equilibrium: object
    pair: complex
    omega: float
    width: float

    found = True

    def to_dict(self) -> dict:
        eq = self.equilibrium
        eq = eq.to_dict() if hasattr(eq, "to_dict") else [float(v) for v in np.ravel(eq)]
        return {
            "found": True,
            "value": self.value,
            "equilibrium": eq,
            "pair": [self.pair.real, self.pair.imag],
            "omega": self.omega,
            "width": self.width,
        }


@dataclasses.dataclass
class NoHopf:
    reason: str

    found = False

    def to_dict(self) -> dict:
        return {"found": False, "reason": self.reason}


def _match_pair(ev: np.ndarray, prev: tuple[complex, complex] | None) -> tuple[complex, complex]:
    if prev is None:
        cplx = [z for z in ev if abs(z.imag) > PAIR_IMAG_TOL]
        if len(cplx) == 2:
            return tuple(sorted(cplx, key=lambda z: -z.imag))
        return tuple(sorted(ev, key=lambda z: -z.real)[:2])
    best = min(
        itertools.combinations(ev, 2),
        key=lambda c: min(abs(c[0] - prev[0]) + abs(c[1] - prev[1]), abs(c[0] - prev[1]) + abs(c[1] - prev[0])),
    )
    return tuple(sorted(best, key=lambda z: -z.imag))


def _is_pair(pair) -> bool:
    return abs(pair[0].imag) > PAIR_IMAG_TOL and abs(pair[0] - pair[1].conjugate()) < 1e-8 * (1 + abs(pair[0]))


def hopf_bisect(
    spectrum: Callable[[float], tuple[np.ndarray, object]],
    bracket: tuple[float, float],
    tol: float = 1e-10,
    n_grid: int = 17,
) -> HopfPoint | NoHopf:
    """Bisection on the real part of a continuously tracked complex pair.

    ``spectrum(p)`` returns ``(eigenvalues, equilibrium)``.  The bracket is
    first scanned on ``n_grid`` points; the first sign change of the pair's
    real part is then refined until the interval is narrower than ``tol``.
    """
    lo, hi = map(float, bracket)
    grid = np.linspace(lo, hi, n_grid)
    pairs, eqs = [], []
    prev = None
    for p in grid:
        ev, eq = spectrum(float(p))
        prev = _match_pair(ev, prev)
        pairs.append(prev)
        eqs.append(eq)
    if not any(_is_pair(pr) for pr in pairs):
        return NoHopf("no complex pair in bracket")

    m = [max(z.real for z in pr) for pr in pairs]
    for k in range(n_grid):
        if m[k] == 0 and _is_pair(pairs[k]):
            z = pairs[k][0]
            return HopfPoint(float(grid[k]), eqs[k], z, abs(z.imag), 0.0)
    # zero counts as nonnegative so an exact zero without a pair still brackets
    k = next((k for k in range(n_grid - 1) if (m[k] < 0) != (m[k + 1] < 0)), None)
    if k is None:
        return NoHopf("real part of the pair has constant sign")
    a, b = float(grid[k]), float(grid[k + 1])
    if not (_is_pair(pairs[k]) and _is_pair(pairs[k + 1])):
        raise PairLost(f"complex pair is real inside [{a}, {b}]", interval=(a, b))

    pa, ma = pairs[k], m[k]
    best = (a, eqs[k], pa)
    while b - a > tol:
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        ev, eq = spectrum(mid)
        pm = _match_pair(ev, pa)
        if not _is_pair(pm):
            raise PairLost(f"complex pair collapses inside [{a}, {b}]", interval=(a, b))
        mm = max(z.real for z in pm)
        best = (mid, eq, pm)
        if mm == 0:
            a = b = mid
            break
        if (mm < 0) == (ma < 0):
            a, pa, ma = mid, pm, mm
        else:
            b = mid
    value = 0.5 * (a + b)
    ev, eq = spectrum(value)
    pair = _match_pair(ev, best[2])
    z = pair[0]
    return HopfPoint(value, eq, z, abs(z.imag), b - a)


def find_hopf(
    params: ModelParams,
    param_name: str,
    bracket: tuple[float, float],
    tol: float = 1e-10,
    n_grid: int = 17,
) -> HopfPoint | NoHopf:
    """Hopf point of the endemic equilibrium along ``param_name``."""
    if param_name not in SWEEPABLE:
        raise ValueError(f"cannot scan {param_name!r}; choose one of {SWEEPABLE}")

    def spectrum(v):
        p = params.replace(**{param_name: v})
        e1 = endemic_closed_form(p)
        if isinstance(e1, NoEndemic):
            raise ValueError(f"no endemic equilibrium at {param_name} = {v}")
        return e1.eigenvalues, e1

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return hopf_bisect(spectrum, bracket, tol, n_grid)


# ---------------------------------------------------------------------------
# organising point


@dataclasses.dataclass
class TbtDiagnostics:
    params: ModelParams
    E0: tuple
    residual: float
    eigenvalues: np.ndarray
    eigenvalue_error: float
    singular_values: np.ndarray
    rank: int
    nilpotency_residual: float
    jordan_block: bool
    unfolding: UnfoldingParams

    @property
    def ok(self) -> bool:
        return self.residual <= 1e-10 * self.params.T_total and self.eigenvalue_error <= 1e-10 and self.jordan_block

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "E0": list(self.E0),
            "residual": self.residual,
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "eigenvalue_error": self.eigenvalue_error,
            "singular_values": [float(s) for s in self.singular_values],
            "rank": self.rank,
            "nilpotency_residual": self.nilpotency_residual,
            "jordan_block": self.jordan_block,
            "delta1": self.unfolding.delta1,
            "delta2": self.unfolding.delta2,
            "ok": self.ok,
        }


def locate_tbt_point(params: ModelParams) -> tuple[ModelParams, TbtDiagnostics]:
    """Impose ``gamma = mu = 0`` and ``beta = tau`` and check the double zero.

    The remaining parameters are kept.  Birth rates follow ``mu`` to zero so
    the reduced system stays exact.
    """
    if params.tau == 0:
        raise DegenerateError("tau = 0 makes the double zero semisimple; no Jordan block")
    warnings.warn("organising point lies on the parameter boundary (gamma = mu = 0)", BoundaryWarning, stacklevel=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = params.replace(gamma=0.0, mu=0.0, beta=params.tau, b=0.0, b_hat=0.0)
    e0 = disease_free_equilibrium(p)
    A = jacobian_analytic(e0.x, p)
    ev = eigenvalues_3x3(A)
    target = np.array([0.0, 0.0, -1.0 - p.mu], dtype=complex)
    err = float(np.max(np.abs(np.sort_complex(ev) - np.sort_complex(target))))
    sv = np.linalg.svd(A, compute_uv=False)
    normA = max(float(sv[0]), 1e-300)
    rank = int(np.sum(sv > 1e-10 * normA))
    # A^2 on its own null space (the generalized zero eigenspace)
    _, s2, vt2 = np.linalg.svd(A @ A)
    V = vt2[-2:].T
    nil = float(np.linalg.norm(A @ A @ V)) / normA**2
    jordan = rank == 2 and float(np.linalg.norm(A @ V)) > 1e-10 * normA
    f = reduced_field(p)
    return p, TbtDiagnostics(
        params=p,
        E0=tuple(e0.coords),
        residual=float(np.max(np.abs(f(e0.x)))),
        eigenvalues=ev,
        eigenvalue_error=err,
        singular_values=sv,
        rank=rank,
        nilpotency_residual=nil,
        jordan_block=jordan,
        unfolding=unfolding(p),
    )
