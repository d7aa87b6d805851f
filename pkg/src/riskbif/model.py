"""Model parameters, state types and vector fields.

The full model tracks a general population ``P`` and a core group
``N = S + I + U``.  Recruitment from ``P`` into the core group is modulated by

    theta(S, I, U) = exp(-(a1 * I + a2 * U) / N)

When the birth rates equal mortality (``b = b_hat = mu``) the total
population ``T = P + N`` is conserved and ``P`` can be eliminated, leaving a
three dimensional system in ``(S, I, U)``.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, ParameterError, ParameterRangeWarning

__all__ = [
    "ModelParams",
    "CoreState",
    "FullState",
    "PARAM_NAMES",
    "REFERENCE_PARAMS",
    "theta",
    "rhs_reduced",
    "rhs_full",
    "reduced_field",
    "full_field",
    "jacobian_analytic",
    "jacobian_fd",
]

PARAM_NAMES = ("a1", "a2", "beta", "eta", "gamma", "mu", "tau", "b", "b_hat", "T_total")

_UNIT_INTERVAL = ("eta", "gamma", "mu", "tau", "b", "b_hat")


@dataclasses.dataclass(frozen=True)
class ModelParams:
    """Biological parameters plus the total population.

    ``b`` and ``b_hat`` default to ``mu``, the condition under which the
    total population is constant and the reduced system applies.
    Out-of-range values only warn; analysis near the boundary of the
    parameter box has to remain possible.
    """

    a1: float
    a2: float
    beta: float
    eta: float
    gamma: float
    mu: float
    tau: float
    b: float | None = None
    b_hat: float | None = None
    T_total: float = 100.0

    def __post_init__(self):
        if self.b is None:
            object.__setattr__(self, "b", self.mu)
        if self.b_hat is None:
            object.__setattr__(self, "b_hat", self.mu)
        for name in PARAM_NAMES:
            value = getattr(self, name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise ParameterError(f"{name} must be a number, got {value!r}") from None
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)
        if self.T_total <= 0:
            raise ParameterError(f"T_total must be positive, got {self.T_total}")
        for msg in self.range_violations():
            warnings.warn(msg, ParameterRangeWarning, stacklevel=3)

    def range_violations(self) -> list[str]:
        out = []
        if self.a1 < 0:
            out.append(f"a1 = {self.a1} < 0")
        if self.a2 > 0:
            out.append(f"a2 = {self.a2} > 0")
        if not 0 < self.beta <= 1:
            out.append(f"beta = {self.beta} outside (0, 1]")
        for name in _UNIT_INTERVAL:
            v = getattr(self, name)
            if not 0 <= v <= 1:
                out.append(f"{name} = {v} outside [0, 1]")
        return out

    @property
    def beta_hat(self) -> float:
        return (1.0 - self.eta) * self.beta

    @property
    def reduced_valid(self) -> bool:
        """True when ``b = b_hat = mu`` so that the reduction to 3D is exact."""
        return self.b == self.mu and self.b_hat == self.mu

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        unknown = set(data) - set(PARAM_NAMES)
        if unknown:
            raise ParameterError(f"unknown parameter keys: {sorted(unknown)}")
        missing = [k for k in PARAM_NAMES if k not in data and k not in ("b", "b_hat")]
        if missing:
            raise ParameterError(f"missing parameter keys: {missing}")
        return cls(**data)


# Values used for the phase portraits of the reference simulations.
REFERENCE_PARAMS = dict(a1=8.0, a2=-2.3, beta=1.0, eta=0.41, gamma=0.46, mu=0.44, tau=0.002, T_total=100.0)


class CoreState(NamedTuple):
    S: float
    I: float
    U: float


class FullState(NamedTuple):
    P: float
    S: float
    I: float
    U: float


def theta(state: Sequence[float], params: ModelParams) -> float:
    S, I, U = (float(v) for v in state)
    N = S + I + U
    if N <= 0:
        raise DomainError(f"core population N = {N} must be positive")
    return math.exp(-(params.a1 * I + params.a2 * U) / N)


def reduced_field(params: ModelParams) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``f(x)`` for the reduced system with parameters bound.

    The closure avoids attribute lookups in integration loops.
    """
    a1, a2 = params.a1, params.a2
    beta, beta_hat = params.beta, params.beta_hat
    mu, gamma, tau, T = params.mu, params.gamma, params.tau, params.T_total
    exp = math.exp

    def f(x):
        S, I, U = float(x[0]), float(x[1]), float(x[2])
        N = S + I + U
        if N <= 0:
            raise DomainError(f"core population N = {N} must be positive")
        th = exp(-(a1 * I + a2 * U) / N)
        dS = th * (T - S - I - U) - beta * S * I / N - mu * S + gamma * U
        dI = (beta * S + beta_hat * U) * I / N - (mu + tau) * I
        dU = tau * I - beta_hat * U * I / N - (mu + gamma) * U
        return np.array((dS, dI, dU))

    return f


def full_field(params: ModelParams) -> Callable[[np.ndarray], np.ndarray]:
    """Return ``f(x)`` for the four dimensional system, ``x = (P, S, I, U)``."""
    a1, a2 = params.a1, params.a2
    beta, beta_hat = params.beta, params.beta_hat
    mu, gamma, tau = params.mu, params.gamma, params.tau
    b, b_hat = params.b, params.b_hat
    exp = math.exp

    def f(x):
        P, S, I, U = float(x[0]), float(x[1]), float(x[2]), float(x[3])
        N = S + I + U
        if N <= 0:
            raise DomainError(f"core population N = {N} must be positive")
        th = exp(-(a1 * I + a2 * U) / N)
        dP = b * (P + S) + b_hat * (I + U) - (th + mu) * P
        dS = th * P - beta * S * I / N - mu * S + gamma * U
        dI = (beta * S + beta_hat * U) * I / N - (mu + tau) * I
        dU = tau * I - beta_hat * U * I / N - (mu + gamma) * U
        return np.array((dP, dS, dI, dU))

    return f


def rhs_reduced(state: Sequence[float], params: ModelParams) -> np.ndarray:
    """Time derivatives ``(dS, dI, dU)`` of the reduced system."""
    return reduced_field(params)(state)


def rhs_full(state: Sequence[float], params: ModelParams) -> np.ndarray:
    """Time derivatives ``(dP, dS, dI, dU)`` of the full system."""
    return full_field(params)(state)


def jacobian_analytic(state: Sequence[float], params: ModelParams) -> np.ndarray:
    """Jacobian of :func:`rhs_reduced`, including theta's dependence on N."""
    S, I, U = (float(v) for v in state)
    N = S + I + U
    if N <= 0:
        raise DomainError(f"core population N = {N} must be positive")
    beta, bh = params.beta, params.beta_hat
    mu, gamma, tau = params.mu, params.gamma, params.tau
    P = params.T_total - N
    N2 = N * N

    E = (params.a1 * I + params.a2 * U) / N
    th = math.exp(-E)
    # d theta / dx = -theta * dE/dx
    th_S = th * E / N
    th_I = -th * (params.a1 - E) / N
    th_U = -th * (params.a2 - E) / N

    G = beta * S + bh * U
    J = np.empty((3, 3))
    J[0, 0] = th_S * P - th - beta * I * (N - S) / N2 - mu
    J[0, 1] = th_I * P - th - beta * S * (N - I) / N2
    J[0, 2] = th_U * P - th + beta * S * I / N2 + gamma
    J[1, 0] = I * (beta * N - G) / N2
    J[1, 1] = G / N - G * I / N2 - (mu + tau)
    J[1, 2] = I * (bh * N - G) / N2
    J[2, 0] = bh * U * I / N2
    J[2, 1] = tau - bh * U / N + bh * U * I / N2
    J[2, 2] = -bh * I / N + bh * U * I / N2 - (mu + gamma)
    return J


def jacobian_fd(state, params_or_field, step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian with per-column step ``step * (1 + |x_j|)``.

    ``params_or_field`` is either a :class:`ModelParams` (differentiates the
    reduced system) or any callable ``f(x) -> array``.
    """
    if isinstance(params_or_field, ModelParams):
        f = reduced_field(params_or_field)
    else:
        f = params_or_field
    x = np.asarray(state, dtype=float)
    n = x.size
    cols = []
    for j in range(n):
        h = step * (1.0 + abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        h2 = xp[j] - xm[j]
        cols.append((np.asarray(f(xp), dtype=float) - np.asarray(f(xm), dtype=float)) / h2)
    return np.column_stack(cols)
