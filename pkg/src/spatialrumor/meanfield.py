"""Mean-field ODEs for the spreader and stifler fractions.

    du1/dt = lam*u1*(1 - u1 - u2) - alpha*u1**2 - u1
    du2/dt = alpha*u1**2 - u2

with ``u0 = 1 - u1 - u2``. The origin (no rumor) is always an equilibrium;
its Jacobian is ``diag(lam - 1, -1)`` so it destabilises at ``lam = 1``
whatever ``alpha`` is.
"""

from __future__ import annotations

import enum
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import StepSizeError, UsageError
from .lattice import Params

SIMPLEX_TOL = 1e-6


@dataclass(frozen=True)
class MeanFieldState:
    u1: float
    u2: float

    def __post_init__(self):
        if self.u1 < -1e-9 or self.u2 < -1e-9 or self.u1 + self.u2 > 1 + 1e-9:
            raise UsageError(f"({self.u1}, {self.u2}) is not on the probability simplex")

    @property
    def u0(self) -> float:
        return 1.0 - self.u1 - self.u2


class Classification(str, enum.Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"


@dataclass(frozen=True)
class StabilityResult:
    eigenvalues: tuple[float, float]
    classification: Classification
    marginal: bool = False

    def to_dict(self, params: Params | None = None) -> dict:
        out = {
            "eigenvalues": list(self.eigenvalues),
            "classification": self.classification.value,
            "marginal": self.marginal,
        }
        if params is not None:
            out = {"lambda": params.lam, "alpha": params.alpha, **out}
        return out


def derivative(s: MeanFieldState, params: Params) -> tuple[float, float]:
    u1, u2 = s.u1, s.u2
    du1 = params.lam * u1 * (1.0 - u1 - u2) - params.alpha * u1 * u1 - u1
    du2 = params.alpha * u1 * u1 - u2
    return du1, du2


def _rhs3(u: np.ndarray, lam: float, alpha: float) -> np.ndarray:
    u0, u1, u2 = u
    du1 = lam * u1 * (1.0 - u1 - u2) - alpha * u1 * u1 - u1
    du2 = alpha * u1 * u1 - u2
    return np.array([-du1 - du2, du1, du2])


def jacobian(s: MeanFieldState, params: Params) -> np.ndarray:
    """Analytic Jacobian of (du1, du2) with respect to (u1, u2)."""
    lam, a = params.lam, params.alpha
    return np.array(
        [
            [lam * (1.0 - 2.0 * s.u1 - s.u2) - 2.0 * a * s.u1 - 1.0, -lam * s.u1],
            [2.0 * a * s.u1, -1.0],
        ]
    )


def jacobian_at_origin(params: Params) -> StabilityResult:
    # diagonal at the origin, so the eigenvalues are the diagonal entries
    J = jacobian(MeanFieldState(0.0, 0.0), params)
    eig = (float(J[0, 0]), float(J[1, 1]))
    unstable = max(eig) > 0
    return StabilityResult(
        eig,
        Classification.UNSTABLE if unstable else Classification.STABLE,
        marginal=max(eig) == 0.0,
    )


def stability(s: MeanFieldState, params: Params) -> StabilityResult:
    """Linear stability of an arbitrary equilibrium."""
    eig = np.linalg.eigvals(jacobian(s, params))
    eig = sorted(eig.real.tolist(), reverse=True)
    top = eig[0]
    return StabilityResult(
        (eig[0], eig[1]), Classification.UNSTABLE if top > 0 else Classification.STABLE, marginal=top == 0
    )


def endemic_equilibrium(params: Params) -> MeanFieldState | None:
    """Positive equilibrium from ``lam*alpha*u1^2 + (lam+alpha)*u1 + 1 - lam = 0``.

    Returns None when ``lam <= 1`` (only the origin is an equilibrium).
    """
    lam, a = params.lam, params.alpha
    if lam <= 1:
        return None
    if a == 0:
        u1 = 1.0 - 1.0 / lam
    else:
        qa, qb, qc = lam * a, lam + a, 1.0 - lam
        # stable form of the positive root since qc < 0
        u1 = (2.0 * -qc) / (qb + math.sqrt(qb * qb - 4.0 * qa * qc))
    return MeanFieldState(u1, a * u1 * u1)


@dataclass
class MeanFieldSeries:
    t: np.ndarray
    u: np.ndarray  # columns u0, u1, u2

    @property
    def final(self) -> MeanFieldState:
        return MeanFieldState(float(self.u[-1, 1]), float(self.u[-1, 2]))

    def to_csv(self, header=()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        buf.write("t,u0,u1,u2\n")
        for t, (a, b, c) in zip(self.t.tolist(), self.u.tolist()):
            buf.write(f"{t!r},{a!r},{b!r},{c!r}\n")
        return buf.getvalue()


def integrate(s0: MeanFieldState, params: Params, t_max: float, dt: float = 1e-3) -> MeanFieldSeries:
    """Classical RK4 with fixed step on (u0, u1, u2), recording every step."""
    if not dt > 0:
        raise UsageError("dt must be positive")
    if t_max < 0:
        raise UsageError("t_max must be nonnegative")
    n = int(math.ceil(t_max / dt - 1e-9))
    t = np.empty(n + 1)
    u = np.empty((n + 1, 3))
    t[0] = 0.0
    u[0] = (s0.u0, s0.u1, s0.u2)
    lam, a = params.lam, params.alpha
    y = u[0].copy()
    for i in range(n):
        h = min(dt, t_max - i * dt) if i == n - 1 else dt
        k1 = _rhs3(y, lam, a)
        k2 = _rhs3(y + 0.5 * h * k1, lam, a)
        k3 = _rhs3(y + 0.5 * h * k2, lam, a)
        k4 = _rhs3(y + h * k3, lam, a)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if y.min() < -SIMPLEX_TOL or y.max() > 1.0 + SIMPLEX_TOL:
            raise StepSizeError(f"state {y.tolist()} left the simplex at step {i + 1}; reduce dt")
        u[i + 1] = y
        t[i + 1] = t_max if i == n - 1 else (i + 1) * dt
    return MeanFieldSeries(t, u)


def stability_json(params: Params) -> str:
    return json.dumps(jacobian_at_origin(params).to_dict(params), indent=2, sort_keys=True)
