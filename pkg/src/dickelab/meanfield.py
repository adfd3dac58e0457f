"""Coherent-state (mean-field) energy surface, its critical points and observables."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .model import ModelParams
from .observables import ObservableSet

MAX_ITER = 100_000
DEFAULT_TOL = 1e-8


class Phase(enum.Enum):
    NORMAL = "normal"
    SUPERRADIANT = "superradiant"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class VariationalPoint:
    """Field quadratures (q, p) and Bloch angles (theta, phi).

    alpha = (q + i p)/sqrt(2), zeta = tan(theta/2) exp(-i phi).  theta is
    clamped to [0, pi] and phi reduced mod 2 pi.
    """

    q: float
    p: float
    theta: float
    phi: float

    def __post_init__(self):
        object.__setattr__(self, "theta", min(max(float(self.theta), 0.0), math.pi))
        object.__setattr__(self, "phi", float(self.phi) % (2 * math.pi))
        object.__setattr__(self, "q", float(self.q))
        object.__setattr__(self, "p", float(self.p))

    @property
    def alpha(self) -> complex:
        return complex(self.q, self.p) / math.sqrt(2)

    @property
    def zeta(self) -> complex:
        return math.tan(self.theta / 2) * complex(math.cos(self.phi), -math.sin(self.phi))

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.p, self.theta, self.phi])

    @classmethod
    def canonical(cls, q, p, theta, phi) -> VariationalPoint:
        """Fold unconstrained coordinates back onto theta in [0, pi], q <= 0 when phi ~ pi."""
        theta = float(theta) % (2 * math.pi)
        if theta > math.pi:
            theta = 2 * math.pi - theta
            phi = phi + math.pi
        phi = float(phi) % (2 * math.pi)
        # Z2 partner (q, phi) -> (-q, phi + pi) has identical energy
        if math.cos(phi) < 0:
            q, phi = -q, (phi + math.pi) % (2 * math.pi)
        return cls(q, p, theta, phi)


@dataclass(frozen=True)
class CriticalPointResult:
    phase: Phase
    point: VariationalPoint
    energy_per_atom: float
    gamma_c: float


class MinimizationError(RuntimeError):
    def __init__(self, message: str, best: VariationalPoint | None, energy: float = math.nan):
        super().__init__(message)
        self.best = best
        self.energy = energy


def cos_theta_c(params: ModelParams) -> float:
    """omega_a / (4 gamma^2) = (gamma_c/gamma)^2; only meaningful above gamma_c."""
    return params.omega_a / (4 * params.gamma**2)


def is_superradiant(params: ModelParams) -> bool:
    # boundary gamma == gamma_c belongs to the normal phase
    return params.omega_a < 4 * params.gamma**2


def _surface(params: ModelParams, x: np.ndarray) -> float:
    q, p, theta, phi = x
    n = params.n_atoms
    s = math.sqrt(2) * params.gamma / math.sqrt(n)
    return (p * p + q * q) / (2 * n) - 0.5 * params.omega_a * math.cos(theta) + s * q * math.sin(theta) * math.cos(phi)


def _surface_grad(params: ModelParams, x: np.ndarray) -> np.ndarray:
    q, p, theta, phi = x
    n = params.n_atoms
    s = math.sqrt(2) * params.gamma / math.sqrt(n)
    st, ct = math.sin(theta), math.cos(theta)
    sf, cf = math.sin(phi), math.cos(phi)
    return np.array([
        q / n + s * st * cf,
        p / n,
        0.5 * params.omega_a * st + s * q * ct * cf,
        -s * q * st * sf,
    ])


def energy_surface(params: ModelParams, point: VariationalPoint) -> float:
    """Energy per atom of the product coherent state at ``point``."""
    return _surface(params, point.as_array())


def energy_surface_gradient(params: ModelParams, point: VariationalPoint) -> np.ndarray:
    """Analytic gradient with respect to (q, p, theta, phi)."""
    return _surface_grad(params, point.as_array())


def critical_point(params: ModelParams) -> CriticalPointResult:
    gc = params.gamma_c
    if not is_superradiant(params):
        return CriticalPointResult(Phase.NORMAL, VariationalPoint(0.0, 0.0, 0.0, 0.0), -0.5 * params.omega_a, gc)
    c = cos_theta_c(params)
    g = params.gamma
    q_c = -math.sqrt(2 * params.n_atoms) * g * math.sqrt(1 - c * c)
    energy = -g * g * (c * c + 1)
    return CriticalPointResult(Phase.SUPERRADIANT, VariationalPoint(q_c, 0.0, math.acos(c), 0.0), energy, gc)


def mean_field_observables(params: ModelParams) -> ObservableSet:
    n = params.n_atoms
    j = params.j
    if not is_superradiant(params):
        half = 0.5
        return ObservableSet(
            energy=-2 * n * params.gamma_c**2,
            n_photons=0.0, n_excited=0.0, jz=-j,
            q2=half, p2=half, var_q=half, var_p=half,
            jx2=j / 2, jy2=j / 2, xi_x2=1.0, xi_y2=1.0,
            first_moments_zero=True,
        )
    g = params.gamma
    c = cos_theta_c(params)
    sin2 = 1 - c * c
    n_ph = n * g * g * sin2
    n_e = n / 2 * (1 - c)
    return ObservableSet(
        energy=-n * g * g * (c * c + 1),
        n_photons=n_ph,
        n_excited=n_e,
        jz=n_e - j,
        q2=2 * n_ph + 0.5,  # <q>^2 = q_c^2 = 2 |alpha_c|^2
        p2=0.5,
        var_q=0.5,
        var_p=0.5,
        jx2=j * j * sin2 + j / 2 * c * c,
        jy2=j / 2,
        xi_x2=c * c,
        xi_y2=1.0,
        first_moments_zero=False,
    )


def random_seeds(count: int, params: ModelParams, seed: int = 0) -> list[VariationalPoint]:
    """Origin plus ``count - 1`` random starting points spanning both wells."""
    rng = np.random.default_rng(seed)
    scale = math.sqrt(2 * params.n_atoms) * max(params.gamma, 0.1)
    seeds = [VariationalPoint(0.0, 0.0, 0.0, 0.0)]
    for _ in range(max(count - 1, 0)):
        seeds.append(VariationalPoint(
            rng.uniform(-2, 2) * scale, rng.uniform(-1, 1) * scale,
            rng.uniform(0, math.pi), rng.uniform(0, 2 * math.pi),
        ))
    return seeds


def minimize_surface(
    params: ModelParams,
    seeds: Sequence[VariationalPoint],
    tol: float = DEFAULT_TOL,
    max_iter: int = MAX_ITER,
) -> VariationalPoint:
    """Multi-start quasi-Newton descent on the energy surface.

    Returns the lowest point among the converged runs, folded to the
    canonical representative.  Raises MinimizationError (carrying the best
    point seen) if no run reaches gradient max-norm <= tol.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    if tol <= 0:
        raise ValueError("tol must be positive")
    best, best_e, best_g = None, math.inf, math.inf
    fallback, fallback_e = None, math.inf
    for seed in seeds:
        res = minimize(
            lambda x: _surface(params, x),
            seed.as_array(),
            jac=lambda x: _surface_grad(params, x),
            method="BFGS",
            options={"gtol": tol / 10, "maxiter": max_iter},
        )
        # restarting BFGS recovers from line-search stalls near the minimum
        x = res.x
        for _ in range(5):
            if np.max(np.abs(_surface_grad(params, x))) <= tol:
                break
            x = minimize(
                lambda y: _surface(params, y), x, jac=lambda y: _surface_grad(params, y),
                method="BFGS", options={"gtol": tol / 10, "maxiter": max_iter},
            ).x
        e = _surface(params, x)
        gnorm = float(np.max(np.abs(_surface_grad(params, x))))
        if e < fallback_e:
            fallback, fallback_e = x, e
        if gnorm <= tol and e < best_e:
            best, best_e, best_g = x, e, gnorm
    if best is None:
        point = VariationalPoint.canonical(*fallback)
        raise MinimizationError(
            f"no seed converged to gradient <= {tol:g} within {max_iter} iterations",
            point, fallback_e,
        )
    return VariationalPoint.canonical(*best)
