"""Parity-projected coherent states: closed forms and an explicit-vector oracle.

Projecting the mean-field product state onto even or odd excitation number
restores the C2 symmetry.  Every observable then depends on the overlap
factor ``F = (gamma_c/gamma)^(2N) exp(-2 N gamma^2 (1 - (gamma_c/gamma)^4))``,
which is evaluated in log space because it underflows quickly with N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

from .meanfield import cos_theta_c, critical_point, is_superradiant
from .model import Basis, ModelParams, Parity, build_basis
from .observables import ObservableSet

DOMAIN_REASON = "domain: gamma <= gamma_c"
TAIL_TOL = 1e-12


class DomainError(ValueError):
    """Projected closed forms requested at or below gamma_c."""

    reason = DOMAIN_REASON


@dataclass(frozen=True)
class OverlapFactor:
    log_f: float
    f: float


def f_factor(n_atoms: int, gamma: float, gamma_c: float) -> OverlapFactor:
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma!r}")
    if gamma_c < 0:
        raise ValueError(f"gamma_c must be >= 0, got {gamma_c!r}")
    n = n_atoms
    if gamma_c == 0:
        return OverlapFactor(-math.inf, 0.0)
    r = gamma_c / gamma
    log_f = 2 * n * math.log(r) - 2 * n * gamma**2 * (1 - r**4)
    return OverlapFactor(log_f, math.exp(log_f))


def _log_f(n: int, gamma: float, c: float) -> float:
    # same quantity as f_factor with c = (gamma_c/gamma)^2 = omega_a/(4 gamma^2)
    if c == 0:
        return -math.inf
    return n * math.log(c) - 2 * n * gamma**2 * (1 - c * c)


def _f_over_c_power(n: int, power: int, gamma: float, c: float) -> float:
    """F / c^power, finite as c -> 0 when power <= N."""
    expo = n - power
    log_c_part = 0.0 if expo == 0 else (-math.inf if c == 0 else expo * math.log(c))
    return math.exp(log_c_part - 2 * n * gamma**2 * (1 - c * c))


def projected_observables(params: ModelParams, parity: Parity | str) -> ObservableSet:
    """Closed-form observables of the even (+) or odd (-) projected state."""
    parity = Parity.parse(parity)
    if not is_superradiant(params):
        raise DomainError(f"{DOMAIN_REASON} (gamma={params.gamma!r}, gamma_c={params.gamma_c!r})")
    s = parity.sign
    n = params.n_atoms
    g2 = params.gamma**2
    c = cos_theta_c(params)
    a = 1 - c * c
    log_f = _log_f(n, params.gamma, c)
    f = math.exp(log_f)
    one_minus_f = -math.expm1(log_f)
    den = 1 + f if s > 0 else one_minus_f
    num_ph = one_minus_f if s > 0 else 1 + f

    energy = n * g2 * (-3 + c * c + 2 * a / den)
    jz = -n * (c / 2 + s * _f_over_c_power(n, 1, params.gamma, c) / 2) / den
    n_ph = n * g2 * a * num_ph / den
    q2 = 0.5 + 2 * n * g2 * a / den
    p2 = 0.5 - s * 2 * n * g2 * a * f / den
    jx2 = n / 4 * (1 + a * (n - 1) / den)
    if n == 1:
        jy2 = n / 4
    else:
        jy2 = n / 4 * (1 - s * a * (n - 1) * _f_over_c_power(n, 2, params.gamma, c) / den)
    return ObservableSet(
        energy=energy,
        n_photons=n_ph,
        n_excited=n / 2 + jz,
        jz=jz,
        q2=q2,
        p2=p2,
        var_q=q2,
        var_p=p2,
        jx2=jx2,
        jy2=jy2,
        xi_x2=4 * jx2 / n,
        xi_y2=4 * jy2 / n,
        first_moments_zero=True,
    )


def parity_splitting(params: ModelParams) -> float:
    """<H>_odd - <H>_even = 4 N gamma^2 (1 - c^2) F / (1 - F^2)."""
    if not is_superradiant(params):
        raise DomainError(DOMAIN_REASON)
    n = params.n_atoms
    c = cos_theta_c(params)
    log_f = _log_f(n, params.gamma, c)
    f = math.exp(log_f)
    return 4 * n * params.gamma**2 * (1 - c * c) * f / (-math.expm1(log_f) * (1 + f))


def deep_limit_observables(params: ModelParams) -> ObservableSet:
    """Limiting values for gamma_c/gamma -> 0."""
    n = params.n_atoms
    g2 = params.gamma**2
    var_q = 2 * n * g2 + 0.5
    return ObservableSet(
        energy=-n * g2,
        n_photons=n * g2,
        n_excited=n / 2,
        jz=0.0,
        q2=var_q,
        p2=0.5,
        var_q=var_q,
        var_p=0.5,
        jx2=n * n / 4,
        jy2=n / 4,
        xi_x2=float(n),
        xi_y2=1.0,
        first_moments_zero=True,
    )


# ---------------------------------------------------------------------------
# explicit-vector oracle

class MaterializedState(NamedTuple):
    basis: Basis
    vector: np.ndarray


def oracle_cutoff(params: ModelParams) -> int:
    """Poisson-tail photon cutoff for the coherent amplitude at the critical point."""
    n_mean = critical_point(params).point.q ** 2 / 2
    return math.ceil(n_mean + 10 * math.sqrt(n_mean) + 20)


def _projected_vector(params: ModelParams, parity: Parity, nu_max: int) -> MaterializedState:
    cp = critical_point(params)
    alpha = cp.point.q / math.sqrt(2)
    zeta = math.tan(cp.point.theta / 2)
    basis = build_basis(params, nu_max, parity)
    nu = basis.nu.astype(float)
    k = basis.k.astype(float)
    n = params.n_atoms
    log_binom = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
    log_mag = nu * math.log(abs(alpha)) - 0.5 * gammaln(nu + 1) + 0.5 * log_binom + k * math.log(zeta)
    sign = np.where((basis.nu % 2 == 1) & (alpha < 0), -1.0, 1.0)
    vec = sign * np.exp(log_mag - log_mag.max())
    vec /= np.linalg.norm(vec)
    return MaterializedState(basis, vec)


def materialize_projected_state(
    params: ModelParams, parity: Parity | str, nu_max: int | None = None
) -> MaterializedState:
    """Projected trial state as a unit vector on the parity-filtered truncated basis.

    With ``nu_max=None`` the cutoff follows the Poisson tail rule and grows by
    50% until the top Fock level carries less than 1e-12 probability.
    """
    parity = Parity.parse(parity)
    if not is_superradiant(params):
        raise DomainError(
            "projection of the normal-phase state is trivial; its ground state is |0> ⊗ |j,-j>"
        )
    auto = nu_max is None
    nu_max = oracle_cutoff(params) if auto else int(nu_max)
    while True:
        state = _projected_vector(params, parity, nu_max)
        tail = float(np.sum(state.vector[state.basis.nu == nu_max] ** 2))
        if tail < TAIL_TOL:
            return state
        if not auto:
            raise ValueError(f"nu_max={nu_max} too small: top-level probability {tail:.3g}")
        nu_max = math.ceil(nu_max * 1.5)
