"""Exact diagonalization of the truncated Dicke Hamiltonian.

H conserves the parity of lambda = k + nu, so every solve is done block by
block.  Blocks up to ``DENSE_MAX`` states use a dense symmetric solver,
larger ones ARPACK's implicitly restarted Lanczos on the sparse matrix.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from . import highprec
from .model import (
    Basis,
    ModelParams,
    Parity,
    build_basis,
    hamiltonian_matrix,
    observable_matrix,
)
from .observables import ObservableSet

log = logging.getLogger(__name__)

# dense eigh beyond this block size is much slower than Lanczos at equal accuracy
DENSE_MAX = 1000
MAX_NU_MAX = 100_000
GROWTH = 1.5
TOP_MASS_TOL = 1e-10
DEGENERACY_TOL = 1e-12
NORM_TOL = 1e-8


class EigensolverError(RuntimeError):
    pass


class CutoffError(RuntimeError):
    def __init__(self, message: str, last: EigenResult | None = None):
        super().__init__(message)
        self.last = last


@dataclass(frozen=True, eq=False)
class EigenResult:
    energies: np.ndarray
    vectors: np.ndarray  # columns, on ``basis``
    parities: np.ndarray
    nu_max_used: int
    converged: bool
    basis: Basis

    @property
    def ground_energy(self) -> float:
        return float(self.energies[0])

    @property
    def ground_state(self) -> np.ndarray:
        return self.vectors[:, 0]

    def top_mass(self, levels: int = 2) -> float:
        """Largest probability any returned state puts on the top ``levels`` Fock levels."""
        top = self.basis.nu > self.basis.nu_max - levels
        return float(np.max(np.sum(self.vectors[top] ** 2, axis=0)))


def _fix_sign(vecs: np.ndarray) -> np.ndarray:
    for i in range(vecs.shape[1]):
        v = vecs[:, i]
        if v[np.argmax(np.abs(v))] < 0:
            vecs[:, i] = -v
    return vecs


def _block_lowest(basis: Basis, k: int, params: ModelParams):
    dim = basis.size
    k = min(k, dim)
    if params.gamma == 0.0:
        diag = basis.nu + params.omega_a * basis.m
        order = np.argsort(diag, kind="stable")[:k]
        vecs = np.zeros((dim, k))
        vecs[order, np.arange(k)] = 1.0
        return diag[order].astype(float), vecs
    try:
        if dim <= DENSE_MAX or k >= dim - 1:
            h = hamiltonian_matrix(basis, sparse=False)
            vals, vecs = la.eigh(h, subset_by_index=[0, k - 1])
        else:
            h = hamiltonian_matrix(basis, sparse=True)
            v0 = np.random.default_rng(20100101).standard_normal(dim)
            vals, vecs = sla.eigsh(h, k=k, which="SA", v0=v0, tol=0)
            order = np.argsort(vals)
            vals, vecs = vals[order], vecs[:, order]
    except (la.LinAlgError, sla.ArpackError, sla.ArpackNoConvergence) as exc:
        raise EigensolverError(
            f"eigensolver failed: dim={dim}, N={params.n_atoms}, omega_a={params.omega_a}, "
            f"gamma={params.gamma}, nu_max={basis.nu_max}, parity={basis.parity_filter}: {exc}"
        ) from exc
    return vals, _fix_sign(np.array(vecs))


def lowest_states(
    params: ModelParams, nu_max: int, k: int = 1, parity_filter: Parity | str | None = None
) -> EigenResult:
    """The k lowest eigenpairs, ascending; near-degenerate pairs list parity +1 first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    full = build_basis(params, nu_max, parity_filter)
    if k > full.size:
        raise ValueError(f"k={k} exceeds basis size {full.size}")
    blocks = [Parity.parse(parity_filter)] if parity_filter is not None else [Parity.EVEN, Parity.ODD]
    found = []
    for parity in blocks:
        block = full if parity_filter is not None else build_basis(params, nu_max, parity)
        if block.size == 0:
            continue
        vals, vecs = _block_lowest(block, k, params)
        for e, v in zip(vals, vecs.T):
            found.append((float(e), parity.sign, v if block is full else block.embed(v, full)))
    found.sort(key=lambda t: t[0])
    # tie-break exact doublets by parity, +1 first
    for i in range(len(found) - 1):
        a, b = found[i], found[i + 1]
        if abs(b[0] - a[0]) < DEGENERACY_TOL * max(1.0, abs(a[0])) and a[1] < b[1]:
            found[i], found[i + 1] = b, a
    found = found[:k]
    energies = np.array([t[0] for t in found])
    vectors = np.column_stack([t[2] for t in found])
    parities = np.sum(vectors**2 * full.parity_sign[:, None], axis=0)
    return EigenResult(energies, vectors, parities, full.nu_max, True, full)


def expectation_set(state: np.ndarray, basis: Basis) -> ObservableSet:
    """Contract a unit vector with every observable."""
    state = np.asarray(state)
    norm = float(np.linalg.norm(state))
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"state norm {norm!r} deviates from 1 by more than {NORM_TOL}")

    def ev(kind):
        m = observable_matrix(kind, basis, sparse=True)
        return complex(np.vdot(state, m @ state))

    n = basis.params.n_atoms
    parity = ev("parity").real
    q2, p2 = ev("q2").real, ev("p2").real
    jx2, jy2 = ev("J_x2").real, ev("J_y2").real
    jz = ev("J_z").real
    if abs(abs(parity) - 1.0) <= 1e-10:
        # q, p, J_x, J_y all flip lambda parity
        first = (0.0, 0.0, 0.0, 0.0)
        zero = True
    else:
        first = (ev("q").real, ev("p").real, ev("J_x").real, ev("J_y").real)
        zero = max(abs(x) for x in first) < 1e-12
    mq, mp, mx, my = first
    var_jx = jx2 - mx * mx
    var_jy = jy2 - my * my
    energy = complex(np.vdot(state, hamiltonian_matrix(basis, sparse=True) @ state)).real
    return ObservableSet(
        energy=energy,
        n_photons=ev("N_ph").real,
        n_excited=n / 2 + jz,
        jz=jz,
        q2=q2,
        p2=p2,
        var_q=q2 - mq * mq,
        var_p=p2 - mp * mp,
        jx2=jx2,
        jy2=jy2,
        xi_x2=4 * var_jx / n,
        xi_y2=4 * var_jy / n,
        first_moments_zero=zero,
    )


def default_start(params: ModelParams) -> int:
    return math.ceil(4 * params.n_atoms * params.gamma**2 + 30)


def converged_lowest(
    params: ModelParams,
    energy_tol: float = 1e-9,
    start_nu_max: int | None = None,
    k: int = 1,
    max_nu_max: int = MAX_NU_MAX,
) -> EigenResult:
    """Lowest states at the smallest cutoff on the grid start, x1.5, ... that is converged.

    A cutoff is accepted when its top two Fock levels carry < 1e-10
    probability and the ground energy moves by < energy_tol at the next
    grid cutoff.
    """
    if not energy_tol > 0:
        raise ValueError("energy_tol must be positive")
    nu = default_start(params) if start_nu_max is None else int(start_nu_max)
    if nu > max_nu_max:
        raise CutoffError(f"start cutoff {nu} exceeds cap {max_nu_max}")
    cur = lowest_states(params, nu, k)
    if params.gamma == 0.0:
        return cur
    while True:
        nxt_nu = max(nu + 1, math.ceil(nu * GROWTH))
        if nxt_nu > max_nu_max:
            raise CutoffError(
                f"photon cutoff did not converge below cap {max_nu_max} "
                f"(N={params.n_atoms}, omega_a={params.omega_a}, gamma={params.gamma})",
                cur,
            )
        nxt = lowest_states(params, nxt_nu, k)
        if cur.top_mass() < TOP_MASS_TOL and abs(nxt.ground_energy - cur.ground_energy) < energy_tol:
            return cur
        log.debug("cutoff %d not converged (dE=%.3g)", nu, nxt.ground_energy - cur.ground_energy)
        nu, cur = nxt_nu, nxt


def converge_cutoff(params: ModelParams, energy_tol: float = 1e-9, start_nu_max: int | None = None) -> int:
    return converged_lowest(params, energy_tol, start_nu_max).nu_max_used


def _needed_digits(params: ModelParams) -> int:
    """Decimal digits needed to resolve the parity doublet, from the projected-state estimate."""
    from .meanfield import cos_theta_c, is_superradiant
    from .projected import _log_f

    if not is_superradiant(params):
        return 40
    n = params.n_atoms
    c = cos_theta_c(params)
    log_f = _log_f(n, params.gamma, c)
    if not math.isfinite(log_f):
        return 40
    log10_gap = (math.log(4 * n * params.gamma**2 * (1 - c * c)) + log_f - math.log(-math.expm1(log_f))) / math.log(10)
    return max(40, int(-log10_gap) + 30)


def energy_gap(params: ModelParams, nu_max: int, refine: bool = True) -> float:
    """E1 - E0 of the full spectrum at cutoff ``nu_max``.

    When the two lowest levels form a parity doublet whose splitting is below
    double-precision resolution, the splitting is recomputed in extended
    precision (``refine=True``) or clamped to 0 (``refine=False``).
    """
    res = lowest_states(params, nu_max, k=2)
    gap = float(res.energies[1] - res.energies[0])
    resolution = 1e-9 * max(1.0, abs(res.energies[0]))
    if gap >= resolution or res.parities[0] * res.parities[1] > 0:
        return max(gap, 0.0)
    if not refine:
        return max(gap, 0.0)
    return refined_doublet(params, nu_max).gap


@dataclass(frozen=True)
class DoubletRefinement:
    gap: float
    e_even: str
    e_odd: str
    bits: int


def refined_doublet(params: ModelParams, nu_max: int, digits: int | None = None) -> DoubletRefinement:
    """Ground energies of both parity blocks in extended precision.

    Doubles the working precision until the splitting exceeds the
    estimated error of each block energy by a factor of 1e3.
    """
    digits = _needed_digits(params) if digits is None else digits
    seeds = {}
    for parity in (Parity.EVEN, Parity.ODD):
        r = lowest_states(params, nu_max, k=2, parity_filter=parity)
        seeds[parity] = r
    bits = math.ceil(digits * 3.33)
    while bits <= highprec.MAX_BITS:
        out = {}
        for parity, r in seeds.items():
            within_gap = float(r.energies[1] - r.energies[0]) if len(r.energies) > 1 else 1.0
            out[parity] = highprec.block_ground_energy(
                params, nu_max, parity, float(r.energies[0]), r.ground_state, within_gap, bits
            )
        (e_even, err_e), (e_odd, err_o) = out[Parity.EVEN], out[Parity.ODD]
        gap = e_odd - e_even
        if abs(gap) > 1e3 * (err_e + err_o):
            return DoubletRefinement(abs(float(gap)), str(e_even), str(e_odd), bits)
        bits *= 2
    raise EigensolverError(f"doublet splitting unresolved at {highprec.MAX_BITS} bits for {params}")
