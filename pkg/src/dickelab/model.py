"""Dicke model parameters, truncated Fock x Dicke basis and operator matrices.

Conventions: field frequency is 1, ``H = a†a + omega_a J_z + gamma/sqrt(N) (a† + a)(J+ + J-)``.
A basis ket is ``|nu> ⊗ |j, m>`` with the half-integer ``m`` stored as the
integer ``k = m + j`` (number of excited atoms).  The excitation number is
``lambda = k + nu`` and its parity is conserved by ``H``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

# Above this dimension matrices are returned in sparse (CSR) form by default.
SPARSE_THRESHOLD = 5000


class Parity(enum.Enum):
    EVEN = 1
    ODD = -1

    @property
    def sign(self) -> int:
        return self.value

    @property
    def residue(self) -> int:
        """``lambda mod 2`` for states of this parity."""
        return 0 if self is Parity.EVEN else 1

    @classmethod
    def parse(cls, value) -> Parity:
        if isinstance(value, Parity):
            return value
        if isinstance(value, str):
            key = value.strip().lower()
            if key in ("even", "+", "+1"):
                return cls.EVEN
            if key in ("odd", "-", "-1"):
                return cls.ODD
        elif value in (1, -1):
            return cls(int(value))
        raise ValueError(f"unknown parity {value!r}")

    def __str__(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class ModelParams:
    n_atoms: int
    omega_a: float
    gamma: float

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise ValueError(f"n_atoms must be a positive integer, got {self.n_atoms!r}")
        if not np.isfinite(self.omega_a) or self.omega_a < 0:
            raise ValueError(f"omega_a must be finite and >= 0, got {self.omega_a!r}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma!r}")
        object.__setattr__(self, "n_atoms", int(self.n_atoms))
        object.__setattr__(self, "omega_a", float(self.omega_a))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def j(self) -> float:
        return self.n_atoms / 2

    @property
    def gamma_c(self) -> float:
        return float(np.sqrt(self.omega_a)) / 2

    def with_gamma(self, gamma: float) -> ModelParams:
        return ModelParams(self.n_atoms, self.omega_a, gamma)


@dataclass(frozen=True)
class BasisIndex:
    nu: int
    k: int
    n_atoms: int

    @property
    def m(self) -> float:
        return self.k - self.n_atoms / 2

    @property
    def lam(self) -> int:
        return self.k + self.nu

    @property
    def parity(self) -> Parity:
        return Parity.EVEN if self.lam % 2 == 0 else Parity.ODD


@dataclass(frozen=True, eq=False)
class Basis:
    """Ordered product basis, ascending ``nu`` then ascending ``m``.

    ``nu`` and ``k`` are integer arrays; ``index`` maps ``nu * (N + 1) + k``
    to the position in this basis (``-1`` if the state is filtered out).
    """

    params: ModelParams
    nu_max: int
    parity_filter: Parity | None
    nu: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    index: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.nu)

    def __len__(self) -> int:
        return self.size

    @property
    def m(self) -> np.ndarray:
        return self.k - self.params.j

    @property
    def lam(self) -> np.ndarray:
        return self.k + self.nu

    @property
    def parity_sign(self) -> np.ndarray:
        return np.where(self.lam % 2 == 0, 1, -1)

    @cached_property
    def states(self) -> tuple[BasisIndex, ...]:
        n = self.params.n_atoms
        return tuple(BasisIndex(int(a), int(b), n) for a, b in zip(self.nu, self.k))

    def position(self, nu: int, k: int) -> int:
        """Index of ``|nu, k>`` or -1 when absent from this basis."""
        n = self.params.n_atoms
        if not (0 <= nu <= self.nu_max and 0 <= k <= n):
            return -1
        return int(self.index[nu * (n + 1) + k])

    def embed(self, vector: np.ndarray, full: Basis) -> np.ndarray:
        """Scatter a vector on this basis into the (larger) basis ``full``."""
        n = self.params.n_atoms
        out = np.zeros(full.size, dtype=vector.dtype)
        out[full.index[self.nu * (n + 1) + self.k]] = vector
        return out


def build_basis(params: ModelParams, nu_max: int, parity_filter: Parity | str | None = None) -> Basis:
    if int(nu_max) != nu_max or nu_max < 0:
        raise ValueError(f"nu_max must be a nonnegative integer, got {nu_max!r}")
    nu_max = int(nu_max)
    n = params.n_atoms
    nu = np.repeat(np.arange(nu_max + 1), n + 1)
    k = np.tile(np.arange(n + 1), nu_max + 1)
    if parity_filter is not None:
        parity_filter = Parity.parse(parity_filter)
        keep = (nu + k) % 2 == parity_filter.residue
        nu, k = nu[keep], k[keep]
    index = np.full((nu_max + 1) * (n + 1), -1, dtype=np.int64)
    index[nu * (n + 1) + k] = np.arange(len(nu))
    for arr in (nu, k, index):
        arr.setflags(write=False)
    return Basis(params, nu_max, parity_filter, nu, k, index)


def parity_partition(basis: Basis) -> np.ndarray:
    """Stable permutation that lists even-lambda states first, then odd."""
    return np.argsort(basis.lam % 2, kind="stable")


# ---------------------------------------------------------------------------
# matrix assembly

def _spin_ladder(j: float, m: np.ndarray, step: int) -> np.ndarray:
    """<j, m+step| J_{+/-} |j, m> for step = +1 / -1."""
    return np.sqrt(np.maximum(j * (j + 1) - m * (m + step), 0.0))


def _finish(rows, cols, vals, diag, dim: int, sparse: bool | None, dtype=float):
    """Assemble from strictly-upper entries plus diagonal; mirror for exact symmetry."""
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=np.int64)
    vals = np.concatenate(vals) if vals else np.zeros(0, dtype=dtype)
    upper = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim), dtype=dtype).tocsr()
    mat = upper + upper.T.conj() + sp.diags(np.asarray(diag, dtype=dtype), format="csr")
    mat.sum_duplicates()
    mat.sort_indices()
    if sparse is None:
        sparse = dim > SPARSE_THRESHOLD
    return mat if sparse else mat.toarray()


def _photon_hops(basis: Basis, dnu: int, dk: int):
    """Pairs (i, i') with i' = |nu+dnu, k+dk> present in the basis; dnu > 0."""
    n = basis.params.n_atoms
    nu2 = basis.nu + dnu
    k2 = basis.k + dk
    ok = (nu2 <= basis.nu_max) & (k2 >= 0) & (k2 <= n)
    src = np.flatnonzero(ok)
    dst = basis.index[nu2[ok] * (n + 1) + k2[ok]]
    found = dst >= 0
    return src[found], dst[found]


def coupling_matrix(basis: Basis, sparse: bool | None = None):
    """(a† + a)(J+ + J-), i.e. dH/dgamma times sqrt(N)."""
    j = basis.params.j
    m = basis.m
    rows, cols, vals = [], [], []
    for dk in (1, -1):
        src, dst = _photon_hops(basis, 1, dk)
        rows.append(src)
        cols.append(dst)
        vals.append(np.sqrt(basis.nu[src] + 1.0) * _spin_ladder(j, m[src], dk))
    return _finish(rows, cols, vals, np.zeros(basis.size), basis.size, sparse)


def hamiltonian_matrix(basis: Basis, sparse: bool | None = None):
    p = basis.params
    diag = basis.nu + p.omega_a * basis.m
    j = p.j
    m = basis.m
    g = p.gamma / np.sqrt(p.n_atoms)
    rows, cols, vals = [], [], []
    if p.gamma != 0.0:
        for dk in (1, -1):
            src, dst = _photon_hops(basis, 1, dk)
            rows.append(src)
            cols.append(dst)
            vals.append(g * np.sqrt(basis.nu[src] + 1.0) * _spin_ladder(j, m[src], dk))
    return _finish(rows, cols, vals, diag, basis.size, sparse)


OBSERVABLE_KINDS = (
    "N_ph", "J_z", "q", "p", "q2", "p2", "J_x", "J_y", "J_x2", "J_y2", "J_z2", "J2",
    "parity", "coupling",
)

_ALIASES = {
    "q²": "q2", "p²": "p2", "J_x²": "J_x2", "J_y²": "J_y2", "J_z²": "J_z2", "J²": "J2",
    "Λ-parity": "parity", "lambda_parity": "parity",
}


def _spin_moment(basis: Basis, sign: float, sparse):
    """J_x² (sign=+1) or J_y² (sign=-1) on the product basis."""
    j = basis.params.j
    m = basis.m
    up = _spin_ladder(j, m, 1)
    down = _spin_ladder(j, m, -1)
    diag = (up**2 + down**2) / 4
    src, dst = _photon_hops_spin(basis, 2)
    vals = sign * _spin_ladder(j, m[src], 1) * _spin_ladder(j, m[src] + 1, 1) / 4
    return _finish([src], [dst], [vals], diag, basis.size, sparse)


def _photon_hops_spin(basis: Basis, dk: int):
    n = basis.params.n_atoms
    k2 = basis.k + dk
    ok = k2 <= n
    src = np.flatnonzero(ok)
    dst = basis.index[basis.nu[ok] * (n + 1) + k2[ok]]
    found = dst >= 0
    return src[found], dst[found]


def _quadrature_sq(basis: Basis, sign: float, sparse):
    """q² (sign=+1) or p² (sign=-1): diagonal nu + 1/2, (nu, nu+2) = ±sqrt((nu+1)(nu+2))/2."""
    src, dst = _photon_hops(basis, 2, 0)
    nu = basis.nu[src]
    vals = sign * np.sqrt((nu + 1.0) * (nu + 2.0)) / 2
    return _finish([src], [dst], [vals], basis.nu + 0.5, basis.size, sparse)


def observable_matrix(kind: str, basis: Basis, sparse: bool | None = None):
    """Matrix of an observable on ``basis``.

    All kinds are real symmetric except ``p`` and ``J_y``, which are returned as
    complex Hermitian matrices (purely imaginary entries).
    """
    kind = _ALIASES.get(kind, kind)
    j = basis.params.j
    m = basis.m
    dim = basis.size
    if kind == "N_ph":
        return _finish([], [], [], basis.nu.astype(float), dim, sparse)
    if kind == "J_z":
        return _finish([], [], [], m, dim, sparse)
    if kind == "J_z2":
        return _finish([], [], [], m**2, dim, sparse)
    if kind == "J2":
        return _finish([], [], [], np.full(dim, j * (j + 1)), dim, sparse)
    if kind == "parity":
        return _finish([], [], [], basis.parity_sign.astype(float), dim, sparse)
    if kind in ("q", "p"):
        src, dst = _photon_hops(basis, 1, 0)
        amp = np.sqrt(basis.nu[src] + 1.0) / np.sqrt(2)
        if kind == "q":
            return _finish([src], [dst], [amp], np.zeros(dim), dim, sparse)
        # p = i(a† - a)/sqrt(2): <nu|p|nu+1> = -i sqrt(nu+1)/sqrt(2)
        return _finish([src], [dst], [-1j * amp], np.zeros(dim), dim, sparse, dtype=complex)
    if kind in ("J_x", "J_y"):
        src, dst = _photon_hops_spin(basis, 1)
        amp = _spin_ladder(j, m[src], 1) / 2
        if kind == "J_x":
            return _finish([src], [dst], [amp], np.zeros(dim), dim, sparse)
        # J_y = (J+ - J-)/(2i): <m|J_y|m+1> = i C-(m+1)/2
        return _finish([src], [dst], [1j * amp], np.zeros(dim), dim, sparse, dtype=complex)
    if kind == "q2":
        return _quadrature_sq(basis, 1.0, sparse)
    if kind == "p2":
        return _quadrature_sq(basis, -1.0, sparse)
    if kind == "J_x2":
        return _spin_moment(basis, 1.0, sparse)
    if kind == "J_y2":
        return _spin_moment(basis, -1.0, sparse)
    if kind == "coupling":
        return coupling_matrix(basis, sparse)
    raise ValueError(f"unknown observable kind {kind!r}; expected one of {OBSERVABLE_KINDS}")
