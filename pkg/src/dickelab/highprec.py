"""Extended-precision ground energy of one parity block.

Deep in the superradiant phase the even/odd ground states split by an
amount that is exponentially small in N, far below double precision.  Here
the block ground energy is polished by shifted inverse iteration in
multiple-precision arithmetic (gmpy2), starting from the double-precision
eigenpair.  Ordered by photon number, a parity block is block-tridiagonal
(blocks of fixed nu, size ~N/2), so each solve is a block Thomas sweep.
"""

from __future__ import annotations

import math

import gmpy2
import numpy as np
from gmpy2 import mpfr

from .model import ModelParams, Parity, build_basis

MAX_BITS = 8192
MAX_ITER = 400


def _inverse(m: np.ndarray) -> np.ndarray:
    n = m.shape[0]
    eye = np.empty((n, n), dtype=object)
    eye[:] = mpfr(0)
    for i in range(n):
        eye[i, i] = mpfr(1)
    a = np.concatenate([m.copy(), eye], axis=1)
    for col in range(n):
        piv = col + max(range(n - col), key=lambda r: abs(a[col + r, col]))
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
        a[col] = a[col] / a[col, col]
        f = a[:, col].copy()
        f[col] = mpfr(0)
        a -= np.multiply.outer(f, a[col])
    return a[:, n:]


class _BlockTridiagonal:
    """H restricted to one parity block, split into fixed-nu blocks."""

    def __init__(self, params: ModelParams, nu_max: int, parity: Parity):
        basis = build_basis(params, nu_max, parity)
        n = params.n_atoms
        self.basis = basis
        self.slices = []
        self.diag = []
        self.off = []  # off[i] couples block i (rows) to block i+1 (cols)
        omega = mpfr(params.omega_a)
        g = mpfr(params.gamma) / gmpy2.sqrt(mpfr(n))
        starts = np.searchsorted(basis.nu, np.arange(nu_max + 2))
        ks = []
        for nu in range(nu_max + 1):
            sl = slice(int(starts[nu]), int(starts[nu + 1]))
            self.slices.append(sl)
            kk = [int(x) for x in basis.k[sl]]
            ks.append(kk)
            self.diag.append(np.array([mpfr(nu) + omega * mpfr(2 * k - n) / 2 for k in kk], dtype=object))
        for nu in range(nu_max):
            rows, cols = ks[nu], ks[nu + 1]
            col_pos = {k: c for c, k in enumerate(cols)}
            b = np.empty((len(rows), len(cols)), dtype=object)
            b[:] = mpfr(0)
            amp = g * gmpy2.sqrt(mpfr(nu + 1))
            for r, k in enumerate(rows):
                if k + 1 in col_pos:
                    b[r, col_pos[k + 1]] = amp * gmpy2.sqrt(mpfr((k + 1) * (n - k)))
                if k - 1 in col_pos:
                    b[r, col_pos[k - 1]] = amp * gmpy2.sqrt(mpfr(k * (n - k + 1)))
            self.off.append(b)

    def matvec(self, x: list) -> list:
        out = []
        last = len(x) - 1
        for i, xi in enumerate(x):
            y = self.diag[i] * xi
            if i < last:
                y = y + self.off[i].dot(x[i + 1])
            if i > 0:
                y = y + self.off[i - 1].T.dot(x[i - 1])
            out.append(y)
        return out

    def factor(self, shift):
        """Block LU of (H - shift); returns the data needed by ``solve``."""
        sinv, w = [], [None]
        for i, d in enumerate(self.diag):
            s = np.empty((len(d), len(d)), dtype=object)
            s[:] = mpfr(0)
            s[np.arange(len(d)), np.arange(len(d))] = d - shift
            if i > 0:
                wi = sinv[i - 1].dot(self.off[i - 1])
                w.append(wi)
                s = s - self.off[i - 1].T.dot(wi)
            sinv.append(_inverse(s))
        return sinv, w

    def solve(self, fac, b: list) -> list:
        sinv, w = fac
        y = [b[0]]
        for i in range(1, len(b)):
            y.append(b[i] - w[i].T.dot(y[i - 1]))
        x = [None] * len(b)
        x[-1] = sinv[-1].dot(y[-1])
        for i in range(len(b) - 2, -1, -1):
            x[i] = sinv[i].dot(y[i] - self.off[i].dot(x[i + 1]))
        return x


def _dot(a: list, b: list):
    total = mpfr(0)
    for ai, bi in zip(a, b):
        if len(ai):
            total += ai.dot(bi)
    return total


def block_ground_energy(
    params: ModelParams,
    nu_max: int,
    parity: Parity,
    energy_guess: float,
    vector_guess: np.ndarray,
    within_gap: float,
    bits: int,
):
    """Return (energy, error_bound) as mpfr for the lowest state of one parity block.

    ``vector_guess`` lives on the parity-filtered basis or the full basis;
    ``within_gap`` is the distance to the next level of the same block.
    """
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        h = _BlockTridiagonal(params, nu_max, parity)
        basis = h.basis
        if len(vector_guess) != basis.size:
            full = build_basis(params, nu_max)
            vector_guess = np.asarray(vector_guess)[full.index[basis.nu * (params.n_atoms + 1) + basis.k]]
        x = [np.array([mpfr(float(v)) for v in vector_guess[sl]], dtype=object) for sl in h.slices]
        scale = max(1.0, abs(energy_guess))
        shift = mpfr(energy_guess) - mpfr(1e-8 * scale)
        fac = h.factor(shift)
        h_norm = nu_max + params.omega_a * params.n_atoms / 2 + params.gamma * math.sqrt(params.n_atoms) * math.sqrt(nu_max + 1)
        floor = mpfr(2) ** (-bits + 8) * h_norm * basis.size
        gap = mpfr(max(within_gap, 1e-6))
        rho = mpfr(energy_guess)
        for _ in range(MAX_ITER):
            x = h.solve(fac, x)
            nrm = gmpy2.sqrt(_dot(x, x))
            x = [xi / nrm for xi in x]
            hx = h.matvec(x)
            rho = _dot(x, hx)
            r = [hi - rho * xi for hi, xi in zip(hx, x)]
            res2 = _dot(r, r)
            if res2 / gap <= floor:
                break
        return rho, res2 / gap + floor
