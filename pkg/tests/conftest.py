import numpy as np
import pytest


def kron_hamiltonian(n_atoms, omega_a, gamma, nu_max):
    """Dicke Hamiltonian from dense ladder matrices and Kronecker products.

    Independent of dickelab's assembly; index order nu * (N + 1) + k matches
    an unfiltered dickelab basis.
    """
    j = n_atoms / 2
    a = np.diag(np.sqrt(np.arange(1, nu_max + 1, dtype=float)), 1)
    m = np.arange(n_atoms + 1) - j
    jp = np.zeros((n_atoms + 1, n_atoms + 1))
    for k in range(n_atoms):
        jp[k + 1, k] = np.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    jz = np.diag(m)
    eye_f, eye_s = np.eye(nu_max + 1), np.eye(n_atoms + 1)
    return (np.kron(a.T @ a, eye_s) + omega_a * np.kron(eye_f, jz)
            + gamma / np.sqrt(n_atoms) * np.kron(a + a.T, jp + jp.T))


@pytest.fixture
def kron_h():
    return kron_hamiltonian
