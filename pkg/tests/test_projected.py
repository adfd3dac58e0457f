import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dickelab.exact import expectation_set
from dickelab.meanfield import mean_field_observables
from dickelab.model import ModelParams, Parity, build_basis, observable_matrix
from dickelab.observables import ObservableSet
from dickelab.projected import (
    DomainError,
    deep_limit_observables,
    f_factor,
    materialize_projected_state,
    parity_splitting,
    projected_observables,
)

# natural log of F from 40-digit mpmath evaluation of the defining expression
LOG_F_100_1p03 = -11.826964991621172928
LOG_F_10_0p75 = -17.137079939941065417
F_10_0p75 = 3.6096138649685815085e-8

FIELDS = ObservableSet.field_names()


def contraction(params, parity, nu_max=None):
    state = materialize_projected_state(params, parity, nu_max)
    return expectation_set(state.vector, state.basis)


def assert_sets_close(a, b, atol):
    for name in FIELDS:
        x, y = getattr(a, name), getattr(b, name)
        if isinstance(x, bool):
            assert x == y, name
        else:
            assert abs(x - y) <= atol, (name, x, y)


def test_f_factor_frozen_values():
    f = f_factor(100, 1.03 * 0.5, 0.5)
    assert f.log_f == pytest.approx(LOG_F_100_1p03, rel=1e-14)
    assert f.f < 1e-5
    f = f_factor(10, 0.75, 0.5)
    assert f.log_f == pytest.approx(LOG_F_10_0p75, rel=1e-14)
    assert f.f == pytest.approx(F_10_0p75, rel=1e-13)
    assert 0 < f.f < 1


def test_f_factor_at_critical_coupling():
    for n in (1, 7, 100, 5000):
        f = f_factor(n, 0.5, 0.5)
        assert f.log_f == 0.0 and f.f == 1.0


def test_f_factor_rejects_nonpositive_gamma():
    with pytest.raises(ValueError):
        f_factor(3, 0.0, 0.5)


def test_f_factor_underflows_quietly():
    f = f_factor(10_000, 2.0, 0.5)
    assert f.f == 0.0 and math.isfinite(f.log_f)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 200), st.floats(1.001, 5.0), st.floats(0.05, 2.0))
def test_f_decreasing_in_n(n, ratio, gc):
    assert f_factor(n + 1, ratio * gc, gc).log_f < f_factor(n, ratio * gc, gc).log_f


def test_domain_errors():
    for g in (0.3, 0.5):
        with pytest.raises(DomainError):
            projected_observables(ModelParams(10, 1.0, g), Parity.EVEN)
        with pytest.raises(DomainError):
            materialize_projected_state(ModelParams(10, 1.0, g), "odd")
        with pytest.raises(DomainError):
            parity_splitting(ModelParams(10, 1.0, g))


def test_mean_field_recovery_large_n():
    params = ModelParams(100, 1.0, 0.75)
    assert f_factor(100, 0.75, 0.5).f < 1e-40
    pe, mf = projected_observables(params, Parity.EVEN), mean_field_observables(params)
    for name in ("energy", "jz", "n_photons", "n_excited"):
        assert getattr(pe, name) == pytest.approx(getattr(mf, name), rel=1e-12)
    assert pe.p2 == pytest.approx(0.5, rel=1e-14)


def test_n10_matches_oracle_both_parities():
    params = ModelParams(10, 1.0, 0.6)
    for parity in Parity:
        assert_sets_close(projected_observables(params, parity), contraction(params, parity), 1e-8)


@pytest.mark.parametrize("n", [2, 4, 6, 8, 10])
def test_oracle_equivalence_grid(n):
    for omega in (0.5, 1.0, 2.0):
        gc = math.sqrt(omega) / 2
        for ratio in (1.05, 1.2, 1.5, 2.0):
            params = ModelParams(n, omega, ratio * gc)
            for parity in Parity:
                assert_sets_close(projected_observables(params, parity), contraction(params, parity), 1e-8)


def test_oracle_photon_number_fixed_cutoff():
    params = ModelParams(2, 1.0, 0.6)
    state = materialize_projected_state(params, Parity.EVEN, nu_max=60)
    n_ph = state.vector @ observable_matrix("N_ph", state.basis, sparse=False) @ state.vector
    assert n_ph == pytest.approx(projected_observables(params, Parity.EVEN).n_photons, abs=1e-8)


def test_oracle_rejects_short_cutoff():
    with pytest.raises(ValueError):
        materialize_projected_state(ModelParams(10, 1.0, 1.0), Parity.EVEN, nu_max=5)


def test_parity_purity():
    params = ModelParams(6, 1.0, 0.8)
    for parity in Parity:
        state = materialize_projected_state(params, parity)
        assert np.all(state.basis.parity_sign == parity.sign)
        full = build_basis(params, state.basis.nu_max)
        vec = state.basis.embed(state.vector, full)
        pi = observable_matrix("parity", full, sparse=False)
        assert vec @ pi @ vec == pytest.approx(parity.sign, abs=1e-15)


def test_near_critical_even_state_is_vacuum():
    for n in (2, 10, 40):
        params = ModelParams(n, 1.0, 0.5 * (1 + 1e-9))
        state = materialize_projected_state(params, Parity.EVEN)
        i = state.basis.position(0, 0)
        assert state.vector[i] ** 2 > 1 - 1e-6


def test_ordering_and_degeneracy():
    for omega, g in [(1.0, 0.55), (1.0, 0.8), (0.5, 0.6), (2.0, 1.5)]:
        prev = math.inf
        for n in (10, 20, 40, 80):
            params = ModelParams(n, omega, g)
            e_even = projected_observables(params, Parity.EVEN).energy
            e_odd = projected_observables(params, Parity.ODD).energy
            assert e_even <= e_odd
            split = parity_splitting(params) / n
            # the direct difference cancels catastrophically once F is tiny
            assert (e_odd - e_even) / n == pytest.approx(split, abs=1e-13 * abs(e_even) / n)
            assert split < prev
            prev = split


def test_uncertainty_products():
    for n in (1, 2, 5, 20, 200):
        for ratio in (1.0001, 1.01, 1.1, 1.5, 3, 20):
            params = ModelParams(n, 1.0, ratio * 0.5)
            for parity in Parity:
                obs = projected_observables(params, parity)
                assert obs.q2 > 0 and obs.p2 > 0
                assert obs.q2 * obs.p2 >= 0.25 * (1 - 1e-12)
                assert obs.first_moments_zero


def test_p_squeezing_dip_near_critical():
    dips = []
    for n in (10, 20, 50):
        gammas = 0.5 * np.linspace(1.0005, 1.3, 2000)
        p2 = np.array([projected_observables(ModelParams(n, 1.0, g), Parity.EVEN).p2 for g in gammas])
        assert p2.min() < 0.5
        dips.append(np.max(1 / (2 * n) - p2 / n))
    assert dips[0] > dips[1] > dips[2] > 0


def test_zero_f_limit_gives_vacuum_p():
    obs = projected_observables(ModelParams(500, 1.0, 2.0), Parity.ODD)
    assert obs.var_p == 0.5


def test_deep_limit_agreement():
    params = ModelParams(100, 1.0, 10 * 0.5)
    pe, deep = projected_observables(params, Parity.EVEN), deep_limit_observables(params)
    for name in ("n_photons", "n_excited", "var_q", "var_p", "xi_x2", "xi_y2"):
        assert getattr(pe, name) == pytest.approx(getattr(deep, name), rel=0.01)


def test_deep_limit_fixed_values():
    for n, g in [(1, 0.1), (30, 2.0), (1000, 7.0)]:
        d = deep_limit_observables(ModelParams(n, 1.0, g))
        assert d.xi_y2 == 1.0
        assert d.var_q * d.var_p >= 0.25


def test_degenerate_atoms():
    # omega_a = 0: F vanishes but the F/c^k combinations stay finite
    params = ModelParams(4, 0.0, 0.7)
    for parity in Parity:
        obs = projected_observables(params, parity)
        assert all(math.isfinite(x) for x in obs.numeric().values())
        assert obs.jz == 0.0
