import math

import numpy as np
import pytest

from chrflow import initial
from chrflow.duality import DualityContext
from chrflow.materials import make_clipped_butler_volmer, make_quartic_affine
from chrflow.mesh import Mesh, assemble_forms
from chrflow.stepper import (StepFailure, Tolerances, chemical_potential, energy_I_eps, minmove_step, simulate,
                             step_objective, variational_interpolant)

SIGMA = math.sqrt(2) / 6


def _setup(n=129, eps=0.1, **kw):
    forms = assemble_forms(Mesh.interval(1.0, n))
    return forms, make_quartic_affine(eps, **kw)


def test_energy_examples():
    forms, law = _setup(65, 0.1)
    assert energy_I_eps(forms, law, np.zeros(65)) == 0.0
    assert energy_I_eps(forms, law, np.full(65, 0.5)) == pytest.approx(0.625, abs=1e-14)


def test_profile_energy_near_sigma():
    forms, law = _setup(1025, 0.02)
    c = initial.front(forms.mesh, 0.5, 0.02)
    assert energy_I_eps(forms, law, c) == pytest.approx(SIGMA, rel=0.02)


def test_chemical_potential_examples():
    forms, law = _setup(33, 0.1)
    assert np.allclose(chemical_potential(forms, law, np.full(33, 0.5)), 0.0, atol=1e-14)
    assert np.allclose(chemical_potential(forms, law, np.full(33, 0.25)), 1.875, atol=1e-12)


def test_profile_potential_vanishes_under_refinement():
    sups = []
    for n in (513, 1025, 2049):
        forms, law = _setup(n, 0.02)
        sups.append(np.max(np.abs(chemical_potential(forms, law, initial.front(forms.mesh, 0.5, 0.02)))))
    assert sups[-1] < 0.05
    assert sups[0] > sups[1] > sups[2]


def test_equilibrium_well_is_stationary():
    forms, law = _setup(65, 0.1, k=0.0)
    rec = minmove_step(forms, law, np.ones(65), 0.01)
    assert np.max(np.abs(rec.c_next - 1.0)) < 1e-12
    assert rec.boundary_flux == pytest.approx(0.0, abs=1e-12)


def _dense_step_oracle(n, eps, k, beta, c_prev, tau):
    """Newton on the coupled system with hand-built dense matrices."""
    h = 1.0 / (n - 1)
    K = np.zeros((n, n))
    for e in range(n - 1):
        K[e:e + 2, e:e + 2] += np.array([[1, -1], [-1, 1]]) / h
    m = np.full(n, h)
    m[[0, -1]] = h / 2
    b = np.zeros(n)
    b[[0, -1]] = 1.0
    f1 = lambda s: 2 * s * (1 - s) * (1 - 2 * s)
    f2 = lambda s: 2 - 12 * s + 12 * s**2
    cb = np.clip(c_prev, 0, 1)
    c, mu = c_prev.copy(), chemical_potential_dense(K, m, eps, c_prev, f1)
    for _ in range(40):
        R = k * (1 - cb) - beta * mu
        r1 = m * (c - c_prev) + tau * (K @ mu) - tau * b * R
        r2 = m * mu - eps * (K @ c) - m * f1(c) / eps
        J = np.block([[np.diag(m), tau * (K + beta * np.diag(b))],
                      [-eps * K - np.diag(m * f2(c) / eps), np.diag(m)]])
        d = np.linalg.solve(J, -np.concatenate([r1, r2]))
        c, mu = c + d[:n], mu + d[n:]
        if np.max(np.abs(d)) < 1e-14:
            break
    return c, mu


def chemical_potential_dense(K, m, eps, c, f1):
    return eps * (K @ c) / m + f1(c) / eps


def test_insertion_step_matches_dense_oracle():
    # tau below 4 eps^3, where the step problem is uniquely solvable
    n, eps, tau = 129, 0.1, 0.002
    forms, law = _setup(n, eps, k=1.0, beta=1.0)
    c0 = np.full(n, 0.5)
    rec = minmove_step(forms, law, c0, tau, tol=Tolerances(diss=1e-9))
    assert rec.mass_next > rec.mass_prev
    assert abs(rec.mass_defect) <= 1e-10
    assert rec.slack >= -1e-12
    c_ref, mu_ref = _dense_step_oracle(n, eps, 1.0, 1.0, c0, tau)
    assert np.max(np.abs(rec.c_next - c_ref)) < 1e-8
    assert np.max(np.abs(rec.mu - mu_ref)) < 1e-7


def test_insertion_large_step_is_refused_then_halved():
    # tau = 0.01 exceeds 4 eps^3: the Newton critical point breaks the slack, the march halves
    forms, law = _setup(129, 0.1, k=1.0, beta=1.0)
    c0 = np.full(129, 0.5)
    with pytest.raises(StepFailure):
        minmove_step(forms, law, c0, 0.01)
    res = simulate(forms, law, c0, 0.01, 0.01)
    assert res.completed and res.ledger.steps > 1
    assert res.ledger.records[-1].mass_next > res.ledger.initial_mass
    for r in res.ledger.records:
        assert abs(r.mass_defect) <= 1e-10 and r.slack >= -1e-9


def test_front_stays_and_energy_decreases():
    forms, law = _setup(257, 0.05, k=0.0)
    c0 = initial.front(forms.mesh, 0.5, 0.05)
    res = simulate(forms, law, c0, 1e-3, 0.1, snapshot_every=100)
    assert res.completed and res.ledger.steps == 100
    energies = [res.ledger.initial_energy] + [r.I_eps_next for r in res.ledger.records]
    assert np.all(np.diff(energies) <= 1e-12)
    c_end = res.snapshots[-1].c
    x = forms.mesh.coordinates[:, 0]
    crossing = x[np.argmin(np.abs(c_end - 0.5))]
    assert abs(crossing - 0.5) < 2 * forms.mesh.h[0]


def test_variational_interpolant_endpoints():
    forms, law = _setup(129, 0.05, k=0.3)
    c0 = initial.interval_droplet(forms.mesh, 0.35, 0.65, 0.05)
    tau = 1e-3
    rec = minmove_step(forms, law, c0, tau)
    c1, mu1 = variational_interpolant(forms, law, c0, tau, 1.0)
    assert np.max(np.abs(c1 - rec.c_next)) < 1e-8
    assert np.max(np.abs(mu1 - rec.mu)) < 1e-6
    c_small, _ = variational_interpolant(forms, law, c0, tau, 1e-4)
    assert np.max(np.abs(c_small - c0)) < 1e-3
    ctx = DualityContext.from_field(forms, law, c0)
    c_half, _ = variational_interpolant(forms, law, c0, tau, 0.5)
    assert step_objective(forms, law, ctx, c0, 0.5 * tau, c_half)[0] <= \
        step_objective(forms, law, ctx, c0, 0.5 * tau, c0)[0] + 1e-14
    with pytest.raises(ValueError):
        variational_interpolant(forms, law, c0, tau, 0.0)


def test_simulate_zero_horizon():
    forms, law = _setup(33, 0.1)
    res = simulate(forms, law, np.full(33, 0.3), 0.01, 0.0)
    assert res.ledger.steps == 0 and len(res.snapshots) == 1
    assert res.ledger.final_energy == res.ledger.initial_energy


def test_equilibrium_persists_to_T1():
    forms, law = _setup(65, 0.1, k=0.0)
    res = simulate(forms, law, np.ones(65), 0.1, 1.0)
    assert res.ledger.steps == 10
    assert all(r.I_eps_next == 0.0 and r.boundary_flux == 0.0 for r in res.ledger.records)


def test_droplet_ledger_properties():
    forms, law = _setup(513, 0.05, k=0.0)
    c0 = initial.interval_droplet(forms.mesh, 0.4, 0.6, 0.05)
    res = simulate(forms, law, c0, 1e-4, 0.05)
    led = res.ledger
    assert res.completed and led.steps == 500
    assert led.cumulative_dissipation <= led.initial_energy
    energies = [led.initial_energy] + [r.I_eps_next for r in led.records]
    assert np.all(np.diff(energies) <= 1e-9 * (1 + abs(led.initial_energy)))
    assert min(r.slack for r in led.records) >= -1e-9
    assert led.telescoped_slack() >= -1e-9 * led.steps


def test_chain_rule_defect_order():
    forms, law = _setup(257, 0.05, k=0.0)
    c0 = initial.interval_droplet(forms.mesh, 0.4, 0.6, 0.05)
    defects = [minmove_step(forms, law, c0, tau).chain_defect for tau in (1e-4, 5e-5, 2.5e-5)]
    orders = np.log2(np.array(defects[:-1]) / np.array(defects[1:]))
    assert np.all(orders >= 1.5), orders


def test_rule_and_tau_validation():
    forms, law = _setup(33, 0.1)
    with pytest.raises(ValueError):
        minmove_step(forms, law, np.full(33, 0.5), 0.0)
    with pytest.raises(ValueError):
        minmove_step(forms, law, np.full(33, 0.5), 0.01, rule="midpoint")
    with pytest.raises(ValueError):
        minmove_step(forms, law, np.full(33, np.nan), 0.01)


def test_endpoint_rule_records_same_state():
    forms, law = _setup(129, 0.05, k=0.0)
    c0 = initial.interval_droplet(forms.mesh, 0.4, 0.6, 0.05)
    a = minmove_step(forms, law, c0, 1e-4, rule="endpoint")
    b = minmove_step(forms, law, c0, 1e-4, rule="interpolant")
    assert np.array_equal(a.c_next, b.c_next)
    assert a.A_value == a.A_endpoint == b.A_endpoint
    # A along the interpolant exceeds the endpoint value when the energy decays
    assert b.slack >= -1e-15


def test_butler_volmer_step_balances_mass():
    forms = assemble_forms(Mesh.interval(1.0, 129))
    law = make_clipped_butler_volmer(0.05)
    c0 = initial.front(forms.mesh, 0.3, 0.05)
    res = simulate(forms, law, c0, 1e-3, 0.02)
    assert res.completed
    for r in res.ledger.records:
        assert abs(r.mass_defect) <= 1e-10 * (1 + abs(r.mass_prev))
        assert r.slack >= -1e-9


def test_halving_keeps_sample_times():
    forms, law = _setup(129, 0.1, k=1.0)
    res = simulate(forms, law, np.full(129, 0.5), 0.01, 0.05, snapshot_every=1)
    assert res.completed
    assert [round(s.t, 12) for s in res.snapshots] == [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
    assert math.fsum(r.tau for r in res.ledger.records) == pytest.approx(0.05, abs=1e-14)
