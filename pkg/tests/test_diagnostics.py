import math

import numpy as np
import pytest

from chrflow import initial
from chrflow.diagnostics import (EnergySeries, affine_field, bump_field, certify, discrepancy,
                                 dissipation_certificate, energy_convergence_report, equivalent_radius,
                                 field_from_descriptor, gibbs_thomson_residual, interface_count,
                                 level_set_segments, perimeter_I0, radial_field, rotational_field,
                                 superlevel_measure)
from chrflow.materials import make_quartic_affine
from chrflow.mesh import Mesh, assemble_forms
from chrflow.stepper import chemical_potential, energy_I_eps, simulate

SIGMA = math.sqrt(2) / 6


def _fields_2d():
    return [rotational_field((1.0, 1.0)), bump_field((0.4, 0.6), 0.2, (1.0, -0.5)),
            radial_field((0.5, 0.5), 0.3), affine_field(np.zeros((2, 2)), np.zeros(2))]


@pytest.mark.parametrize("value", [0.0, 0.3, 1.0])
def test_gt_residual_vanishes_for_constants_1d(value):
    mesh = Mesh.interval(1.0, 65)
    law = make_quartic_affine(0.05)
    forms = assemble_forms(mesh)
    c = np.full(65, value)
    mu = chemical_potential(forms, law, c)
    for psi in (bump_field([0.5], 0.2, [1.0]), radial_field([0.5], 0.3)):
        assert abs(gibbs_thomson_residual(law, mesh, c, mu, psi)) <= 1e-12


@pytest.mark.parametrize("value", [0.2, 0.7])
def test_gt_residual_vanishes_for_constants_2d(value):
    mesh = Mesh.rectangle(1.0, 1.0, 33)
    law = make_quartic_affine(0.05)
    c = np.full(mesh.num_nodes, value)
    mu = np.full(mesh.num_nodes, -1.3)
    for psi in _fields_2d():
        assert abs(gibbs_thomson_residual(law, mesh, c, mu, psi)) <= 1e-12


def test_gt_residual_refinement_1d():
    law = make_quartic_affine(0.02)
    psi = bump_field([0.45], 0.15, [1.0])
    res = []
    for n in (257, 513, 1025, 2049):
        mesh = Mesh.interval(1.0, n)
        c = initial.front(mesh, 0.5, 0.02)
        res.append(abs(gibbs_thomson_residual(law, mesh, c, chemical_potential(assemble_forms(mesh), law, c), psi)))
    ratios = np.array(res[:-1]) / np.array(res[1:])
    assert np.all(ratios >= 1.8), ratios


def test_gt_residual_on_2d_droplet_run():
    mesh = Mesh.rectangle(1.0, 1.0, 129)
    forms = assemble_forms(mesh)
    law = make_quartic_affine(0.04, k=0.0)
    c0 = initial.disk_droplet(mesh, (0.45, 0.55), 0.25, 0.04)
    res = simulate(forms, law, c0, 1e-4, 3e-4, snapshot_every=3)
    snap = res.snapshots[-1]
    for psi in (rotational_field((1.0, 1.0)), bump_field((0.6, 0.7), 0.2, (1.0, 1.0))):
        assert abs(gibbs_thomson_residual(law, mesh, snap.c, snap.mu, psi)) < 1e-2 * SIGMA


def test_gt_rejects_normal_fields():
    mesh = Mesh.rectangle(1.0, 1.0, 9)
    law = make_quartic_affine(0.05)
    c = np.zeros(mesh.num_nodes)
    with pytest.raises(ValueError, match="not tangential"):
        gibbs_thomson_residual(law, mesh, c, c, affine_field(np.eye(2), np.zeros(2)))
    with pytest.raises(ValueError, match="not tangential"):
        gibbs_thomson_residual(law, mesh, c, c, bump_field((0.05, 0.5), 0.2, (1.0, 0.0)))
    with pytest.raises(ValueError):
        gibbs_thomson_residual(law, Mesh.interval(1.0, 9), np.zeros(9), np.zeros(9), _fields_2d()[0])


def test_field_gradients_match_finite_differences(rng):
    x = rng.uniform(0.05, 0.95, (20, 2))
    h = 1e-6
    for psi in _fields_2d()[:3]:
        G = psi.gradient(x)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (psi.value(x + e) - psi.value(x - e)) / (2 * h)
            assert np.allclose(G[:, :, j], fd, atol=1e-7)
        assert field_from_descriptor(psi.descriptor()).descriptor() == psi.descriptor()


def test_discrepancy_examples(rng):
    law = make_quartic_affine(0.02)
    mesh = Mesh.interval(1.0, 2049)
    assert discrepancy(law, mesh, np.full(2049, 0.3)) == pytest.approx(law.f(0.3) / 0.02, rel=1e-12)
    c = initial.front(mesh, 0.5, 0.02)
    assert discrepancy(law, mesh, c) < 0.02 * SIGMA
    assert discrepancy(law, mesh, rng.uniform(0, 1, 2049)) > 10 * SIGMA


def test_perimeter_examples():
    mesh = Mesh.interval(1.0, 257)
    assert perimeter_I0(mesh, initial.front(mesh, 0.5, 0.02), SIGMA) == pytest.approx(SIGMA)
    assert perimeter_I0(mesh, np.zeros(257), SIGMA) == 0.0
    assert interface_count(initial.interval_droplet(mesh, 0.3, 0.6, 0.02)) == 2
    m2 = Mesh.rectangle(1.0, 1.0, 513)
    c = initial.disk_droplet(m2, (0.5, 0.5), 0.25, 0.01)
    assert perimeter_I0(m2, c, SIGMA) == pytest.approx(SIGMA * 2 * math.pi * 0.25, rel=0.01)
    assert perimeter_I0(m2, np.zeros(m2.num_nodes), SIGMA) == 0.0


def test_level_set_matches_skimage_and_complement():
    measure = pytest.importorskip("skimage.measure")
    mesh = Mesh.rectangle(1.0, 1.0, 65)
    x, y = mesh.coordinates.T
    c = 0.5 + 0.3 * np.sin(5 * x + 1) + 0.2 * np.cos(7 * y + 0.3)
    ours = level_set_segments(mesh, c)
    length = np.hypot(*(ours[:, 1] - ours[:, 0]).T).sum()
    h = mesh.h[0]
    ref = sum(np.hypot(*np.diff(ct, axis=0).T).sum() for ct in measure.find_contours(mesh.grid(c), 0.5)) * h
    assert length == pytest.approx(ref, rel=1e-3)
    comp = level_set_segments(mesh, 1.0 - c)
    assert np.hypot(*(comp[:, 1] - comp[:, 0]).T).sum() == pytest.approx(length, abs=1e-12)


def test_superlevel_measure_exact_for_linear_fields():
    mesh = Mesh.rectangle(1.0, 1.0, 17)
    x, y = mesh.coordinates.T
    # {x + y > 1} has area 1/2; {x > 0.3} has area 0.7
    assert superlevel_measure(mesh, x + y, 1.0) == pytest.approx(0.5, abs=1e-12)
    assert superlevel_measure(mesh, x, 0.3) == pytest.approx(0.7, abs=1e-12)
    m1 = Mesh.interval(1.0, 11)
    assert superlevel_measure(m1, m1.coordinates[:, 0], 0.37) == pytest.approx(0.63, abs=1e-12)
    mq = Mesh.rectangle(0.5, 0.5, 129)
    c = initial.disk_droplet(mq, (0.0, 0.0), 0.3, 0.01)
    assert equivalent_radius(mq, c, quarter=True) == pytest.approx(0.3, rel=2e-3)


def _run_ledger(k=0.0, steps=20):
    forms = assemble_forms(Mesh.interval(1.0, 129))
    law = make_quartic_affine(0.05, k=k)
    c0 = initial.interval_droplet(forms.mesh, 0.4, 0.6, 0.05)
    return simulate(forms, law, c0, 1e-4, steps * 1e-4).ledger


def test_dissipation_certificate_examples():
    forms = assemble_forms(Mesh.interval(1.0, 33))
    eq = simulate(forms, make_quartic_affine(0.1), np.ones(33), 0.1, 0.5).ledger
    assert dissipation_certificate(eq) == pytest.approx(0.0, abs=1e-12)
    led = _run_ledger()
    assert dissipation_certificate(led) >= 0.0
    assert dissipation_certificate(led) == pytest.approx(led.telescoped_slack(), abs=1e-15)
    assert dissipation_certificate(led, T_star=0.0) == 0.0
    cert = certify(led, require_monotone=True)
    assert cert.passed and cert.steps == 20 and cert.summary().startswith("CERTIFY: PASS")


def test_certify_detects_tampering():
    from chrflow.io import ledger_rows
    rows = ledger_rows(_run_ledger())
    rows[7]["I_eps"] += 1e-6
    cert = certify(rows)
    assert not cert.passed and cert.failing_step == 7
    assert "step=7" in cert.summary()
    rows = ledger_rows(_run_ledger())
    rows[3]["mass"] += 1e-6
    assert certify(rows).failing_step == 3
    rows = ledger_rows(_run_ledger())
    rows[5]["gap"] = 1.0
    assert "Fenchel" in certify(rows).reason
    rows = ledger_rows(_run_ledger())
    rows[-1]["I_eps"] += 1.0
    rows[-1]["slack"] -= 1.0
    assert dissipation_certificate(rows) < 0


def test_energy_report_examples():
    t = np.linspace(0, 1, 11)
    zero = [EnergySeries(e, t, np.zeros(11), np.zeros(11)) for e in (0.08, 0.04, 0.02)]
    rep = energy_convergence_report(zero)
    assert all(r.integral_I_eps == 0 and r.integral_I0 == 0 and r.ratio == 1.0 for r in rep.rows)
    series = []
    for eps in (0.08, 0.04, 0.02):
        mesh = Mesh.interval(1.0, 2049)
        law = make_quartic_affine(eps)
        c = initial.front(mesh, 0.5, eps)
        E = energy_I_eps(assemble_forms(mesh), law, c)
        series.append(EnergySeries(eps, t, np.full(11, E), np.full(11, perimeter_I0(mesh, c, SIGMA))))
    rep = energy_convergence_report(series)
    assert abs(rep.rows[-1].ratio - 1) < 0.05
    synthetic = [EnergySeries(e, t, np.full(11, SIGMA * (1 + e)), np.full(11, SIGMA)) for e in (0.02, 0.08, 0.04)]
    rep = energy_convergence_report(synthetic)
    assert [r.epsilon for r in rep.rows] == [0.08, 0.04, 0.02] and rep.monotone
    synthetic[0].energies = np.full(11, SIGMA * 2)
    assert energy_convergence_report(synthetic).trend == "not monotone"
    assert energy_convergence_report(series[:2]).trend == "insufficient data"
    with pytest.raises(ValueError):
        energy_convergence_report([series[0], EnergySeries(0.01, t * 2, t, t)])
