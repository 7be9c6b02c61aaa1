"""Acceptance suite: every criterion at its stated tolerance.

Each test runs one criterion end to end, prints a PASS/FAIL line with the
headline numbers, and asserts the criterion's verdict.  Criteria internals
(tolerances, ladders, configurations) live in meanfield_bose_lab.acceptance
and are shared with `mfbl run` on an acceptance config.
"""

import numpy as np

from meanfield_bose_lab import acceptance as A


def _report(rep):
    status = "PASS" if rep["passed"] else "FAIL"
    print(f"\n[{status}] {rep['name']} ({rep['seconds']:.1f} s): "
          f"{rep['details']}")
    assert rep["passed"], rep["details"]


def test_criterion_1_dispersion_closed_form():
    rep = A.criterion_dispersion_closed_form(seed=0)
    assert rep["details"]["max_error"] <= 1e-10
    _report(rep)


def test_criterion_2_two_sided_energy_bound():
    rep = A.criterion_energy_bounds(seed=0)
    _report(rep)


def test_criterion_3_excitation_spectrum_convergence():
    rep = A.criterion_excitation_convergence(seed=0)
    deltas18 = np.array(rep["details"]["deltas"]["18"])
    assert np.all(deltas18 <= rep["details"]["threshold"])
    assert rep["details"]["overlaps"]["18"] >= 0.99
    _report(rep)


def test_criterion_4_quantitative_de_finetti():
    rep = A.criterion_definetti(seed=0)
    assert rep["details"]["bound"] == 0.5
    _report(rep)


def test_criterion_5_fig3_symmetry_breaking():
    rep = A.criterion_fig3(seed=0)
    assert rep["details"]["peaks"] >= 2
    assert rep["details"]["contrast"] >= 0.5
    assert rep["details"]["restart_stability"] <= 1e-6
    _report(rep)


def test_criterion_6_inequality_suites():
    rep = A.criterion_inequalities(seed=0)
    assert rep["details"]["hoffmann_ostenhof_worst"] >= -1e-10
    assert rep["details"]["interaction_bound_worst"] >= -1e-10
    _report(rep)


def test_criterion_7_dynamics():
    rep = A.criterion_dynamics(seed=0)
    assert rep["details"]["free_wave_error"] <= 1e-8
    assert rep["details"]["norm_drift"] <= 1e-8
    assert rep["details"]["energy_drift"] <= 1e-6
    assert rep["details"]["orthogonality"] <= 1e-6
    _report(rep)


def test_criterion_8_scaling_identity():
    rep = A.criterion_scaling_identity(seed=0)
    assert rep["details"]["smooth_mismatch"] <= 1e-8
    assert rep["details"]["lj_mismatch"] <= 1e-6
    _report(rep)


def test_criterion_9_second_order_correction():
    rep = A.criterion_second_order(seed=0)
    assert rep["details"]["relative_error"] <= 1e-3
    _report(rep)
