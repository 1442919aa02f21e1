import numpy as np
import pytest

from helmuq.analysis import (ProblemConstants, ceil_digits, check_assumptions,
                             constants_report, error_budget, mesh_threshold,
                             stability_constant, stability_constant_coarse)
from helmuq.randomfield import RandomFieldSpec


def shipped_constants():
    return ProblemConstants()


def test_stability_constant_literal_formula():
    c = shipped_constants()
    root = np.sqrt(2.0 + 2.0 * (1.0 + 1.0 / 108.0) ** 2)
    expect = 2.0 * (1.0 / 54.0 + 4.0 * root * 1.5 / np.sqrt(0.5))
    assert stability_constant(c) == pytest.approx(expect, rel=1e-14)
    assert stability_constant(c) <= 48.26


def test_stability_constant_worked_value():
    # the worked bound 48.26 follows from the coarser n_max/min variant
    c = shipped_constants()
    assert round(stability_constant_coarse(c), 2) == 48.26
    assert stability_constant_coarse(c) >= stability_constant(c)


def test_stability_constant_large_margin_fallback():
    c = ProblemConstants(mu_a=8.0, mu_n=8.0)
    assert stability_constant_coarse(c) == pytest.approx(stability_constant(c))


def test_stability_constant_monotonicity():
    base = shipped_constants()
    ref = stability_constant(base)
    assert stability_constant(ProblemConstants(n_max=3.0)) > ref
    # doubling n_max increases by strictly less than a factor 2
    assert stability_constant(ProblemConstants(n_max=3.0)) < 2 * ref
    for kw in ("mu_a", "mu_n", "n_min", "k0", "r0"):
        grown = ProblemConstants(**{kw: getattr(base, kw) * 2})
        assert stability_constant(grown) < ref
    # a_min is nonincreasing but only binds once it falls below n_min
    assert stability_constant(ProblemConstants(a_min=2.0)) <= ref
    assert stability_constant(ProblemConstants(a_min=0.25)) > ref


def test_stability_constant_validation():
    with pytest.raises(ValueError):
        ProblemConstants(mu_a=0.0)
    with pytest.raises(ValueError):
        ProblemConstants(n_min=-1.0)


def test_check_assumptions_shipped():
    rep = check_assumptions(RandomFieldSpec(), shipped_constants())
    assert rep["positivity_pass"] is True
    assert rep["nontrapping_pass"] is False
    assert rep["sum_inf_printed"] == 1.2021
    assert rep["sum_nontrap_printed"] == 62.6193
    assert round(rep["positivity_threshold"], 4) == 0.8319
    assert round(rep["nontrapping_threshold"], 5) == 0.01597


def test_check_assumptions_extremes():
    small = RandomFieldSpec(xi_n=0.01)
    rep = check_assumptions(small, shipped_constants())
    assert rep["positivity_pass"] and rep["nontrapping_pass"]
    # xi_n = 2 violates positivity at construction, so probe via the report
    # thresholds instead
    assert 2.0 > rep["positivity_threshold"] and 2.0 > rep["nontrapping_threshold"]


def test_ceil_digits():
    assert ceil_digits(62.61924, 4) == 62.6193
    assert ceil_digits(1.2020569, 4) == 1.2021
    assert ceil_digits(1.20210, 4) == 1.2021


def test_mesh_threshold_worked_example():
    rep = mesh_threshold(h=0.0125, k=48.0, m=2, r2=5.0, tau=1)
    assert rep["ell"] == 1
    assert rep["pollution_term"] == pytest.approx(0.6**2 * 48 * 5, rel=1e-12)
    assert rep["pollution_term"] == pytest.approx(86.4)
    assert rep["farfield_term"] == pytest.approx(0.6**2 * 48**1.5 * 25, rel=1e-12)


def test_mesh_threshold_limits():
    tiny = mesh_threshold(h=1e-9, k=48.0, m=2, r2=5.0)
    assert tiny["pollution_term"] < 1e-12 and tiny["within_fem_budget"]
    unit = mesh_threshold(h=1.0 / 48.0, k=48.0, m=2, r2=5.0, tau=2)
    assert unit["pollution_term"] == pytest.approx(48.0 * 5.0)
    with pytest.raises(ValueError):
        mesh_threshold(h=-1.0, k=2.0, m=2, r2=5.0)


def test_error_budget_scalings():
    c = shipped_constants()
    base = error_budget(trunc_s=8, qmc_n=128, fem_h=0.1, consts=c, p=1 / 3)
    double_s = error_budget(trunc_s=16, qmc_n=128, fem_h=0.1, consts=c, p=1 / 3)
    assert double_s["trunc_fast"] / base["trunc_fast"] == pytest.approx(2.0**-5)
    double_n = error_budget(trunc_s=8, qmc_n=256, fem_h=0.1, consts=c, p=1 / 3)
    assert double_n["qmc"] / base["qmc"] == pytest.approx(2.0**-0.9)
    half_h = error_budget(trunc_s=8, qmc_n=128, fem_h=0.05, consts=c, p=1 / 3)
    assert half_h["fem_interp"] / base["fem_interp"] == pytest.approx(2.0**-3)
    assert half_h["fem_pollution"] / base["fem_pollution"] == pytest.approx(2.0**-4)
    ratio = half_h["fem_total"] / base["fem_total"]
    assert 2.0**-4 <= ratio <= 2.0**-3 or base["fem_pml_exp"] > 0.1 * base["fem_total"]
    with pytest.raises(ValueError):
        error_budget(trunc_s=8, qmc_n=128, fem_h=0.1, consts=c, p=1.5)


def test_reports_are_pure():
    spec = RandomFieldSpec()
    c = shipped_constants()
    assert constants_report(spec, c, j_max=1000) == constants_report(spec, c, j_max=1000)


def test_constants_report_contents():
    rep = constants_report(RandomFieldSpec(), shipped_constants())
    assert round(rep["c_stab_coarse"], 2) == 48.26
    assert rep["c_stab"] < rep["c_stab_coarse"]
    # the large critical parameter the weights deliberately ignore
    assert rep["c_stab_k_r_xi"] == pytest.approx(
        rep["c_stab_coarse"] * 12 * 4.5 * 0.8319)
