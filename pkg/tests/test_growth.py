import math

import numpy as np
import pytest

from osclab.fclass import ClassParams, GridFunction, generate_test_function
from osclab.growth import (closure_lhs, covering_constant, growth_curve, positive_mass_ratio,
                           rogue_indicator_function, run_chain, search_delta)
from osclab.lattice import LatticeParams, random_rogue_set
from osclab.measure import PsiFunction, constant_density
from osclab.oscillation import BudgetFunction
from osclab.stopping import StoppingParams, construct


def _chain_setup(N, margin, r0, eps, s, seed=0):
    lat = LatticeParams(2, N, margin)
    p = StoppingParams(eps=eps, r0=r0)
    C = construct(random_rogue_set(lat, p.budget(lat), seed), p)
    return C, generate_test_function("log-poly-zeros", 2, N, s), constant_density(2, N, s)


def test_positive_mass_ratio_constants():
    om = constant_density(2, 8, 4)
    one = generate_test_function("constant", 2, 8, 4, value=1.0)
    assert positive_mass_ratio(one, om, (0.0, 0.0), 2.0) == 1.0
    assert positive_mass_ratio(one.negate(), om, (0.0, 0.0), 2.0) == 0.0


def test_positive_mass_ratio_log_sin_refines():
    vals = []
    for s in (16, 32):
        u = generate_test_function("log-sin", 2, 16, s)
        vals.append(positive_mass_ratio(u, constant_density(2, 16, s), (0.5, 0.0), 4.0))
    assert 0.5 < vals[0] < 1 and abs(vals[0] - vals[1]) < 0.02


def test_covering_constant_decreasing():
    a, b = covering_constant(2, 1.5), covering_constant(2, 12.0)
    assert a > b > 4 / math.pi
    assert a == pytest.approx(2.5 ** 2 / (math.pi * 0.75 ** 2))


def test_search_delta():
    d = search_delta(0.7)
    assert 0.7 < 1 - d and d == pytest.approx(0.3, abs=1e-9)
    assert search_delta(1.0) is None and search_delta(5.0) is None


def test_closure_lhs_terms():
    params = ClassParams(A=1, B=1, Delta=0.01)
    lhs = closure_lhs(params, PsiFunction.linear(1.0), 0.01, 12.0, 2)
    assert lhs == pytest.approx(covering_constant(2, 12.0) * 0.01 + 8 / 12 + 0.01)
    assert closure_lhs(ClassParams(A=2, B=1, Delta=0.01), PsiFunction.linear(1.0), 0.01, 12.0, 2) == pytest.approx(2 * lhs)


def test_chain_capable_run_without_closure():
    C, u, om = _chain_setup(128, 64, 1.5, 0.1, 2)
    rep = run_chain(u, om, ClassParams(Delta=0.05), C)
    assert not rep.closure and rep.delta is None
    assert rep.steps > 0 and rep.monotone and rep.ratio_check
    assert any("closure fails" in n for n in rep.notes)


def test_closure_config_is_vacuous_at_n128():
    C, u, om = _chain_setup(128, 64, 12.0, 0.01, 2)
    rep = run_chain(u, om, ClassParams(Delta=0.01), C)
    assert rep.closure and rep.delta > 0.3 and rep.steps == 0


@pytest.fixture(scope="module")
def closure_n400():
    return _chain_setup(400, 140, 12.0, 0.01, 4)


@pytest.mark.slow
def test_chain_grows_by_e_delta(closure_n400):
    C, u, om = closure_n400
    rep = run_chain(u, om, ClassParams(Delta=0.01), C)
    assert rep.closure and rep.steps > 1000
    assert rep.monotone and rep.failing_steps == 0 and rep.ratio_check
    assert rep.min_ratio >= math.exp(rep.delta)
    assert rep.mass_ratios.size and np.all((rep.mass_ratios >= 0) & (rep.mass_ratios <= 1))


@pytest.mark.slow
def test_indicator_control_fails_ratio_check(closure_n400):
    C, _, om = closure_n400
    bad = rogue_indicator_function(C.E, 4)
    rep = run_chain(bad, om, ClassParams(Delta=0.01), C)
    assert rep.closure and rep.failing_steps > 0 and not rep.ratio_check


def test_growth_curve_constant():
    u = generate_test_function("constant", 2, 16, 4, value=math.e)
    f = BudgetFunction("linear", 1.0)
    gc = growth_curve(u, f, [1, 2, 4, 8])
    assert gc.monotone and gc.fitted_c == pytest.approx(1 / max(gc.bound))
    assert gc.bound[2] == pytest.approx(4 / 2 * math.log(3) ** 2)


def test_growth_curve_rejects_bad_radii():
    u = generate_test_function("constant", 2, 8, 2)
    f = BudgetFunction("linear", 1.0)
    for radii in ([2, 1], [0, 1], [1, 5]):
        with pytest.raises(ValueError):
            growth_curve(u, f, radii)


@pytest.mark.xfail(strict=True, reason="log M_u grows like log R while the bound shape for f = t^2/100 is "
                                       "nearly linear on the tested radii: the fitted constant halves per doubling")
def test_log_sin_fitted_c_stable():
    f = BudgetFunction("power", 0.01, 2.0)
    cs = []
    for N in (64, 128, 256):
        u = generate_test_function("log-sin", 2, N, 2)
        cs.append(growth_curve(u, f, [N / 8, N / 4, N / 2]).fitted_c)
    assert max(cs) / min(cs) <= 2
