import warnings
from dataclasses import replace

import numpy as np
import pytest

from stockflow.integrate import IntegratorKind
from stockflow.modelfmt import ScenarioDoc
from stockflow.oilmarket import (
    SCENARIO_A_SUPPLY_GROWTH,
    MarketError,
    OilMarketParams,
    build_oil_model,
    check_price,
    effective_ratio,
    run,
    scenario_a,
    scenario_b,
    tune_supply_growth,
)
from stockflow.sdcore import TimeGrid, eval_rhs, evaluate, initial_state

P = OilMarketParams()


def test_balanced_market_drifts_at_beta_plus_alpha():
    # alpha1 = -50, beta1 = 51.45 per quarter with ratio 1 gives +1.45 per quarter
    p = replace(P, base_TOS=90.0)
    m = build_oil_model(p)
    rate = eval_rhs(m, initial_state(m, TimeGrid(1.0)))["OilPrice"]
    assert rate * 91.3125 == pytest.approx(1.45, abs=1e-12)


def test_effective_ratio():
    assert effective_ratio(95.4, 90.0, 1.0, 1.0) == 95.4 / 90.0
    assert effective_ratio(90.0, 90.0, 1.2, 1.2) == 1.0
    with pytest.raises(MarketError):
        effective_ratio(90.0, 0.0, 1.0, 1.0)


def test_model_ratio_matches_helper():
    m = build_oil_model(replace(P, ExS_level=1.1, ExD_level=0.95))
    env = evaluate(m, initial_state(m, TimeGrid(1.0)))
    assert env["Ratio"] == effective_ratio(env["TOS"], env["TOD"], env["ExS"], env["ExD"])


def test_expectation_equivalent_to_scaled_demand():
    # ExD = c with TOD is the same market as ExD = 1 with TOD * c
    doc, _ = scenario_a()
    c = 1.25
    a = run(replace(P, ExD_level=c), doc, record=())["OilPrice"]
    b = run(replace(P, base_TOD=P.base_TOD * c), doc, record=())["OilPrice"]
    assert np.allclose(a, b, rtol=1e-12, atol=0)


@pytest.mark.parametrize("c", [0.25, 0.5, 2.0, 8.0])
def test_power_of_two_scaling_is_bit_identical_in_scenario_b(c):
    doc, _ = scenario_b(P, 1)
    base = run(P, doc, record=())["OilPrice"]
    scaled = run(replace(P, ExS_level=c, ExD_level=c), doc, record=())["OilPrice"]
    assert np.array_equal(base, scaled)


def test_general_scaling_in_scenario_b_within_rounding():
    doc, _ = scenario_b(P, 1)
    base = run(P, doc, record=())["OilPrice"]
    scaled = run(replace(P, ExS_level=1.37, ExD_level=1.37), doc, record=())["OilPrice"]
    assert np.allclose(base, scaled, rtol=1e-12, atol=0)


def test_expectation_paths_move_price():
    doc, _ = scenario_a()
    base = run(P, doc, record=())["OilPrice"]
    bullish = run(replace(P, ExD_path=((0.0, 1.0), (43.0, 1.1))), doc, record=())["OilPrice"]
    assert bullish[-1] > base[-1]


def test_tuned_growth_constant_is_current():
    assert tune_supply_growth() == pytest.approx(SCENARIO_A_SUPPLY_GROWTH, rel=1e-12)


def test_tuning_hits_target_for_both_integrators():
    for kind in IntegratorKind:
        g = tune_supply_growth(kind=kind)
        doc, _ = scenario_a(P, g)
        assert run(P, doc, kind).final("OilPrice") == pytest.approx(99.16, abs=1e-9)


def test_scenario_b_structure():
    doc, grid = scenario_b(P, 1)
    assert grid.horizon == 120 and len(doc.events) == 3
    assert [e.at for e in doc.events] == [20.0, 30.0, 30.0]


def test_scenario_b_spare_supply_arrives_after_lag():
    doc, _ = scenario_b(P, 1)
    traj = run(P, doc, record=("SpareSupply", "TOS"))
    t, spare = traj.times, traj["SpareSupply"]
    assert np.all(spare[t < 45] == 0)
    assert np.all(spare[(t >= 45) & (t < 120)] == pytest.approx(9.54))


def test_hold_decision_never_delivers():
    doc, _ = scenario_b(P, 0)
    assert np.all(run(P, doc, record=("SpareSupply",))["SpareSupply"] == 0)


def test_parameter_validation():
    with pytest.raises(MarketError):
        OilMarketParams(base_TOD=0)
    with pytest.raises(MarketError):
        OilMarketParams(ExS_level=-1)
    with pytest.raises(MarketError):
        scenario_b(P, 2)


def test_negative_price_warns():
    p = replace(P, initial_price=1.0, beta1=-1.0)
    doc = ScenarioDoc(grid=(("horizon", 5.0),))
    with pytest.warns(RuntimeWarning, match="below zero"):
        run(p, doc, record=())
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        check_price(run(P, doc, record=()))
