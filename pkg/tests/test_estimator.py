import numpy as np
import pytest
from sklearn.base import clone

from gridrestore import RestorationScheduler, Scenario, ccg_solve
from gridrestore.estimator import check_instance

from helpers import island, island_doc


def test_params_round_trip():
    est = RestorationScheduler(tol=1e-4, bits=3)
    assert est.get_params()["tol"] == 1e-4
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    assert twin.set_params(max_iter=5).max_iter == 5


def test_fit_matches_the_solver():
    inst = island(slots=4, budget=2)
    est = RestorationScheduler(tol=1e-6).fit(inst)
    assert est.objective_ == pytest.approx(ccg_solve(inst, tolerance=1e-6).objective)
    assert est.converged_


def test_predict_prices_scenarios():
    inst = island(slots=4, budget=2)
    est = RestorationScheduler(tol=1e-6).fit(inst)
    forecast = est.predict()
    assert forecast.shape == (1,)
    worst = est.predict([est.worst_scenario_, Scenario.zero(inst.uncertainty, 4).to_dict()])
    assert worst[0] == pytest.approx(est.objective_, rel=1e-6)
    assert worst[1] == pytest.approx(forecast[0])
    assert worst[0] >= forecast[0] - 1e-6


def test_fit_accepts_a_mapping():
    est = RestorationScheduler().fit(island_doc(slots=3))
    assert np.isfinite(est.objective_)
    assert est.report()["validated"]["feasible"]


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        RestorationScheduler().predict()


@pytest.mark.parametrize("params", [{"tol": 0}, {"max_iter": 0}, {"max_iter": 1.5}, {"bits": -1},
                                    {"backend": "nope"}])
def test_bad_params(params):
    with pytest.raises(ValueError):
        RestorationScheduler(**params).fit(island())


def test_check_instance_rejects_other_types():
    with pytest.raises(TypeError):
        check_instance(42)
