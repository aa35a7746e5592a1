import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from formation_flow import FormationFlow, InvalidArgumentError

from conftest import Q_STAR

K4 = {"1-2": 16.0, "1-3": 25.0, "1-4": 10.0, "2-3": 17.0, "2-4": 18.0, "3-4": 5.0}


@pytest.fixture
def flow():
    return FormationFlow(distances=K4).fit()


def test_params_round_trip():
    est = FormationFlow(distances=K4, alpha=2.0)
    params = est.get_params()
    assert params["alpha"] == 2.0 and params["law"] == "locked"
    assert clone(est).get_params() == params
    assert est.set_params(t_max=10.0).t_max == 10.0


def test_fit_shapes(flow):
    assert flow.n_features_in_ == 9
    assert flow.system_.spec.sq(1, 4) == 11.0


def test_transform_predict(flow):
    X = flow.sample_initial(3, random_state=4)
    Xt = flow.transform(X)
    assert Xt.shape == (3, 9)
    assert list(flow.predict(np.vstack([X, Q_STAR]))) == ["Correct"] * 4
    assert flow.score(X) == 1.0


def test_incorrect_label(flow):
    X = np.array([[0, 0, 1, 0, 2, 0, 3, 0, 1.0]])
    assert flow.predict(X)[0] == "IncorrectSaddleOrUnstable"


def test_unresolved_label():
    est = FormationFlow(distances=K4, t_max=0.01).fit()
    assert est.predict(est.sample_initial(1))[0] == "Unresolved"


def test_plain_law():
    est = FormationFlow(distances=K4, law="plain2d").fit()
    assert est.n_features_in_ == 8


def test_validation(flow):
    with pytest.raises(ValueError):
        flow.transform(np.zeros((2, 8)))
    with pytest.raises(ValueError):
        flow.transform([[np.nan] * 9])
    with pytest.raises(NotFittedError):
        FormationFlow(distances=K4).predict(np.zeros((1, 9)))
    with pytest.raises(InvalidArgumentError):
        FormationFlow().fit()
