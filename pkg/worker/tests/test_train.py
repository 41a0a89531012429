import pytest

from pyeval_worker import data
from pyeval_worker.train import NetParams, train_and_score
from pyeval_worker.worker import request_seed


@pytest.fixture(scope="module")
def dataset():
    return data.load()


def test_params_validation_rejects_bad_shapes():
    with pytest.raises(ValueError):
        NetParams.from_request([1, 2, 3])
    with pytest.raises(ValueError):
        NetParams.from_request([0, 8, 0, 0, 0])
    with pytest.raises(ValueError):
        NetParams.from_request([8, 8, 4, 0, 0])
    with pytest.raises(ValueError):
        NetParams.from_request([8, 8, 0, 0, 2])
    with pytest.raises(ValueError):
        NetParams.from_request([8.5, 8, 0, 0, 0])


def test_accuracy_in_unit_interval(dataset):
    result = train_and_score(NetParams.from_request([12, 12, 1, 1, 0]),
                             dataset, early_stop_c=2, seed=3)
    assert 0.0 <= result.accuracy <= 1.0


def test_early_stop_bounds_epochs(dataset):
    for c in (1, 2, 4):
        result = train_and_score(NetParams.from_request([16, 16, 1, 1, 0]),
                                 dataset, early_stop_c=c, seed=11)
        assert result.epochs <= result.best_epoch + c
        assert result.best_epoch <= result.epochs


def test_training_is_deterministic_per_seed(dataset):
    p = NetParams.from_request([24, 24, 1, 3, 1])
    seed = request_seed(7, 42)
    a = train_and_score(p, dataset, early_stop_c=2, seed=seed)
    b = train_and_score(p, dataset, early_stop_c=2, seed=seed)
    assert a == b


def test_one_neuron_layers_still_score(dataset):
    result = train_and_score(NetParams.from_request([1, 1, 1, 1, 0]),
                             dataset, early_stop_c=2, seed=5)
    assert 0.0 <= result.accuracy <= 1.0
    assert result.accuracy < 0.6  # a 1-unit bottleneck cannot separate the bands


def test_dropout_path_trains(dataset):
    result = train_and_score(NetParams.from_request([32, 32, 1, 1, 1]),
                             dataset, early_stop_c=2, seed=9)
    assert 0.0 <= result.accuracy <= 1.0


def test_request_seed_is_stable():
    assert request_seed(1, 5) == request_seed(1, 5)
    assert request_seed(1, 5) != request_seed(1, 6)
    assert request_seed(2, 5) != request_seed(1, 5)
