import math

import numpy as np
import pytest

import hamid

X0 = np.array([0.15, 0.1, -0.05, 0.1])


def test_cherry_value_and_gradient():
    assert hamid.cherry_eval(X0) == pytest.approx(-0.00775, abs=1e-15)
    g = hamid.cherry_gradient(X0)
    assert g == pytest.approx([0.14, -0.1925, -0.07, -0.21])


def test_dictionary():
    d = hamid.BasisDictionary("monomial", 4, 3)
    assert len(d) == hamid.dictionary_size(4, 3) == 34
    assert d.term_name(0) == "q1"
    phi = d.evaluate(X0)
    assert phi.shape == (34,)
    assert phi[0] == pytest.approx(0.15)


def test_model_matches_cherry():
    d = hamid.BasisDictionary("monomial", 4, 3)
    model = hamid.HamiltonianModel(d, hamid.cherry_coefficients(d))
    assert model.value(X0) == pytest.approx(hamid.cherry_eval(X0), abs=1e-15)
    t1, s1 = hamid.propagate_cherry(X0, 100, 0.01)
    t2, s2 = hamid.propagate_model(model, X0, 100, 0.01)
    assert s1.shape == (101, 4)
    assert np.allclose(s1, s2, atol=1e-13)


def test_ls_recovers_cherry():
    d = hamid.BasisDictionary("monomial", 4, 3)
    _, states = hamid.propagate_cherry(X0, 1600, 0.01)
    model = hamid.fit_ls([states], 0.01, d)
    assert np.abs(model.coefficients - hamid.cherry_coefficients(d)).max() < 1e-3


def test_likelihood_prefers_truth():
    d = hamid.BasisDictionary("monomial", 4, 3)
    _, states = hamid.propagate_cherry(X0, 160, 0.05)
    data = [states[::8]]
    truth = hamid.cherry_coefficients(d)
    good = hamid.log_likelihood(data, truth, 1e-8, 1e-6, d)
    bad = hamid.log_likelihood(data, truth * 0.8, 1e-8, 1e-6, d)
    assert math.isfinite(good)
    assert good > bad


def test_config_errors():
    cfg = hamid.default_config("single-ic-symplectic")
    assert cfg["model"]["basis"] == "monomial"
    cfg["mode"] = "nonsense"
    with pytest.raises(ValueError):
        hamid.run_experiment(cfg)


def test_ls_pipeline(tmp_path):
    cfg = hamid.default_config("multi-ic-ls")
    cfg["data"]["num_trajectories"] = 2
    metrics = hamid.run_experiment(cfg, str(tmp_path))
    assert metrics["mode"] == "multi-ic-ls"
    assert metrics["horizon_10pct"] >= 0.0
    assert (tmp_path / "metrics.json").exists()
