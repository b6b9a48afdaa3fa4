"""Python interface to the hamid C++ core."""

import json

try:
    from . import _hamid
except ImportError:  # in-tree build: extension on PYTHONPATH
    import _hamid

BasisDictionary = _hamid.BasisDictionary
HamiltonianModel = _hamid.HamiltonianModel
ConfigError = _hamid.ConfigError
DivergenceError = _hamid.DivergenceError

cherry_eval = _hamid.cherry_eval
cherry_gradient = _hamid.cherry_gradient
cherry_coefficients = _hamid.cherry_coefficients
dictionary_size = _hamid.dictionary_size
propagate_cherry = _hamid.propagate_cherry
propagate_model = _hamid.propagate_model
fit_ls = _hamid.fit_ls
log_likelihood = _hamid.log_likelihood


def default_config(mode="single-ic-symplectic", long_chain=False):
    return json.loads(_hamid.default_config(mode, long_chain))


def run_experiment(config, out_dir=""):
    """Run the pipeline for a config dict and return the metrics dict."""
    return json.loads(_hamid.run_experiment(json.dumps(config), out_dir))


__all__ = [
    "BasisDictionary",
    "HamiltonianModel",
    "ConfigError",
    "DivergenceError",
    "cherry_eval",
    "cherry_gradient",
    "cherry_coefficients",
    "dictionary_size",
    "propagate_cherry",
    "propagate_model",
    "fit_ls",
    "log_likelihood",
    "default_config",
    "run_experiment",
]
