import glob
import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cascade_hum.config import ExperimentConfig, load_config, parse_config, serialize
from cascade_hum.errors import ConfigError
from cascade_hum.model import PiecewiseField

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def problems_of(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.problems


def test_minimal_gets_defaults():
    cfg = parse_config("[problem]\nn = 2\n")
    assert isinstance(cfg, ExperimentConfig)
    assert (cfg.problem.T, cfg.problem.depth, cfg.problem.nx) == (1.0, 10, 31)
    assert cfg.problem.G0 == (0.3, 0.8) and cfg.problem.G1 == (0.45, 0.65)
    assert cfg.solver.scheme == "transpose" and cfg.solver.eps == [1e-2, 1e-3, 1e-4]
    assert cfg.carleman.mu == 2.0 and cfg.observability.rank_tol == 1e-10
    assert cfg.l_exponent == 9


def test_missing_n():
    (key, line, _), = problems_of("[problem]\nT = 1.0\n")
    assert key == "problem.n"


def test_negative_horizon_named_with_line():
    probs = problems_of("[problem]\nn = 1\nT = -1\n")
    assert [(k, ln) for k, ln, _ in probs] == [("problem.T", 3)]


def test_nesting_violation():
    probs = problems_of("[problem]\nn = 1\nG0_tilde = [0.35, 0.75]\nG1 = [0.3, 0.5]\n")
    assert probs[0][0] == "problem.G1" and probs[0][1] == 4 and "nesting" in probs[0][2]


def test_syntax_error_line():
    (key, line, _), = problems_of("[problem]\nn = 2\nT = = 1\n")
    assert key == "syntax" and line == 3


def test_all_problems_reported_together():
    text = "[problem]\nn = 2\n\n[solver]\nscheme = \"euler\"\ncg_tol = 0\n\n[bogus]\nx = 1\n"
    keys = {k for k, _, _ in problems_of(text)}
    assert keys == {"bogus", "solver.scheme", "solver.cg_tol"}


def test_unknown_coefficient_for_n():
    (key, line, _), = problems_of("[problem]\nn = 2\n[coefficients]\na31 = 1.0\n")
    assert key == "coefficients.a31" and line == 4


def test_diffusion_below_floor():
    text = "[problem]\nn = 1\n[coefficients]\nbeta0 = 0.5\nbeta1 = { value = 1.0, t_slope = -0.8 }\n"
    (key, _, msg), = problems_of(text)
    assert key == "coefficients.beta1" and "beta0" in msg


def test_entry_builds_piecewise_field():
    cfg = parse_config('[problem]\nn = 2\n[coefficients]\na21 = { value = 1.0, region = "G0_tilde" }\nb11 = 0.3\n')
    model = cfg.coefficients_model()
    a21 = model.a[(1, 0)]
    assert isinstance(a21, PiecewiseField) and (a21.lo, a21.hi) == (0.35, 0.75)
    assert model.b[(0, 0)] == 0.3


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CONFIG_DIR, "*.toml"))))
def test_shipped_configs_round_trip(path):
    cfg = load_config(path)
    once = serialize(cfg)
    assert parse_config(once) == cfg
    assert serialize(parse_config(once)) == once


@given(
    st.integers(1, 3),
    st.floats(0.1, 5.0, allow_nan=False),
    st.integers(2, 12),
    st.lists(st.floats(1e-8, 1.0), min_size=1, max_size=4),
    st.sampled_from(["transpose", "direct"]),
)
def test_round_trip_idempotent(n, T, depth, eps, scheme):
    text = f"[problem]\nn = {n}\nT = {T!r}\ndepth = {depth}\n[solver]\nscheme = \"{scheme}\"\neps = {eps!r}\n"
    cfg = parse_config(text)
    once = serialize(cfg)
    again = parse_config(once)
    assert again == cfg and serialize(again) == once


def test_terminal_and_samples_reproducible():
    cfg = parse_config("[problem]\nn = 2\n[data]\nterminal = \"random\"\ninitial_components = [2]\nsamples = 3\n")
    a, b = cfg.terminal_data(seed=5), cfg.terminal_data(seed=5)
    np.testing.assert_array_equal(a, b)
    samples = cfg.initial_samples(seed=1)
    assert len(samples) == 3 and all(not np.any(s[0]) and np.any(s[1]) for s in samples)
