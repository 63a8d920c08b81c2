import math

import numpy as np
import pytest

from roughsf.experiment import (
    RESULT_HEADER,
    ExperimentConfig,
    averaging_experiment,
    delta_for,
    fine_steps,
    load_config,
    write_results,
)
from roughsf.systems import scalar_system, sine_sigma

SMALL = dict(N=64, epsilons=[0.2, 0.1], samples=30, seed=4)


def test_decoupled_system_has_zero_error():
    rows = averaging_experiment(ExperimentConfig(system="decoupled", **SMALL))
    assert all(r.estimate == 0.0 and r.exploded == 0 for r in rows)


def test_jensen_between_powers():
    r1 = averaging_experiment(ExperimentConfig(p=1.0, **SMALL))
    r2 = averaging_experiment(ExperimentConfig(p=2.0, **SMALL))
    for a, b in zip(r1, r2):
        assert a.estimate**2 <= b.estimate + 2 * b.stderr
        assert a.delta == b.delta


def test_thread_count_does_not_change_results(tmp_path):
    cfg = ExperimentConfig(**dict(SMALL, samples=60))
    a = averaging_experiment(cfg, threads=1)
    b = averaging_experiment(cfg, threads=3)
    write_results(a, tmp_path / "a.csv")
    write_results(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == ",".join(RESULT_HEADER)


def test_all_exploded_row_is_invalid():
    zero = lambda x, y: 0 * x + 0 * y
    sys = scalar_system(f=lambda x, y: x * x + 0 * y, g=lambda x, y: x - y, sigma=sine_sigma(),
                        h=lambda x, y: 1 + zero(x, y), hx=zero, hy=zero, hxx=zero, hxy=zero, hyy=zero,
                        x0=5.0, fbar=lambda x: x * x)
    rows = averaging_experiment(ExperimentConfig(**dict(SMALL, samples=5)), sys=sys)
    assert all(not r.valid and r.exploded == 5 and math.isnan(r.estimate) for r in rows)


def test_grid_and_delta_choices():
    cfg = ExperimentConfig(N=256, epsilons=[0.1, 0.01])
    assert fine_steps(cfg) == 2048
    assert delta_for(cfg, 0.01, 1 / 2048) == pytest.approx(0.01 ** (1 / (6 * 0.26)) * math.log(100))
    fixed = ExperimentConfig(delta_mode="0.3")
    assert delta_for(fixed, 0.1, 0.01) == 0.3


def write(tmp_path, text):
    p = tmp_path / "cfg.txt"
    p.write_text(text)
    return p


def test_config_file_parsing(tmp_path):
    cfg = load_config(write(tmp_path, "# comment\nH = 0.3\nepsilons = 0.1, 0.05\nsamples = 12  # trailing\nsystem = ou\n"))
    assert cfg.epsilons == [0.1, 0.05] and cfg.samples == 12 and cfg.H == 0.3


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("H = 0.3\nfoo = 1\n", ":2: unknown key"),
        ("N = 8\nN = 16\n", ":2: duplicate key"),
        ("samples = many\n", ":1: bad value"),
        ("just text\n", ":1: expected"),
        ("beta = 0.35\n", "beta"),
        ("H = 0.45\nbeta = 0.3\n", "Hurst"),
        ("delta_mode = sometimes\n", "delta_mode"),
        ("epsilons = 0.1 2.0\n", "epsilons"),
    ],
)
def test_config_errors(tmp_path, text, fragment):
    with pytest.raises(ValueError, match=fragment):
        load_config(write(tmp_path, text))


def test_dimension_mismatch_is_rejected():
    with pytest.raises(ValueError):
        averaging_experiment(ExperimentConfig(d=2, **SMALL))
