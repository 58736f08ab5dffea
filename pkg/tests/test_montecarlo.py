import math

import numpy as np
import pytest

from effdiff.errors import TrialError
from effdiff.montecarlo import (McConfig, McStatistics, build_random_field, campaign_csv,
                                geometric_mean_reference, monte_carlo, read_campaign_csv,
                                run_trial)


def test_config_defaults_and_validation():
    cfg = McConfig(2, 4, 3, (1.0, 10.0))
    assert cfg.refine == 3
    assert cfg.mass_transfer == pytest.approx(0.5 * math.sqrt(10.0))
    for bad in (dict(dim=4, q=(1, 1, 1, 1)), dict(n=0), dict(trials=0), dict(q=(1.0,)),
                dict(q=(1.0, -1.0)), dict(refine=0), dict(c0=0.0)):
        kwargs = dict(dim=2, n=2, trials=1, q=(1.0, 10.0))
        kwargs.update(bad)
        with pytest.raises(ValueError):
            McConfig(**kwargs)


def test_random_field_structure():
    cfg = McConfig(2, 3, 1, (1.0, 10.0), refine=2)
    fld = build_random_field(cfg, 0)
    assert fld.grid.cells == (6, 6)
    t = fld.tensors
    # each sub-cell block is constant
    assert np.array_equal(t[0, 0], t[1, 1]) and np.array_equal(t[2, 4], t[3, 5])
    eig = np.linalg.eigvalsh(t.reshape(-1, 2, 2))
    np.testing.assert_allclose(eig, np.tile([1.0, 10.0], (36, 1)), rtol=1e-12)
    assert np.array_equal(t, build_random_field(cfg, 0).tensors)
    assert not np.array_equal(t, build_random_field(cfg, 1).tensors)


@pytest.mark.parametrize("dim", [2, 3])
def test_isotropic_q_has_zero_spread(dim):
    stats = monte_carlo(McConfig(dim, 3, 4, (2.5,) * dim, refine=2))
    np.testing.assert_allclose(stats.values, 2.5, rtol=1e-9)
    assert stats.std <= 1e-9


def test_campaign_is_deterministic_and_worker_independent():
    cfg = McConfig(2, 4, 4, (1.0, 10.0), master_seed=17)
    a = monte_carlo(cfg)
    b = monte_carlo(cfg)
    c = monte_carlo(cfg, workers=2)
    assert a.values == b.values == c.values
    assert campaign_csv(a) == campaign_csv(c)
    shifted = monte_carlo(McConfig(2, 4, 4, (1.0, 10.0), master_seed=18))
    assert shifted.values != a.values


def test_values_lie_between_extreme_eigenvalues():
    stats = monte_carlo(McConfig(3, 3, 3, (1.0, 10.0, 5.0), refine=2))
    assert all(1.0 <= v <= 10.0 for v in stats.values)


def test_dimensional_scaling():
    base = McConfig(2, 3, 2, (1.0, 10.0), master_seed=5)
    scaled = McConfig(2, 3, 2, (2e-12, 2e-11), master_seed=5)
    a, b = monte_carlo(base), monte_carlo(scaled)
    np.testing.assert_allclose(np.array(b.values), 2e-12 * np.array(a.values), rtol=1e-9)


def test_statistics():
    cfg = McConfig(2, 1, 3, (1.0, 1.0))
    stats = McStatistics(cfg, (1.0, 2.0, 3.0), (0, 1, 2))
    assert stats.mean == 2.0 and stats.std == 1.0
    assert stats.stderr == pytest.approx(1 / math.sqrt(3))
    assert McStatistics(cfg, (4.0,), (0,)).std == 0.0
    assert geometric_mean_reference(np.diag([1.0, 10.0])) == pytest.approx(math.sqrt(10))
    assert McStatistics(McConfig(3, 1, 1, (1, 1, 1)), (1.0,), (0,)).reference() is None
    with pytest.raises(ValueError):
        geometric_mean_reference(np.eye(3))


def test_csv_round_trip():
    stats = monte_carlo(McConfig(2, 2, 3, (1.0, 10.0), master_seed=2))
    text = campaign_csv(stats, {"note": "x"})
    settings, values, summary = read_campaign_csv(text)
    assert values == list(stats.values)
    assert summary["mean"] == stats.mean and summary["std"] == stats.std
    assert settings["master_seed"] == "2" and settings["note"] == "x"
    header = [line for line in text.splitlines() if not line.startswith("#")][0]
    assert header == "trial_index,seed,d_eff,mean,std,stderr"


def test_trial_failure_is_wrapped():
    cfg = McConfig(2, 4, 1, (1.0, 10.0), tol=1e-300)
    with pytest.raises(TrialError) as err:
        monte_carlo(cfg)
    assert err.value.trial_index == 0


def test_single_trial_matches_campaign():
    cfg = McConfig(2, 3, 2, (1.0, 4.0), master_seed=3)
    assert run_trial(cfg, 1) == monte_carlo(cfg).values[1]


def test_trial_failure_crosses_process_boundary():
    cfg = McConfig(2, 4, 2, (1.0, 10.0), tol=1e-300)
    with pytest.raises(TrialError) as err:
        monte_carlo(cfg, workers=2)
    assert err.value.trial_index in (0, 1)


@pytest.mark.slow
def test_2d_overestimation_trend():
    # one-sided statistical check at the default resolution
    stats = monte_carlo(McConfig(2, 20, 100, (1.0, 10.0), master_seed=99))
    ref = stats.reference()
    assert stats.mean >= ref - stats.stderr
