import numpy as np
import pytest

from treespde import graph
from treespde.engine import DriftPreset
from treespde.experiments import (
    DEFAULT_EPSILONS, catalog_configs, contraction_check, default_family, ergodicity_curves,
    ergodicity_initial_values, feller_sweep, monotone_trend, reachability,
)
from treespde.graph import NoiseConfig
from treespde.nulldec import decide_strong_feller
from treespde.spectral import build_basis


@pytest.fixture(scope="module")
def chain4():
    t = graph.chain(4)
    return t, build_basis(t, 32)


def test_epsilon_grid():
    assert len(DEFAULT_EPSILONS) == 8
    assert DEFAULT_EPSILONS[0] == 1.0 and abs(DEFAULT_EPSILONS[-1] - 1e-4) < 1e-18


def test_no_noise_feller_is_exactly_one(chain4):
    t, b = chain4
    sw = feller_sweep(t, NoiseConfig.no_noise(t), DriftPreset("masked_sine"), b, M=50, seed=1)
    assert sw.estimates == [1.0] * 8
    assert sw.verdict() is False


def test_noisy_feller_decays(chain4):
    t, b = chain4
    sw = feller_sweep(t, NoiseConfig.from_noise_free(t, [1, 2, 3]), DriftPreset("masked_sine"), b, M=300, seed=1)
    assert all(0 <= e <= 1 for e in sw.estimates)
    assert sw.estimates[-1] < 0.3
    # two-point contrast instead of monotonicity
    assert sw.estimates[0] >= sw.estimates[-1] - 2 * sw.stderrs[-1]


def test_reachability_no_noise_all_zero(chain4):
    t, b = chain4
    rep = reachability(t, NoiseConfig.no_noise(t), DriftPreset("zero"), b, M=20, seed=0)
    assert np.all(rep.probabilities() == 0.0) and not rep.verdict()


def test_reachability_full_noise_positive(chain4):
    t, b = chain4
    rep = reachability(t, NoiseConfig.all_noisy(t), DriftPreset("masked_sine"), b, M=100, seed=0)
    assert np.all(rep.probabilities() >= 0.9) and rep.verdict()
    fams = {f for f, _, _ in rep.entries}
    assert fams == {0, 1, 2, 3}


def test_blocked_family_unreachable():
    t = graph.t_prime()
    b = build_basis(t, 32)
    rep = reachability(t, NoiseConfig.from_noise_free(t, [5, 6]), DriftPreset("masked_sine"), b, M=100, seed=0)
    assert np.all(rep.probabilities(6) == 0.0)
    assert np.all(rep.probabilities(1) > 0.9)


def test_ergodicity_trivial_case(chain4):
    t, b = chain4
    cur = ergodicity_curves(t, NoiseConfig.no_noise(t), DriftPreset("zero"), b, T=2.0, M=10, seed=0)
    assert np.all(cur.averages[0] == 0.0)
    assert np.all(np.abs(cur.averages) <= 1.0)
    assert cur.labels == ["X0_1", "X0_2", "X0_3"]


def test_initial_values(chain4):
    _, b = chain4
    x = ergodicity_initial_values(b, seed=3)
    assert np.all(x["X0_1"] == 0)
    assert abs(x["X0_2"][0]) < 1e-12 and np.linalg.norm(x["X0_2"]) > 1
    assert np.array_equal(x["X0_3"], ergodicity_initial_values(b, seed=3)["X0_3"])
    assert not np.array_equal(x["X0_3"], ergodicity_initial_values(b, seed=4)["X0_3"])


def test_contraction_holds_for_heat_flow(chain4):
    t, b = chain4
    x = ergodicity_initial_values(b, seed=0)
    rep = contraction_check(b, NoiseConfig.all_noisy(t), DriftPreset("zero"), x["X0_1"], x["X0_2"], T=5.0, M=4)
    assert rep.violations == 0 and rep.rate == pytest.approx(b.mu1)


def test_catalog_alignment():
    """Each catalog config is either blocked along the probed family or strong Feller."""
    for name in ("chain:4", "star:4", "t-prime"):
        t = graph.preset(name)
        for cfg in catalog_configs(t):
            v = decide_strong_feller(t, cfg)
            assert default_family(t) >= 1
            if v.is_strong_feller:
                assert cfg.noisy


def test_monotone_trend():
    assert monotone_trend(np.arange(50.0))[0]
    assert not monotone_trend(np.sin(np.arange(50.0)))[0]
