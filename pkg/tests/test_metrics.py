import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afpkit.metrics import (DeadChannelError, NoiseModel, channel_probability, evaluate, fidelity,
                            mi_aggregate, mi_broadcast, mi_hop, mu_sweep, selectivity, snr,
                            success_probability)
from afpkit.spectral_core import dft_matrix
from afpkit.targets import custom_target, dft_target, permutation_power

from oracles import (HOP3_ABS2, HOP3_PAIRS, broadcast_mi_bits, hop_mi_bits, hop_snr)

S2 = permutation_power(2, 1)
S3 = permutation_power(3, 1)
MU200 = NoiseModel(200.0)


# -- noise model ---------------------------------------------------------------

def test_mu_eff():
    assert NoiseModel(100.0, 0.5, 1.0).mu_eff == 25.0
    assert NoiseModel.from_mu_eff(7.0).mu_eff == 7.0


@pytest.mark.parametrize("args", [(0.0,), (1.0, 0.0), (1.0, 1.5), (1.0, 1.0, -0.1)])
def test_noise_model_validation(args):
    with pytest.raises(ValueError):
        NoiseModel(*args)


# -- operator scores ---------------------------------------------------------------

def test_fidelity_examples():
    t = S2.matrix
    assert fidelity(t, S2) == pytest.approx(1.0)
    assert fidelity(t / np.sqrt(2), S2) == pytest.approx(1.0)
    assert fidelity(dft_matrix(2), S2) == pytest.approx(0.5)


def test_fidelity_rejects_zero_matrix():
    with pytest.raises(ValueError):
        fidelity(np.zeros((2, 2)), S2)


def test_fidelity_ignores_global_phase(rng):
    w = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    assert fidelity(w * np.exp(0.7j), S3) == pytest.approx(fidelity(w, S3), abs=1e-14)


def test_success_examples(hop3_matrix):
    assert success_probability(S2.matrix, S2) == pytest.approx(1.0)
    assert success_probability(S2.matrix / np.sqrt(2), S2) == pytest.approx(0.5)
    mean_rows = np.mean([sum(r) for r in HOP3_ABS2])
    assert success_probability(hop3_matrix, S3) == pytest.approx(mean_rows, abs=1e-12)
    assert abs(success_probability(hop3_matrix, S3) - 0.26) <= 0.005


def test_channel_probability_examples(hop3_matrix):
    assert channel_probability(np.eye(3), 1) == 1.0
    assert channel_probability(hop3_matrix, 0) == pytest.approx(0.22602, abs=1e-12)
    assert channel_probability(hop3_matrix, 2) == pytest.approx(0.29893, abs=1e-12)
    with pytest.raises(IndexError):
        channel_probability(hop3_matrix, 3)


def test_selectivity_examples(hop3_matrix):
    assert selectivity(np.eye(3), 2, 2) == 1.0
    assert selectivity(hop3_matrix, 1, 0) == pytest.approx(0.26664 / 0.26763, abs=1e-12)
    mean = np.mean([selectivity(hop3_matrix, k, l) for k, l in HOP3_PAIRS])
    assert abs(mean - 0.9968) <= 0.0005


def test_selectivity_dead_channel_raises():
    w = np.diag([1.0, 0.0]).astype(complex)
    with pytest.raises(DeadChannelError):
        selectivity(w, 1, 0)


def test_selectivities_sum_to_one(hop3_matrix):
    for k in range(3):
        assert sum(selectivity(hop3_matrix, k, l) for l in range(3)) == pytest.approx(1.0)


# -- SNR and mutual information ---------------------------------------------

def test_snr_examples(hop3_matrix):
    assert snr(np.eye(3), 1, 1, MU200) == pytest.approx(200.0)
    assert snr(np.eye(3) * np.sqrt(0.5), 1, 1, MU200) == pytest.approx(100.0)
    assert snr(hop3_matrix, 0, 2, MU200) == pytest.approx(hop_snr(HOP3_ABS2, 0, 2, 200), rel=1e-12)
    assert snr(hop3_matrix, 0, 2, MU200) == pytest.approx(44.5, abs=0.05)


def test_snr_uses_efficiency_and_electronic_noise():
    w = np.array([[0.9, 0.3], [0.3, 0.9]], dtype=complex)
    noise = NoiseModel(400.0, 0.5, 1.0)
    expected = 0.5 * 400 * 0.81 / (1 + 1.0 + 0.5 * 400 * 0.09)
    assert snr(w, 0, 0, noise) == pytest.approx(expected)


def test_perfect_hop_reaches_shannon_limit():
    assert mi_hop(S2.matrix, 0, 1, MU200) == pytest.approx(math.log2(201), abs=1e-12)


def test_reference_hop_mi(hop3_matrix):
    vals = [mi_hop(hop3_matrix, k, l, MU200) for k, l in HOP3_PAIRS]
    for (k, l), v in zip(HOP3_PAIRS, vals):
        assert v == pytest.approx(hop_mi_bits(HOP3_ABS2, k, l, 200), rel=1e-12)
    assert max(vals) - min(vals) <= 0.01
    assert all(abs(v - 5.51) < 0.01 for v in vals)


def test_mi_hop_is_log_of_one_plus_snr(hop3_matrix):
    for k in range(3):
        for l in range(3):
            assert mi_hop(hop3_matrix, k, l, MU200) == pytest.approx(
                math.log2(1 + snr(hop3_matrix, k, l, MU200)), rel=1e-12)


def test_mi_hop_zero_without_signal():
    w = np.array([[0.0, 0.8], [0.5, 0.0]], dtype=complex)
    assert mi_hop(w, 0, 0, MU200) == 0.0


def test_broadcast_examples():
    f5, f2 = dft_matrix(5), dft_matrix(2)
    for k in range(5):
        for l in range(5):
            assert mi_broadcast(f5, k, l, MU200) == pytest.approx(math.log2(41), abs=1e-12)
    assert mi_broadcast(f2, 1, 0, MU200) == pytest.approx(math.log2(101), abs=1e-12)
    assert mi_broadcast(np.zeros((2, 2)), 0, 0, MU200) == 0.0


def test_broadcast_matches_oracle(hop3_matrix):
    for k in range(3):
        for l in range(3):
            assert mi_broadcast(hop3_matrix, k, l, 200.0) == pytest.approx(
                broadcast_mi_bits(HOP3_ABS2, k, l, 200), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), mu=st.floats(0.1, 1e5))
def test_hop_never_beats_broadcast(seed, mu):
    rng = np.random.default_rng(seed)
    w = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    w /= max(1.0, np.linalg.norm(w, 2))  # channel blocks of a unitary are contractions
    for k in range(3):
        for l in range(3):
            h, b = mi_hop(w, k, l, mu), mi_broadcast(w, k, l, mu)
            assert h <= b + 1e-12
            assert 0 <= h <= math.log2(1 + mu) + 1e-12


def test_hop_equals_broadcast_without_crosstalk():
    w = np.diag([0.8, 0.6]).astype(complex)
    assert mi_hop(w, 0, 0, 50.0) == pytest.approx(mi_broadcast(w, 0, 0, 50.0))


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_scores_are_phase_blind_but_fidelity_is_not(seed):
    rng = np.random.default_rng(seed)
    w = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))) / 3
    w2 = w * np.exp(1j * rng.uniform(-np.pi, np.pi, (3, 3)))
    a, b = evaluate(w, S3, MU200), evaluate(w2, S3, MU200)
    np.testing.assert_allclose(a.channel_probs, b.channel_probs, rtol=1e-12)
    np.testing.assert_allclose(a.selectivities, b.selectivities, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose([v for *_, v in a.mi_values], [v for *_, v in b.mi_values], rtol=1e-12)


def test_fidelity_is_phase_sensitive():
    w = dft_matrix(2)
    t = dft_target(2)
    w2 = w * np.array([[1, 1], [1, -1]])
    assert fidelity(w, t) == pytest.approx(1.0)
    assert fidelity(w2, t) < 0.9


def test_perfect_scores_only_for_target_up_to_phase(rng):
    t = dft_target(3)
    w = np.exp(0.3j) * t.matrix
    assert fidelity(w, t) == pytest.approx(1.0, abs=1e-12)
    assert success_probability(w, t) == pytest.approx(1.0, abs=1e-12)
    u, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    assert fidelity(u, t) < 1 - 1e-8


# -- aggregates ----------------------------------------------------------------

def test_aggregate_reference(hop3_matrix):
    s = mi_aggregate(hop3_matrix, S3, MU200)
    assert s.mi_min == pytest.approx(5.507, abs=5e-4)
    assert s.mi_min == min(v for *_, v in s.values)
    assert s.mi_mean == pytest.approx(np.mean([v for *_, v in s.values]))


def test_aggregate_ideal_hop():
    s = mi_aggregate(permutation_power(4, 1).matrix, permutation_power(4, 1), 1000.0)
    assert s.mi_min == s.mi_mean == pytest.approx(math.log2(1001))


def test_aggregate_all_equal():
    f = dft_target(4)
    s = mi_aggregate(f.matrix, f, 200.0)
    assert s.mi_min == pytest.approx(s.mi_mean) and len(s.values) == 16


def test_sweep_single_point_matches_aggregate(hop3_matrix):
    _, table, pairs = mu_sweep(hop3_matrix, S3, [200.0])
    agg = mi_aggregate(hop3_matrix, S3, 200.0)
    assert pairs == list(S3.pairs)
    assert list(table[0]) == [v for *_, v in agg.values]


@pytest.mark.parametrize("grid", [[], [1.0, 0.0], [-5.0]])
def test_sweep_rejects_bad_grid(hop3_matrix, grid):
    with pytest.raises(ValueError):
        mu_sweep(hop3_matrix, S3, grid)


def test_sweep_ordering_crossover(hop3_matrix):
    grid, table, pairs = mu_sweep(hop3_matrix, S3, np.logspace(0, 5, 51))
    out0 = [i for i, (k, _) in enumerate(pairs) if k == 0][0]
    low, high = table[grid < 150], table[grid > 300]
    assert np.all(np.argmin(low, axis=1) == out0)
    assert np.all(np.argmax(high, axis=1) == out0)


def test_sweep_saturation_and_monotonicity(hop3_matrix):
    grid, hop_table, pairs = mu_sweep(hop3_matrix, S3, np.logspace(0, 8, 81))
    for j, (k, l) in enumerate(pairs):
        c = selectivity(hop3_matrix, k, l)
        assert hop_table[:, j].max() <= math.log2(1 / (1 - c)) + 1e-9
    b = custom_target(S3.matrix, [(k, l) for k in range(3) for l in range(3)], "broadcast")
    _, bt, _ = mu_sweep(hop3_matrix, b, grid)
    assert np.all(np.diff(bt, axis=0) >= 0)


# -- report ---------------------------------------------------------------------

def test_report_consistency(hop3_matrix):
    r = evaluate(hop3_matrix, S3, MU200)
    assert r.success == pytest.approx(np.mean(r.channel_probs))
    assert r.mu_eff == 200.0
    assert r.mean_pair_selectivity(S3.pairs) == pytest.approx(0.99678, abs=1e-5)


def test_report_dead_channel():
    w = np.array([[0, 1], [0, 0]], dtype=complex)
    r = evaluate(w, S2, MU200)
    assert np.isnan(r.selectivities[1][0])
    assert dict(((k, l), v) for k, l, v in r.mi_values)[(1, 0)] == 0.0


def test_report_zero_matrix_has_zero_fidelity():
    assert evaluate(np.zeros((2, 2)), S2).fidelity == 0.0
