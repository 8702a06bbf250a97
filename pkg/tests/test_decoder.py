import math

import numpy as np
import pytest

from earaad.decoder import (AccuracyRow, AccuracyTable, Decoder, Trial, binomial_significance,
                            classify_window, evaluate, pearson, reconstruct, train_decoder)
from earaad.errors import ConfigError, DataError, LayoutError, SchemaError, \
    UndefinedCorrelationError
from earaad.layouts import Layout
from earaad.linmodel import LagConfig
from earaad.signals import MonoSeries, MultiSeries
from earaad.synth import SynthConfig, generate_envelope, generate_trial

LAGS = LagConfig()


def brute_reconstruct(weights, taus, eeg):
    """Eq. 2 as a literal double sum over channels and lags."""
    T, N = eeg.shape
    out = np.zeros(T)
    for t in range(T):
        acc = 0.0
        for n in range(N):
            for li, tau in enumerate(taus):
                if 0 <= t + tau < T:
                    acc += eeg[t + tau, n] * weights[li, n]
        out[t] = acc
    return out


def two_pass_pearson(a, b):
    ma = sum(a) / len(a)
    mb = sum(b) / len(b)
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = sum((x - ma) ** 2 for x in a)
    vb = sum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def pmf_tail(k, n, p):
    return sum(math.comb(n, i) * p ** i * (1 - p) ** (n - i) for i in range(k, n + 1))


def _decoder(weights, channels, lags=LAGS):
    return Decoder(weights, lags.lag_axis_ms, channels, 0.0, lags.fs)


def _copy_trials(n, seed=0, T=640):
    g = np.random.default_rng(seed)
    out = []
    for i in range(n):
        env = [generate_envelope(T / 64.0, 64.0, g) for _ in range(4)]
        noise = g.standard_normal((T, 3))
        eeg = MultiSeries(np.column_stack([noise[:, 0], env[1].samples, noise[:, 1:]]), 64.0)
        out.append(Trial(eeg, tuple(env), 1, trial_id=f"T{i:02d}"))
    return out


# --- Trial / Decoder --------------------------------------------------------------

def test_trial_structure_checks():
    eeg = MultiSeries(np.zeros((64, 2)), 64.0)
    env = MonoSeries(np.ones(64), 64.0)
    with pytest.raises(SchemaError):
        Trial(eeg, (env,) * 3, 0)
    with pytest.raises(SchemaError):
        Trial(eeg, (env,) * 4, 4)
    with pytest.raises(SchemaError):
        Trial(eeg, (MonoSeries(np.ones(63), 64.0),) + (env,) * 3, 0)


# --- pearson ------------------------------------------------------------------

def test_pearson_examples():
    assert pearson(np.array([1.0, 2, 3]), np.array([2.0, 4, 6])) == pytest.approx(1.0)
    x = np.array([0.3, -1.0, 2.0, 5.0])
    assert pearson(x, -x) == pytest.approx(-1.0)
    with pytest.raises(UndefinedCorrelationError):
        pearson(np.ones(5), np.arange(5.0))


def test_pearson_matches_two_pass():
    g = np.random.default_rng(12345)
    a = g.standard_normal(100)
    b = 0.3 * a + g.standard_normal(100)
    assert abs(pearson(a, b) - two_pass_pearson(list(a), list(b))) < 1e-12


# --- reconstruct -------------------------------------------------------------

def test_reconstruct_selector_and_zero(rng):
    eeg = MultiSeries(rng.standard_normal((100, 3)), 64.0)
    w = np.zeros((LAGS.n_lags, 3))
    w[list(LAGS.taus).index(0), 2] = 1.0
    np.testing.assert_array_equal(reconstruct(_decoder(w, eeg.channels), eeg).samples,
                                  eeg.samples[:, 2])
    assert not np.any(reconstruct(_decoder(np.zeros_like(w), eeg.channels), eeg).samples)


def test_reconstruct_matches_double_sum(rng):
    eeg = rng.standard_normal((80, 4))
    w = rng.standard_normal((LAGS.n_lags, 4))
    got = reconstruct(_decoder(w, ("a", "b", "c", "d")),
                      MultiSeries(eeg, 64.0, ("a", "b", "c", "d"))).samples
    assert np.max(np.abs(got - brute_reconstruct(w, LAGS.taus, eeg))) < 1e-10


def test_reconstruct_rejects_reordered_channels(rng):
    eeg = MultiSeries(rng.standard_normal((50, 2)), 64.0, ("a", "b"))
    dec = _decoder(np.zeros((LAGS.n_lags, 2)), ("b", "a"))
    with pytest.raises(SchemaError):
        reconstruct(dec, eeg)


# --- train_decoder -----------------------------------------------------------

def test_train_copy_channel():
    trials = _copy_trials(3)
    dec = train_decoder(trials, LAGS)
    for t in trials:
        assert pearson(reconstruct(dec, t.eeg), t.attended) > 0.999
    assert dec.folds_used >= 2 and len(dec.lambda_scores) == 7


def test_train_errors():
    with pytest.raises(DataError):
        train_decoder([])
    a, b = _copy_trials(2)
    renamed = b.with_eeg(MultiSeries(b.eeg.samples, 64.0, ("w", "x", "y", "z")))
    with pytest.raises(SchemaError):
        train_decoder([a, renamed])


def test_train_fixed_lambda_and_single_trial():
    trials = _copy_trials(2)
    assert train_decoder(trials, lam=0.5).lam == 0.5
    one = train_decoder(trials[:1])
    assert one.folds_used == 5


def test_heldout_reconstruction_prefers_attended():
    config = SynthConfig(snr_db=0.0, seed=8)
    train = [generate_trial(config, 0, t)[0] for t in range(10)]
    dec = train_decoder(train, config.lags)
    wins = 0
    test = [generate_trial(config, 0, t)[0] for t in range(10, 20)]
    for trial in test:
        recon = reconstruct(dec, trial.eeg)
        r = [pearson(recon, c) for c in trial.candidates]
        wins += int(np.argmax(r)) == trial.attended_index
    assert wins >= 8


# --- classify_window ---------------------------------------------------------

def test_classify_exact_candidate_and_ties(rng):
    eeg = MultiSeries(rng.standard_normal((256, 2)), 64.0)
    w = np.zeros((LAGS.n_lags, 2))
    w[list(LAGS.taus).index(0), 0] = 1.0
    dec = _decoder(w, eeg.channels)
    centered = eeg.samples[:, 0] - eeg.samples[:, 0].mean()
    others = [MonoSeries(rng.standard_normal(256), 64.0) for _ in range(3)]
    trial = Trial(eeg, (others[0], MonoSeries(centered, 64.0), others[1], others[2]), 1)
    idx, scores = classify_window(dec, trial, 0.0, 4.0)
    assert idx == 1 and scores[1] == pytest.approx(1.0)
    same = MonoSeries(rng.standard_normal(256), 64.0)
    tied = Trial(eeg, (same,) * 4, 3)
    assert classify_window(dec, tied, 0.0, 2.0)[0] == 0


def test_classify_window_bounds(rng):
    trial = _copy_trials(1)[0]
    dec = _decoder(np.zeros((LAGS.n_lags, 4)), trial.eeg.channels)
    with pytest.raises(ConfigError):
        classify_window(dec, trial, 9.5, 1.0)
    with pytest.raises(ConfigError):
        classify_window(dec, trial, 0.0, 0.5)
    with pytest.raises(UndefinedCorrelationError):
        classify_window(dec, trial, 0.0, 1.0)


def test_classify_60s_synthetic_trials():
    # 10 subjects, decoder trained on 10 trials, tested on 10 fresh ones
    config = SynthConfig(snr_db=0.0, seed=31)
    correct = 0
    for s in range(10):
        dec = train_decoder([generate_trial(config, s, t)[0] for t in range(10)], config.lags)
        for t in range(10, 20):
            trial = generate_trial(config, s, t)[0]
            correct += classify_window(dec, trial, 0.0, 60.0)[0] == trial.attended_index
    assert correct >= 90


# --- binomial ------------------------------------------------------------------

def test_binomial_examples():
    assert binomial_significance(0, 10, 0.25) == 1.0
    assert binomial_significance(10, 10, 0.25) == pytest.approx(0.25 ** 10, rel=1e-12)
    assert abs(binomial_significance(30, 80, 0.25) - pmf_tail(30, 80, 0.25)) < 1e-12


@pytest.mark.parametrize("args", [(5, 4, 0.25), (-1, 4, 0.25), (1, 4, 0.0), (1, 4, 1.0),
                                  (1.5, 4, 0.25)])
def test_binomial_invalid(args):
    with pytest.raises(ConfigError):
        binomial_significance(*args)


# --- accuracy table --------------------------------------------------------------

def test_accuracy_table_csv_round_trip():
    rows = [AccuracyRow("S02", "T01", 60.0, 1, 1, 0), AccuracyRow("S01", "T01", 1.0, 60, 20, 0),
            AccuracyRow("S01", "T02", 1.0, 58, 30, 2)]
    table = AccuracyTable(rows)
    text = table.to_csv()
    assert text.splitlines()[0] == \
        "subject,fold,window_s,n_windows,n_correct,accuracy,skipped_windows"
    assert text.splitlines()[1].startswith("S01,T01,1,60,20,0.333333")
    assert AccuracyTable.from_csv(text).to_csv() == text
    assert table.subject_accuracy(1.0) == {"S01": pytest.approx(50 / 118)}


def test_accuracy_row_invariants():
    with pytest.raises(ConfigError):
        AccuracyRow("S", "T", 1.0, 3, 4, 0)


def test_summary_statistics():
    rows = [AccuracyRow("A", "T1", 5.0, 10, 5, 0), AccuracyRow("B", "T1", 5.0, 10, 7, 0)]
    s = AccuracyTable(rows).summary()[0]
    assert s["mean_accuracy"] == pytest.approx(0.6)
    assert s["sd_accuracy"] == pytest.approx(np.std([0.5, 0.7], ddof=1))
    assert s["p_value"] == pytest.approx(pmf_tail(12, 20, 0.25), rel=1e-10)


# --- evaluate ----------------------------------------------------------------

def _identical_candidate_trials(n, seed=0):
    g = np.random.default_rng(seed)
    trials = []
    for i in range(n):
        env = generate_envelope(20.0, 64.0, g)
        eeg = MultiSeries(g.standard_normal((len(env), 3)) + env.samples[:, None], 64.0)
        trials.append(Trial(eeg, (env,) * 4, i % 4, subject=f"S{i // 8}", trial_id=f"T{i:02d}"))
    return trials


def test_evaluate_identical_candidates_is_chance():
    table = evaluate(_identical_candidate_trials(16), [1.0, 5.0], lam=1e-2)
    for w in (1.0, 5.0):
        sel = [r for r in table.rows if r.window_s == w]
        n = sum(r.n_windows for r in sel)
        k = sum(r.n_correct for r in sel)
        assert k / n == pytest.approx(0.25)


def test_evaluate_matches_manual_leave_one_out():
    config = SynthConfig(n_subjects=1, trials_per_subject=3, trial_length_s=20.0, seed=4)
    trials = [generate_trial(config, 0, t)[0] for t in range(3)]
    table = evaluate(trials, [10.0], lam=1e-2)
    for held in range(3):
        dec = train_decoder([t for i, t in enumerate(trials) if i != held], lam=1e-2)
        expected = sum(classify_window(dec, trials[held], s, 10.0)[0] ==
                       trials[held].attended_index for s in (0.0, 10.0))
        row = [r for r in table.rows if r.fold == trials[held].trial_id][0]
        assert row.n_correct == expected and row.n_windows == 2


def test_evaluate_drops_partial_windows():
    config = SynthConfig(trial_length_s=25.0, seed=1)
    trials = [generate_trial(config, 0, t)[0] for t in range(2)]
    table = evaluate(trials, [10.0, 25.0], lam=1.0)
    assert {r.n_windows + r.skipped_windows for r in table.rows if r.window_s == 10.0} == {2}
    assert {r.n_windows for r in table.rows if r.window_s == 25.0} == {1}


def test_evaluate_errors():
    config = SynthConfig(trial_length_s=10.0)
    trials = [generate_trial(config, 0, t)[0] for t in range(2)]
    with pytest.raises(LayoutError):
        evaluate(trials, [1.0], layout=Layout("bad", ("L1", "X9")))
    with pytest.raises(ConfigError):
        evaluate(trials, [20.0])
    with pytest.raises(ConfigError):
        evaluate(trials[:1], [1.0])


def test_evaluate_high_snr_60s():
    config = SynthConfig(n_subjects=2, trials_per_subject=6, snr_db=10.0, seed=2)
    trials = [generate_trial(config, s, t)[0] for s in range(2) for t in range(6)]
    table = evaluate(trials, [60.0])
    assert table.mean_accuracy(60.0) >= 0.95


def test_removing_a_training_trial_changes_the_decoder():
    config = SynthConfig(trial_length_s=20.0, seed=9)
    trials = [generate_trial(config, 0, t)[0] for t in range(4)]
    full = train_decoder(trials, lam=1e-2)
    fewer = train_decoder(trials[:3], lam=1e-2)
    assert np.max(np.abs(full.weights - fewer.weights)) > 0


def test_accuracy_degrades_with_test_noise():
    config = SynthConfig(snr_db=0.0, seed=17)
    accs = []
    for snr in (10.0, 0.0, -10.0):
        correct = total = 0
        for s in range(3):
            dec = train_decoder([generate_trial(config, s, t)[0] for t in range(8)])
            for t in range(8, 12):
                trial, truth = generate_trial(config, s, t)
                g = np.random.default_rng(1000 * s + t)
                power = truth.clean.var(axis=0).mean()
                extra = g.standard_normal(truth.clean.shape) * np.sqrt(power / 10 ** (snr / 10))
                noisy = trial.with_eeg(MultiSeries(trial.eeg.samples + extra, 64.0,
                                                   trial.eeg.channels))
                for start in range(0, 60, 5):
                    correct += classify_window(dec, noisy, float(start), 5.0)[0] == \
                        trial.attended_index
                    total += 1
        accs.append(correct / total)
    drops = [b - a for a, b in zip(accs, accs[1:])]
    inversions = [d for d in drops if d > 0]
    assert len(inversions) <= 1 and all(d <= 0.02 for d in inversions)
