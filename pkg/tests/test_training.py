import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gentrap.dataset import Batch
from gentrap.errors import ConfigError, PreconditionError, ThresholdError, TrainingDivergence
from gentrap.models import ModelConfig, build_model
from gentrap.numerics import Tensor, grad_check
from gentrap.training import (
    ComparisonReport,
    GeneralizationReport,
    MetricsReport,
    TrainConfig,
    choose_threshold,
    class_ratio_lambda,
    draw_k,
    evaluate,
    fit_ae_and_threshold,
    logits_weighted_cross_entropy,
    nested_link_subsets,
    train,
    weighted_cross_entropy,
)


def bce(y, p):
    return -(y * np.log(p) + (1 - y) * np.log(1 - p)).mean()


# -- weighted cross-entropy -----------------------------------------------------------

def test_hand_case():
    loss = weighted_cross_entropy([0], Tensor([0.5]), 0.003).item()
    assert abs(loss - 0.003 * math.log(2)) < 1e-9
    assert abs(loss - 0.002079) < 1e-6


def test_confident_correct_positive_is_zero():
    assert weighted_cross_entropy([1], Tensor([1.0]), 0.003).item() < 1e-9
    assert weighted_cross_entropy([1], Tensor([1 - 1e-15]), 0.003).item() < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.floats(1e-6, 1 - 1e-6)), min_size=1, max_size=20))
def test_half_lambda_is_half_bce(pairs):
    y = np.array([a for a, _ in pairs], dtype=float)
    p = np.array([b for _, b in pairs])
    assert weighted_cross_entropy(y, Tensor(p), 0.5).item() == pytest.approx(0.5 * bce(y, p), rel=1e-12)


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.1, 1.5])
def test_lambda_range(lam):
    with pytest.raises(ConfigError):
        weighted_cross_entropy([0], Tensor([0.5]), lam)


def test_gradient_matches_analytic_derivative():
    y = np.array([1.0, 0.0, 1.0, 0.0])
    p = np.array([0.2, 0.3, 0.9, 0.6])
    lam = 0.003
    t = Tensor(p.copy(), requires_grad=True)
    weighted_cross_entropy(y, t, lam).backward()
    analytic = (-y * (1 - lam) / p + (1 - y) * lam / (1 - p)) / len(y)
    np.testing.assert_allclose(t.grad, analytic, rtol=1e-8)


def test_probability_form_grad_check():
    rep = grad_check(lambda t: weighted_cross_entropy([1, 0], t, 0.3), np.array([0.3, 0.6]), tolerance=1e-5)
    assert rep.passed, rep


def test_two_logit_softmax_grad_check():
    from gentrap.numerics import softmax_lastdim, index
    rep = grad_check(lambda z: weighted_cross_entropy([1, 0], index(softmax_lastdim(z), (slice(None), 1)), 0.2),
                     np.array([[0.3, -0.2], [1.0, 0.4]]), tolerance=1e-5)
    assert rep.passed, rep


def test_logit_form_matches_probability_form():
    z = np.array([[0.1, 2.0], [1.0, -1.0], [0.0, 0.0]])
    y = np.array([1, 0, 1])
    e = np.exp(z - z.max(axis=1, keepdims=True))
    p = (e / e.sum(axis=1, keepdims=True))[:, 1]
    a = logits_weighted_cross_entropy(Tensor(z), y, 0.1).item()
    b = weighted_cross_entropy(y, Tensor(p), 0.1).item()
    assert a == pytest.approx(b, rel=1e-12)


@pytest.mark.parametrize("pos,neg", [(3, 1000), (6, 10000), (1, 7)])
def test_equal_influence(pos, neg):
    # with lambda set to the class ratio both classes carry the same total weight
    lam = pos / neg
    p_ok = 0.7
    pos_total = weighted_cross_entropy(np.ones(pos), Tensor(np.full(pos, p_ok)), lam).item() * pos
    neg_total = weighted_cross_entropy(np.zeros(neg), Tensor(np.full(neg, 1 - p_ok)), lam).item() * neg
    ratio_pos = pos_total / (-math.log(p_ok))
    ratio_neg = neg_total / (-math.log(p_ok))
    assert ratio_pos == pytest.approx(pos * (1 - lam))
    assert ratio_neg == pytest.approx(neg * lam)
    assert pos_total / neg_total == pytest.approx((1 - lam) / 1.0, rel=1e-12)


def test_class_ratio_lambda():
    assert class_ratio_lambda([1, 0, 0, 0]) == pytest.approx(1 / 3)
    with pytest.raises(ConfigError):
        class_ratio_lambda([0, 0])


# -- metrics ------------------------------------------------------------------------

def test_perfect_metrics():
    m = MetricsReport(tp=1, tn=1, fp=0, fn=0)
    assert (m.precision_failure, m.recall_failure, m.f1_failure) == (1, 1, 1)
    assert (m.precision_normal, m.recall_normal, m.f1_normal) == (1, 1, 1)
    assert m.f1 == 1.0


def test_all_negative_predictor():
    m = MetricsReport.from_predictions([1, 0, 0, 1], [0, 0, 0, 0])
    assert m.recall_failure == 0 and m.precision_failure == 0 and m.f1_failure == 0


def test_hand_case_f1():
    m = MetricsReport(tp=50, tn=0, fp=50, fn=0)
    assert m.precision_failure == 0.5 and m.recall_failure == 1.0
    assert m.f1_failure == pytest.approx(2 / 3, abs=1e-4)


def test_zero_denominators():
    m = MetricsReport(tp=0, tn=0, fp=0, fn=0)
    assert m.precision == 0 and m.recall == 0 and m.f1 == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
def test_macro_is_mean_and_recomputable(tp, tn, fp, fn):
    m = MetricsReport(tp, tn, fp, fn)
    assert m.f1 == (m.f1_failure + m.f1_normal) / 2
    assert MetricsReport.from_dict(m.to_dict()).to_dict() == m.to_dict()


# -- k policy -----------------------------------------------------------------------

def test_k_draws_uniform():
    rng = np.random.default_rng(0)
    draws = np.array([draw_k(rng, 3) for _ in range(10_000)])
    assert set(draws.tolist()) == {1, 2, 3}
    counts = np.bincount(draws, minlength=4)[1:]
    p = 1 / 3
    sigma = math.sqrt(10_000 * p * (1 - p))
    assert np.all(np.abs(counts - 10_000 * p) < 5 * sigma)


def test_fixed_policy():
    assert draw_k(np.random.default_rng(0), 3, "fixed") == 3


# -- training loop ------------------------------------------------------------------

def toy_batch(n=20, seed=0, sep=2.0):
    """Linearly separable toy set: the failure class has shifted link features."""
    rng = np.random.default_rng(seed)
    y = np.array([1, 0, 0, 0] * (n // 4))
    pairs = rng.normal(size=(n, 3, 5, 17)) * 0.3
    pairs[y == 1, :, :, :9] += sep
    temporal = rng.normal(size=(n, 5, 37)) * 0.3
    temporal[y == 1, :, :9] += sep
    static = np.zeros((n, 4))
    static[:, 0] = 1
    return Batch(pairs, static, y, temporal)


def small_cfg():
    return ModelConfig(lstm_widths=(8, 8), ae_widths=(6, 4))


def test_loss_decreases_on_separable_toy():
    b = toy_batch()
    m = build_model("gentrap", small_cfg(), 17, 37, 4, seed=0, dtype=np.float64)
    res = train(m, b, b, TrainConfig(batch_size=20, epochs=5, learning_rate=1e-2, patience=10, seed=0))
    losses = [r.loss for r in res.trace]
    assert all(b2 <= a + 1e-3 for a, b2 in zip(losses, losses[1:])), losses
    assert losses[-1] < losses[0]


def test_two_epoch_run_is_bitwise_reproducible():
    b = toy_batch(40)
    out = []
    for _ in range(2):
        m = build_model("gentrap", small_cfg(), 17, 37, 4, seed=3, dtype=np.float32)
        res = train(m, b, b, TrainConfig(batch_size=8, epochs=2, seed=11))
        out.append((m.state_dict(), [r.loss for r in res.trace], res.k_draws))
    assert out[0][1] == out[1][1] and out[0][2] == out[1][2]
    for k in out[0][0]:
        np.testing.assert_array_equal(out[0][0][k], out[1][0][k])


def test_divergence_raises_with_trace():
    b = toy_batch()
    m = build_model("lstmplus", small_cfg(), 17, 37, 4, seed=0, dtype=np.float64)
    b.temporal[0, 0, 0] = np.nan
    with pytest.raises(TrainingDivergence) as exc:
        train(m, b, b, TrainConfig(batch_size=20, epochs=2))
    assert isinstance(exc.value.trace, list)


def test_best_validation_checkpoint_is_kept():
    b = toy_batch(40)
    m = build_model("lstmplus", small_cfg(), 17, 37, 4, seed=0, dtype=np.float64)
    res = train(m, b, b, TrainConfig(batch_size=10, epochs=6, learning_rate=1e-2, seed=0))
    best = max(r.val_f1 for r in res.trace)
    assert evaluate(res.model, b).f1 == pytest.approx(best)


def test_evaluate_empty():
    m = build_model("lstmplus", small_cfg(), 17, 37, 4)
    with pytest.raises(PreconditionError):
        evaluate(m, toy_batch().take(np.array([], dtype=int)))


# -- autoencoder thresholding -------------------------------------------------------

def test_threshold_above_all_errors_predicts_nothing():
    errors = np.array([0.1, 0.2, 0.3])
    assert not np.any(errors > 0.3)
    t, _ = choose_threshold(errors, np.array([0, 0, 1]))
    assert t in np.quantile(errors, np.linspace(0, 1, 1001))


def test_separated_errors_give_perfect_f1():
    errors = np.array([0.1, 0.11, 0.12, 0.9, 0.95])
    labels = np.array([0, 0, 0, 1, 1])
    t, f1 = choose_threshold(errors, labels)
    assert f1 == 1.0
    assert 0.12 <= t < 0.9
    for between in (0.2, 0.5, 0.85):
        assert MetricsReport.from_predictions(labels, errors > between).f1 == 1.0


def test_threshold_needs_both_classes():
    with pytest.raises(ThresholdError):
        choose_threshold(np.array([0.1, 0.2]), np.array([0, 0]))


@pytest.mark.parametrize("tag", ["lstmae", "gnn_lstmae"])
def test_autoencoder_separates_injected_failures(tag):
    rng = np.random.default_rng(0)
    n = 120
    y = (np.arange(n) % 6 == 0).astype(int)
    pairs = rng.normal(size=(n, 3, 5, 17)) * 0.1
    temporal = rng.normal(size=(n, 5, 37)) * 0.1
    spike = rng.normal(size=(int(y.sum()), 5, 9)) * 3.0
    pairs[y == 1, :, :, :9] += spike[:, None]
    temporal[y == 1, :, :9] += spike
    b = Batch(pairs, np.ones((n, 1)), y, temporal)
    m = build_model(tag, small_cfg(), 17, 37, 1, seed=0, dtype=np.float64)
    res = fit_ae_and_threshold(m, b, b, TrainConfig(batch_size=32, epochs=15, learning_rate=1e-2, seed=0))
    from gentrap.training import reconstruction_errors
    err = reconstruction_errors(res.model, b)
    assert err[y == 1].mean() > err[y == 0].mean()
    assert res.threshold is not None
    assert evaluate(res.model, b, res.threshold).f1 > 0.8


def test_constant_series_reconstruct_better_than_spikes():
    rng = np.random.default_rng(1)
    n = 64
    temporal = np.repeat(rng.normal(size=(n, 1, 37)) * 0.2, 5, axis=1)
    train_b = Batch(np.zeros((n, 3, 5, 17)), np.ones((n, 1)), np.zeros(n, dtype=int), temporal)
    m = build_model("lstmae", small_cfg(), 17, 37, 1, seed=0, dtype=np.float64)
    val = Batch(np.zeros((2, 3, 5, 17)), np.ones((2, 1)), np.array([0, 1]), temporal[:2].copy())
    val.temporal[1, 2] += 4.0
    res = fit_ae_and_threshold(m, train_b, val, TrainConfig(batch_size=16, epochs=25, learning_rate=1e-2, seed=0))
    err = res.model.reconstruction_error(val).data
    assert err[0] < err[1]


def test_ae_needs_both_classes_in_validation():
    b = toy_batch()
    m = build_model("lstmae", small_cfg(), 17, 37, 4)
    with pytest.raises(ThresholdError):
        fit_ae_and_threshold(m, b, b.take(np.flatnonzero(b.labels == 0)), TrainConfig(epochs=1))


# -- experiment plumbing ------------------------------------------------------------

def test_nested_link_subsets():
    keys = [f"S{i}/L1" for i in range(50)]
    subs = nested_link_subsets(keys, [0.5, 0.4, 0.3, 0.2, 0.1], seed=4)
    assert subs[0.3] < subs[0.4] < subs[0.5]
    assert subs[0.1] < subs[0.2] < subs[0.3]
    assert len(subs[0.1]) == 5
    assert nested_link_subsets(keys, [1.0], 4)[1.0] == set(keys)
    assert nested_link_subsets(keys, [0.3], 4)[0.3] == subs[0.3]


def test_comparison_report_layout():
    rows = [MetricsReport(5, 90, 3, 2, m, f) for m in ("gentrap", "lstmplus") for f in (1, 2)]
    rep = ComparisonReport(rows)
    table = rep.table()
    assert [r["model"] for r in table] == ["gentrap", "lstmplus"]
    assert set(table[0]) == {"model", "fold1_precision", "fold1_recall", "fold1_f1",
                             "fold2_precision", "fold2_recall", "fold2_f1"}
    assert rep.to_csv().splitlines()[0].startswith("model,fold1_precision")
    assert "gentrap" in rep.render()


def test_generalization_report_rows():
    rows = [(f, MetricsReport(5, 90, 3, 2, m)) for f in (0.1, 0.3, 0.5, 0.2, 0.4) for m in ("gentrap", "lstmplus")]
    rep = GeneralizationReport(rows)
    assert [r["fraction"] for r in rep.table()] == [0.5, 0.4, 0.3, 0.2, 0.1]
