import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tabtransfer.data import CATEGORICAL, NUMERICAL, Column, Dataset, Preprocessor, Schema, SyntheticSpec, generate
from tabtransfer.evaluation import mean_auc
from tabtransfer.models import FTTransformerSpec, InputLayout, MLPSpec, build_extractor
from tabtransfer.pretrain import (
    ColumnHeads,
    PretrainCheckpoint,
    PretrainConfig,
    column_pools,
    cutmix,
    info_nce,
    mixup_embed,
    mlm_mask,
    pretrain,
    pretrain_contrastive,
    pretrain_mlm,
    pretrain_supervised,
    scarf_corrupt,
)
from tabtransfer.pretrain.strategies import contrastive_batch_loss
from tabtransfer.tensor import Tensor, no_record, ops, precision
from tabtransfer.training import EarlyStopping, NonFiniteLossError, predict

SMALL_FT = FTTransformerSpec(n_layers=1, d_embed=16, n_heads=2, attention_dropout=0.0, ffn_dropout=0.0)


def _dataset(x_num, x_cat=None, y=None, cards=()):
    n = x_num.shape[0]
    cols = [Column(f"n{j}", NUMERICAL) for j in range(x_num.shape[1])]
    cols += [Column(f"c{j}", CATEGORICAL, tuple(str(i) for i in range(k))) for j, k in enumerate(cards)]
    y = np.zeros((n, 1), dtype=int) if y is None else y
    x_cat = np.zeros((n, 0), dtype=np.int64) if x_cat is None else x_cat
    schema = Schema(tuple(cols), tuple(f"t{k}" for k in range(y.shape[1])))
    return Dataset(schema, x_num, x_cat, y)


@pytest.fixture(scope="module")
def synthetic():
    ds = generate(SyntheticSpec(rows=600, n_numerical=6, n_targets=4, missing_rate=0.0, seed=3)).dataset
    nd = Preprocessor.fit(ds).neural(ds)
    return nd.subset(np.arange(450)), nd.subset(np.arange(450, 600))


# ---- config -------------------------------------------------------------------------


def test_config_defaults_per_strategy():
    sup = PretrainConfig("Supervised")
    assert (sup.epochs, sup.patience, sup.batch_size) == (500, 30, 256)
    assert (PretrainConfig("MLM").batch_size, PretrainConfig("MLM").patience) == (512, None)
    con = PretrainConfig("Contrastive")
    assert (con.batch_size, con.patience, con.cutmix_keep, con.mixup) == (200, None, 0.9, 0.9)
    assert PretrainConfig("SCARF").scarf_rate == pytest.approx(0.4)


@pytest.mark.parametrize("bad", [dict(strategy="BYOL"), dict(cutmix_keep=1.5), dict(mixup=-0.1), dict(temperature=0)])
def test_config_rejects_invalid(bad):
    with pytest.raises(ValueError):
        PretrainConfig(**bad)


# ---- early stopping ------------------------------------------------------------------


def test_patience_stops_after_thirty_flat_epochs():
    stopper = EarlyStopping(30)
    stopped = None
    for epoch in range(1, 100):
        stopper.observe(epoch, 0.7)
        if stopper.should_stop:
            stopped = epoch
            break
    assert stopped == 31 and stopper.best_epoch == 1


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=60), st.integers(1, 10))
def test_early_stopping_best_is_running_max(metrics, patience):
    stopper = EarlyStopping(patience)
    seen = []
    for epoch, m in enumerate(metrics, start=1):
        stopper.observe(epoch, m)
        seen.append(m)
        assert stopper.best == max(seen)
        assert metrics[stopper.best_epoch - 1] == stopper.best
        if stopper.should_stop:
            break


# ---- supervised ------------------------------------------------------------------------


def test_initial_loss_is_log_two():
    rng = np.random.default_rng(0)
    y = (rng.random((400, 3)) > 0.5).astype(int)
    ds = _dataset(rng.standard_normal((400, 5)), y=y)
    res = pretrain_supervised(MLPSpec(layers=[16]), ds, PretrainConfig(epochs=1, lr=1e-12), seed=0)
    assert res.log.column("train_loss")[0] == pytest.approx(np.log(2), abs=0.05)


def test_supervised_memorizes_separable_batch():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((64, 4))
    y = np.stack([x[:, 0] > 0, x[:, 1] + x[:, 2] > 0], axis=1).astype(int)
    ds = _dataset(x, y=y)
    res = pretrain_supervised(MLPSpec(layers=[32], dropout=0.0), ds,
                              PretrainConfig(epochs=200, batch_size=64, lr=1e-2), seed=0)
    model_out = res.heads(res.extractor(x, ds.X_cat)).data
    assert mean_auc(y, model_out) == 1.0


def test_supervised_returns_best_validation_snapshot(synthetic):
    train, val = synthetic
    res = pretrain_supervised(SMALL_FT, train, PretrainConfig(epochs=12, patience=3, lr=3e-3), seed=0, val=val)
    history = [v for v in res.log.column("val_auc")]
    assert res.checkpoint.best_metric == max(history)
    assert history[res.checkpoint.best_epoch - 1] == max(history)
    ex = res.checkpoint.build_extractor()
    from tabtransfer.models import Head, TabularModel

    head = Head("Linear", ex.d_repr, train.n_targets, np.random.default_rng(0))
    head.load_state_dict(res.checkpoint.head_state)
    auc = mean_auc(val.Y, predict(TabularModel(ex, head), val.X_num, val.X_cat))
    assert auc == pytest.approx(res.checkpoint.best_metric, abs=1e-6)


def test_non_finite_loss_aborts_with_context():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((20, 3))
    x[3, 1] = np.nan
    ds = _dataset(x, y=(rng.random((20, 2)) > 0.5).astype(int))
    # the ReLU hides the NaN in the forward pass; the weight gradient still carries it
    with pytest.raises(FloatingPointError, match="linears.0.weight"):
        pretrain_supervised(MLPSpec(layers=[4]), ds, PretrainConfig(epochs=2), seed=0)


def test_non_finite_loss_reports_epoch_and_batch():
    from tabtransfer.tensor import AdamW
    from tabtransfer.training import optimize

    p = Tensor(np.ones(2), requires_grad=True)
    with np.errstate(invalid="ignore"), pytest.raises(NonFiniteLossError, match="epoch 3, batch 7"):
        optimize(lambda: ops.sum(ops.log(ops.mul(p, -1.0))), AdamW({"p": p}, lr=0.1), epoch=3, batch=7)


def test_same_seed_same_trajectory(synthetic):
    train, val = synthetic
    cfg = PretrainConfig("Contrastive", epochs=2)
    a = pretrain(SMALL_FT, train, cfg, seed=5)
    b = pretrain(SMALL_FT, train, cfg, seed=5)
    assert a.log.records == b.log.records
    assert all(np.array_equal(a.checkpoint.extractor_state[k], b.checkpoint.extractor_state[k])
               for k in a.checkpoint.extractor_state)


def test_checkpoint_round_trip(tmp_path, synthetic):
    train, val = synthetic
    res = pretrain(SMALL_FT, train, PretrainConfig(epochs=1), seed=0, val=val)
    path = tmp_path / "ckpt.bin"
    res.checkpoint.save(path)
    loaded = PretrainCheckpoint.load(path)
    assert loaded.spec == SMALL_FT and loaded.fingerprint == train.schema.fingerprint()
    assert loaded.strategy == "Supervised" and loaded.best_epoch == res.checkpoint.best_epoch
    x = train.X_num[:5]
    c = train.X_cat[:5]
    with no_record():
        np.testing.assert_array_equal(loaded.build_extractor().eval()(x, c).data,
                                      res.checkpoint.build_extractor().eval()(x, c).data)


# ---- masking ---------------------------------------------------------------------------


def test_single_feature_always_masked():
    index, mask = mlm_mask(50, 1, np.random.default_rng(0))
    assert np.all(index == 0) and mask.all()


def test_mask_frequency_uniform():
    index, mask = mlm_mask(10_000, 10, np.random.default_rng(1))
    assert np.all(mask.sum(axis=1) == 1)
    np.testing.assert_allclose(mask.mean(axis=0), 0.1, atol=0.01)


def test_masking_leaves_raw_inputs_unchanged():
    rng = np.random.default_rng(2)
    ex = build_extractor(SMALL_FT, InputLayout(3, (4,)), rng)
    x = rng.standard_normal((6, 3))
    c = rng.integers(0, 4, (6, 1))
    x0, c0 = x.copy(), c.copy()
    _, mask = mlm_mask(6, 4, rng)
    ex(x, c, mask=mask)
    np.testing.assert_array_equal(x, x0)
    np.testing.assert_array_equal(c, c0)


def test_one_head_per_column():
    heads = ColumnHeads(16, InputLayout(7, (3, 5)), np.random.default_rng(0))
    assert heads.n_heads == 9
    assert heads.out.weight.shape == (16, 7 + 3 + 5)


def test_untrained_masked_mse_near_one():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((2000, 8))
    ds = _dataset(x)
    ex = build_extractor(SMALL_FT, ds.schema, rng).eval()
    heads = ColumnHeads(ex.d_repr, ex.layout, rng)
    index, mask = mlm_mask(2000, 8, rng)
    with no_record():
        loss = heads.masked_loss(heads(ex(x, ds.X_cat, mask=mask)), x, ds.X_cat, index)
    assert float(loss.data) == pytest.approx(1.0, abs=0.2)


def test_mlm_learns_redundant_feature():
    rng = np.random.default_rng(4)
    base = rng.standard_normal((512, 3))
    x = np.column_stack([base, base[:, 0]])  # column 3 duplicates column 0
    ds = _dataset(x)
    res = pretrain_mlm(SMALL_FT, ds, PretrainConfig("MLM", epochs=150, batch_size=128, lr=3e-3), seed=0)
    ex, heads = res.extractor.eval(), res.heads
    mask = np.zeros((512, 4), dtype=bool)
    mask[:, 3] = True
    with no_record():
        loss = heads.masked_loss(heads(ex(x, ds.X_cat, mask=mask)), x, ds.X_cat, np.full(512, 3))
    assert float(loss.data) < 0.05


def test_mlm_mixed_column_loss_matches_manual():
    rng = np.random.default_rng(5)
    layout = InputLayout(2, (3,))
    heads = ColumnHeads(4, layout, rng)
    with precision(np.float64):
        out = Tensor(rng.standard_normal((4, 5)))
        x = rng.standard_normal((4, 2))
        c = np.array([[0], [2], [1], [1]])
        index = np.array([0, 2, 1, 2])
        got = float(heads.masked_loss(out, x, c, index).data)
    o = out.data
    sq = [(o[0, 0] - x[0, 0]) ** 2, (o[2, 1] - x[2, 1]) ** 2]
    ce = []
    for r in (1, 3):
        logits = o[r, 2:5]
        ce.append(np.log(np.exp(logits).sum()) - logits[c[r, 0]])
    assert got == pytest.approx((sum(sq) + sum(ce)) / 4, rel=1e-12)


# ---- CutMix / Mixup --------------------------------------------------------------------


def test_cutmix_extremes():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((10, 3))
    c = rng.integers(0, 5, (10, 2))
    num, cat, _, _ = cutmix(x, c, 1.0, rng)
    np.testing.assert_array_equal(num, x)
    np.testing.assert_array_equal(cat, c)
    num, cat, _, partner = cutmix(x, c, 0.0, rng)
    np.testing.assert_array_equal(num, x[partner])
    np.testing.assert_array_equal(cat, c[partner])


def test_cutmix_replaced_fraction():
    rng = np.random.default_rng(1)
    x = np.zeros((10_000, 10))
    _, _, keep, _ = cutmix(x, np.zeros((10_000, 0), dtype=int), 0.9, rng)
    assert abs((1 - keep.mean()) - 0.1) < 0.005


def test_mixup_extremes_and_fixed_point():
    rng = np.random.default_rng(2)
    e = Tensor(rng.standard_normal((5, 3, 4)))
    perm = rng.permutation(5)
    np.testing.assert_array_equal(mixup_embed(e, 1.0, perm).data, e.data)
    np.testing.assert_allclose(mixup_embed(e, 0.0, perm).data, e.data[perm])
    same = Tensor(np.broadcast_to(rng.standard_normal((1, 3, 4)), (5, 3, 4)).copy())
    np.testing.assert_allclose(mixup_embed(same, 0.37, perm).data, same.data, rtol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.integers(0, 2**16))
def test_augmentations_do_not_touch_sources(p, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((8, 3))
    c = rng.integers(0, 4, (8, 2))
    x0, c0 = x.copy(), c.copy()
    cutmix(x, c, p, rng)
    scarf_corrupt(x, c, p, column_pools(x, c), rng)
    np.testing.assert_array_equal(x, x0)
    np.testing.assert_array_equal(c, c0)


# ---- InfoNCE ---------------------------------------------------------------------------


def test_info_nce_closed_form():
    z = Tensor(np.eye(2))
    assert float(info_nce(z, z, 1.0).data) == pytest.approx(np.log1p(np.exp(-1.0)), abs=1e-6)
    assert np.log1p(np.exp(-1.0)) == pytest.approx(0.3133, abs=1e-4)


def test_info_nce_collapsed_is_log_n():
    z = Tensor(np.ones((7, 3)))
    assert float(info_nce(z, z).data) == pytest.approx(np.log(7), rel=1e-6)


def test_info_nce_scale_invariant():
    rng = np.random.default_rng(3)
    a, b = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
    l1 = float(info_nce(Tensor(a), Tensor(b)).data)
    l2 = float(info_nce(Tensor(3.5 * a), Tensor(3.5 * b)).data)
    assert l1 == pytest.approx(l2, rel=1e-5)


def test_info_nce_needs_negatives():
    with pytest.raises(ValueError):
        info_nce(Tensor(np.ones((1, 3))), Tensor(np.ones((1, 3))))


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 12), st.integers(0, 2**16))
def test_info_nce_below_log_n_when_positives_align(n, seed):
    rng = np.random.default_rng(seed)
    # orthonormal rows: positive similarity 1, all negatives 0
    q, _ = np.linalg.qr(rng.standard_normal((n + 2, n + 2)))
    z = Tensor(q[:n])
    assert float(info_nce(z, z).data) < np.log(n)


# ---- denoising ----------------------------------------------------------------------------


def test_perfect_reconstruction_gives_zero_denoising_loss():
    layout = InputLayout(3, ())
    heads = ColumnHeads(3, layout, np.random.default_rng(0))
    heads.out.weight.data = np.eye(3, dtype=heads.out.weight.dtype)
    heads.out.bias.data[...] = 0.0
    x = np.random.default_rng(1).standard_normal((10, 3)).astype(np.float32)
    ex = build_extractor(MLPSpec(layers=[]), layout, np.random.default_rng(0))
    loss = heads.reconstruction_loss(heads(ex(x, None)), x, np.zeros((10, 0), dtype=int))
    assert float(loss.data) == pytest.approx(0.0, abs=1e-10)


def test_untrained_categorical_loss_is_log_k():
    rng = np.random.default_rng(2)
    layout = InputLayout(0, (6,))
    heads = ColumnHeads(16, layout, rng)
    heads.out.weight.data *= 0.01
    heads.out.bias.data[...] = 0.0
    h = Tensor(rng.standard_normal((500, 16)))
    loss = heads.reconstruction_loss(heads(h), np.zeros((500, 0)), rng.integers(0, 6, (500, 1)))
    assert float(loss.data) == pytest.approx(np.log(6), abs=0.02)


def test_denoising_loss_halves_in_fifty_epochs(synthetic):
    train, _ = synthetic
    cfg = PretrainConfig("Contrastive", epochs=50, lr=3e-3)

    def denoise(ex, heads):
        ex.eval()
        rng = np.random.default_rng(99)
        num, cat, _, _ = cutmix(train.X_num, train.X_cat, cfg.cutmix_keep, rng)
        with no_record():
            h = ex.encode(mixup_embed(ex.embed(num, cat), cfg.mixup, rng.permutation(train.n_rows)))
            return float(heads.denoise.reconstruction_loss(heads.denoise(h), train.X_num, train.X_cat).data)

    before = pretrain_contrastive(SMALL_FT, train, PretrainConfig("Contrastive", epochs=1, lr=1e-12), seed=0)
    after = pretrain_contrastive(SMALL_FT, train, cfg, seed=0)
    assert denoise(after.extractor, after.heads) < 0.5 * denoise(before.extractor, before.heads)


def test_contrastive_loss_is_infonce_plus_denoising():
    rng = np.random.default_rng(6)
    layout = InputLayout(4, (3,))
    ex = build_extractor(SMALL_FT, layout, rng)
    from tabtransfer.pretrain.strategies import ContrastiveHeads

    heads = ContrastiveHeads(ex.d_repr, layout, 8, rng)
    x, c = rng.standard_normal((6, 4)), rng.integers(0, 3, (6, 1))
    cfg = PretrainConfig("Contrastive", cutmix_keep=1.0, mixup=1.0)
    total = float(contrastive_batch_loss(cfg)(ex.eval(), heads, x, c, np.random.default_rng(0)).data)
    h = ex(x, c)
    expect = float(info_nce(heads.projection(h), heads.projection(h)).data) + float(
        heads.denoise.reconstruction_loss(heads.denoise(h), x, c).data)
    assert total == pytest.approx(expect, rel=1e-5)


# ---- SCARF ------------------------------------------------------------------------------


def test_scarf_rate_zero_is_identity():
    rng = np.random.default_rng(0)
    x, c = rng.standard_normal((20, 3)), rng.integers(0, 4, (20, 1))
    num, cat, m = scarf_corrupt(x, c, 0.0, column_pools(x, c), rng)
    assert not m.any()
    np.testing.assert_array_equal(num, x)
    np.testing.assert_array_equal(cat, c)


def test_scarf_constant_column_unchanged():
    rng = np.random.default_rng(1)
    x = np.column_stack([np.full(50, 2.5), rng.standard_normal(50)])
    num, _, _ = scarf_corrupt(x, np.zeros((50, 0), dtype=int), 0.8, column_pools(x, np.zeros((50, 0), dtype=int)), rng)
    np.testing.assert_array_equal(num[:, 0], x[:, 0])


def test_scarf_replaced_fraction():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((10_000, 10))
    pools = column_pools(x, np.zeros((10_000, 0), dtype=int))
    _, _, m = scarf_corrupt(x, np.zeros((10_000, 0), dtype=int), 0.4, pools, rng)
    assert abs(m.mean() - 0.4) < 0.01


def test_scarf_draws_come_from_column_pool():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((30, 2))
    pools = [np.array([100.0, 200.0]), np.array([-7.0])]
    num, _, m = scarf_corrupt(x, np.zeros((30, 0), dtype=int), 0.5, pools, rng)
    assert set(np.unique(num[:, 0][m[:, 0]])) <= {100.0, 200.0}
    assert np.all(num[:, 1][m[:, 1]] == -7.0)


def test_all_strategies_run(synthetic):
    train, val = synthetic
    for strategy in ("Supervised", "MLM", "Contrastive", "SCARF"):
        res = pretrain(SMALL_FT, train, PretrainConfig(strategy, epochs=2, lr=1e-3), seed=1, val=val)
        assert res.checkpoint.strategy == strategy
        assert len(res.log.records) == 2
        assert np.all(np.isfinite(res.log.column("train_loss")))
