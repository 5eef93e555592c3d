import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtri

from tabtransfer.data import (
    CATEGORICAL,
    MISSING_CODE,
    NUMERICAL,
    Column,
    CsvFormatError,
    Dataset,
    ImputeStats,
    Preprocessor,
    QuantileTransform,
    Schema,
    SchemaError,
    SplitPlan,
    SyntheticSpec,
    generate,
    generate_files,
    impute,
    infer_schema,
    load_csv,
    make_splits,
    make_task_split,
    norm_ppf,
    sample_downstream,
    write_csv,
)


@pytest.fixture
def small_schema():
    return Schema(
        (Column("age", NUMERICAL), Column("sex", CATEGORICAL, ("F", "M")), Column("bmi", NUMERICAL)),
        ("y0", "y1"),
    )


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_load_csv_empty_numeric_cell_is_nan(tmp_path, small_schema):
    small_schema.save(tmp_path / "s.json")
    csv = _write(tmp_path / "d.csv", "age,sex,bmi,y0,y1\n30,F,21.5,0,1\n,M,22,1,1\n40,NA,x,0,0\n")
    ds = load_csv(csv, tmp_path / "s.json")
    assert ds.n_rows == 3
    assert np.isnan(ds.X_num[1, 0])
    assert np.isnan(ds.X_num[2, 1])  # unparseable numeric -> missing
    assert ds.X_cat[:, 0].tolist() == [0, 1, MISSING_CODE]
    assert ds.Y.tolist() == [[0, 1], [1, 1], [0, 0]]


def test_load_csv_header_only(tmp_path, small_schema):
    csv = _write(tmp_path / "d.csv", "age,sex,bmi,y0,y1\n")
    ds = load_csv(csv, schema=small_schema)
    assert ds.n_rows == 0 and ds.X_num.shape == (0, 2)


def test_load_csv_column_order_free(tmp_path, small_schema):
    csv = _write(tmp_path / "d.csv", "y1,bmi,sex,age,y0\n1,20,M,33,0\n")
    ds = load_csv(csv, schema=small_schema)
    assert ds.X_num.tolist() == [[33.0, 20.0]]


def test_load_csv_unknown_category_errors(tmp_path, small_schema):
    csv = _write(tmp_path / "d.csv", "age,sex,bmi,y0,y1\n1,F,2,0,0\n1,X,2,0,0\n")
    with pytest.raises(SchemaError, match=r"3.*'X'.*sex"):
        load_csv(csv, schema=small_schema)


def test_load_csv_ragged_row_errors(tmp_path, small_schema):
    csv = _write(tmp_path / "d.csv", "age,sex,bmi,y0,y1\n1,F,2,0\n")
    with pytest.raises(CsvFormatError, match="expected 5 fields"):
        load_csv(csv, schema=small_schema)


def test_yeast_style_file(tmp_path):
    rng = np.random.default_rng(0)
    header = [f"Att{i}" for i in range(1, 104)] + [f"Class{i}" for i in range(1, 15)]
    lines = [",".join(header)]
    for _ in range(25):
        lines.append(",".join([f"{v:.6f}" for v in rng.standard_normal(103)] + [str(v) for v in rng.integers(0, 2, 14)]))
    csv = _write(tmp_path / "yeast.csv", "\n".join(lines) + "\n")
    schema = infer_schema(csv, targets=[f"Class{i}" for i in range(1, 15)])
    assert len(schema.numerical) == 103 and not schema.categorical
    ds = load_csv(csv, schema=schema)
    assert ds.X_num.shape == (25, 103) and ds.Y.shape == (25, 14)
    up, down = make_task_split(ds, 5)
    assert up.n_targets == 13 and down.schema.target_names == ("Class6",)


def test_csv_round_trip(tmp_path, small_schema):
    ds = Dataset(small_schema, np.array([[1.5, np.nan], [2.0, 3.25]]), np.array([[1], [MISSING_CODE]]), np.array([[0, 1], [1, 0]]))
    write_csv(ds, tmp_path / "x.csv")
    back = load_csv(tmp_path / "x.csv", schema=small_schema)
    np.testing.assert_array_equal(back.X_num, ds.X_num)
    np.testing.assert_array_equal(back.X_cat, ds.X_cat)
    np.testing.assert_array_equal(back.Y, ds.Y)


def test_schema_fingerprint_ignores_targets(small_schema):
    assert small_schema.fingerprint() == small_schema.with_targets(["z"]).fingerprint()
    assert small_schema.fingerprint() != small_schema.without(["bmi"]).fingerprint()


def test_schema_rejects_duplicate_names():
    with pytest.raises(SchemaError):
        Schema((Column("a", NUMERICAL), Column("a", NUMERICAL)), ("y",))


# --- inverse normal CDF ------------------------------------------------------------

def test_norm_ppf_accuracy():
    p = np.concatenate([np.linspace(1e-7, 1 - 1e-7, 20001), [1e-7, 0.02425, 0.5, 0.97575]])
    exact = ndtri(p)
    rel = np.abs(norm_ppf(p) - exact) / np.maximum(np.abs(exact), 1.0)
    assert np.max(rel) < 1.2e-9
    assert norm_ppf(0.5) == 0.0


# --- quantile transform ------------------------------------------------------------

def test_quantile_constant_column_maps_to_zero():
    qt = QuantileTransform.fit(np.full((50, 1), 4.2))
    np.testing.assert_allclose(qt.transform(np.array([[4.2], [4.2]])), 0.0, atol=1e-12)


def test_quantile_median_maps_to_zero():
    x = np.random.default_rng(1).standard_normal((501, 1)) * 3 + 1
    qt = QuantileTransform.fit(x)
    median = np.sort(x[:, 0])[250]
    # empirical CDF at the sample median of 501 distinct values is exactly 1/2
    assert abs(qt.transform(np.array([[median]]))[0, 0]) < 1e-9


def test_quantile_uniform_column_becomes_standard_normal():
    x = np.sort(np.random.default_rng(2).uniform(size=1000))[:, None]
    out = QuantileTransform.fit(x).transform(x)[:, 0]
    assert abs(out.mean()) < 0.1
    assert 0.85 <= out.std() <= 1.15


def test_quantile_missing_values_ignored_and_preserved():
    x = np.array([[1.0], [np.nan], [3.0], [2.0]])
    qt = QuantileTransform.fit(x)
    out = qt.transform(x)
    assert np.isnan(out[1, 0]) and np.all(np.isfinite(out[[0, 2, 3], 0]))


def test_quantile_entirely_missing_column_errors():
    with pytest.raises(ValueError, match="entirely missing"):
        QuantileTransform.fit(np.array([[1.0, np.nan], [2.0, np.nan]]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 300))
def test_quantile_monotone(seed, n):
    rng = np.random.default_rng(seed)
    fit = rng.standard_normal((n, 2)) ** 3
    qt = QuantileTransform.fit(fit)
    probe = np.sort(rng.standard_normal((200, 2)) * 3, axis=0)
    out = qt.transform(probe)
    assert np.all(np.diff(out, axis=0) >= 0)


def test_quantile_apply_is_pure_function_of_fit(tmp_path):
    rng = np.random.default_rng(3)
    qt = QuantileTransform.fit(rng.standard_normal((300, 3)))
    down = rng.standard_normal((20, 3)) * 5
    first = qt.transform(down)
    qt.transform(rng.standard_normal((999, 3)))  # unrelated data must not leak in
    np.testing.assert_array_equal(qt.transform(down), first)
    qt.save(tmp_path / "q.json")
    np.testing.assert_array_equal(QuantileTransform.load(tmp_path / "q.json").transform(down), first)


# --- imputation --------------------------------------------------------------------

def _ds(X_num, X_cat, schema):
    return Dataset(schema, np.asarray(X_num, float), np.asarray(X_cat, np.int64), np.zeros((len(X_num), len(schema.target_names)), np.int64))


def test_impute_mean_and_new_category():
    schema = Schema((Column("a", NUMERICAL), Column("c", CATEGORICAL, ("u", "v"))), ("y",))
    up = _ds([[1.0], [3.0]], [[0], [1]], schema)
    stats = ImputeStats.fit(up)
    ds = _ds([[1.0], [np.nan], [3.0]], [[0], [MISSING_CODE], [1]], schema)
    out = impute(ds, stats)
    assert out.X_num[:, 0].tolist() == [1.0, 2.0, 3.0]
    assert out.X_cat[:, 0].tolist() == [0, 2, 1]


def test_impute_identity_without_missing_and_idempotent():
    schema = Schema((Column("a", NUMERICAL), Column("c", CATEGORICAL, ("u", "v"))), ("y",))
    ds = _ds([[1.0], [5.0]], [[1], [0]], schema)
    stats = ImputeStats.fit(ds)
    once = impute(ds, stats)
    np.testing.assert_array_equal(once.X_num, ds.X_num)
    np.testing.assert_array_equal(once.X_cat, ds.X_cat)
    messy = _ds([[np.nan], [5.0]], [[MISSING_CODE], [0]], schema)
    a = impute(messy, stats)
    b = impute(a, stats)
    np.testing.assert_array_equal(a.X_num, b.X_num)
    np.testing.assert_array_equal(a.X_cat, b.X_cat)


def test_preprocessor_leaves_no_missing():
    data = generate(SyntheticSpec(rows=400, missing_rate=0.05, seed=4)).dataset
    pre = Preprocessor.fit(data.subset(np.arange(300)))
    out = pre.neural(data.subset(np.arange(300, 400)))
    assert not out.has_missing()
    assert not pre.raw(data).has_missing()


# --- splits ------------------------------------------------------------------------

def test_make_splits_exact_fractions():
    plan = make_splits(100, (0.65, 0.15, 0.20), seed=0)
    assert (plan.train.size, plan.val.size, plan.test.size) == (65, 15, 20)


def test_make_splits_default_sizes():
    plan = make_splits(34925, seed=0)
    assert (plan.train.size, plan.val.size, plan.test.size) == (22701, 5239, 6985)


def test_make_splits_deterministic_and_serializable(tmp_path):
    a, b = make_splits(50, seed=3), make_splits(50, seed=3)
    assert a.to_dict() == b.to_dict()
    a.save(tmp_path / "p.json")
    assert SplitPlan.load(tmp_path / "p.json").to_dict() == a.to_dict()


def test_make_splits_all_train():
    plan = make_splits(10, (1.0, 0.0, 0.0), seed=1)
    assert plan.train.size == 10 and plan.val.size == 0 and plan.test.size == 0


def test_make_splits_too_small():
    with pytest.raises(ValueError, match="too small"):
        make_splits(2, seed=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(3, 500), st.integers(0, 100))
def test_splits_disjoint_and_cover(n, seed):
    try:
        plan = make_splits(n, seed=seed)
    except ValueError:
        return
    allrows = np.concatenate([plan.train, plan.val, plan.test])
    assert sorted(allrows.tolist()) == list(range(n))


def test_task_split_counts():
    Y = np.zeros((5, 12), np.int64)
    schema = Schema((Column("a", NUMERICAL),), tuple(f"t{i}" for i in range(12)))
    ds = Dataset(schema, np.zeros((5, 1)), np.zeros((5, 0), np.int64), Y)
    up, down = make_task_split(ds, 0)
    assert up.n_targets == 11 and down.n_targets == 1
    assert "t0" not in up.schema.target_names
    assert up.X_num is ds.X_num


def test_task_split_two_targets():
    schema = Schema((Column("a", NUMERICAL),), ("t0", "t1"))
    ds = Dataset(schema, np.zeros((3, 1)), np.zeros((3, 0), np.int64), np.zeros((3, 2), np.int64))
    up, down = make_task_split(ds, 1)
    assert up.schema.target_names == ("t0",) and down.schema.target_names == ("t1",)


def test_sample_downstream_nested_and_full():
    rows = np.arange(500, 800)
    assert sorted(sample_downstream(rows, 300, 1).tolist()) == rows.tolist()
    prev = set()
    for n in (4, 10, 20, 100, 200):
        cur = set(sample_downstream(rows, n, seed=7).tolist())
        assert prev <= cur and len(cur) == n
        prev = cur
    with pytest.raises(ValueError):
        sample_downstream(rows, 301, 0)


# --- synthetic generator -----------------------------------------------------------

def test_synthetic_defaults():
    data = generate(SyntheticSpec())
    ds = data.dataset
    assert ds.n_rows == 5000 and len(ds.schema.numerical) == 30 and len(ds.schema.categorical) == 1
    assert ds.n_targets == 12


def test_synthetic_identical_targets_fully_correlated():
    spec = SyntheticSpec(rows=2000, latent_dim=1, n_targets=2, score_noise=0.0, label_noise=0.0, prevalence=[0.4], seed=3)
    Y = generate(spec).dataset.Y
    assert np.corrcoef(Y[:, 0], Y[:, 1])[0, 1] == pytest.approx(1.0)


def test_synthetic_labels_recomputable_from_latents(tmp_path):
    spec = SyntheticSpec(rows=300, score_noise=0.0, label_noise=0.0, missing_rate=0.0, seed=5)
    manifest = generate_files(spec, tmp_path)
    z = np.loadtxt(tmp_path / "latents.csv", delimiter=",", skiprows=1)
    W = np.array(manifest["target_weights"])
    t = np.array(manifest["thresholds"])
    ds = load_csv(tmp_path / "data.csv", tmp_path / "schema.json")
    np.testing.assert_array_equal(ds.Y, (z @ W.T > t).astype(int))


def test_synthetic_files_byte_identical(tmp_path):
    spec = SyntheticSpec(rows=120, seed=9, pseudo_feature=True)
    generate_files(spec, tmp_path / "a")
    generate_files(spec, tmp_path / "b")
    for name in ("data.csv", "schema.json", "latents.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["pseudo"]["sources"] == ["num_0", "num_1"]


def test_synthetic_pseudo_feature_construction():
    ds = generate(SyntheticSpec(rows=3000, pseudo_feature=True, seed=1)).dataset
    x0, x1, ps = ds.numerical_column("num_0"), ds.numerical_column("num_1"), ds.numerical_column("pseudo")
    assert np.corrcoef(x0 * x1, ps)[0, 1] > 0.9
