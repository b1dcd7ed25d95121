"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line verdict (printed in the terminal summary) and
then asserts it. Long runs write their curves and tables under
``acceptance_report/`` (override with ``DEEPFM_ACCEPTANCE_DIR``).
"""

import hashlib
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pytest

from deepfm import plotting
from deepfm.featurespace import async_reader, batches, throttle
from deepfm.metrics import SweepAxis, SweepProtocol, auc, dataset_logloss, shape_layouts, sweep
from deepfm.models import KINDS, ModelSpec, forward_fm, init_model
from deepfm.reporting import make_header, write_report
from deepfm.simulate import coverage_at, generate_synthetic, personalization_at, planted_spec, popularity_at
from deepfm.training import Adam, TrainConfig, fit, parallel_gradients, train_epoch

from helpers import (
    auc_pairs,
    fm_double_loop,
    gradient_errors,
    perturbed_model,
    personalization_pairs,
    random_batch,
    record,
    toy_data,
)

REPORT_DIR = Path(os.environ.get("DEEPFM_ACCEPTANCE_DIR", Path(__file__).parents[1] / "acceptance_report"))

SEEDS = (0, 1, 2, 3, 4)
TABLE_KINDS = ("lr", "fm", "dnn", "deepfm_d", "fm_dnn")


def report(stem, rows, config, **extra):
    REPORT_DIR.mkdir(parents=True, exist_ok=True)
    write_report(REPORT_DIR / stem, rows, make_header(config, config.get("seed")), **extra)


# --- 1: gradient suite ----------------------------------------------------------------

def test_criterion_01_gradient_suite():
    t0 = time.perf_counter()
    worst = {}
    cases = [(kind, {}) for kind in KINDS]
    cases += [(kind, {"use_layer_norm": True, "outer_exact": True}) for kind in ("dnn", "opnn", "deepfm_star")]
    for kind, kw in cases:
        model, store = perturbed_model(kind, 4, 20, **kw)
        errs = gradient_errors(model, store, random_batch(m=4, per_field=5, n=8), step=1e-5)
        name = kind + ("+ln+exact" if kw else "")
        worst[name] = max(errs.values())
    secs = time.perf_counter() - t0
    top = max(worst, key=worst.get)
    ok = max(worst.values()) < 1e-4 and secs < 120
    record(1, ok, f"{len(cases)} model variants, worst rel err {worst[top]:.2e} ({top}), {secs:.1f}s")
    assert ok, worst


# --- 2: FM oracle -----------------------------------------------------------------------

def test_criterion_02_fm_oracle():
    from deepfm.featurespace import Batch
    from deepfm.models import ParameterStore

    rng = np.random.default_rng(2024)
    worst = 0.0
    t0 = time.perf_counter()
    for _ in range(1000):
        m, k = int(rng.integers(2, 10)), int(rng.integers(1, 9))
        d = int(rng.integers(m, 60))
        store = ParameterStore({"w0": rng.normal(size=1), "w": rng.normal(size=d), "V": rng.normal(size=(d, k))})
        ids = rng.choice(d, m, replace=False)
        vals = rng.normal(size=m)
        fast = forward_fm(store, Batch([ids], [vals], [0]))[0]
        slow = fm_double_loop(store["w0"][0], store["w"], store["V"], ids, vals)
        worst = max(worst, abs(fast - slow) / max(abs(slow), 1e-12))
    ok = worst < 1e-10
    record(2, ok, f"1000 cases, worst rel err {worst:.2e}, {time.perf_counter() - t0:.1f}s")
    assert ok


# --- 3: AUC oracle and Logloss closed forms ------------------------------------------------

def test_criterion_03_auc_oracle():
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(500):
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        # every third set uses a coarse grid so ties are common
        scores = np.round(rng.random(n), 1) if i % 3 == 0 else rng.normal(size=n)
        worst = max(worst, abs(auc(scores, labels) - auc_pairs(scores, labels)))
    ln2 = abs(dataset_logloss([1, 0, 1, 0], [0.5] * 4) - math.log(2))
    perfect = dataset_logloss([1, 0], [1.0, 0.0])
    two = abs(dataset_logloss([1, 0], [0.8, 0.8]) - (-math.log(0.8) - math.log(0.2)) / 2)
    ok = worst <= 1e-12 and ln2 <= 1e-12 and perfect < 1e-11 and two < 1e-12
    record(3, ok, f"500 sets, worst AUC diff {worst:.1e}; ln2 case off by {ln2:.1e}, two-point case {two:.1e}")
    assert ok


# --- 4 and 5: model ordering on planted data ---------------------------------------------------

def table_spec(kind):
    wide = kind in ("lr", "fm")
    return ModelSpec(kind, k=8, hidden=() if wide else (64, 64), activation="relu",
                     keep_prob=1.0 if wide else 0.8, init_std=0.1)


def table_config(kind, seed):
    if kind == "lr":
        return TrainConfig(bs=512, epochs=10, seed=seed, optimizer="ftrl", ftrl_alpha=0.1, ftrl_l1=0.0, ftrl_l2=0.0)
    return TrainConfig(bs=512, lr=2e-3, epochs=10, seed=seed, optimizer="adam")


@pytest.fixture(scope="module")
def table_runs():
    """Final test AUC per (kind, seed); also writes the per-epoch table."""
    t0 = time.perf_counter()
    results, rows = {}, []
    for seed in SEEDS:
        data = generate_synthetic(planted_spec(seed=seed))
        for kind in TABLE_KINDS:
            r = fit(table_spec(kind), data.train, table_config(kind, seed), 200, test=data.test)
            results[kind, seed] = r.history[-1]["test_auc"]
            for h in r.history:
                rows.append({"seed": seed, "kind": kind, "bayes_auc": data.bayes_auc, **h})
    secs = time.perf_counter() - t0
    report("model_table", rows, {"protocol": "planted m=10 c=20 100k/20k, 10 epochs", "seed": list(SEEDS)},
           seconds=secs)
    means = {kind: float(np.mean([results[kind, s] for s in SEEDS])) for kind in TABLE_KINDS}
    curves = {}
    for kind in TABLE_KINDS:
        per_epoch = [[row["test_auc"] for row in rows if row["kind"] == kind and row["seed"] == s] for s in SEEDS]
        mean = np.mean(per_epoch, axis=0)
        curves[kind] = (list(range(len(mean))), list(mean))
    plotting.loss_curves(curves, REPORT_DIR / "model_table_auc.png", ylabel="mean test AUC")
    return results, means, secs


def test_criterion_04_deepfm_beats_components(table_runs):
    results, means, secs = table_runs
    d = means["deepfm_d"]
    gaps = {k: d - means[k] for k in ("fm", "dnn", "lr")}
    ok = gaps["fm"] >= 0.005 and gaps["dnn"] >= 0.005 and gaps["lr"] >= 0.02 and secs < 1800
    summary = " ".join(f"{k}={v:.4f}" for k, v in means.items())
    record(4, ok, f"mean AUC {summary}; DeepFM-D minus FM {gaps['fm']:+.4f}, minus DNN {gaps['dnn']:+.4f}, "
                  f"minus LR {gaps['lr']:+.4f}; {secs / 60:.1f} min")
    assert ok


def test_criterion_05_shared_embedding(table_runs):
    results, means, _ = table_runs
    gap = means["deepfm_d"] - means["fm_dnn"]
    per_seed = [results["deepfm_d", s] - results["fm_dnn", s] for s in SEEDS]
    sd = float(np.std(per_seed, ddof=1))
    ok = gap >= 0
    record(5, ok, f"DeepFM-D {means['deepfm_d']:.4f} vs FM&DNN {means['fm_dnn']:.4f}, gap {gap:+.4f} "
                  f"(per-seed gaps {', '.join(f'{g:+.4f}' for g in per_seed)}; sd {sd:.4f})")
    assert ok, f"shared-embedding gap {gap:+.4f} is negative (within seed noise, sd {sd:.4f})"


# --- 6: data parallelism ------------------------------------------------------------------------

def test_criterion_06_data_parallelism():
    data = generate_synthetic(planted_spec(seed=0))
    batch = data.train.take(slice(0, 64)).as_batch()
    worst = 0.0
    with ThreadPoolExecutor(4) as pool:
        for kind in ("lr", "fm", "dnn", "ipnn", "deepfm_d", "fm_dnn"):
            spec = ModelSpec(kind, k=4, hidden=() if kind in ("lr", "fm") else (16, 16), init_std=0.1)
            model, store = init_model(spec, 10, 200, seed=1)
            _, g1 = parallel_gradients(model, store, batch, 1)
            _, g4 = parallel_gradients(model, store, batch, 4, pool=pool)
            for name in g1.names():
                scale = max(np.linalg.norm(g1[name]), 1e-300)
                worst = max(worst, float(np.linalg.norm(g1[name] - g4[name]) / scale))

    spec = ModelSpec("deepfm_d", k=8, hidden=(64, 64), init_std=0.1)
    curves, losses = {}, {}
    for P, bs in ((1, 128), (4, 512)):
        cfg = TrainConfig(bs=bs, lr=1e-3, epochs=10, seed=0, workers=P, lr_scale_on_parallel=True)
        r = fit(spec, data.train, cfg, 200, test=data.test)
        losses[P] = [h["test_logloss"] for h in r.history[1:]]
        curves[f"P={P} bs={bs} lr={cfg.effective_lr():g}"] = (list(range(1, 11)), losses[P])
    rel = [abs(a - b) / b for a, b in zip(losses[4], losses[1])]
    report("parallel_curves", [{"epoch": e + 1, "logloss_p1": a, "logloss_p4": b, "rel_diff": c}
                               for e, (a, b, c) in enumerate(zip(losses[1], losses[4], rel))],
           {"P": [1, 4], "per_worker_bs": 128, "base_lr": 1e-3, "seed": 0})
    plotting.loss_curves(curves, REPORT_DIR / "parallel_curves.png", xlabel="epoch (equal data consumed)")
    ok = worst < 1e-9 and max(rel) <= 0.05
    record(6, ok, f"P=4 vs P=1 gradient rel err {worst:.1e}; loss curves max rel gap {max(rel):.2%} "
                  f"over 10 epochs")
    assert ok


# --- 7: asynchronous reader ---------------------------------------------------------------------

def stream_digest(stream):
    h = hashlib.sha256()
    for b in stream:
        for arr in (b.ids, b.values, b.labels):
            h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def test_criterion_07_async_reader():
    data = generate_synthetic(planted_spec(n_train=20_000, n_test=10, seed=7)).train
    same = stream_digest(batches(data, 256, shuffle=True, seed=5)) == stream_digest(
        async_reader(batches(data, 256, shuffle=True, seed=5), 4))

    spec = ModelSpec("deepfm_d", k=8, hidden=(64, 64))
    cfg = TrainConfig(bs=256, seed=0)

    def run(source_fn):
        model, store = init_model(spec, data.m, 200, seed=0)
        t0 = time.perf_counter()
        train_epoch(model, store, Adam(), source_fn(), cfg)
        return time.perf_counter() - t0, store

    n_batches = math.ceil(len(data) / cfg.bs)
    compute, _ = run(lambda: batches(data, cfg.bs, shuffle=True, seed=1))
    delay = compute / n_batches  # reading as slow as training
    t_sync, s_sync = run(lambda: throttle(batches(data, cfg.bs, shuffle=True, seed=1), delay))
    t_async, s_async = run(lambda: async_reader(throttle(batches(data, cfg.bs, shuffle=True, seed=1), delay), 4))
    speedup = t_sync / t_async
    ok = same and s_sync.equal(s_async) and speedup >= 1.05
    record(7, ok, f"stream checksum {'equal' if same else 'DIFFERENT'}; speed-up {speedup:.2f}x "
                  f"(sync {t_sync:.2f}s, async {t_async:.2f}s, read delay {delay * 1e3:.1f} ms/batch)")
    assert ok


# --- 8: list metrics ----------------------------------------------------------------------------

def test_criterion_08_list_metrics():
    rng = np.random.default_rng(8)
    t, n, L = 3, 10, 5
    groups = [list(range(i * n, (i + 1) * n)) for i in range(t)]
    downloads = rng.integers(0, 1000, 25).astype(float)
    d_max = float(downloads.max())
    worst = 0.0
    exact = True
    for _ in range(20):
        lists = [rng.permutation(25)[:8].tolist() for _ in range(t * n)]
        worst = max(worst, abs(personalization_at(lists, groups, L) - personalization_pairs(lists, groups, L)))
        union = set()
        for r in lists:
            union |= set(r[:L])
        exact &= coverage_at(lists, 25, L) == len(union) / 25
        slots = [downloads[a] / d_max for r in lists for a in r[:L]]
        worst = max(worst, abs(popularity_at(lists, L, downloads, d_max)[0] - sum(slots) / len(slots)))
    same = [[0, 1, 2, 3, 4, 5]] * (t * n)
    disjoint = [[5 * g + j for j in range(5)] for g in range(t) for _ in range(n)]
    bounds = (personalization_at(same, groups, L) == 0.0 and personalization_at(disjoint, groups, L) == 1.0
              and coverage_at(disjoint, 15, L) == 1.0
              and popularity_at(same, L, np.full(6, 9.0), 9.0) == (1.0, 0.0)
              and popularity_at(same, L, np.zeros(6), 9.0)[0] == 0.0)
    ok = worst <= 1e-12 and exact and bounds
    record(8, ok, f"20 random t=3 n=10 L=5 fixtures: worst oracle diff {worst:.1e}, coverage exact {exact}; "
                  f"boundaries {'exact' if bounds else 'WRONG'}")
    assert ok


# --- 9: layer normalization ---------------------------------------------------------------------

def test_criterion_09_layer_norm():
    data = generate_synthetic(planted_spec(seed=0))
    epochs = 10
    hist = {}
    for ln in (False, True):
        spec = ModelSpec("deepfm_d", k=8, hidden=(64, 64, 64), activation="tanh", init_std=0.1, use_layer_norm=ln)
        r = fit(spec, data.train, TrainConfig(bs=512, lr=2e-3, epochs=epochs, seed=0), 200,
                test=data.test, eval_train=True)
        hist[ln] = r.history[1:]
    target = hist[False][-1]["train_logloss"] * 1.01
    reached = next((h["epoch"] for h in hist[True] if h["train_logloss"] <= target), None)
    test_target = hist[False][-1]["test_logloss"] * 1.01
    test_reached = next((h["epoch"] for h in hist[True] if h["test_logloss"] <= test_target), None)
    rows = [{"epoch": a["epoch"], "train_logloss_off": a["train_logloss"], "train_logloss_on": b["train_logloss"],
             "test_logloss_off": a["test_logloss"], "test_logloss_on": b["test_logloss"]}
            for a, b in zip(hist[False], hist[True])]
    report("layer_norm_curves", rows, {"kind": "deepfm_d", "hidden": [64, 64, 64], "activation": "tanh", "seed": 0})
    xs = list(range(1, epochs + 1))
    plotting.loss_curves({
        "LN off, train": (xs, [r["train_logloss_off"] for r in rows]),
        "LN on, train": (xs, [r["train_logloss_on"] for r in rows]),
        "LN off, test": (xs, [r["test_logloss_off"] for r in rows]),
        "LN on, test": (xs, [r["test_logloss_on"] for r in rows]),
    }, REPORT_DIR / "layer_norm_curves.png", ylabel="logloss")
    ok = reached is not None and reached <= 0.7 * epochs
    record(9, ok, f"LN-on within 1% of LN-off final train logloss ({hist[False][-1]['train_logloss']:.4f}) "
                  f"at epoch {reached} of {epochs}; test logloss reached at epoch {test_reached}")
    assert ok


# --- 10: sweep harness --------------------------------------------------------------------------

def test_criterion_10_sweep_harness():
    layouts = shape_layouts(600, 3)
    expected = {"constant": [200, 200, 200], "increasing": [100, 200, 300],
                "decreasing": [300, 200, 100], "diamond": [150, 300, 150]}
    train, test = toy_data(n=400).split(0.75)
    rows = sweep(ModelSpec("deepfm_d", k=2, hidden=(4, 4)), SweepAxis("dropout"),
                 SweepProtocol(train, test, TrainConfig(bs=50, epochs=1), 12))
    values = [r["axis_value"] for r in rows]
    ok = layouts == expected and values == [1.0, 0.9, 0.8, 0.7, 0.6, 0.5]
    record(10, ok, f"3x600 layouts {[layouts[s] for s in expected]}; dropout rows {values}")
    assert ok
