"""Command-line entry point: index, train, eval, sweep, simulate, bench.

Every command reads an optional JSON config; flags override config keys.
Reports go to files (CSV + JSON with a provenance header, PNG figures),
and a short human summary goes to stdout.
"""

from __future__ import annotations

import argparse
import inspect
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import plotting
from .errors import DeepFMError, NumericalError
from .featurespace import (
    CATEGORICAL,
    NUMERICAL,
    Dataset,
    FeatureSchema,
    async_reader,
    batches,
    build_schema,
    encode,
    index_offline,
    read_indexed,
    read_raw,
    throttle,
    write_indexed,
)
from .metrics import DEFAULT_VALUES, SWEEP_AXES, SweepAxis, SweepProtocol, speedup_rate, sweep
from .models import ModelSpec, init_model, load_checkpoint, save_checkpoint
from .reporting import JsonLinesLog, make_header, write_report
from .simulate import (
    AppCatalog,
    ClickModel,
    UserGroupSet,
    ab_report,
    generate_synthetic,
    generate_users,
    make_catalog,
    model_scorer,
    planted_spec,
    recommend,
    serve_lists,
    simulate_click_log,
    synthetic_schema,
    user_item_kinds,
)
from .training import TrainConfig, evaluate, fit, make_optimizer, train_epoch

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

SECTIONS = ("data", "model", "train", "sweep", "simulate", "bench", "output")
DATA_KEYS = {"schema", "train", "test", "test_fraction", "synthetic"}
SWEEP_KEYS = {"axis", "values"}
SIM_KEYS = {
    "types", "users_per_type", "apps_per_type", "history_len", "impressions",
    "affinity", "popularity", "bias", "seed", "Ls", "epochs", "k", "hidden", "synthetic",
}
BENCH_KEYS = {"kinds", "epochs", "throttle_ms", "workers", "hidden", "k"}
OUTPUT_KEYS = {"dir"}

SIM_DEFAULTS = {
    "types": 6, "users_per_type": 100, "apps_per_type": 20, "history_len": 3, "impressions": 30,
    "affinity": 3.0, "popularity": 0.5, "bias": -1.0, "seed": 0, "Ls": [5, 10, 20],
    "epochs": 5, "k": 8, "hidden": [64, 64],
}
BENCH_DEFAULTS = {
    "kinds": ["lr", "fm", "dnn", "fnn", "ipnn", "opnn", "pnn_star", "lr_dnn", "fm_dnn", "deepfm_d"],
    "epochs": 1, "throttle_ms": 5.0, "workers": [1, 4], "hidden": [64, 64], "k": 8,
}
SMALL_SYNTHETIC = {"n_train": 20000, "n_test": 5000}


class CLIError(DeepFMError):
    pass


def _check_keys(section: str, d: dict, allowed) -> dict:
    if not isinstance(d, dict):
        raise CLIError(f"config section {section!r} must be an object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise CLIError(f"unknown keys in {section!r}: {sorted(unknown)}")
    return d


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise CLIError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise CLIError(f"config {path} is not valid JSON: {exc}") from exc
    _check_keys("<root>", cfg, SECTIONS)
    for key, allowed in (("data", DATA_KEYS), ("sweep", SWEEP_KEYS), ("simulate", SIM_KEYS),
                         ("bench", BENCH_KEYS), ("output", OUTPUT_KEYS)):
        _check_keys(key, cfg.get(key, {}), allowed)
    return cfg


def _set(cfg: dict, section: str, key: str, value) -> None:
    if value is not None:
        cfg.setdefault(section, {})[key] = value


def apply_overrides(cfg: dict, args) -> dict:
    """Copy of ``cfg`` with command-line flags written over config keys."""
    cfg = json.loads(json.dumps(cfg))
    for flag, section, key in (
        ("schema", "data", "schema"), ("data", "data", "train"), ("test", "data", "test"),
        ("test_fraction", "data", "test_fraction"),
        ("model_kind", "model", "kind"), ("k", "model", "k"), ("hidden", "model", "hidden"),
        ("keep_prob", "model", "keep_prob"), ("layer_norm", "model", "use_layer_norm"),
        ("epochs", "train", "epochs"), ("lr", "train", "lr"), ("bs", "train", "bs"),
        ("workers", "train", "workers"), ("lr_scale", "train", "lr_scale_on_parallel"),
        ("seed", "train", "seed"), ("optimizer", "train", "optimizer"),
        ("async_reading", "train", "async_reading"), ("l2_fm", "train", "l2_fm"),
        ("axis", "sweep", "axis"), ("out", "output", "dir"),
    ):
        _set(cfg, section, key, getattr(args, flag, None))
    if getattr(args, "synthetic", False):
        cfg.setdefault("data", {}).setdefault("synthetic", {})
    values = getattr(args, "values", None)
    if values is not None:
        _set(cfg, "sweep", "values", values.split(","))
    return cfg


def _model_spec(cfg: dict) -> ModelSpec:
    model = dict(cfg.get("model", {}))
    if "kind" not in model:
        raise CLIError("no model kind given (use --model-kind or config model.kind)")
    if "hidden" in model and isinstance(model["hidden"], str):
        model["hidden"] = [int(h) for h in model["hidden"].split(",") if h]
    return ModelSpec.from_dict(model)


def _train_config(cfg: dict) -> TrainConfig:
    return TrainConfig.from_dict(cfg.get("train", {}))


def _out_dir(cfg: dict) -> Path:
    out = cfg.get("output", {}).get("dir")
    if not out:
        raise CLIError("no output directory given (use --out or config output.dir)")
    return Path(out)


def _planted(kwargs: dict, seed: int):
    allowed = set(inspect.signature(planted_spec).parameters)
    unknown = set(kwargs) - allowed
    if unknown:
        raise CLIError(f"unknown synthetic generator keys: {sorted(unknown)}")
    return planted_spec(**{"seed": seed, **kwargs})


def load_data(cfg: dict, seed: int = 0, default_synthetic: dict | None = None):
    """``(train, test, schema)`` from indexed files or a synthetic generator."""
    data = cfg.get("data", {})
    if "synthetic" in data or (default_synthetic is not None and "train" not in data):
        kwargs = data.get("synthetic", default_synthetic) or {}
        spec = _planted(kwargs, seed)
        syn = generate_synthetic(spec)
        return syn.train, syn.test, synthetic_schema(spec)
    for key in ("schema", "train"):
        if not data.get(key):
            raise CLIError(f"missing data.{key} (flag --{'data' if key == 'train' else key})")
    schema = FeatureSchema.load(data["schema"])
    train = read_indexed(data["train"], schema)
    test = None
    if data.get("test"):
        test = read_indexed(data["test"], schema)
    elif data.get("test_fraction"):
        frac = float(data["test_fraction"])
        if not 0 < frac < 1:
            raise CLIError("test_fraction must lie in (0, 1)")
        train, test = train.split(1.0 - frac)
    return train, test, schema


def _header(cfg, seed, schema: FeatureSchema | None):
    # where results land is not part of the experiment
    hashed = {k: v for k, v in cfg.items() if k != "output"}
    return make_header(hashed, seed, schema.digest() if schema is not None else None)


# ---------------------------------------------------------------------------
# index


def infer_kinds(path, delimiter: str) -> list[str]:
    """A field is numerical when every token parses as a float."""
    numeric = None
    for _, _, tokens in read_raw(path, delimiter):
        flags = []
        for tok in tokens:
            try:
                float(tok)
                flags.append(True)
            except ValueError:
                flags.append(False)
        numeric = flags if numeric is None else [a and b for a, b in zip(numeric, flags)]
    if numeric is None:
        raise CLIError(f"{path} holds no records")
    return [NUMERICAL if n else CATEGORICAL for n in numeric]


def cmd_index(args) -> int:
    delim = args.delimiter.encode().decode("unicode_escape")
    if args.field_kinds:
        kinds = [{"c": CATEGORICAL, "n": NUMERICAL}.get(k, k) for k in args.field_kinds.split(",")]
    else:
        kinds = infer_kinds(args.input, delim)
    records = (tokens for _, _, tokens in read_raw(args.input, delim))
    schema = build_schema(records, kinds, numeric_policy=args.numeric_policy, n_buckets=args.n_buckets)
    Path(args.schema_out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.data_out).parent.mkdir(parents=True, exist_ok=True)
    schema.save(args.schema_out)
    n = index_offline(args.input, schema, args.data_out, delim)
    print(f"indexed {n} records: m={schema.m} d={schema.total_features} schema={schema.digest()}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train / eval


def cmd_train(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    spec = _model_spec(cfg)
    config = _train_config(cfg)
    out = _out_dir(cfg)
    train, test, schema = load_data(cfg, config.seed)
    out.mkdir(parents=True, exist_ok=True)
    header = _header(cfg, config.seed, schema)

    with JsonLinesLog(out / "train_log.jsonl") as log:
        result = fit(spec, train, config, schema.total_features, test=test, on_step=log)
    save_checkpoint(out / "model.ckpt", result.model.spec, result.store, schema.m)
    split, data = ("test", test) if test is not None and len(test) else ("train", train)
    scores = evaluate(result.model, result.store, data)
    row = {"kind": spec.kind, "split": split, "n": len(data), "auc": scores["auc"],
           "logloss": scores["logloss"], "epochs": config.epochs, "lr": config.effective_lr(),
           "wall_time_s": result.seconds}
    write_report(out / "eval", [row], header, history=result.history)
    if result.steps:
        plotting.training_log(result.steps, out / "train_loss.png")
    if result.history:
        xs = [h["epoch"] for h in result.history]
        plotting.loss_curves({spec.kind: (xs, [h["test_logloss"] for h in result.history])},
                             out / "test_logloss.png")
    print(f"{spec.kind}: {split} AUC={row['auc']:.4f} logloss={row['logloss']:.4f} -> {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    out = _out_dir(cfg)
    spec, store, m = load_checkpoint(args.checkpoint)
    data_cfg = cfg.get("data", {})
    if "synthetic" in data_cfg:
        # the held-out split of the generator
        _, data, schema = load_data(cfg, cfg.get("train", {}).get("seed", 0))
    else:
        data, _, schema = load_data({"data": {k: data_cfg.get(k) for k in ("schema", "train")}})
    if schema.m != m:
        raise CLIError(f"checkpoint expects {m} fields, schema has {schema.m}")
    model, _ = init_model(spec, m, 1)
    model.check_store(store)
    scores = evaluate(model, store, data)
    out.mkdir(parents=True, exist_ok=True)
    row = {"kind": spec.kind, "n": len(data), "auc": scores["auc"], "logloss": scores["logloss"]}
    write_report(out / "eval", [row], _header(cfg, None, schema), checkpoint=str(args.checkpoint))
    print(f"{spec.kind}: AUC={row['auc']:.4f} logloss={row['logloss']:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep


def _parse_values(axis: str, values):
    if values is None:
        return list(DEFAULT_VALUES[axis])
    conv = {"dropout": float, "neurons_per_layer": int, "hidden_layers": int}.get(axis, str)
    return [conv(v) for v in values]


def cmd_sweep(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    sw = cfg.get("sweep", {})
    axis_name = sw.get("axis")
    if axis_name not in SWEEP_AXES:
        raise CLIError(f"sweep axis must be one of {SWEEP_AXES}, got {axis_name!r}")
    axis = SweepAxis(axis_name, _parse_values(axis_name, sw.get("values")))
    spec = _model_spec(cfg)
    config = _train_config(cfg)
    out = _out_dir(cfg)
    train, test, schema = load_data(cfg, config.seed, default_synthetic=SMALL_SYNTHETIC)
    if test is None:
        raise CLIError("sweep needs a held-out split (data.test or data.test_fraction)")
    rows = sweep(spec, axis, SweepProtocol(train, test, config, schema.total_features))
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "sweep", rows, _header(cfg, config.seed, schema),
                 columns=["axis_value", "hidden", "auc", "logloss", "wall_time_s"], axis=axis.axis)
    plotting.sweep_plot(rows, axis.axis, out / "sweep.png")
    for r in rows:
        print(f"{axis.axis}={r['axis_value']}: AUC={r['auc']:.4f} logloss={r['logloss']:.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate


def _sim_settings(cfg: dict, args) -> dict:
    sim = {**SIM_DEFAULTS, **cfg.get("simulate", {})}
    if getattr(args, "seed", None) is not None:
        sim["seed"] = args.seed
    return sim


def _sim_world(sim: dict, args):
    if getattr(args, "catalog", None):
        try:
            catalog = AppCatalog.from_dict(json.loads(Path(args.catalog).read_text()))
        except OSError as exc:
            raise CLIError(f"cannot read catalog {args.catalog}: {exc.strerror}") from exc
    else:
        catalog = make_catalog(sim["types"], sim["apps_per_type"], seed=sim["seed"])
    users = generate_users(catalog.n_types if getattr(args, "catalog", None) else sim["types"],
                           sim["users_per_type"], catalog, sim["history_len"], seed=sim["seed"] + 1)
    click_model = ClickModel(sim["affinity"], sim["popularity"], sim["bias"])
    return catalog, users, click_model


def _click_dataset(catalog, users, sim, click_model):
    records, counts = simulate_click_log(catalog, users, sim["impressions"], seed=sim["seed"] + 2,
                                         click_model=click_model)
    hist_len = sim["history_len"]
    schema = build_schema((t for _, t in records), user_item_kinds(hist_len),
                          names=[f"hist{i}" for i in range(hist_len)] + ["app", "app_type"])
    data = Dataset.from_instances(encode(schema, t, y) for y, t in records)
    return records, counts, schema, data


def cmd_simulate(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    out = _out_dir(cfg)
    sim = _sim_settings(cfg, args)
    action = args.action

    if action == "synthetic":
        spec = _planted(sim.get("synthetic", {}), sim["seed"])
        syn = generate_synthetic(spec)
        schema = synthetic_schema(spec)
        out.mkdir(parents=True, exist_ok=True)
        schema.save(out / "schema.json")
        write_indexed(syn.train, out / "train.bin")
        write_indexed(syn.test, out / "test.bin")
        row = {"n_train": len(syn.train), "n_test": len(syn.test), "m": schema.m,
               "d": schema.total_features, "positive_rate": float(syn.train.labels.mean()),
               "bayes_auc": syn.bayes_auc}
        write_report(out / "synthetic", [row], _header(cfg, sim["seed"], schema))
        print(f"synthetic: {row['n_train']} train / {row['n_test']} test, Bayes AUC {row['bayes_auc']:.4f}")
        return EXIT_OK

    catalog, users, click_model = _sim_world(sim, args)

    if action == "data":
        records, counts, schema, data = _click_dataset(catalog, users, sim, click_model)
        out.mkdir(parents=True, exist_ok=True)
        (out / "catalog.json").write_text(json.dumps(catalog.to_dict(), indent=1))
        (out / "users.json").write_text(json.dumps({"types": users.types.tolist(), "histories": users.histories}))
        with open(out / "clicks.tsv", "w") as f:
            for y, toks in records:
                f.write("\t".join([str(y)] + toks) + "\n")
        schema.save(out / "schema.json")
        write_indexed(data, out / "clicks.bin")
        print(f"simulated {counts[1]} impressions, {counts[0]} clicks, {counts[2]} users -> {out}")
        return EXIT_OK

    # report: compare two models' recommendation lists
    if bool(args.checkpoint_a) != bool(args.checkpoint_b):
        raise CLIError("give both --checkpoint-a and --checkpoint-b, or neither")
    if args.checkpoint_a:
        if not args.schema:
            raise CLIError("--schema is required with checkpoints")
        schema = FeatureSchema.load(args.schema)
        models = []
        for path in (args.checkpoint_a, args.checkpoint_b):
            spec, store, m = load_checkpoint(path)
            model, _ = init_model(spec, m, 1)
            model.check_store(store)
            models.append((Path(path).stem, model, store))
        if models[0][0] == models[1][0]:
            models = [("A",) + models[0][1:], ("B",) + models[1][1:]]
    else:
        _, _, schema, data = _click_dataset(catalog, users, sim, click_model)
        models = []
        for name, spec, tc in (
            ("LR", ModelSpec("lr"), TrainConfig(bs=256, epochs=sim["epochs"], seed=sim["seed"],
                                                 ftrl_l1=0.0, ftrl_l2=0.0)),
            ("DeepFM-D", ModelSpec("deepfm_d", k=sim["k"], hidden=tuple(sim["hidden"]), init_std=0.1),
             TrainConfig(bs=256, lr=2e-3, epochs=sim["epochs"], seed=sim["seed"])),
        ):
            result = fit(spec, data, tc, schema.total_features)
            models.append((name, result.model, result.store))
    hist_len = sim["history_len"]
    candidates = np.arange(catalog.n_apps)
    lists, logs = [], {}
    for name, model, store in models:
        ls = recommend(model_scorer(model, store, schema, catalog, hist_len), users, candidates, catalog)
        lists.append(ls)
        logs[name] = serve_lists(ls, users, catalog, max(sim["Ls"]), seed=sim["seed"] + 3,
                                 click_model=click_model)
    names = (models[0][0], models[1][0])
    rows = ab_report(lists[0], lists[1], users, catalog, sim["Ls"], names=names, logs=logs)
    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "ab_report", rows, _header(cfg, sim["seed"], schema))
    plotting.ab_plot(rows, out / "ab_report.png")
    for r in rows:
        print(f"L={r['L']:>2} {r['model']:>10}: personalization={r['personalization']:+.4f} "
              f"coverage={r['coverage']:+.4f} popularity={r['popularity_mean']:+.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _time_training(spec, train, config, d, source_fn) -> float:
    model, store = init_model(spec, train.m, d, seed=config.seed)
    optimizer = make_optimizer(config, spec.kind)
    t0 = time.perf_counter()
    for epoch in range(1, config.epochs + 1):
        train_epoch(model, store, optimizer, source_fn(epoch), config, epoch)
    return time.perf_counter() - t0


def cmd_bench(args) -> int:
    cfg = apply_overrides(load_config(args.config), args)
    bench = {**BENCH_DEFAULTS, **cfg.get("bench", {})}
    base = _train_config(cfg)
    out = _out_dir(cfg)
    train, _, schema = load_data(cfg, base.seed, default_synthetic=SMALL_SYNTHETIC)
    d = schema.total_features
    config = TrainConfig.from_dict({**base.to_dict(), "epochs": bench["epochs"]})
    specs = {}
    for kind in bench["kinds"]:
        wide = kind in ("lr", "poly2", "fm")
        specs[kind] = ModelSpec(kind, k=bench["k"], hidden=() if wide else tuple(bench["hidden"]))

    def plain(epoch):
        return batches(train, config.bs, shuffle=config.shuffle, seed=(config.seed, epoch))

    rows = []
    times = {kind: _time_training(spec, train, config, d, plain) for kind, spec in specs.items()}
    ref = times.get("lr")
    for kind, sec in times.items():
        rows.append({"name": kind, "group": "model", "seconds": sec,
                     "normalized_time": sec / ref if ref else float("nan")})

    kind = "deepfm_d" if "deepfm_d" in specs else next(iter(specs))
    delay = bench["throttle_ms"] / 1000.0

    def throttled(epoch):
        return throttle(plain(epoch), delay)

    def throttled_async(epoch):
        return async_reader(throttled(epoch), config.queue_capacity)

    t_sync = _time_training(specs[kind], train, config, d, throttled)
    t_async = _time_training(specs[kind], train, config, d, throttled_async)
    rows.append({"name": "reader_sync", "group": "reader", "seconds": t_sync, "speedup": 1.0})
    rows.append({"name": "reader_async", "group": "reader", "seconds": t_async,
                 "speedup": speedup_rate(t_sync, t_async)})

    p_times = {}
    for P in bench["workers"]:
        pc = TrainConfig.from_dict({**config.to_dict(), "workers": P})
        p_times[P] = _time_training(specs[kind], train, pc, d, plain)
    p_ref = p_times[min(p_times)]
    for P, sec in p_times.items():
        rows.append({"name": f"workers_{P}", "group": "parallel", "seconds": sec,
                     "speedup": speedup_rate(p_ref, sec)})

    out.mkdir(parents=True, exist_ok=True)
    write_report(out / "bench", rows, _header(cfg, config.seed, schema),
                 columns=["name", "group", "seconds", "normalized_time", "speedup"],
                 reader_kind=kind, throttle_ms=bench["throttle_ms"])
    plotting.bench_plot([r for r in rows if r["group"] == "model"], out / "bench.png")
    for r in rows:
        extra = r.get("normalized_time", r.get("speedup"))
        print(f"{r['name']:>14}: {r['seconds']:.3f}s  ({extra:.3f})")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _common(p, data=True, model=True, train=True):
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    if data:
        p.add_argument("--schema", help="schema JSON")
        p.add_argument("--data", help="indexed training data")
        p.add_argument("--test", help="indexed held-out data")
        p.add_argument("--test-fraction", type=float)
        p.add_argument("--synthetic", action="store_true", help="use the planted synthetic generator")
    if model:
        p.add_argument("--model-kind")
        p.add_argument("--k", type=int)
        p.add_argument("--hidden", help="comma-separated layer widths")
        p.add_argument("--keep-prob", type=float)
        p.add_argument("--layer-norm", action="store_const", const=True)
    if train:
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--bs", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--lr-scale", action="store_const", const=True, help="scale lr by sqrt(workers)")
        p.add_argument("--optimizer", choices=["auto", "adam", "ftrl"])
        p.add_argument("--async", dest="async_reading", action="store_const", const=True)
        p.add_argument("--l2-fm", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deepfm", description="DeepFM CTR toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build a schema and an indexed binary file from raw text")
    p.add_argument("--input", required=True)
    p.add_argument("--schema-out", required=True)
    p.add_argument("--data-out", required=True)
    p.add_argument("--delimiter", default="\\t")
    p.add_argument("--numeric-policy", default="retain", choices=["retain", "discretize"])
    p.add_argument("--n-buckets", type=int, default=10)
    p.add_argument("--field-kinds", help="comma list of c/n per field; inferred when omitted")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("train", help="train a model, write checkpoint, log and eval row")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on indexed data")
    _common(p, model=False, train=False)
    p.add_argument("--checkpoint", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="hyper-parameter sweep along one axis")
    _common(p)
    p.add_argument("--axis", choices=SWEEP_AXES)
    p.add_argument("--values", help="comma-separated axis values")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="synthetic data, click logs and list-metric A/B report")
    p.add_argument("action", choices=["synthetic", "data", "report"])
    _common(p, data=False, model=False, train=False)
    p.add_argument("--catalog", help="catalog JSON with app types and download counts")
    p.add_argument("--schema")
    p.add_argument("--checkpoint-a")
    p.add_argument("--checkpoint-b")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="LR-normalized training times and speed-up rates")
    _common(p, model=False)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DeepFMError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
