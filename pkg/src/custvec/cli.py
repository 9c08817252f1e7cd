"""``custvec`` command line: prepare -> train -> embed -> cluster -> similar -> report.

Every stage reads the JSON config, works inside one output directory with a
fixed layout (``prepared/ model/ vectors/ clusters/ report/``) and records
what it wrote in ``manifest.json``.  Exit codes: 0 success, 2 invalid input
or configuration, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from custvec import __version__
from custvec.clustering import ClusterConfig, fit_clusters
from custvec.dataset import (
    Dataset,
    FeatureSchema,
    Scaler,
    SplitSet,
    apply_scaler,
    fit_scaler,
    impute_missing,
    join_on_keys,
    load_csv,
    smote_augment,
    split,
    write_csv,
)
from custvec.embedding import EmbeddingSet, compress_30_to_3, embed_all, hidden_activations, similar_to_defaulters, top_k_similar
from custvec.evaluation import evaluate_classifier, evaluate_clustering, knee_select_k
from custvec.network import Activation, AdamConfig, LayerSpec, NetworkParams, TrainConfig, TrainingDiverged, train

STAGES = ("prepare", "train", "embed", "cluster", "similar", "report")
SPLITS = ("train", "validation", "test")
DEFAULT_KS = [2, 3, 4, 5, 6]
DEFAULT_METHODS = ["kmeans_modified", "som", "gmm", "mean_shift"]


class ConfigError(ValueError):
    pass


def load_json_schema(name: str) -> dict:
    return json.loads(resources.files("custvec").joinpath("schemas", name).read_text(encoding="utf-8"))


def stage_seed(seed: int, name: str) -> int:
    """Derive an independent per-stage seed from the run seed."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


def dump_json(obj, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class Run:
    """Resolved configuration plus the output directory and its manifest."""

    def __init__(self, config: dict, base_dir: Path, seed_override=None):
        jsonschema.validate(config, load_json_schema("config.schema.json"))
        self.config = copy.deepcopy(config)
        if seed_override is not None:
            self.config["seed"] = seed_override
        self.seed = int(self.config.get("seed", 0))
        self.base_dir = base_dir
        out = os.environ.get("CUSTVEC_OUT") or self.config.get("output_dir", "custvec_out")
        self.out = self.resolve(out)
        hashed = {k: v for k, v in self.config.items() if k != "output_dir"}
        self.config_hash = hashlib.sha256(json.dumps(hashed, sort_keys=True).encode()).hexdigest()
        self.manifest_path = self.out / "manifest.json"

    @classmethod
    def from_file(cls, path, seed_override=None) -> "Run":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                config = json.load(fh)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON ({e})") from None
        return cls(config, path.resolve().parent, seed_override)

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    def section(self, name: str) -> dict:
        return self.config.get(name, {})

    def seed_for(self, name: str) -> int:
        return stage_seed(self.seed, name)

    def feature_schema(self, value=None) -> FeatureSchema:
        value = self.config.get("schema") if value is None else value
        if value is None:
            raise ConfigError("config needs a 'schema'")
        if isinstance(value, str):
            return FeatureSchema.load(self.resolve(value))
        return FeatureSchema.from_json(value)

    def path(self, *parts) -> Path:
        return self.out.joinpath(*parts)

    def read_manifest(self) -> dict:
        if self.manifest_path.is_file():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {
            "tool": "custvec",
            "version": __version__,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "stage_seeds": {},
            "stages": {},
            "artifacts": [],
        }

    def record(self, stage: str, files, started: float, seeds: dict | None = None) -> None:
        """Replace ``stage``'s artifact list in the manifest."""
        m = self.read_manifest()
        rel = sorted(str(Path(f).resolve().relative_to(self.out.resolve())) for f in files)
        for f in rel:
            if not (self.out / f).is_file():
                raise RuntimeError(f"artifact {f} was not written")
        old = set(m["stages"].get(stage, {}).get("artifacts", []))
        m["artifacts"] = sorted((set(m["artifacts"]) - old) | set(rel))
        m["stages"][stage] = {
            "artifacts": rel,
            "wall_clock_s": round(time.perf_counter() - started, 6),
            "finished_at": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }
        m["stage_seeds"].update(seeds or {})
        m["config_hash"] = self.config_hash
        m["seed"] = self.seed
        m["version"] = __version__
        dump_json(m, self.manifest_path)


# -- prepare -------------------------------------------------------------------


def _row_filter(data: Dataset, filters) -> Dataset:
    keep = np.ones(len(data), dtype=bool)
    for f in filters:
        if f["column"] not in data.schema.names:
            raise ConfigError(f"filter column {f['column']!r} is not a feature")
        col = data.column(f["column"])
        if "min" in f:
            keep &= col >= f["min"]
        if "max" in f:
            keep &= col <= f["max"]
    return data.take(np.flatnonzero(keep))


def _label_counts(d: Dataset) -> dict:
    if d.y is None:
        return {}
    c = np.bincount(d.y, minlength=2)
    return {"0": int(c[0]), "1": int(c[1])}


def cmd_prepare(run: Run, args) -> int:
    started = time.perf_counter()
    if "input" not in run.config:
        raise ConfigError("config needs an 'input' CSV for prepare")
    schema = run.feature_schema()
    data = load_csv(run.resolve(run.config["input"]), schema)
    if "join" in run.config:
        j = run.config["join"]
        right = load_csv(run.resolve(j["input"]), run.feature_schema(j["schema"]))
        data = join_on_keys(data, right, j["keys"])
    data = impute_missing(data)
    data = _row_filter(data, run.config.get("filters", []))

    seeds = {"prepare.split": run.seed_for("prepare.split"), "prepare.smote": run.seed_for("prepare.smote")}
    parts = split(data, run.config.get("split", [0.6, 0.2, 0.2]), seeds["prepare.split"])
    scaler = fit_scaler(parts.train)
    train_d = apply_scaler(parts.train, scaler)
    val_d = apply_scaler(parts.validation, scaler)
    test_d = apply_scaler(parts.test, scaler)
    all_d = apply_scaler(data, scaler)

    smote_cfg = run.section("smote")
    use_smote = smote_cfg.get("enabled", False) if args.smote is None else args.smote
    meta = {
        "rows": {"source": len(data), "train": len(train_d), "validation": len(val_d), "test": len(test_d)},
        "labels": {name: _label_counts(d) for name, d in (("train", train_d), ("validation", val_d), ("test", test_d))},
        "features": data.n_features,
        "smote_rows": 0,
    }
    if use_smote:
        augmented, parents = smote_augment(
            train_d, seeds["prepare.smote"], smote_cfg.get("k_neighbors", 5), return_parents=True
        )
        held_out = set(val_d.ids.tolist()) | set(test_d.ids.tolist())
        parent_ids = set(parents.ravel().tolist())
        meta["smote_rows"] = len(augmented) - len(train_d)
        meta["leakage_check"] = "fail" if parent_ids & held_out else "pass"
        meta["labels"]["train_augmented"] = _label_counts(augmented)
        train_d = augmented

    out = run.path("prepared")
    files = []
    for name, d in (("train", train_d), ("validation", val_d), ("test", test_d), ("all", all_d)):
        write_csv(d, out / f"{name}.csv")
        files.append(out / f"{name}.csv")
    dump_json(scaler.to_json(), out / "scaler.json")
    dump_json(schema.to_json() if schema.names == data.schema.names else data.schema.to_json(), out / "schema.json")
    dump_json(meta, out / "prepare_meta.json")
    files += [out / "scaler.json", out / "schema.json", out / "prepare_meta.json"]
    run.record("prepare", files, started, seeds)
    print(f"prepared {len(data)} rows -> train {len(train_d)} / validation {len(val_d)} / test {len(test_d)}")
    return 0


def load_prepared(run: Run, name: str) -> Dataset:
    out = run.path("prepared")
    schema_p, scaler_p, data_p = out / "schema.json", out / "scaler.json", out / f"{name}.csv"
    for p in (schema_p, scaler_p, data_p):
        if not p.is_file():
            raise FileNotFoundError(f"missing prepared artifact {p}; run 'custvec prepare' first")
    schema = FeatureSchema.load(schema_p)
    scaler = Scaler.from_json(json.loads(scaler_p.read_text(encoding="utf-8")))
    return replace(load_csv(data_p, schema), standardized=True, scaler=scaler)


# -- train ---------------------------------------------------------------------


def _train_settings(run: Run, args, input_dim: int, hidden1=None, hidden2="default"):
    t = run.section("train")
    activation = getattr(args, "activation", None) or t.get("activation", "leaky_relu")
    spec = LayerSpec(
        input_dim,
        hidden1 or t.get("hidden1", 3),
        t.get("hidden2", 10) if hidden2 == "default" else hidden2,
        Activation(activation, t.get("alpha", 0.01)),
        t.get("use_bias", True),
    )
    cfg = TrainConfig(
        epochs=getattr(args, "epochs", None) or t.get("epochs", 50),
        batch_size=getattr(args, "batch_size", None) or t.get("batch_size", 50),
        optimizer=AdamConfig(t.get("lr", 1e-3), t.get("beta1", 0.9), t.get("beta2", 0.999), t.get("eps", 1e-8)),
        early_stop_patience=t.get("patience", 5) if getattr(args, "patience", None) is None else args.patience,
    )
    return spec, cfg


def cmd_train(run: Run, args) -> int:
    started = time.perf_counter()
    parts = SplitSet(*(load_prepared(run, s) for s in SPLITS))
    spec, cfg = _train_settings(run, args, parts.train.n_features)
    seed = run.seed_for("train")
    report = train(parts, spec, replace(cfg, seed=seed))
    params = report.best_params
    threshold = run.section("train").get("threshold", 0.5)

    out = run.path("model")
    out.mkdir(parents=True, exist_ok=True)
    scaler_p = run.path("prepared", "scaler.json")
    dump_json(
        {
            "spec": spec.to_json(),
            "params": params.to_json(),
            "scaler": {"path": "prepared/scaler.json", "sha256": file_sha256(scaler_p)},
            "best_epoch": report.best_epoch,
            "stopped_epoch": report.stopped_epoch,
        },
        out / "params.json",
    )
    report.to_csv(out / "history.csv")
    metrics = {
        "validation": evaluate_classifier(params, spec, parts.validation, threshold).to_json(),
        "test": evaluate_classifier(params, spec, parts.test, threshold).to_json(),
    }
    dump_json(metrics, out / "metrics.json")
    run.record("train", [out / "params.json", out / "history.csv", out / "metrics.json"], started, {"train": seed})
    print(render_classification(metrics))
    return 0


def load_model(run: Run, name: str = "params.json"):
    p = run.path("model", name)
    if not p.is_file():
        raise FileNotFoundError(f"missing model {p}; run 'custvec train' first")
    obj = json.loads(p.read_text(encoding="utf-8"))
    scaler_p = run.path(obj["scaler"]["path"])
    if not scaler_p.is_file() or file_sha256(scaler_p) != obj["scaler"]["sha256"]:
        raise ConfigError(f"model {p} was trained with a different scaler than {scaler_p}")
    return LayerSpec.from_json(obj["spec"]), NetworkParams.from_json(obj["params"])


# -- embed ---------------------------------------------------------------------


def cmd_embed(run: Run, args) -> int:
    started = time.perf_counter()
    e = run.section("embed")
    which = args.split or e.get("split", "all")
    fig6 = e.get("fig6", False) if args.fig6 is None else args.fig6
    pre = e.get("pre_activation", False) if args.pre_activation is None else args.pre_activation
    data = load_prepared(run, which)
    out = run.path("vectors")
    files = []
    seeds = {}
    if fig6:
        spec, _ = load_model(run)  # scaler/model consistency check
        parts = SplitSet(*(load_prepared(run, s) for s in SPLITS))
        spec30, cfg = _train_settings(run, args, parts.train.n_features, hidden1=30, hidden2=None)
        seeds = {"embed.fig6": run.seed_for("embed.fig6"), "embed.compress": run.seed_for("embed.compress")}
        rep = train(parts, spec30, replace(cfg, seed=seeds["embed.fig6"]))
        model_p = run.path("model", "fig6_params.json")
        dump_json({"spec": spec30.to_json(), "params": rep.best_params.to_json()}, model_p)
        files.append(model_p)
        acts = hidden_activations(rep.best_params, spec30, data)
        es = compress_30_to_3(acts, seed=seeds["embed.compress"], ids=data.ids, labels=data.y)
    else:
        spec, params = load_model(run)
        es = embed_all(params, spec, data, pre_activation=pre)
    es.to_csv(out / "vectors.csv")
    es.write_json(out / "vectors.json")
    files += [out / "vectors.csv", out / "vectors.json"]
    run.record("embed", files, started, seeds)
    print(f"embedded {len(es)} customers ({which}) into {es.dim}-d vectors{' via 30-node + autoencoder' if fig6 else ''}")
    return 0


def load_vectors(run: Run) -> EmbeddingSet:
    p = run.resolve(run.section("cluster")["vectors"]) if "vectors" in run.section("cluster") else run.path("vectors", "vectors.csv")
    if not p.is_file():
        raise FileNotFoundError(f"missing vectors file {p}; run 'custvec embed' first")
    return EmbeddingSet.from_csv(p)


# -- cluster -------------------------------------------------------------------


def _write_assignments(path, es: EmbeddingSet, assignments) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *(f"v{j + 1}" for j in range(es.dim)), "cluster"])
        for i in range(len(es)):
            w.writerow([str(es.ids[i]), *(repr(float(x)) for x in es.vectors[i]), int(assignments[i])])


def cmd_cluster(run: Run, args) -> int:
    started = time.perf_counter()
    c = run.section("cluster")
    methods = args.methods or c.get("methods", DEFAULT_METHODS)
    ks = args.ks or c.get("ks", DEFAULT_KS)
    jobs = args.jobs or c.get("jobs", 1)
    es = load_vectors(run)
    V = es.vectors
    base = dict(
        max_iter=c.get("max_iter", 300),
        tol=c.get("tol", 1e-6),
        bandwidth=c.get("bandwidth", 0.0),
        max_restarts=c.get("max_restarts", 20),
    )
    jobs_list = []
    for m in methods:
        seed = run.seed_for(f"cluster.{m}")
        if m == "mean_shift":
            jobs_list.append(ClusterConfig(method=m, k=1, seed=seed, **base))
        else:
            jobs_list.extend(ClusterConfig(method=m, k=k, seed=seed, **base) for k in ks)

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        models = list(pool.map(lambda cfg: fit_clusters(V, cfg), jobs_list))

    out = run.path("clusters")
    out.mkdir(parents=True, exist_ok=True)
    files, rows = [], []
    for cfg, model in zip(jobs_list, models):
        stem = "mean_shift" if cfg.method == "mean_shift" else f"{cfg.method}_k{cfg.k}"
        _write_assignments(out / f"{stem}.csv", es, model.assignments)
        model.write_json(out / f"{stem}.json", es.ids)
        files += [out / f"{stem}.csv", out / f"{stem}.json"]
        row = {"method": cfg.method, "k": model.k, "sse": model.sse,
               "silhouette": None, "calinski_harabasz": None, "davies_bouldin": None}
        if model.k >= 2 and len(np.unique(model.assignments)) >= 2:
            v = evaluate_clustering(V, model)
            row.update(silhouette=v.silhouette, calinski_harabasz=v.calinski_harabasz, davies_bouldin=v.davies_bouldin)
        rows.append(row)

    with open(out / "comparison.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    dump_json(rows, out / "comparison.json")
    files += [out / "comparison.csv", out / "comparison.json"]

    knee = None
    parametric = [m for m in methods if m != "mean_shift"]
    if parametric and len(ks) >= 3:
        knee_method = "kmeans_modified" if "kmeans_modified" in parametric else parametric[0]
        curve = [r["sse"] for r in rows if r["method"] == knee_method]
        knee = {"method": knee_method, **knee_select_k(sorted(ks), [dict(zip(ks, curve))[k] for k in sorted(ks)]).to_json()}
    ms_k = next((r["k"] for r in rows if r["method"] == "mean_shift"), None)
    dump_json({"knee": knee, "mean_shift_k": ms_k}, out / "knee.json")
    files.append(out / "knee.json")

    run.record("cluster", files, started, {f"cluster.{m}": run.seed_for(f"cluster.{m}") for m in methods})
    print(render_comparison(rows))
    if knee:
        print(f"knee ({knee['method']}): k = {knee['chosen_k']}")
    if ms_k is not None:
        print(f"mean-shift discovered k = {ms_k}")
    return 0


# -- similar -------------------------------------------------------------------


def cmd_similar(run: Run, args) -> int:
    started = time.perf_counter()
    s = run.section("similar")
    metric = args.metric or s.get("metric", "cosine")
    es = load_vectors(run)
    out = run.path("report")
    out.mkdir(parents=True, exist_ok=True)
    if args.defaulters:
        threshold = args.threshold if args.threshold is not None else s.get("threshold", 0.95)
        if metric == "cosine" and not -1.0 <= threshold <= 1.0:
            raise ConfigError(f"cosine threshold must lie in [-1, 1], got {threshold}")
        if metric == "euclidean" and threshold < 0:
            raise ConfigError("distance threshold must be non-negative")
        hits = similar_to_defaulters(es, threshold, metric)
        path = out / "similar_defaulters.csv"
        header = ["id", "score", "nearest_defaulter_id"]
        rows = [(i, sc, w) for i, sc, w in hits]
    else:
        if args.id is None:
            raise ConfigError("similar needs --id or --defaulters")
        qid = _coerce_id(args.id)
        k = args.k or s.get("k", 5)
        rows = top_k_similar(es, qid, k, metric)
        path = out / f"similar_{qid}.csv"
        header = ["id", "score"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([str(r[0]), repr(float(r[1])), *map(str, r[2:])])
    m = run.read_manifest()
    previous = m["stages"].get("similar", {}).get("artifacts", [])
    keep = [run.path(p) for p in previous if run.path(p) != path and run.path(p).is_file()]
    run.record("similar", keep + [path], started)
    print(",".join(header))
    for r in rows:
        print(",".join([str(r[0]), f"{r[1]:.6f}", *map(str, r[2:])]))
    return 0


def _coerce_id(raw: str):
    try:
        return int(raw)
    except ValueError:
        return raw


# -- report --------------------------------------------------------------------


def render_classification(metrics: dict) -> str:
    names = ["accuracy", "mse", "loss", "precision", "recall", "f1"]
    splits = list(metrics)
    lines = ["metric     " + "".join(f"{s:>12}" for s in splits)]
    for n in names:
        lines.append(f"{n:<11}" + "".join(f"{metrics[s][n]:>12.4f}" for s in splits))
    return "\n".join(lines)


def render_comparison(rows) -> str:
    def fmt(v):
        return f"{v:>12.4f}" if v is not None else f"{'-':>12}"

    lines = [f"{'method':<16}{'k':>3}{'sse':>14}{'silhouette':>12}{'CH':>12}{'DBI':>12}"]
    for r in rows:
        lines.append(
            f"{r['method']:<16}{r['k']:>3}{r['sse']:>14.4f}"
            + fmt(r["silhouette"]) + fmt(r["calinski_harabasz"]) + fmt(r["davies_bouldin"])
        )
    return "\n".join(lines)


def _read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8")) if Path(path).is_file() else None


def build_report(run: Run) -> dict:
    m = run.read_manifest()
    missing = []
    meta = _read_json(run.path("prepared", "prepare_meta.json"))
    data = None
    if meta is None:
        missing.append("prepared/prepare_meta.json")
    else:
        data = {"features": meta["features"], "rows": meta["rows"], "labels": meta["labels"], "smote_rows": meta["smote_rows"]}
        if "leakage_check" in meta:
            data["leakage_check"] = meta["leakage_check"]

    training = None
    hist_p, params_p = run.path("model", "history.csv"), run.path("model", "params.json")
    if hist_p.is_file() and params_p.is_file():
        with open(hist_p, newline="", encoding="utf-8") as fh:
            hist = list(csv.DictReader(fh))
        params = _read_json(params_p)
        training = {
            "epochs_run": len(hist),
            "best_epoch": params["best_epoch"],
            "activation": params["spec"]["hidden_activation"]["kind"],
            **{col: [float(h[col]) for h in hist] for col in ("train_loss", "val_loss", "train_acc", "val_acc")},
        }
    else:
        missing.append("model/history.csv")

    classification = _read_json(run.path("model", "metrics.json"))
    if classification is None:
        missing.append("model/metrics.json")

    clustering = None
    comp = _read_json(run.path("clusters", "comparison.json"))
    knee = _read_json(run.path("clusters", "knee.json"))
    if comp is None:
        missing.append("clusters/comparison.json")
    else:
        clustering = {
            "comparison": comp,
            "knee": knee["knee"] if knee else None,
            "mean_shift_k": knee["mean_shift_k"] if knee else None,
        }

    files = [f for f in m["artifacts"] if not f.startswith("report/report.")]
    return {
        "tool": "custvec",
        "version": __version__,
        "config_hash": run.config_hash,
        "seed": run.seed,
        "data": data,
        "training": training,
        "classification": classification,
        "clustering": clustering,
        "missing": missing,
        "files": files,
    }


def render_report(rep: dict) -> str:
    out = [f"custvec {rep['version']} run report (seed {rep['seed']}, config {rep['config_hash'][:12]})", ""]
    out.append("== data ==")
    if rep["data"]:
        d = rep["data"]
        out.append(f"features: {d['features']}")
        out.append("rows: " + ", ".join(f"{k}={v}" for k, v in d["rows"].items()))
        out.append(f"smote rows added: {d['smote_rows']}" + (f" (leakage check: {d['leakage_check']})" if "leakage_check" in d else ""))
    else:
        out.append("absent")
    out += ["", "== training =="]
    if rep["training"]:
        t = rep["training"]
        out.append(f"activation {t['activation']}, {t['epochs_run']} epochs run, best epoch {t['best_epoch']}")
        out.append(f"loss: first {t['train_loss'][0]:.4f} -> last {t['train_loss'][-1]:.4f} (train), "
                   f"{t['val_loss'][0]:.4f} -> {t['val_loss'][-1]:.4f} (validation)")
    else:
        out.append("absent")
    out += ["", "== classification =="]
    out.append(render_classification(rep["classification"]) if rep["classification"] else "absent")
    out += ["", "== clustering =="]
    if rep["clustering"]:
        c = rep["clustering"]
        out.append(render_comparison(c["comparison"]))
        if c["knee"]:
            out.append(f"knee choice ({c['knee']['method']}): k = {c['knee']['chosen_k']}")
        if c["mean_shift_k"] is not None:
            out.append(f"mean-shift discovered k = {c['mean_shift_k']}")
    else:
        out.append("absent")
    if rep["missing"]:
        out += ["", "missing artifacts: " + ", ".join(rep["missing"])]
    out += ["", "== files =="] + rep["files"]
    return "\n".join(out) + "\n"


def cmd_report(run: Run, args) -> int:
    started = time.perf_counter()
    if not run.manifest_path.is_file():
        raise FileNotFoundError(f"no manifest at {run.manifest_path}; run a pipeline stage first")
    rep = build_report(run)
    jsonschema.validate(rep, load_json_schema("report.schema.json"))
    out = run.path("report")
    dump_json(rep, out / "report.json")
    (out / "report.txt").write_text(render_report(rep), encoding="utf-8")
    m = run.read_manifest()
    others = [run.path(p) for p in m["stages"].get("report", {}).get("artifacts", []) if not p.startswith("report/report.")]
    run.record("report", others + [out / "report.json", out / "report.txt"], started)
    print(render_report(rep), end="")
    return 0


# -- entry point ---------------------------------------------------------------


def _bool_flag(p, name, help_):
    g = p.add_mutually_exclusive_group()
    dest = name.replace("-", "_")
    g.add_argument(f"--{name}", dest=dest, action="store_true", default=None, help=help_)
    g.add_argument(f"--no-{name}", dest=dest, action="store_false")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="custvec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"custvec {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.set_defaults(func=func)
        return p

    p = add("prepare", cmd_prepare, "load, clean, scale, split and optionally oversample")
    _bool_flag(p, "smote", "oversample the training split with SMOTE")

    p = add("train", cmd_train, "train the embedding classifier")
    p.add_argument("--activation", choices=["sigmoid", "tanh", "relu", "leaky_relu"], help="hidden-layer activation")
    p.add_argument("--epochs", type=int, help="maximum training epochs")
    p.add_argument("--batch-size", type=int, help="minibatch size")
    p.add_argument("--patience", type=int, help="early-stopping patience in epochs")

    p = add("embed", cmd_embed, "write customer vectors")
    p.add_argument("--split", choices=["all", *SPLITS], help="which prepared rows to embed")
    _bool_flag(p, "fig6", "use the 30-node network plus autoencoder compression")
    _bool_flag(p, "pre-activation", "export the embedding layer before its activation")

    p = add("cluster", cmd_cluster, "cluster the customer vectors")
    p.add_argument("--methods", nargs="+", choices=DEFAULT_METHODS, help="clustering methods to run")
    p.add_argument("--ks", nargs="+", type=int, help="cluster counts to try")
    p.add_argument("--jobs", type=int, help="parallel worker threads")

    p = add("similar", cmd_similar, "similarity queries over customer vectors")
    p.add_argument("--id", help="customer id to query")
    p.add_argument("--k", type=int, help="number of neighbours to return")
    p.add_argument("--defaulters", action="store_true", help="list customers similar to any known defaulter")
    p.add_argument("--threshold", type=float, help="similarity cut-off (cosine) or distance cut-off (euclidean)")
    p.add_argument("--metric", choices=["cosine", "euclidean"], help="similarity measure")

    add("report", cmd_report, "consolidated text/JSON report")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        run = Run.from_file(args.config, args.seed)
        return args.func(run, args)
    except jsonschema.ValidationError as e:
        print(f"custvec: invalid configuration: {e.message}", file=sys.stderr)
        return 2
    except TrainingDiverged as e:
        print(f"custvec: training diverged: {e}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, FileNotFoundError) as e:
        print(f"custvec: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001
        print(f"custvec: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
