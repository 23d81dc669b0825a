"""Command-line entry point.

One subcommand per pipeline stage plus a `pipeline` meta-command that chains
them into an output directory. A JSON config file provides per-module
settings; command-line flags override config values, which override
defaults. Every run writes a manifest (seeds, config hash, input hashes) next
to its outputs so results can be reproduced exactly.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
The output root may also be set with the ROLECAST_OUT environment variable.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

DEFAULTS: dict = {
    "out_dir": None,
    "corpus": {
        "xml_dir": None,
        "jsonl": None,
        "use_synthetic": False,
        "split_manifest": None,  # path, "builtin:synthetic", or "builtin:framenet17"
    },
    "embed": {"dim": 64, "seed": 0},
    "instances": {"n_shards": 20, "seed": 7, "include_self": True},
    "model": {"n_blocks": 2, "dropout_rate": 0.3, "seed": 7},
    "trainer": {
        "batch_size": 128,
        "epochs_per_segment": 8,
        "learning_rate": 3e-3,
        "metrics_window": 512,
        "select": "best",  # "best" (dev accuracy) or "last"
    },
    "transfer": {"n_e": 7, "seed": 7},
    "eval": {"baselines": False, "baseline_epochs": 30},
}


class ConfigError(Exception):
    """Config schema violation or unusable combination of settings."""


class UsageError(Exception):
    pass


# --- config -------------------------------------------------------------------


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key == "comment":
            continue
        if key not in base:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {here!r} must be an object")
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file not found: {p}")
    try:
        with p.open("r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: top level must be an object")
    return _merge(DEFAULTS, data)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode("utf-8")).hexdigest()


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_run_manifest(
    out_dir: Path, step: str, cfg: dict, seeds: dict, inputs: list, outputs: list
) -> None:
    def relativized(p: Path) -> str:
        try:
            return str(Path(p).relative_to(out_dir))
        except ValueError:
            return str(p)

    files: list[Path] = []
    for p in inputs:
        p = Path(p)
        files.extend(sorted(f for f in p.rglob("*") if f.is_file()) if p.is_dir() else [p])
    manifest = {
        "step": step,
        "seeds": seeds,
        "config_hash": config_hash(cfg),
        "inputs": {relativized(p): sha256_file(p) for p in files},
        "outputs": [Path(p).name for p in outputs],
    }
    path = Path(out_dir) / f"manifest_{step.replace('-', '_')}.json"
    with path.open("w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")


def builtin_data(name: str) -> Path:
    import importlib.resources

    return Path(str(importlib.resources.files("rolecast") / "data" / name))


def _pick(flag_value, cfg_value):
    return cfg_value if flag_value is None else flag_value


def _out_dir(args, cfg) -> Path:
    out = _pick(getattr(args, "out_dir", None), cfg.get("out_dir")) or os.environ.get(
        "ROLECAST_OUT"
    )
    if out is None:
        raise UsageError("no output directory: pass --out-dir, set out_dir in the "
                         "config, or set ROLECAST_OUT")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _require_files(*paths) -> list[Path]:
    out = []
    for p in paths:
        if p is None:
            continue
        p = Path(p)
        if not p.exists():
            raise UsageError(f"input does not exist: {p}")
        out.append(p)
    return out


def _resolve_manifest_path(value: str) -> Path:
    if value == "builtin:synthetic":
        return builtin_data("synthetic_split.json")
    if value == "builtin:framenet17":
        return builtin_data("framenet17_split.json")
    return Path(value)


# --- steps shared by subcommands and the pipeline ------------------------------


def step_parse(xml_dir: Path, out_path: Path) -> None:
    from .corpus import parse_fulltext_dir, write_jsonl, corpus_stats

    skipped: list = []
    corpus = parse_fulltext_dir(xml_dir, skipped=skipped)
    write_jsonl(corpus, out_path)
    stats = corpus_stats(corpus)
    print(f"parsed {stats['n_sentences']} sentences / {stats['n_docs']} documents "
          f"({stats['n_annotations']} annotations, {len(skipped)} records skipped)")
    print(f"wrote {out_path}")


def step_split(corpus_path: Path, manifest_path: Path, out_dir: Path) -> dict:
    from .corpus import load_jsonl, load_split_manifest, split_corpus, write_jsonl

    corpus = load_jsonl(corpus_path)
    manifest = load_split_manifest(manifest_path, corpus_docs=[s.doc_id for s in corpus])
    parts = dict(zip(("train", "dev", "test"), split_corpus(corpus, manifest)))
    outputs = {}
    for name, sentences in parts.items():
        path = out_dir / f"{name}.jsonl"
        write_jsonl(sentences, path)
        outputs[name] = path
        print(f"{name}: {len(sentences)} sentences -> {path}")
    return outputs


def step_embed_build(corpus_paths: list[Path], dim: int, seed: int, out_path: Path) -> None:
    from .corpus import load_jsonl
    from .embed import build_deterministic_store, store_write

    corpora = [load_jsonl(p) for p in corpus_paths]
    store = build_deterministic_store(corpora, dim=dim, seed=seed)
    store_write(store, out_path)
    print(f"store: {len(store)} vectors of dim {dim} -> {out_path}")


def step_instances(
    split_paths: dict, out_dir: Path, n_shards: int, seed: int, include_self: bool
) -> None:
    from .corpus import load_jsonl
    from .instances import (
        balance,
        build_all_instances,
        collect_pairs,
        instance_counts,
        shard,
        write_pair_table,
        write_shard,
        InstanceShard,
    )

    counts_report = {}
    for name, path in split_paths.items():
        corpus = load_jsonl(path)
        table = collect_pairs(corpus)
        write_pair_table(table, out_dir / f"{name}_pairs.jsonl")
        inst = build_all_instances(table, include_self=include_self)
        counts_report[name] = instance_counts(inst)
        if name == "train":
            balanced = balance(inst, seed=seed)
            counts_report["train_balanced"] = instance_counts(balanced)
            shards_dir = out_dir / "shards"
            shards_dir.mkdir(exist_ok=True)
            for sh in shard(balanced, n_shards, seed=seed):
                write_shard(sh, shards_dir / f"shard_{sh.shard_index:03d}.ashd")
            print(f"train: {len(table)} pairs, {counts_report['train']['total']} instances, "
                  f"{counts_report['train_balanced']['total']} balanced -> {n_shards} shards")
        else:
            write_shard(InstanceShard(0, inst), out_dir / f"{name}_instances.ashd")
            print(f"{name}: {len(table)} pairs, {len(inst)} instances")
    with (out_dir / "instance_counts.json").open("w", encoding="utf-8") as fh:
        json.dump(counts_report, fh, indent=1, sort_keys=True)
        fh.write("\n")


def step_train(
    shards_dir: Path,
    pairs_path: Path,
    store_path: Path,
    out_dir: Path,
    model_cfg: dict,
    trainer_cfg: dict,
    dev_instances_path: Path | None = None,
    dev_pairs_path: Path | None = None,
) -> Path:
    from . import model
    from .embed import store_read
    from .instances import read_pair_table, read_shard
    from .trainer import (
        BatchSource,
        TrainParams,
        select_checkpoint,
        train_segments,
        write_metrics_csv,
        binary_accuracy,
    )

    shard_files = sorted(Path(shards_dir).glob("shard_*.ashd"))
    if not shard_files:
        raise UsageError(f"no shard files under {shards_dir}")
    shards = [read_shard(p) for p in shard_files]
    store = store_read(store_path)
    table = read_pair_table(pairs_path)
    source = BatchSource(store, table)
    config = model.NetworkConfig(
        input_dim=source.vector_dim,
        n_blocks=model_cfg["n_blocks"],
        dropout_rate=model_cfg["dropout_rate"],
        seed=model_cfg["seed"],
    )
    params = TrainParams(
        batch_size=trainer_cfg["batch_size"],
        epochs_per_segment=trainer_cfg["epochs_per_segment"],
        metrics_window=trainer_cfg["metrics_window"],
        adam=model.AdamParams(learning_rate=trainer_cfg["learning_rate"]),
    )
    checkpoints, metrics = train_segments(shards, source, config, params)
    ckpt_dir = out_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    for ckpt in checkpoints:
        model.checkpoint_save(ckpt, ckpt_dir / f"ckpt_{ckpt.segment_index:03d}.anck")
    write_metrics_csv(metrics, out_dir / "metrics.csv")
    print(f"trained {len(checkpoints)} segments: "
          f"final loss {metrics[-1]['loss']:.4f}, accuracy {metrics[-1]['accuracy']:.4f}")

    selection = {"mode": trainer_cfg["select"]}
    best = checkpoints[-1]
    if trainer_cfg["select"] == "best":
        if dev_instances_path is None or dev_pairs_path is None:
            raise UsageError("checkpoint selection mode 'best' needs --dev-instances and --dev-pairs")
        dev_inst = read_shard(dev_instances_path).instances
        dev_source = BatchSource(store, read_pair_table(dev_pairs_path))
        best = select_checkpoint(checkpoints, dev_inst, dev_source)
        selection["dev_accuracy"] = binary_accuracy(best, dev_inst, dev_source)
    selection["segment"] = best.segment_index
    selection["checkpoint"] = f"ckpt_{best.segment_index:03d}.anck"
    with (out_dir / "selected.json").open("w", encoding="utf-8") as fh:
        json.dump(selection, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"selected checkpoint: segment {best.segment_index} ({selection['mode']})")
    return ckpt_dir / selection["checkpoint"]


def step_eval_binary(
    checkpoint_path: Path, instances_path: Path, pairs_path: Path, store_path: Path,
    out_path: Path,
) -> None:
    from . import model
    from .embed import store_read
    from .instances import read_pair_table, read_shard
    from .trainer import BatchSource
    from .evaluation import binary_metrics

    ckpt = model.checkpoint_load(checkpoint_path)
    store = store_read(store_path)
    source = BatchSource(store, read_pair_table(pairs_path))
    inst = read_shard(instances_path).instances
    preds = []
    for lo in range(0, len(inst), 4096):
        batch = inst[lo : lo + 4096]
        preds.extend(model.predict(ckpt, source.vectors(batch)).tolist())
    report = binary_metrics(preds, inst["label"].tolist())
    with Path(out_path).open("w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(_binary_table(report))


def _binary_table(report: dict) -> str:
    lines = ["label        precision  recall     f1"]
    for cls in (0, 1):
        c = report[f"class_{cls}"]
        lines.append(f"{cls} ({'negative' if cls == 0 else 'positive'})"
                     f"{c['precision']:9.2f} {c['recall']:9.2f} {c['f1']:9.2f}")
    lines.append(f"accuracy {report['accuracy']:.2f} on {report['n']} instances")
    return "\n".join(lines)


def step_bank(corpus_path: Path, out_path: Path) -> None:
    from .corpus import load_jsonl
    from .transfer import build_bank, recommended_n_e, write_bank_json

    bank = build_bank(load_jsonl(corpus_path))
    write_bank_json(bank, out_path)
    n_roles = sum(len(r) for r in bank.by_frame.values())
    print(f"bank: {len(bank.by_frame)} frames, {n_roles} (frame, role) groups, "
          f"recommended n_e = {recommended_n_e(bank)} -> {out_path}")


def step_transfer(
    checkpoint_path: Path, store_path: Path, bank_path: Path, targets_path: Path,
    n_e: int, seed: int, out_path: Path,
) -> None:
    from . import model
    from .corpus import load_jsonl
    from .embed import store_read
    from .transfer import CheckpointClassifier, decode_corpus, read_bank_json, write_decoded_jsonl

    ckpt = model.checkpoint_load(checkpoint_path)
    store = store_read(store_path)
    bank = read_bank_json(bank_path)
    targets = load_jsonl(targets_path)
    results = decode_corpus(CheckpointClassifier(ckpt), store, bank, targets, n_e=n_e,
                            global_seed=seed)
    write_decoded_jsonl(results, out_path)
    n_un = sum(1 for r in results if r.unclassifiable)
    print(f"decoded {len(results)} targets ({n_un} unclassifiable) -> {out_path}")


def step_eval_src(decoded_path: Path, out_path: Path, dev_path: Path | None = None) -> dict:
    from .corpus import load_jsonl
    from .evaluation import notr_report, src_metrics
    from .transfer import read_decoded_jsonl

    results = read_decoded_jsonl(decoded_path)
    report = {"src": src_metrics([r.predicted_role for r in results],
                                 [r.gold_role for r in results])}
    if dev_path is not None:
        report["notr"] = notr_report(results, load_jsonl(dev_path))
    with Path(out_path).open("w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")
    m = report["src"]
    print(f"SRC accuracy {m['accuracy']:.2f}  P {m['precision']:.2f}  "
          f"R {m['recall']:.2f}  F1 {m['f1']:.2f}  "
          f"({m['n']} targets, {m['n_unclassifiable']} unclassifiable)")
    if "notr" in report:
        for key in ("unseen_frame", "unseen_role"):
            b = report["notr"][key]
            if b["accuracy"] is None:
                print(f"{key}: no targets")
            else:
                print(f"{key}: n={b['n']} accuracy {b['accuracy']:.2f} "
                      f"(delta {b['delta_vs_overall']:+.2f})")
    return report


def step_report_plot(metrics_path: Path, out_path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    from .trainer import read_metrics_csv

    rows = read_metrics_csv(metrics_path)
    xs = [r["checkpoint"] for r in rows]
    fig, ax1 = plt.subplots(figsize=(7, 4))
    ax1.plot(xs, [r["loss"] for r in rows], "o-", color="tab:red", label="loss")
    ax1.set_xlabel("checkpoint")
    ax1.set_ylabel("training loss", color="tab:red")
    ax2 = ax1.twinx()
    ax2.plot(xs, [r["accuracy"] for r in rows], "s-", color="tab:blue", label="accuracy")
    ax2.set_ylabel("training accuracy", color="tab:blue")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    print(f"wrote {out_path}")


def step_report_baselines(
    train_pairs_path: Path, test_pairs_path: Path, store_path: Path, out_path: Path,
    epochs: int, seed: int,
) -> None:
    from .embed import store_read
    from .evaluation import BaselineParams, baseline_direct
    from .instances import read_pair_table
    from .trainer import BatchSource

    store = store_read(store_path)
    train_table = read_pair_table(train_pairs_path)
    test_table = read_pair_table(test_pairs_path)
    train_source = BatchSource(store, train_table)
    test_source = BatchSource(store, test_table)
    params = BaselineParams(epochs=epochs, seed=seed)
    report = {}
    for features in ("element", "predicate_element"):
        result = baseline_direct(
            train_table.pairs, test_table.pairs, train_source, test_source,
            features=features, params=params,
        )
        report[features] = result
        print(f"baseline ({features}): accuracy {result['accuracy']:.2f} "
              f"over {result['n_classes']} roles")
    with Path(out_path).open("w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1, sort_keys=True)
        fh.write("\n")


def step_report_summary(out_dir: Path) -> None:
    sections = [
        ("instance counts", "instance_counts.json"),
        ("checkpoint selection", "selected.json"),
        ("binary classifier", "binary_report.json"),
        ("role classification", "src_report.json"),
        ("direct baselines", "baselines.json"),
    ]
    for title, name in sections:
        path = out_dir / name
        if not path.exists():
            continue
        print(f"--- {title} ({name})")
        print(path.read_text(encoding="utf-8").rstrip())


# --- subcommand handlers --------------------------------------------------------


def cmd_parse(args, cfg):
    out_dir = _out_dir(args, cfg)
    xml_dir = Path(_pick(args.xml_dir, cfg["corpus"]["xml_dir"]) or "")
    if not xml_dir or not xml_dir.is_dir():
        raise UsageError(f"--xml-dir must name a directory of fulltext XML files, got {xml_dir!r}")
    out_path = out_dir / "corpus.jsonl"
    step_parse(xml_dir, out_path)
    write_run_manifest(out_dir, "parse", cfg, {}, [], [out_path])


def cmd_split(args, cfg):
    out_dir = _out_dir(args, cfg)
    corpus_path = Path(_pick(args.corpus, cfg["corpus"]["jsonl"]) or "")
    manifest_value = _pick(args.manifest, cfg["corpus"]["split_manifest"])
    if not manifest_value:
        raise UsageError("no split manifest: pass --manifest or set corpus.split_manifest")
    manifest_path = _resolve_manifest_path(manifest_value)
    inputs = _require_files(corpus_path, manifest_path)
    outputs = step_split(corpus_path, manifest_path, out_dir)
    write_run_manifest(out_dir, "split", cfg, {}, inputs, list(outputs.values()))


def cmd_embed_build(args, cfg):
    out_dir = _out_dir(args, cfg)
    dim = _pick(args.dim, cfg["embed"]["dim"])
    seed = _pick(args.seed, cfg["embed"]["seed"])
    inputs = _require_files(*args.corpus)
    out_path = out_dir / "store.aemb"
    step_embed_build(inputs, dim, seed, out_path)
    write_run_manifest(out_dir, "embed-build", cfg, {"embed": seed}, inputs, [out_path])


def cmd_instances(args, cfg):
    out_dir = _out_dir(args, cfg)
    seed = _pick(args.seed, cfg["instances"]["seed"])
    n_shards = _pick(args.n_shards, cfg["instances"]["n_shards"])
    split_paths = {}
    for name, value in (("train", args.train), ("dev", args.dev), ("test", args.test)):
        if value is not None:
            split_paths[name] = Path(value)
    if "train" not in split_paths:
        raise UsageError("--train is required")
    inputs = _require_files(*split_paths.values())
    step_instances(split_paths, out_dir, n_shards, seed, cfg["instances"]["include_self"])
    write_run_manifest(out_dir, "instances", cfg, {"instances": seed}, inputs, [])


def cmd_train(args, cfg):
    out_dir = _out_dir(args, cfg)
    model_cfg = dict(cfg["model"])
    trainer_cfg = dict(cfg["trainer"])
    if args.seed is not None:
        model_cfg["seed"] = args.seed
    for key in ("batch_size", "epochs_per_segment", "learning_rate", "select"):
        flag = getattr(args, key, None)
        if flag is not None:
            trainer_cfg[key] = flag
    inputs = _require_files(args.shards_dir, args.pairs, args.store,
                            args.dev_instances, args.dev_pairs)
    selected = step_train(
        Path(args.shards_dir), Path(args.pairs), Path(args.store), out_dir,
        model_cfg, trainer_cfg,
        dev_instances_path=Path(args.dev_instances) if args.dev_instances else None,
        dev_pairs_path=Path(args.dev_pairs) if args.dev_pairs else None,
    )
    write_run_manifest(out_dir, "train", cfg,
                       {"model": model_cfg["seed"]}, inputs, [selected])


def cmd_eval_binary(args, cfg):
    out_dir = _out_dir(args, cfg)
    inputs = _require_files(args.checkpoint, args.instances, args.pairs, args.store)
    out_path = out_dir / "binary_report.json"
    step_eval_binary(Path(args.checkpoint), Path(args.instances), Path(args.pairs),
                     Path(args.store), out_path)
    write_run_manifest(out_dir, "eval-binary", cfg, {}, inputs, [out_path])


def cmd_bank(args, cfg):
    out_dir = _out_dir(args, cfg)
    inputs = _require_files(args.corpus)
    out_path = out_dir / "bank.json"
    step_bank(Path(args.corpus), out_path)
    write_run_manifest(out_dir, "bank", cfg, {}, inputs, [out_path])


def cmd_transfer(args, cfg):
    out_dir = _out_dir(args, cfg)
    n_e = _pick(args.n_e, cfg["transfer"]["n_e"])
    seed = _pick(args.seed, cfg["transfer"]["seed"])
    inputs = _require_files(args.checkpoint, args.store, args.bank, args.targets)
    out_path = out_dir / "decoded.jsonl"
    step_transfer(Path(args.checkpoint), Path(args.store), Path(args.bank),
                  Path(args.targets), n_e, seed, out_path)
    write_run_manifest(out_dir, "transfer", cfg, {"transfer": seed}, inputs, [out_path])


def cmd_eval_src(args, cfg):
    out_dir = _out_dir(args, cfg)
    inputs = _require_files(args.decoded, args.dev)
    out_path = out_dir / "src_report.json"
    step_eval_src(Path(args.decoded), out_path,
                  dev_path=Path(args.dev) if args.dev else None)
    write_run_manifest(out_dir, "eval-src", cfg, {}, inputs, [out_path])


def cmd_report(args, cfg):
    out_dir = _out_dir(args, cfg)
    if args.what == "summary":
        step_report_summary(out_dir)
    elif args.what == "plot":
        metrics = Path(args.metrics or (out_dir / "metrics.csv"))
        _require_files(metrics)
        step_report_plot(metrics, out_dir / "training_curves.png")
    elif args.what == "baselines":
        if not (args.train_pairs and args.test_pairs and args.store):
            raise UsageError("report baselines needs --train-pairs, --test-pairs, --store")
        _require_files(args.train_pairs, args.test_pairs, args.store)
        step_report_baselines(
            Path(args.train_pairs), Path(args.test_pairs), Path(args.store),
            out_dir / "baselines.json",
            epochs=cfg["eval"]["baseline_epochs"], seed=cfg["model"]["seed"],
        )


def cmd_pipeline(args, cfg):
    out_dir = _out_dir(args, cfg)
    corpus_cfg = cfg["corpus"]

    # 1. corpus
    corpus_path = out_dir / "corpus.jsonl"
    if corpus_cfg["use_synthetic"]:
        corpus_path.write_bytes(builtin_data("synthetic_corpus.jsonl").read_bytes())
        print(f"using bundled synthetic corpus -> {corpus_path}")
    elif corpus_cfg["xml_dir"]:
        step_parse(Path(corpus_cfg["xml_dir"]), corpus_path)
    elif corpus_cfg["jsonl"]:
        corpus_path = Path(corpus_cfg["jsonl"])
        _require_files(corpus_path)
    else:
        raise UsageError("pipeline needs corpus.use_synthetic, corpus.xml_dir, or corpus.jsonl")

    # 2. split
    manifest_value = corpus_cfg["split_manifest"] or (
        "builtin:synthetic" if corpus_cfg["use_synthetic"] else None
    )
    if manifest_value is None:
        raise UsageError("pipeline needs corpus.split_manifest")
    splits = step_split(corpus_path, _resolve_manifest_path(manifest_value), out_dir)

    # 3. embeddings
    store_path = out_dir / "store.aemb"
    step_embed_build(list(splits.values()), cfg["embed"]["dim"], cfg["embed"]["seed"],
                     store_path)

    # 4. instances
    step_instances(splits, out_dir, cfg["instances"]["n_shards"], cfg["instances"]["seed"],
                   cfg["instances"]["include_self"])

    # 5. train + select
    selected = step_train(
        out_dir / "shards", out_dir / "train_pairs.jsonl", store_path, out_dir,
        cfg["model"], cfg["trainer"],
        dev_instances_path=out_dir / "dev_instances.ashd",
        dev_pairs_path=out_dir / "dev_pairs.jsonl",
    )

    # 6. binary evaluation on test instances
    step_eval_binary(selected, out_dir / "test_instances.ashd",
                     out_dir / "test_pairs.jsonl", store_path,
                     out_dir / "binary_report.json")

    # 7./8. bank + decoding
    step_bank(splits["train"], out_dir / "bank.json")
    step_transfer(selected, store_path, out_dir / "bank.json", splits["test"],
                  cfg["transfer"]["n_e"], cfg["transfer"]["seed"], out_dir / "decoded.jsonl")

    # 9. role-classification metrics (+ NOTR vs dev)
    step_eval_src(out_dir / "decoded.jsonl", out_dir / "src_report.json",
                  dev_path=splits["dev"])

    # 10. optional baselines + plot
    if cfg["eval"]["baselines"]:
        step_report_baselines(out_dir / "train_pairs.jsonl", out_dir / "test_pairs.jsonl",
                              store_path, out_dir / "baselines.json",
                              epochs=cfg["eval"]["baseline_epochs"], seed=cfg["model"]["seed"])
    step_report_plot(out_dir / "metrics.csv", out_dir / "training_curves.png")
    write_run_manifest(
        out_dir, "pipeline", cfg,
        {"embed": cfg["embed"]["seed"], "instances": cfg["instances"]["seed"],
         "model": cfg["model"]["seed"], "transfer": cfg["transfer"]["seed"]},
        [corpus_path], [],
    )
    print("pipeline complete")


# --- parser -------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rolecast",
                     description="Semantic role classification by analogical transfer")
    parser.add_argument("--config", help="JSON config file; flags override its values")
    parser.add_argument("--seed", type=int, help="override the stage-relevant seed")
    parser.add_argument("--threads", type=int, help="cap BLAS/OpenMP threads")
    parser.add_argument("--out-dir", help="output directory (or set ROLECAST_OUT)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="FrameNet fulltext XML -> corpus.jsonl")
    p.add_argument("--xml-dir")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("split", help="route corpus documents into train/dev/test")
    p.add_argument("--corpus")
    p.add_argument("--manifest", help="path, builtin:synthetic, or builtin:framenet17")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("embed-build", help="deterministic text-hash embedding store")
    p.add_argument("--corpus", nargs="+", required=True)
    p.add_argument("--dim", type=int)
    p.set_defaults(func=cmd_embed_build)

    p = sub.add_parser("instances", help="pairs, analogy instances, balanced shards")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--test")
    p.add_argument("--n-shards", type=int)
    p.set_defaults(func=cmd_instances)

    p = sub.add_parser("train", help="incremental training over shards")
    p.add_argument("--shards-dir", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--dev-instances")
    p.add_argument("--dev-pairs")
    p.add_argument("--batch-size", type=int, dest="batch_size")
    p.add_argument("--epochs-per-segment", type=int, dest="epochs_per_segment")
    p.add_argument("--learning-rate", type=float, dest="learning_rate")
    p.add_argument("--select", choices=("best", "last"))
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-binary", help="binary classifier metrics on instance files")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--instances", required=True)
    p.add_argument("--pairs", required=True)
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_eval_binary)

    p = sub.add_parser("bank", help="build the per-frame per-role reference bank")
    p.add_argument("--corpus", required=True)
    p.set_defaults(func=cmd_bank)

    p = sub.add_parser("transfer", help="decode roles by analogical transfer")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--bank", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--n-e", type=int, dest="n_e")
    p.set_defaults(func=cmd_transfer)

    p = sub.add_parser("eval-src", help="role-classification metrics from decoder output")
    p.add_argument("--decoded", required=True)
    p.add_argument("--dev", help="dev corpus for the NOTR breakdown")
    p.set_defaults(func=cmd_eval_src)

    p = sub.add_parser("report", help="summaries, training-curve plots, baselines")
    p.add_argument("what", choices=("summary", "plot", "baselines"))
    p.add_argument("--metrics")
    p.add_argument("--train-pairs")
    p.add_argument("--test-pairs")
    p.add_argument("--store")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("pipeline", help="chain every stage per the config file")
    p.set_defaults(func=cmd_pipeline)

    return parser


def _classify_error(exc: Exception) -> int:
    from .corpus import CorpusError
    from .embed import StoreError
    from .instances import InstanceError
    from .model import ModelError
    from .trainer import TrainerError
    from .transfer import TransferError
    from .evaluation import EvalError

    if isinstance(exc, (UsageError, ConfigError)):
        return EXIT_USAGE
    if isinstance(
        exc,
        (CorpusError, StoreError, InstanceError, ModelError, TrainerError,
         TransferError, EvalError, FileNotFoundError),
    ):
        return EXIT_DATA
    return EXIT_INTERNAL


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.threads is not None:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        cfg = load_config(args.config)
        args.func(args, cfg)
    except Exception as exc:  # noqa: BLE001 - single exit-code boundary
        code = _classify_error(exc)
        if code == EXIT_INTERNAL:
            import traceback

            traceback.print_exc()
        print(f"error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
