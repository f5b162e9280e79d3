"""``berngraph`` command line.

Every subcommand resolves one flat configuration (defaults < ``--config``
file < ``--key value`` flags), validates it before doing any work and
writes it back as ``config.txt`` in the output directory, so a run can be
replayed with ``berngraph <cmd> --config <out>/config.txt``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from contextlib import ExitStack
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ._io import atomic_write_json, atomic_write_text
from .checkpoint import CheckpointError, load_checkpoint, model_from_checkpoint, save_checkpoint
from .cohort import CohortError, load_cohort, save_cohort, split
from .encoders import EDGE_MODES, NODE_MODES
from .graph import build_graph, graph_to_dict
from .metrics import METRICS, metrics as compute_metrics, bootstrap_eval
from .stats import compute_stats, write_stats
from .synth import SynthConfig, generate, load_ground_truth, make_config, write_ground_truth
from .training import MODEL_KINDS, TrainConfig, prepare_features, train

__all__ = ["main", "run_command", "resolve_config", "ABLATION_ARMS", "ConfigError"]

log = logging.getLogger("berngraph")

COMMANDS = ("stats", "graph", "train", "eval", "ablate", "simulate", "export-viz")

# (arm id, table label, model, node mode, edge mode)
ABLATION_ARMS = (
    ("bm_post", "BM w/ Post", "gnn", "bm", "post"),
    ("bm_cooc", "BM w/o Post", "gnn", "bm", "cooc"),
    ("bm_re", "BM w/ RE", "gnn", "bm", "re"),
    ("llr_post", "LLR w/ Post", "gnn", "llr", "post"),
    ("llr_cooc", "LLR w/o Post", "gnn", "llr", "cooc"),
    ("te_post", "TE w/ Post", "gnn", "te", "post"),
    ("te_cooc", "TE w/o Post", "gnn", "te", "cooc"),
    ("rn_post", "RN w/ Post", "gnn", "rn", "post"),
    ("rn_re", "RN w/ RE", "gnn", "rn", "re"),
    ("lr", "LR", "lr", "bm", "post"),
    ("mlp", "MLP", "mlp", "bm", "post"),
)


class ConfigError(ValueError):
    """Invalid configuration; reported with exit status 2."""


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _opt(kind):
    def parse(text):
        if text is None or str(text).strip().lower() in ("", "none"):
            return None
        return kind(text)
    return parse


_T = TrainConfig()

# name -> (parser, default, help)
FIELDS = {
    "cohort": (_opt(str), None, "cohort manifest JSON"),
    "out": (str, "berngraph_out", "output directory"),
    "seed": (int, 0, "root seed for model init, shuffling and encodings"),
    "split_seed": (int, 0, "seed of the train/val/test split"),
    "ratios": (str, "0.6,0.2,0.2", "train,val,test fractions"),
    "threads": (_opt(int), None, "worker thread cap (fallback: $BERNGRAPH_THREADS, then 1)"),
    "deterministic": (_bool, False, "force single-threaded reductions"),
    # training
    "model": (str, _T.model, "model kind: " + ", ".join(MODEL_KINDS)),
    "node_mode": (str, _T.node_mode, "node encoding: " + ", ".join(NODE_MODES)),
    "edge_mode": (str, _T.edge_mode, "edge weighting: " + ", ".join(EDGE_MODES)),
    "encoding_seed": (_opt(int), None, "seed of random encodings (default: seed)"),
    "min_joint": (int, _T.min_joint, "minimum joint count for an edge"),
    "learning_rate": (float, _T.learning_rate, "Adam learning rate"),
    "epochs": (int, _T.epochs, "training epochs"),
    "batch_size": (int, _T.batch_size, "mini-batch size"),
    "hidden": (int, _T.hidden, "hidden dimension d"),
    "layers": (int, _T.layers, "message-passing layers K"),
    "patience": (int, _T.patience, "early-stopping patience on val Jaccard (0 = off)"),
    "dtype": (str, _T.dtype, "float64 or float32 (training throughput)"),
    "lr_input": (str, _T.lr_input, "LR baseline input: raw or encoded"),
    "l2": (float, _T.l2, "L2 penalty of the LR baseline"),
    "all_rows_stats": (_bool, _T.all_rows_stats, "fit statistics on all rows (leaks; diagnostics only)"),
    # evaluation
    "checkpoint": (_opt(str), None, "model checkpoint for eval/export-viz"),
    "truth": (_opt(str), None, "ground-truth JSON; score against its noise-free labels"),
    "eval_split": (str, "test", "rows to evaluate: train, val or test"),
    "rounds": (int, 10, "bootstrap rounds (0 = plain metrics)"),
    "frac": (float, 0.8, "bootstrap sample fraction"),
    "bootstrap_seed": (int, 0, "bootstrap sampling seed"),
    # graph / export-viz
    "row": (int, 0, "patient row"),
    "k": (int, 5, "number of highlighted nodes"),
    # ablate
    "seeds": (str, "0", "comma-separated training seeds"),
    "arms": (str, "all", "comma-separated ablation arm ids or 'all'"),
    # stats
    "stats_rows": (str, "all", "rows for the stats subcommand: all or train"),
    # simulate
    "n_patients": (int, 2000, "simulated patients N"),
    "n_events": (int, 40, "simulated events M"),
    "n_drugs": (int, 6, "simulated drugs C"),
    "n_causes": (int, 5, "latent causes L"),
    "event_rate": (float, 0.005, "expected per-event firing rate"),
    "background_share": (float, 0.5, "share of the rate from background noise"),
    "cause_prevalence": (float, 0.02, "prevalence of each latent cause"),
    "rule_extra": (int, 2, "extra random events per drug rule"),
    "rule_type": (str, "any", "drug rule type: any or all"),
    "label_noise": (float, 0.05, "label flip probability"),
}

TRAIN_KEYS = ("model", "node_mode", "edge_mode", "encoding_seed", "min_joint", "learning_rate",
              "epochs", "batch_size", "hidden", "layers", "patience", "dtype", "lr_input", "l2",
              "all_rows_stats")
# keys that decide how rows become model inputs; eval must agree with training
FEATURE_KEYS = ("cohort", "seed", "split_seed", "ratios", "model", "node_mode", "edge_mode",
                "encoding_seed", "min_joint", "lr_input", "all_rows_stats", "hidden", "layers")
SIM_KEYS = ("n_patients", "n_events", "n_drugs", "n_causes", "event_rate", "background_share",
            "cause_prevalence", "rule_extra", "rule_type", "label_noise", "seed")


# ---------------------------------------------------------------- config

def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment.  JSON objects are accepted too."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    text = path.read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _parse_field(key, value, source):
    if key not in FIELDS:
        raise ConfigError(f"unknown config key {key!r} (from {source})")
    parser = FIELDS[key][0]
    try:
        return parser(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid value {value!r} for {key} (from {source}): {exc}") from None


def resolve_config(flags: dict, file_values: dict = None, base: dict = None, file_label="config") -> dict:
    """Merge defaults < ``base`` < config file < explicit flags."""
    cfg = {k: spec[1] for k, spec in FIELDS.items()}
    for layer, label in ((base or {}, "checkpoint"), (file_values or {}, file_label),
                         (flags, "command line")):
        for key, value in layer.items():
            if value is None and layer is flags:
                continue
            cfg[key] = _parse_field(key, value, label)
    if cfg["threads"] is None:
        env = os.environ.get("BERNGRAPH_THREADS")
        cfg["threads"] = _parse_field("threads", env, "BERNGRAPH_THREADS") if env else 1
    if cfg["deterministic"]:
        cfg["threads"] = 1
    return cfg


def parse_ratios(text: str) -> tuple:
    try:
        ratios = tuple(float(x) for x in str(text).split(","))
    except ValueError:
        raise ConfigError(f"ratios must be three comma-separated numbers, got {text!r}") from None
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"ratios must be three positive fractions summing to 1, got {text!r}")
    return ratios


def train_config(cfg: dict, **overrides) -> TrainConfig:
    values = {k: cfg[k] for k in TRAIN_KEYS}
    values.update(seed=cfg["seed"], threads=cfg["threads"])
    values.update(overrides)
    try:
        return TrainConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _int_list(text, key) -> list:
    try:
        return [int(s) for s in str(text).split(",") if s.strip()]
    except ValueError:
        raise ConfigError(f"{key} must be comma-separated integers, got {text!r}") from None


def validate(command: str, cfg: dict) -> None:
    """Reject bad configurations before any computation starts."""
    parse_ratios(cfg["ratios"])
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    train_config(cfg)
    if command in ("stats", "graph", "train", "eval", "ablate", "export-viz"):
        if not cfg["cohort"]:
            raise ConfigError(f"{command} needs --cohort")
        if not Path(cfg["cohort"]).exists():
            raise ConfigError(f"cohort manifest {cfg['cohort']} not found")
    if command in ("eval", "export-viz"):
        if not cfg["checkpoint"]:
            raise ConfigError(f"{command} needs --checkpoint")
        if not Path(cfg["checkpoint"]).exists():
            raise ConfigError(f"checkpoint {cfg['checkpoint']} not found")
    if cfg["truth"] and not Path(cfg["truth"]).exists():
        raise ConfigError(f"ground-truth file {cfg['truth']} not found")
    if cfg["eval_split"] not in ("train", "val", "test"):
        raise ConfigError("eval_split must be train, val or test")
    if cfg["rounds"] < 0:
        raise ConfigError("rounds must be >= 0")
    if not 0.0 < cfg["frac"] <= 1.0:
        raise ConfigError("frac must lie in (0, 1]")
    if cfg["stats_rows"] not in ("all", "train"):
        raise ConfigError("stats_rows must be all or train")
    if cfg["row"] < 0:
        raise ConfigError("row must be >= 0")
    if command == "ablate":
        if not _int_list(cfg["seeds"], "seeds"):
            raise ConfigError("seeds must list at least one seed")
        _ablation_arms(cfg["arms"])
    if command == "simulate":
        if cfg["rule_type"] not in ("any", "all"):
            raise ConfigError("rule_type must be any or all")
        try:
            make_config(**{k: cfg[k] for k in SIM_KEYS})
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def format_config(cfg: dict) -> str:
    lines = ["# resolved berngraph configuration"]
    for key in FIELDS:
        value = cfg[key]
        lines.append(f"{key} = {'none' if value is None else str(value).lower() if isinstance(value, bool) else value}")
    return "\n".join(lines) + "\n"


def _ablation_arms(text) -> list:
    if str(text).strip() == "all":
        return list(ABLATION_ARMS)
    wanted = [s.strip() for s in str(text).split(",") if s.strip()]
    known = {a[0]: a for a in ABLATION_ARMS}
    bad = [w for w in wanted if w not in known]
    if bad or not wanted:
        raise ConfigError(f"unknown ablation arms {bad}; choose from {sorted(known)}")
    return [known[w] for w in wanted]


# ---------------------------------------------------------------- helpers

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row.get(h)) for h in header])
    atomic_write_text(path, buf.getvalue())


def _load(cfg):
    cohort = load_cohort(cfg["cohort"])
    parts = split(cohort, parse_ratios(cfg["ratios"]), seed=cfg["split_seed"])
    return cohort, parts


def _rows(parts, name):
    return {"train": parts.train_rows, "val": parts.val_rows, "test": parts.test_rows}[name]


def _labels(cfg, cohort, rows):
    if not cfg["truth"]:
        return cohort.label_rows(rows)
    truth = load_ground_truth(cfg["truth"])
    clean = np.asarray(truth.clean_labels)
    if clean.shape != (cohort.n_patients, cohort.n_drugs):
        raise ConfigError(f"ground truth has shape {clean.shape}, cohort is "
                          f"{(cohort.n_patients, cohort.n_drugs)}")
    return clean[np.asarray(rows, dtype=np.int64)].astype(np.float64)


def _check_row(cfg, cohort):
    if cfg["row"] >= cohort.n_patients:
        raise ConfigError(f"row {cfg['row']} out of range for {cohort.n_patients} patients")


# ---------------------------------------------------------------- commands

def cmd_stats(cfg, out: Path) -> dict:
    cohort = load_cohort(cfg["cohort"])
    rows = None
    if cfg["stats_rows"] == "train":
        rows = split(cohort, parse_ratios(cfg["ratios"]), seed=cfg["split_seed"]).train_rows
    stats = compute_stats(cohort.events, rows, threads=cfg["threads"])
    header = write_stats(stats, out, cohort.event_names)
    print(f"stats over {stats.n_rows} rows: M={stats.n_events}, {header['n_pairs']} co-occurring pairs")
    return header


def cmd_graph(cfg, out: Path) -> dict:
    cohort, parts = _load(cfg)
    _check_row(cfg, cohort)
    features = prepare_features(cohort, parts, train_config(cfg))
    r = cfg["row"]
    graph = build_graph(cohort.event_rows([r])[0], cohort.label_rows([r])[0],
                        features.node_encoding, features.edges, row_id=r)
    doc = graph_to_dict(graph, cohort.event_names, cohort.drug_names)
    atomic_write_json(out / f"graph_{r}.json", doc)
    print(f"graph for row {r}: {len(doc['nodes'])} nodes, {len(doc['edges'])} edges")
    return doc


def cmd_train(cfg, out: Path) -> dict:
    from .plotting import plot_history

    cohort, parts = _load(cfg)
    tcfg = train_config(cfg)
    result = train(cohort, parts, tcfg)
    extra = {"config": {k: cfg[k] for k in FEATURE_KEYS},
             "n_edges": int(result.features.edges.n_edges)}
    save_checkpoint(result.model, getattr(result.model, "adam_state", None), out / "model.ckpt",
                    hyper=tcfg.to_dict(), extra=extra)
    keys = ["epoch", "train_loss", "val_loss", "val_jaccard", "val_f1", "val_avg_drug"]
    write_csv(out / "history.csv", keys, result.history)
    if result.history:
        plot_history(result.history, out / "history.png")
    atomic_write_json(out / "split.json", {"train_rows": list(parts.train_rows),
                                          "val_rows": list(parts.val_rows),
                                          "test_rows": list(parts.test_rows)})
    last = result.history[-1] if result.history else {}
    print(f"trained {tcfg.model} for {len(result.history)} epochs; "
          f"final train loss {last.get('train_loss', float('nan')):.4f}")
    return {"epochs": len(result.history), "last": last}


def _restore(cfg):
    ckpt = load_checkpoint(cfg["checkpoint"])
    cohort, parts = _load(cfg)
    features = prepare_features(cohort, parts, train_config(cfg))
    expected = {"M": cohort.n_events, "C": cohort.n_drugs}
    for key, want in expected.items():
        if ckpt.dims.get(key) != want:
            raise CheckpointError(f"shape mismatch: checkpoint has {key}={ckpt.dims.get(key)}, "
                                  f"cohort needs {key}={want}")
    model = model_from_checkpoint(ckpt, features.edges)
    return ckpt, cohort, parts, features, model


def _stored_config(path) -> dict:
    return dict(load_checkpoint(path).extra.get("config", {}))


def cmd_eval(cfg, out: Path) -> dict:
    from .plotting import plot_bootstrap

    _, cohort, parts, features, model = _restore(cfg)
    rows = _rows(parts, cfg["eval_split"])
    x = features.inputs(cohort, rows)
    probs = model.predict_proba(x)
    y = _labels(cfg, cohort, rows)
    if cfg["rounds"]:
        report = bootstrap_eval(probs, y, rounds=cfg["rounds"], frac=cfg["frac"],
                                seed=cfg["bootstrap_seed"])
    else:
        report = compute_metrics(probs, y)
    doc = report.to_dict()
    doc.update(eval_split=cfg["eval_split"], labels="ground_truth" if cfg["truth"] else "cohort",
               model=model.kind)
    atomic_write_json(out / "metrics.json", doc)
    header = ["round"] + list(METRICS) + [f"{m}_std" for m in METRICS]
    rows_out = [dict(r, round=i + 1) for i, r in enumerate(report.rounds or [])]
    summary = dict(report.mean, round="summary")
    if report.std is not None:
        summary.update({f"{m}_std": report.std[m] for m in METRICS})
    write_csv(out / "metrics.csv", header, rows_out + [summary])
    if report.rounds:
        plot_bootstrap(report.rounds, out / "bootstrap.png")
    print(" ".join(f"{m}={report.mean[m]:.4f}" for m in METRICS))
    return doc


def cmd_ablate(cfg, out: Path) -> dict:
    from .plotting import plot_ablation

    cohort, parts = _load(cfg)
    seeds = _int_list(cfg["seeds"], "seeds")
    test = parts.test_rows
    y = _labels(cfg, cohort, test)
    per_run, summary = [], []
    for arm, label, model, node_mode, edge_mode in _ablation_arms(cfg["arms"]):
        runs = []
        for s in seeds:
            enc_seed = s if cfg["encoding_seed"] is None else cfg["encoding_seed"]
            tcfg = train_config(cfg, model=model, node_mode=node_mode, edge_mode=edge_mode,
                                seed=s, encoding_seed=enc_seed)
            result = train(cohort, parts, tcfg)
            probs = result.model.predict_proba(result.features.inputs(cohort, test))
            report = compute_metrics(probs, y)
            row = dict(report.mean, arm=arm, label=label, model=model, node_mode=node_mode,
                       edge_mode=edge_mode, seed=s)
            runs.append(row)
            log.info("%s seed %d: jaccard %.4f", arm, s, report.mean["jaccard"])
        per_run += runs
        agg = dict(arm=arm, label=label, model=model, node_mode=node_mode, edge_mode=edge_mode,
                   n_seeds=len(seeds))
        for m in METRICS:
            vals = [r[m] for r in runs]
            agg[m] = float(np.mean(vals))
            agg[f"{m}_std"] = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        summary.append(agg)
        print(f"{label:<14s} " + " ".join(f"{m}={agg[m]:.4f}" for m in METRICS), flush=True)
    base = ["arm", "label", "model", "node_mode", "edge_mode"]
    write_csv(out / "ablation.csv", base + ["n_seeds"] + list(METRICS), summary)
    write_csv(out / "ablation_std.csv", ["arm"] + [f"{m}_std" for m in METRICS], summary)
    write_csv(out / "ablation_runs.csv", base + ["seed"] + list(METRICS), per_run)
    plot_ablation(summary, out / "ablation.png")
    return {"arms": summary}


def cmd_simulate(cfg, out: Path, raw_file: dict = None) -> dict:
    if raw_file and "loading" in raw_file:
        try:
            sim = SynthConfig.from_dict(raw_file)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid simulator config: {exc}") from None
    else:
        sim = make_config(**{k: cfg[k] for k in SIM_KEYS})
    cohort, truth = generate(sim)
    manifest = save_cohort(cohort, out / "cohort.json")
    write_ground_truth(truth, out / "ground_truth.json")
    atomic_write_json(out / "synth_config.json", sim.to_dict())
    print(f"simulated {cohort.n_patients} patients x {cohort.n_events} events -> {manifest}")
    return {"manifest": str(manifest)}


def cmd_export_viz(cfg, out: Path) -> dict:
    from .plotting import plot_graph
    from .viz import export_viz

    _, cohort, parts, features, model = _restore(cfg)
    _check_row(cfg, cohort)
    if model.kind != "gnn":
        raise ConfigError("export-viz needs a GNN checkpoint")
    if not 1 <= cfg["k"] <= cohort.n_events:
        raise ConfigError(f"k={cfg['k']} is out of range (1..{cohort.n_events})")
    r = cfg["row"]
    values = features.inputs(cohort, [r])[0]
    doc = export_viz(model, values, cfg["k"], cohort.event_names, row_id=r)
    atomic_write_json(out / f"viz_{r}.json", doc)
    plot_graph(doc, out / f"viz_{r}.png", title=f"patient row {r}, top-{cfg['k']}")
    top = [n["event"] for n in doc["nodes"] if n["top_k"]]
    print(f"row {r}: top-{cfg['k']} nodes {', '.join(top)}")
    return doc


COMMAND_HELP = {
    "stats": "write marginals and conditional edge tables",
    "graph": "dump one patient's graph as JSON",
    "train": "train a model and write a checkpoint",
    "eval": "score a checkpoint (bootstrap metrics JSON + CSV)",
    "ablate": "run the node/edge encoding ablation grid",
    "simulate": "generate a synthetic cohort with ground truth",
    "export-viz": "export per-node activations with top-k flags",
}

HANDLERS = {
    "stats": cmd_stats,
    "graph": cmd_graph,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "simulate": cmd_simulate,
    "export-viz": cmd_export_viz,
}


# ---------------------------------------------------------------- entry

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="berngraph",
                                     description="Bernoulli event graphs for medication recommendation")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    sub.required = True
    for name in COMMANDS:
        p = sub.add_parser(name, help=COMMAND_HELP[name])
        p.add_argument("--config", help="flat key = value config file")
        for key, (_, default, help_text) in FIELDS.items():
            flag = "--" + key.replace("_", "-")
            if key == "deterministic":
                p.add_argument(flag, dest=key, action="store_const", const="true", default=None,
                               help=help_text)
            else:
                p.add_argument(flag, dest=key, default=None, metavar=key.upper(),
                               help=f"{help_text} (default: {default})")
    return parser


def run_command(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)          # exits 2 on unknown subcommands or flags
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    command = args.command
    flags = {k: getattr(args, k) for k in FIELDS}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        raw_file = dict(file_values)
        if command == "simulate" and "loading" in file_values:
            file_values = {k: v for k, v in file_values.items() if k in ("seed",)}
        base = None
        if command in ("eval", "export-viz"):
            ckpt_path = flags.get("checkpoint") or file_values.get("checkpoint")
            if ckpt_path and Path(ckpt_path).exists():
                base = {k: v for k, v in _stored_config(ckpt_path).items() if k in FIELDS}
        cfg = resolve_config(flags, file_values, base, file_label=str(args.config))
        if base:
            changed = [k for k in FEATURE_KEYS
                       if k in base and k != "cohort" and cfg[k] != _parse_field(k, base[k], "checkpoint")]
            if changed:
                raise ConfigError("these settings differ from the ones the checkpoint was trained "
                                  f"with: {', '.join(changed)}")
        validate(command, cfg)
    except (ConfigError, CheckpointError) as exc:
        print(f"berngraph {command}: error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
        atomic_write_text(out / "config.txt", format_config(cfg))
        with ExitStack() as stack:
            stack.enter_context(threadpool_limits(limits=cfg["threads"]))
            if command == "simulate":
                HANDLERS[command](cfg, out, raw_file)
            else:
                HANDLERS[command](cfg, out)
    except (ConfigError, CheckpointError, CohortError) as exc:
        print(f"berngraph {command}: error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    except (OSError, ValueError, FloatingPointError, RuntimeError) as exc:
        print(f"berngraph {command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
