"""Command-line front end: ingestion -> selection -> evaluation -> reports.

One declarative YAML config drives a run; the only flags are overrides for
config path, mode, seed, and thread count. All result files are
deterministic for a given config (run metadata lives in a separate
meta.json so result files stay diffable).

Exit codes: 0 success, 2 config validation error, 3 data error, 4 runtime
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .dataset import (
    CsvSchema,
    Label,
    LabeledDataset,
    load_csv,
    prune,
    write_csv,
)
from .errors import ConfigError, DataError, SpeechScreenError
from .evaluation import (
    default_sweep_schedule,
    grid_search,
    holdout_eval,
    loso,
    make_grid,
    report_to_dict,
    sweep_feature_counts,
    sweep_to_dict,
    sweep_write_csv,
)
from .models import MODEL_IDS, hyperparam_name
from .selection import (
    ledger_to_dict,
    ledger_write_csv,
    rank_and_cut,
    run_protocol,
    selection_to_dict,
)
from .synthetic import generate_synthetic

logger = logging.getLogger(__name__)

MODES = ("select", "loso", "holdout", "sweep", "full")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4


@dataclass(frozen=True)
class RunConfig:
    train_csv: Path
    output_dir: Path
    model_id: str
    mode: str
    schema: CsvSchema
    test_csv: Path | None = None
    master_seed: int = 0
    significance: float = 0.05
    variance_floor: float = 1e-12
    n_repeats: int = 100
    n_folds: int = 5
    hyperparam: float | None = None
    protocol_hyperparam: float | None = None
    sweep_k_max: int = 2500
    sweep_dense_until: int = 200
    sweep_step: int = 25
    grid_per_k: bool = True
    threads: int = 1


def _parse_schema(raw: dict) -> CsvSchema:
    try:
        label_map = {
            str(text): Label(value) for text, value in raw["label_map"].items()
        }
        return CsvSchema(
            id_column=str(raw["id_column"]),
            label_column=str(raw["label_column"]),
            label_map=label_map,
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"invalid schema section: {exc}") from exc


def load_config(path, mode_override=None, seed_override=None, threads_override=None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")

    def require(key):
        if key not in raw:
            raise ConfigError(f"config is missing required key {key!r}")
        return raw[key]

    sweep = raw.get("sweep", {}) or {}
    cfg = RunConfig(
        train_csv=Path(require("train_csv")),
        test_csv=Path(raw["test_csv"]) if raw.get("test_csv") else None,
        output_dir=Path(require("output_dir")),
        model_id=str(require("model")),
        mode=str(mode_override or raw.get("mode", "full")),
        schema=_parse_schema(require("schema")),
        master_seed=int(seed_override if seed_override is not None else raw.get("master_seed", 0)),
        significance=float(raw.get("significance", 0.05)),
        variance_floor=float(raw.get("variance_floor", 1e-12)),
        n_repeats=int(raw.get("n_repeats", 100)),
        n_folds=int(raw.get("n_folds", 5)),
        hyperparam=None if raw.get("hyperparam") is None else float(raw["hyperparam"]),
        protocol_hyperparam=(
            None if raw.get("protocol_hyperparam") is None else float(raw["protocol_hyperparam"])
        ),
        sweep_k_max=int(sweep.get("k_max", 2500)),
        sweep_dense_until=int(sweep.get("dense_until", 200)),
        sweep_step=int(sweep.get("step", 25)),
        grid_per_k=bool(sweep.get("grid_per_k", True)),
        threads=int(threads_override if threads_override is not None else raw.get("threads", 1)),
    )

    if cfg.model_id not in MODEL_IDS:
        raise ConfigError(f"model must be one of {MODEL_IDS}, got {cfg.model_id!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {cfg.mode!r}")
    if not cfg.train_csv.is_file():
        raise ConfigError(f"train csv not found: {cfg.train_csv}")
    if cfg.test_csv is not None and not cfg.test_csv.is_file():
        raise ConfigError(f"test csv not found: {cfg.test_csv}")
    if cfg.mode == "holdout" and cfg.test_csv is None:
        raise ConfigError("mode=holdout requires test_csv")
    if not 0.0 < cfg.significance < 1.0:
        raise ConfigError(f"significance must be in (0,1), got {cfg.significance}")
    if cfg.n_repeats < 1 or cfg.n_folds < 2 or cfg.threads < 1:
        raise ConfigError("n_repeats, n_folds and threads must be positive")
    try:
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output dir {cfg.output_dir}: {exc}") from exc
    return cfg


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _summary_lines(cfg, selection, names, chosen, loso_report, sweep) -> list[str]:
    lines = [
        f"model: {cfg.model_id}",
        f"mode: {cfg.mode}",
        f"master_seed: {cfg.master_seed}",
    ]
    param = hyperparam_name(cfg.model_id)
    if param and chosen is not None:
        lines.append(f"chosen {param}: {chosen:g}")
    if loso_report is not None:
        lines.append(
            f"loso accuracy: {loso_report.accuracy:.4f}  f1: {loso_report.f1:.4f}"
        )
    if sweep is not None:
        best = sweep.best
        lines.append(f"best sweep point: k={best.k} loso_acc={best.loso_accuracy:.4f}")
    if selection is not None:
        lines.append(f"selected features: {selection.cutoff_index} "
                     f"(significance {selection.significance:g})")
        lines.append("")
        lines.append(f"{'rank':>5}  {'p-value':>12}  feature")
        for rank, (idx, p) in enumerate(zip(selection.selected, selection.p_values), start=1):
            lines.append(f"{rank:>5}  {p:>12.6g}  {names[idx]}")
    return lines


def cmd_run(config: RunConfig) -> int:
    started = time.time()
    train = load_csv(config.train_csv, config.schema)
    train, prune_report = prune(train, config.variance_floor)
    test = None
    if config.test_csv is not None:
        test = load_csv(config.test_csv, config.schema)
        test = test.select_features(
            [test.catalog.names.index(name) for name in train.catalog.names]
        )

    out = config.output_dir
    _write_json(out / "prune_report.json", prune_report.to_dict())

    param = hyperparam_name(config.model_id)
    chosen = config.hyperparam
    if param is not None and chosen is None and config.mode != "select":
        result = grid_search(train, config.model_id, config.master_seed)
        chosen = result.chosen
        _write_json(out / "grid_search.json", {
            "schema_version": 1,
            "parameter": param,
            "grid": list(result.grid),
            "cv_scores": list(result.cv_scores),
            "chosen": result.chosen,
        })
        logger.info("grid search chose %s=%g", param, chosen)

    ledger = None
    selection = None
    if config.mode in ("select", "sweep", "full"):
        ledger = run_protocol(
            train, config.model_id, config.master_seed,
            n_repeats=config.n_repeats, n_folds=config.n_folds,
            hyperparam=config.protocol_hyperparam, n_jobs=config.threads,
        )
        selection = rank_and_cut(ledger, config.significance)
        _write_json(out / "ledger.json", ledger_to_dict(ledger))
        ledger_write_csv(ledger, out / "ledger.csv")
        _write_json(out / "selection.json", selection_to_dict(selection, ledger.feature_names))

    loso_report = None
    if config.mode in ("loso", "full"):
        subset = selection.selected if selection is not None and selection.selected else None
        loso_report = loso(train, config.model_id, subset, chosen)
        _write_json(out / "loso_report.json", report_to_dict(loso_report))

    if config.mode in ("holdout", "full") and test is not None:
        subset = selection.selected if selection is not None and selection.selected else None
        holdout_report = holdout_eval(train, test, config.model_id, subset, chosen)
        _write_json(out / "holdout_report.json", report_to_dict(holdout_report))

    sweep = None
    if config.mode in ("sweep", "full"):
        k_max = min(config.sweep_k_max, train.n_features)
        schedule = default_sweep_schedule(k_max, config.sweep_dense_until, config.sweep_step)
        sweep = sweep_feature_counts(
            train, config.model_id, ledger, k_max, test=test, schedule=schedule,
            seed=config.master_seed, hyperparam=config.hyperparam,
            grid_per_k=config.grid_per_k,
        )
        _write_json(out / "sweep.json", sweep_to_dict(sweep))
        sweep_write_csv(sweep, out / "sweep.csv")

    summary = _summary_lines(config, selection, train.catalog.names, chosen, loso_report, sweep)
    (out / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")

    _write_json(out / "meta.json", {
        "schema_version": 1,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "scipy_version": scipy.__version__,
        "wall_time_seconds": time.time() - started,
        "finished_at_unix": time.time(),
        "threads": config.threads,
        "config": {
            k: str(v) if isinstance(v, Path) else v
            for k, v in dataclasses.asdict(config).items()
            if k != "schema"
        },
    })
    return EXIT_OK


def cmd_gen_synthetic(n_subjects, n_features, n_informative, seed, out_path,
                      effect_size=2.0) -> int:
    ds = generate_synthetic(n_subjects, n_features, n_informative, seed, effect_size)
    write_csv(ds, out_path)
    return EXIT_OK


def _error_record(out_dir: Path | None, exit_code: int, exc: Exception) -> None:
    sys.stderr.write(f"error: {exc}\n")
    if out_dir is not None and out_dir.is_dir():
        _write_json(out_dir / "error.json", {
            "schema_version": 1,
            "exit_code": exit_code,
            "error_type": type(exc).__name__,
            "message": str(exc),
        })


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speechscreen",
        description="Dementia screening pipeline on tabular acoustic features",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a configured pipeline run")
    run.add_argument("--config", required=True, help="YAML run configuration")
    run.add_argument("--mode", choices=MODES, help="override the config mode")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--threads", type=int, help="cap worker parallelism")

    gen = sub.add_parser("gen-synthetic", help="write a planted-signal synthetic CSV")
    gen.add_argument("--subjects", type=int, required=True)
    gen.add_argument("--features", type=int, required=True)
    gen.add_argument("--informative", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--effect-size", type=float, default=2.0)
    gen.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command == "gen-synthetic":
        try:
            return cmd_gen_synthetic(args.subjects, args.features, args.informative,
                                     args.seed, args.out, args.effect_size)
        except ConfigError as exc:
            _error_record(None, EXIT_CONFIG, exc)
            return EXIT_CONFIG
        except OSError as exc:
            _error_record(None, EXIT_RUNTIME, exc)
            return EXIT_RUNTIME

    out_dir = None
    try:
        config = load_config(args.config, args.mode, args.seed, args.threads)
        out_dir = config.output_dir
    except ConfigError as exc:
        _error_record(None, EXIT_CONFIG, exc)
        return EXIT_CONFIG

    try:
        return cmd_run(config)
    except DataError as exc:
        _error_record(out_dir, EXIT_DATA, exc)
        return EXIT_DATA
    except SpeechScreenError as exc:
        _error_record(out_dir, EXIT_RUNTIME, exc)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - CLI boundary maps everything to an exit code
        _error_record(out_dir, EXIT_RUNTIME, exc)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
