"""Command-line pipeline: synth, extract, rank and evaluate.

Exit codes: 0 success, 2 ingest or usage error, 3 no feature passes the
U test, 4 evaluation protocol failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ._io import atomic_write_text
from .classifiers import CLASSIFIER_KINDS
from .cohort_io import TASK_IDS, load_cohort
from .cv_eval import (
    FEATURE_SETS,
    MODES,
    EvalReport,
    ProtocolConfig,
    compare_report,
    evaluate_cell,
    make_fold_plans,
    scope_order,
)
from .errors import IngestError, NoSignificantFeatures, PahawError, ProtocolError, TaskUnavailable
from .feature_matrix import MERGED_TASKS, FeatureConfig, FeatureMatrix, build_task_matrix, merge_tasks
from .stat_select import ranking_csv, select_and_rank
from .synth_cohort import FAMILIES, SynthSpec, write_synthetic

log = logging.getLogger("pahaw")

EXIT_OK = 0
EXIT_INGEST = 2
EXIT_NO_FEATURES = 3
EXIT_PROTOCOL = 4


@dataclass
class RunConfig:
    data_root: str = "data"
    output_dir: str = "out"
    seed: int | None = None
    tasks: list[int] = field(default_factory=lambda: list(TASK_IDS))
    feature_set: str = "both"  # kinematic, pressure, both or all
    classifier: str = "svm"  # svm, adaboost, knn or all
    mode: str = "nested"
    device_scale: float = 0.01  # mm per device unit
    repeats: int = 10
    folds: int = 10
    grid: str = "full"
    alpha: float = 0.05
    k: int = 3
    max_rounds: int = 500
    span: int = 5
    min_stroke_samples: int = 5
    smooth_coordinates: bool = False
    top: int = 0  # ranking rows to keep, 0 = all

    def validate(self) -> None:
        if not self.tasks or any(k not in TASK_IDS for k in self.tasks):
            raise ValueError(f"tasks must be a non-empty subset of 1..8, got {self.tasks}")
        if self.feature_set not in (*FEATURE_SETS, "all"):
            raise ValueError(f"unknown feature set {self.feature_set!r}")
        if self.classifier not in (*CLASSIFIER_KINDS, "all"):
            raise ValueError(f"unknown classifier {self.classifier!r}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.grid not in ("full", "reduced"):
            raise ValueError(f"unknown grid {self.grid!r}")

    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            scale=self.device_scale,
            min_stroke_samples=self.min_stroke_samples,
            span=self.span,
            smooth_coordinates=self.smooth_coordinates,
        )

    def protocol_config(self) -> ProtocolConfig:
        return ProtocolConfig(alpha=self.alpha, grid=self.grid, k=self.k, max_rounds=self.max_rounds, mode=self.mode)

    def feature_sets(self) -> tuple[str, ...]:
        return FEATURE_SETS if self.feature_set == "all" else (self.feature_set,)

    def classifiers(self) -> tuple[str, ...]:
        return CLASSIFIER_KINDS if self.classifier == "all" else (self.classifier,)

    def portable_dict(self) -> dict:
        """Settings that influence results; paths are left out."""
        d = dataclasses.asdict(self)
        d.pop("data_root")
        d.pop("output_dir")
        return d


def _coerce(name: str, text: str):
    f = {f.name: f for f in dataclasses.fields(RunConfig)}.get(name)
    if f is None:
        raise ValueError(f"unknown config key {name!r}")
    text = text.strip().strip('"').strip("'")
    kind = str(f.type)
    if name == "tasks":
        return parse_tasks(text)
    if kind.startswith("bool"):
        if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"{name} expects a boolean, got {text!r}")
        return text.lower() in ("true", "1", "yes")
    if kind.startswith("int"):
        return int(text)
    if kind.startswith("float"):
        return float(text)
    return text


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment and ``[section]`` headers are ignored."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line or (line.startswith("[") and line.endswith("]")):
            continue
        if "=" not in line:
            raise ValueError(f"config line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = _coerce(key.replace("-", "_"), value)
    return out


def parse_tasks(text: str) -> list[int]:
    text = text.strip().strip("[]")
    tasks = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            tasks.extend(range(int(a), int(b) + 1))
        else:
            tasks.append(int(part))
    return sorted(set(tasks))


# --- argument parsing -------------------------------------------------------

_FLAG_FIELDS = (
    "data_root",
    "output_dir",
    "seed",
    "tasks",
    "feature_set",
    "classifier",
    "mode",
    "device_scale",
    "repeats",
    "grid",
    "top",
)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value file overriding the defaults")
    common.add_argument("--data-root", dest="data_root", help="cohort directory (manifest.csv + <id>/task<k>.svc)")
    common.add_argument("--out", dest="output_dir", help="output directory")
    common.add_argument("--seed", type=int, help="seed for every random choice")
    common.add_argument("--tasks", type=parse_tasks, help="task list, e.g. 1-8 or 2,3,5")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pahaw", description="Handwriting feature pipeline for PD vs healthy classification.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic cohort")
    s.add_argument("--n-per-group", type=int, default=20)
    s.add_argument("--effect", action="append", default=[], metavar="FAMILY=SD",
                   help=f"group effect in sd units; families: {', '.join(FAMILIES)}")
    s.add_argument("--noise", type=float, default=1.0)
    s.add_argument("--strokes", type=int, default=4)

    e = sub.add_parser("extract", parents=[common], help="compute per-task and merged feature matrices")
    e.add_argument("--device-scale", dest="device_scale", type=float, help="millimetres per device unit")

    r = sub.add_parser("rank", parents=[common], help="rank significant features per matrix")
    r.add_argument("--features", dest="feature_set", choices=(*FEATURE_SETS, "all"))
    r.add_argument("--top", type=int, help="keep only the first N features")

    v = sub.add_parser("evaluate", parents=[common], help="repeated stratified cross-validation")
    v.add_argument("--features", dest="feature_set", choices=(*FEATURE_SETS, "all"))
    v.add_argument("--classifier", choices=(*CLASSIFIER_KINDS, "all"))
    v.add_argument("--mode", choices=MODES)
    v.add_argument("--repeats", type=int)
    v.add_argument("--grid", choices=("full", "reduced"))
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the config file, then explicit flags."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, value in parse_config_text(Path(args.config).read_text(encoding="utf-8")).items():
            setattr(cfg, key, value)
    for name in _FLAG_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    cfg.validate()
    return cfg


def _setup_logging(out: Path, command: str, verbose: bool) -> logging.Handler:
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / f"{command}.log", mode="w", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("pahaw")
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.addHandler(handler)
    return handler


# --- commands ---------------------------------------------------------------


def cmd_synth(cfg: RunConfig, args) -> int:
    effects = {}
    for item in args.effect:
        fam, _, value = item.partition("=")
        effects[fam.strip()] = float(value)
    spec = SynthSpec(
        n_per_group=args.n_per_group,
        seed=cfg.seed,
        tasks=tuple(cfg.tasks),
        effect_map=effects,
        noise_level=args.noise,
        strokes_per_task=args.strokes,
    )
    root = Path(cfg.data_root if args.data_root else cfg.output_dir)
    write_synthetic(spec, root)
    print(f"wrote {2 * spec.n_per_group} subjects x {len(spec.tasks)} tasks to {root}")
    return EXIT_OK


def cmd_extract(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    fcfg = cfg.feature_config()
    cohort = load_cohort(cfg.data_root, cfg.tasks)
    matrices = {}
    for k in cfg.tasks:
        try:
            m = build_task_matrix(cohort, k, fcfg)
        except TaskUnavailable as exc:
            log.warning("%s", exc)
            continue
        d = m.diagnostics
        if d.get("failed_subjects"):
            log.warning("task %d: feature extraction failed for %s", k, d["failed_subjects"])
        log.info(
            "task %d: %d subjects, %d columns, %d short runs discarded, %d subjects with in-air pressure",
            k, m.shape[0], m.shape[1], sum(d["discarded_short_runs"].values()), len(d["inair_pressure_samples"]),
        )
        m.write(out / f"task{k}.csv", {"feature_config": fcfg.to_dict()})
        matrices[k] = m
        print(f"task{k}.csv: {m.shape[0]} subjects x {m.shape[1]} features")
    merged_tasks = [k for k in MERGED_TASKS if k in matrices]
    if len(merged_tasks) >= 2:
        merged = merge_tasks([matrices[k] for k in merged_tasks])
        merged.write(out / "merged.csv", {"feature_config": fcfg.to_dict(), "tasks": merged_tasks})
        print(f"merged.csv: {merged.shape[0]} subjects x {merged.shape[1]} features (tasks {merged_tasks})")
    if not matrices:
        print("no task had enough subjects", file=sys.stderr)
        return EXIT_INGEST
    return EXIT_OK


def load_matrices(directory: Path, tasks) -> dict[str, FeatureMatrix]:
    """Per-task matrices as ``task<k>`` plus ``overall`` when a merged matrix exists."""
    found = {}
    for k in tasks:
        path = directory / f"task{k}.csv"
        if path.exists():
            found[f"task{k}"] = FeatureMatrix.read(path)
    merged = directory / "merged.csv"
    wanted = {k for k in tasks if k in MERGED_TASKS and f"task{k}" in found}
    if merged.exists() and len(wanted) >= 2:
        m = FeatureMatrix.read(merged)
        found["overall"] = m.select_columns([j for j, c in enumerate(m.columns) if c.task_id in wanted])
    if not found:
        raise IngestError(f"no feature matrices in {directory}; run extract first")
    return found


def cmd_rank(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    matrices = load_matrices(out, cfg.tasks)
    produced = 0
    for scope in sorted(matrices, key=scope_order):
        for fs in cfg.feature_sets():
            m = matrices[scope].feature_set(fs)
            try:
                ranked = select_and_rank(m, cfg.alpha)
            except NoSignificantFeatures as exc:
                print(f"{scope}/{fs}: - ({exc})")
                log.info("%s/%s: %s", scope, fs, exc)
                continue
            name = f"ranking_{scope}_{fs}.csv"
            atomic_write_text(out / name, ranking_csv(ranked, cfg.top or None))
            produced += 1
            print(f"{name}: {len(ranked)} significant features")
    return EXIT_OK if produced else EXIT_NO_FEATURES


def cmd_evaluate(cfg: RunConfig) -> int:
    out = Path(cfg.output_dir)
    matrices = load_matrices(out, cfg.tasks)
    pcfg = cfg.protocol_config()
    entries = []
    for scope in sorted(matrices, key=scope_order):
        m = matrices[scope]
        plans = make_fold_plans(m.labels, cfg.folds, cfg.repeats, cfg.seed)
        for fs in cfg.feature_sets():
            for kind in cfg.classifiers():
                try:
                    entry = evaluate_cell(m, scope, fs, kind, plans, pcfg, cfg.seed)
                except ProtocolError as exc:
                    print(f"protocol failure in {scope}/{fs}/{kind}: {exc}", file=sys.stderr)
                    log.error("protocol failure in %s/%s/%s: %s", scope, fs, kind, exc)
                    return EXIT_PROTOCOL
                entries.append(entry)
                log.info("%s/%s/%s: %s", scope, fs, kind, entry.status)
    report = EvalReport(int(cfg.seed), cfg.portable_dict(), tuple(entries))
    atomic_write_text(out / "report.json", report.to_json())
    main_kind = "svm" if "svm" in cfg.classifiers() else cfg.classifiers()[0]
    grid_csv, metrics_csv = compare_report(report, classifier=main_kind)
    atomic_write_text(out / "accuracy_grid.csv", grid_csv)
    atomic_write_text(out / "classifier_metrics.csv", metrics_csv)
    print(grid_csv, end="")
    print()
    print(metrics_csv, end="")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (ValueError, OSError) as exc:
        parser.error(str(exc))
    if args.command in ("synth", "evaluate") and cfg.seed is None:
        parser.error(f"{args.command} needs --seed (or seed = ... in the config file)")
    if args.command == "synth":
        return cmd_synth(cfg, args)

    handler = _setup_logging(Path(cfg.output_dir), args.command, args.verbose)
    try:
        if args.command == "extract":
            return cmd_extract(cfg)
        if args.command == "rank":
            return cmd_rank(cfg)
        return cmd_evaluate(cfg)
    except IngestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        log.error("%s", exc)
        return EXIT_INGEST
    except ProtocolError as exc:
        print(f"protocol failure: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except PahawError as exc:
        print(f"error: {exc}", file=sys.stderr)
        log.error("%s", exc)
        return 1
    finally:
        logging.getLogger("pahaw").removeHandler(handler)
        handler.close()


if __name__ == "__main__":
    raise SystemExit(main())
