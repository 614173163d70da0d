"""Repeated stratified cross-validation, metrics, JSON reports and comparison tables."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ._folds import stratified_assignment
from .classifiers import adaboost_train, grid_search_svm, knn_train, svm_train
from .classifiers.svm import SvmConfig
from .errors import ClassTooSmall, ProtocolError, SingleClass
from .feature_matrix import FeatureMatrix, FeatureName, Normalizer, apply_normalizer, fit_normalizer
from .stat_select import column_tests

log = logging.getLogger(__name__)

REPORT_FORMAT = 1
FEATURE_SETS = ("pressure", "kinematic", "both")
MODES = ("nested", "paper-faithful")


# --- fold plans -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FoldPlan:
    repeat_index: int
    folds: tuple[np.ndarray, ...]  # sorted row indices held out in each fold
    seed: int

    @property
    def n_rows(self) -> int:
        return sum(len(f) for f in self.folds)

    def test_rows(self, fold: int) -> np.ndarray:
        return self.folds[fold]

    def train_rows(self, fold: int) -> np.ndarray:
        return np.sort(np.concatenate([f for k, f in enumerate(self.folds) if k != fold]))


def make_fold_plans(labels, n_folds: int = 10, n_repeats: int = 10, seed: int = 0) -> list[FoldPlan]:
    """Stratified partitions of the rows, one per repeat, each from its own derived seed."""
    labels = np.asarray(labels)
    classes, counts = np.unique(labels, return_counts=True)
    for c, k in zip(classes, counts):
        if k < n_folds:
            raise ClassTooSmall(int(c), int(k), n_folds)
    plans = []
    for r in range(n_repeats):
        rep_seed = int(np.random.SeedSequence([int(seed), r]).generate_state(1, np.uint64)[0])
        fold_of = stratified_assignment(labels, n_folds, np.random.default_rng(rep_seed))
        folds = tuple(np.flatnonzero(fold_of == f) for f in range(n_folds))
        plans.append(FoldPlan(r, folds, rep_seed))
    return plans


# --- per-fold fitting -------------------------------------------------------


@dataclass(frozen=True)
class ProtocolConfig:
    alpha: float = 0.05
    grid: str = "full"  # or "reduced"
    inner_folds: int = 3
    k: int = 3
    max_rounds: int = 500
    max_depth: int = 3
    svm_tolerance: float = 1e-3
    mode: str = "nested"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def select_columns(Z: np.ndarray, labels: np.ndarray, alpha: float) -> tuple[np.ndarray, bool]:
    """Columns with U-test p < alpha, most label-correlated first.

    When nothing passes, the single column with the smallest p is returned
    and the flag is False.
    """
    _, p, rho = column_tests(Z, labels)
    idx = np.flatnonzero(p < alpha)
    if len(idx) == 0:
        order = np.lexsort((np.arange(len(p)), -np.abs(rho), p))
        return order[:1], False
    return idx[np.argsort(-np.abs(rho[idx]), kind="stable")], True


@dataclass(frozen=True, eq=False)
class FoldFit:
    normalizer: Normalizer
    selected: list[FeatureName]  # in ranking order
    selection_passed: bool
    svm_config: SvmConfig | None
    model: object

    def predict(self, m: FeatureMatrix, rows) -> np.ndarray:
        """Predicted labels in {0, 1} for ``rows`` of ``m``."""
        Z = apply_normalizer(self.normalizer, m.take_rows(rows))
        cols = [Z.column_index(c) for c in self.selected]
        return (self.model.predict(Z.values[:, cols]) > 0).astype(int)


def _train(kind: str, X, y, cfg: ProtocolConfig, svm_config: SvmConfig | None, seed: int):
    if kind == "svm":
        return svm_train(X, y, svm_config)
    if kind == "adaboost":
        return adaboost_train(X, y, max_rounds=cfg.max_rounds, max_depth=cfg.max_depth, seed=seed)
    if kind == "knn":
        return knn_train(X, y, k=cfg.k)
    raise ValueError(f"unknown classifier {kind!r}")


def _tune(X, y, cfg: ProtocolConfig, seed: int) -> SvmConfig:
    return grid_search_svm(X, y, grid=cfg.grid, seed=seed, n_folds=cfg.inner_folds, tolerance=cfg.svm_tolerance)


def fit_fold(
    m: FeatureMatrix,
    train_rows,
    kind: str,
    cfg: ProtocolConfig = ProtocolConfig(),
    seed: int = 0,
    fixed_selection: list[FeatureName] | None = None,
    fixed_svm_config: SvmConfig | None = None,
) -> FoldFit:
    """Normalize, select, tune and train using ``train_rows`` only.

    ``fixed_selection`` and ``fixed_svm_config`` bypass the in-fold
    selection and tuning (used by the non-nested mode).
    """
    train_rows = np.asarray(train_rows, dtype=int)
    y = m.labels[train_rows]
    if len(np.unique(y)) < 2:
        raise SingleClass(f"training rows contain a single class ({int(y[0])})")
    norm = fit_normalizer(m, train_rows)
    Z = apply_normalizer(norm, m.take_rows(train_rows))
    if fixed_selection is None:
        idx, passed = select_columns(Z.values, y, cfg.alpha)
        selected = [Z.columns[j] for j in idx]
    else:
        kept = set(Z.columns)
        selected = [c for c in fixed_selection if c in kept]
        passed = True
        if not selected:
            raise ProtocolError("none of the globally selected features survive normalization in this fold")
    X = Z.values[:, [Z.column_index(c) for c in selected]]
    svm_config = None
    if kind == "svm":
        svm_config = fixed_svm_config if fixed_svm_config is not None else _tune(X, y, cfg, seed)
    model = _train(kind, X, y, cfg, svm_config, seed)
    return FoldFit(norm, selected, passed, svm_config, model)


def global_choices(
    m: FeatureMatrix, kind: str, cfg: ProtocolConfig = ProtocolConfig(), seed: int = 0
) -> tuple[list[FeatureName], SvmConfig | None]:
    """Feature selection, and SVM tuning when relevant, on every row at once."""
    Z = apply_normalizer(fit_normalizer(m), m)
    idx, _ = select_columns(Z.values, Z.labels, cfg.alpha)
    selected = [Z.columns[j] for j in idx]
    svm_config = _tune(Z.values[:, idx], Z.labels, cfg, seed) if kind == "svm" else None
    return selected, svm_config


# --- protocol ---------------------------------------------------------------


@dataclass(frozen=True)
class FoldResult:
    repeat: int
    fold: int
    tp: int
    tn: int
    fp: int
    fn: int
    n_selected: int
    selection_passed: bool
    c: float | None = None
    gamma: float | None = None

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / (self.tp + self.tn + self.fp + self.fn)

    @property
    def sensitivity(self) -> float:
        return self.tp / (self.tp + self.fn) if self.tp + self.fn else float("nan")

    @property
    def specificity(self) -> float:
        return self.tn / (self.tn + self.fp) if self.tn + self.fp else float("nan")


@dataclass(frozen=True)
class EvalEntry:
    """One (scope, feature set, classifier) cell of a report."""

    scope: str  # "task<k>" or "overall"
    feature_set: str
    classifier: str
    status: str  # "ok" or "no_significant_features"
    folds: tuple[FoldResult, ...] = ()

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.scope, self.feature_set, self.classifier)

    def _mean(self, attr: str) -> float | None:
        if not self.folds:
            return None
        vals = np.array([getattr(f, attr) for f in self.folds], dtype=float)
        return float(np.nanmean(vals))

    @property
    def accuracy(self) -> float | None:
        return self._mean("accuracy")

    @property
    def sensitivity(self) -> float | None:
        return self._mean("sensitivity")

    @property
    def specificity(self) -> float | None:
        return self._mean("specificity")

    def pooled(self) -> dict[str, int]:
        return {k: int(sum(getattr(f, k) for f in self.folds)) for k in ("tp", "tn", "fp", "fn")}

    @property
    def pooled_accuracy(self) -> float | None:
        if not self.folds:
            return None
        c = self.pooled()
        return (c["tp"] + c["tn"]) / sum(c.values())

    def to_dict(self) -> dict:
        return {
            "scope": self.scope,
            "feature_set": self.feature_set,
            "classifier": self.classifier,
            "status": self.status,
            "accuracy": self.accuracy,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "pooled": self.pooled() if self.folds else None,
            "folds": [asdict(f) for f in self.folds],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalEntry":
        folds = tuple(FoldResult(**f) for f in d["folds"])
        return cls(d["scope"], d["feature_set"], d["classifier"], d["status"], folds)


def run_protocol(
    m: FeatureMatrix,
    kind: str,
    plans: Sequence[FoldPlan],
    cfg: ProtocolConfig = ProtocolConfig(),
    seed: int = 0,
) -> list[FoldResult]:
    """Train on each fold's complement, test on the fold, in (repeat, fold) order.

    Nested mode reruns normalization, selection and tuning inside every
    training fold.  Paper-faithful mode selects features and tunes the SVM
    once on all rows, then trains per fold.
    """
    if m.shape[0] < 20:
        raise ProtocolError(f"need at least 20 subjects, got {m.shape[0]}")
    for p in plans:
        if p.n_rows != m.shape[0]:
            raise ProtocolError("fold plan does not match the matrix row count")
    fixed_sel = fixed_cfg = None
    if cfg.mode == "paper-faithful":
        fixed_sel, fixed_cfg = global_choices(m, kind, cfg, seed)

    results = []
    for plan in plans:
        for f in range(len(plan.folds)):
            train, test = plan.train_rows(f), plan.test_rows(f)
            fold_seed = int(np.random.SeedSequence([int(seed), plan.repeat_index, f]).generate_state(1, np.uint64)[0])
            try:
                fit = fit_fold(m, train, kind, cfg, fold_seed, fixed_sel, fixed_cfg)
            except SingleClass as exc:
                raise ProtocolError(f"repeat {plan.repeat_index} fold {f}: {exc}") from exc
            pred = fit.predict(m, test)
            truth = m.labels[test]
            results.append(
                FoldResult(
                    plan.repeat_index,
                    f,
                    tp=int(np.sum((pred == 1) & (truth == 1))),
                    tn=int(np.sum((pred == 0) & (truth == 0))),
                    fp=int(np.sum((pred == 1) & (truth == 0))),
                    fn=int(np.sum((pred == 0) & (truth == 1))),
                    n_selected=len(fit.selected),
                    selection_passed=fit.selection_passed,
                    c=None if fit.svm_config is None else fit.svm_config.c,
                    gamma=None if fit.svm_config is None else fit.svm_config.gamma,
                )
            )
    return results


def has_significant_features(m: FeatureMatrix, alpha: float = 0.05) -> bool:
    """Whether any column passes the U test on the full matrix (after imputation)."""
    norm = fit_normalizer(m)
    Z = apply_normalizer(norm, m)
    _, p, _ = column_tests(Z.values, Z.labels)
    return bool(np.any(p < alpha))


def evaluate_cell(
    m: FeatureMatrix,
    scope: str,
    feature_set: str,
    kind: str,
    plans: Sequence[FoldPlan],
    cfg: ProtocolConfig = ProtocolConfig(),
    seed: int = 0,
) -> EvalEntry:
    """One report entry; empty selection on the full matrix yields a placeholder entry."""
    sub = m.feature_set(feature_set)
    if not sub.columns or not has_significant_features(sub, cfg.alpha):
        log.info("%s/%s: no significant features", scope, feature_set)
        return EvalEntry(scope, feature_set, kind, "no_significant_features")
    return EvalEntry(scope, feature_set, kind, "ok", tuple(run_protocol(sub, kind, plans, cfg, seed)))


# --- report -----------------------------------------------------------------


def config_digest(config: dict) -> str:
    text = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class EvalReport:
    seed: int
    config: dict
    entries: tuple[EvalEntry, ...] = field(default_factory=tuple)

    @property
    def digest(self) -> str:
        return config_digest(self.config)

    def entry(self, scope: str, feature_set: str, classifier: str) -> EvalEntry | None:
        for e in self.entries:
            if e.key == (scope, feature_set, classifier):
                return e
        return None

    def to_json(self) -> str:
        doc = {
            "format": REPORT_FORMAT,
            "seed": self.seed,
            "config": self.config,
            "config_digest": self.digest,
            "entries": [e.to_dict() for e in self.entries],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        doc = json.loads(text)
        if doc.get("format") != REPORT_FORMAT:
            raise ValueError("unsupported report format")
        return cls(int(doc["seed"]), doc["config"], tuple(EvalEntry.from_dict(e) for e in doc["entries"]))


def scope_order(scope: str) -> tuple[int, int]:
    if scope == "overall":
        return (1, 0)
    return (0, int(scope.removeprefix("task")))


def _cell(value: float | None, decimals: int | None) -> str:
    if value is None:
        return "-"
    pct = 100.0 * value
    return repr(pct) if decimals is None else f"{pct:.{decimals}f}"


def grid_scopes(report: EvalReport, classifier: str = "svm") -> list[str]:
    scopes = sorted({e.scope for e in report.entries if e.classifier == classifier}, key=scope_order)
    n_tasks = sum(1 for s in scopes if s != "overall")
    if n_tasks < 2:
        scopes = [s for s in scopes if s != "overall"]
    return scopes


def compare_report(report: EvalReport, classifier: str = "svm", decimals: int | None = 1) -> tuple[str, str]:
    """Render the per-task accuracy grid and the per-classifier metric triple as CSV.

    Grid rows are tasks plus an ``overall`` row (merged tasks, shown only
    when at least two tasks were evaluated); columns are the feature sets.
    A feature set without any significant feature renders as ``-``.  The
    classifier table uses the overall scope and all features when present,
    otherwise the first scope evaluated.  ``decimals=None`` writes exact
    values, which :func:`parse_tables` reads back losslessly.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task", *FEATURE_SETS])
    for scope in grid_scopes(report, classifier):
        row = ["overall" if scope == "overall" else scope.removeprefix("task")]
        for fs in FEATURE_SETS:
            e = report.entry(scope, fs, classifier)
            row.append(_cell(e.accuracy if e is not None and e.status == "ok" else None, decimals))
        w.writerow(row)
    grid_text = buf.getvalue()

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["classifier", "accuracy", "specificity", "sensitivity"])
    scopes = sorted({e.scope for e in report.entries}, key=scope_order)
    main_scope = "overall" if "overall" in scopes else (scopes[0] if scopes else None)
    kinds = []
    for e in report.entries:
        if e.classifier not in kinds:
            kinds.append(e.classifier)
    for kind in kinds:
        e = report.entry(main_scope, "both", kind)
        if e is None or e.status != "ok":
            w.writerow([kind, "-", "-", "-"])
        else:
            w.writerow([kind, _cell(e.accuracy, decimals), _cell(e.specificity, decimals), _cell(e.sensitivity, decimals)])
    return grid_text, buf.getvalue()


def _parse_cell(text: str) -> float | None:
    return None if text == "-" else float(text)


def parse_tables(grid_text: str, metrics_text: str) -> tuple[dict, dict]:
    """Inverse of :func:`compare_report`, values in percent.

    Returns ``({(scope, feature_set): accuracy | None}, {classifier: (acc, spe, sen) | None})``.
    """
    rows = list(csv.reader(io.StringIO(grid_text)))
    grid = {}
    for r in rows[1:]:
        scope = "overall" if r[0] == "overall" else f"task{r[0]}"
        for fs, cell in zip(rows[0][1:], r[1:]):
            grid[(scope, fs)] = _parse_cell(cell)
    metrics = {}
    for r in list(csv.reader(io.StringIO(metrics_text)))[1:]:
        vals = [_parse_cell(c) for c in r[1:]]
        metrics[r[0]] = None if vals[0] is None else tuple(vals)
    return grid, metrics
