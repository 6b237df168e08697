"""
混淆矩阵与评估指标。

  Sensitivity = TP / (TP + FN)
  Specificity = TN / (TN + FP)
  Precision   = TP / (TP + FP)
  Accuracy    = (TN + TP) / (TN + TP + FN + FP)
  F1-Score    = 2·(Precision·Sensitivity) / (Precision + Sensitivity)

全部先用有理数计算再转为浮点。分母为 0 时结果为 None（未定义），
未定义的值不参与宏平均与折平均，并在报告中被标记。
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from core.errors import DataError

logger = logging.getLogger(__name__)

METRICS = ("sensitivity", "specificity", "precision", "f1")
METRIC_TITLES = {
    "sensitivity": "Sensitivity",
    "specificity": "Specificity",
    "precision": "Precision",
    "f1": "F1-score",
    "accuracy": "Accuracy",
}


@dataclass(frozen=True)
class ConfusionMatrix:
    """C×C 计数：行为真实类别，列为预测类别。"""
    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.counts.shape != self.counts.shape:
            raise DataError("confusion matrices have different class counts")
        return ConfusionMatrix(self.counts + other.counts)


@dataclass(frozen=True)
class BinaryCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(true_labels, predicted_labels, num_classes: int) -> ConfusionMatrix:
    y = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if y.shape != p.shape:
        raise DataError(f"label length mismatch: {y.size} true vs {p.size} predicted")
    for name, labels in (("true", y), ("predicted", p)):
        if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
            raise DataError(f"{name} labels must lie in [0, {num_classes})")
    counts = np.bincount(y * num_classes + p, minlength=num_classes * num_classes)
    return ConfusionMatrix(counts.reshape(num_classes, num_classes).astype(np.int64))


def binary_counts(cm: ConfusionMatrix, positive_class: int) -> BinaryCounts:
    """一对其余：把 positive_class 视为正类。"""
    if not 0 <= positive_class < cm.n_classes:
        raise DataError(f"positive class {positive_class} out of range [0, {cm.n_classes})")
    k = positive_class
    tp = int(cm.counts[k, k])
    fn = int(cm.counts[k, :].sum()) - tp
    fp = int(cm.counts[:, k].sum()) - tp
    return BinaryCounts(tp=tp, tn=cm.total - tp - fn - fp, fp=fp, fn=fn)


def _ratio(num: int, den: int) -> Optional[Fraction]:
    return Fraction(num, den) if den else None


def _out(x: Optional[Fraction]) -> Optional[float]:
    return None if x is None else float(x)


def sensitivity(bc: BinaryCounts) -> Optional[float]:
    return _out(_ratio(bc.tp, bc.tp + bc.fn))


def specificity(bc: BinaryCounts) -> Optional[float]:
    return _out(_ratio(bc.tn, bc.tn + bc.fp))


def precision(bc: BinaryCounts) -> Optional[float]:
    return _out(_ratio(bc.tp, bc.tp + bc.fp))


def f1(bc: BinaryCounts) -> Optional[float]:
    p = _ratio(bc.tp, bc.tp + bc.fp)
    s = _ratio(bc.tp, bc.tp + bc.fn)
    if p is None or s is None or p + s == 0:
        return None
    return float(2 * p * s / (p + s))


def accuracy(cm: ConfusionMatrix) -> Optional[float]:
    return _out(_ratio(int(np.trace(cm.counts)), cm.total))


def binary_accuracy(bc: BinaryCounts) -> Optional[float]:
    return _out(_ratio(bc.tn + bc.tp, bc.total))


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    """已定义值的精确算术平均；全部未定义时为 None。"""
    defined = [Fraction(v) for v in values if v is not None]
    if not defined:
        return None
    return float(sum(defined) / len(defined))


@dataclass
class ClassMetrics:
    name: str
    support: int
    sensitivity: Optional[float]
    specificity: Optional[float]
    precision: Optional[float]
    f1: Optional[float]

    def get(self, metric: str) -> Optional[float]:
        return getattr(self, metric)


@dataclass
class MetricsReport:
    """
    单次评估或折平均的报告。

    per_class 为一对其余指标；macro 为对已定义类别的无权平均；
    excluded 记录因未定义而被排除的 "类别:指标"；folds 仅在折平均报告中出现。
    """

    class_names: List[str]
    per_class: List[ClassMetrics]
    accuracy: Optional[float]
    macro: Dict[str, Optional[float]]
    excluded: List[str] = field(default_factory=list)
    confusion: Optional[List[List[int]]] = None
    folds: List["MetricsReport"] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'class_names': list(self.class_names),
            'per_class': [vars(m).copy() for m in self.per_class],
            'accuracy': self.accuracy,
            'macro': dict(self.macro),
            'excluded': list(self.excluded),
            'confusion': self.confusion,
            'folds': [f.to_dict() for f in self.folds],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MetricsReport":
        try:
            return cls(
                class_names=list(data['class_names']),
                per_class=[ClassMetrics(**m) for m in data['per_class']],
                accuracy=data['accuracy'],
                macro={k: data['macro'][k] for k in METRICS},
                excluded=list(data.get('excluded', [])),
                confusion=data.get('confusion'),
                folds=[cls.from_dict(f) for f in data.get('folds', [])],
            )
        except (KeyError, TypeError) as e:
            raise DataError(f"malformed metrics report: {e}") from None


def macro_report(cm: ConfusionMatrix, class_names: Optional[Sequence[str]] = None) -> MetricsReport:
    names = list(class_names) if class_names is not None else [str(k) for k in range(cm.n_classes)]
    if len(names) != cm.n_classes:
        raise DataError(f"{len(names)} class names for a {cm.n_classes}-class matrix")

    per_class = []
    excluded = []
    for k, name in enumerate(names):
        bc = binary_counts(cm, k)
        metrics = ClassMetrics(name, bc.tp + bc.fn, sensitivity(bc), specificity(bc), precision(bc), f1(bc))
        for metric in METRICS:
            if metrics.get(metric) is None:
                excluded.append(f"{name}:{metric}")
        per_class.append(metrics)
    if excluded:
        logger.warning(f"以下指标未定义，已从宏平均中排除：{', '.join(excluded)}")

    macro = {metric: _mean([m.get(metric) for m in per_class]) for metric in METRICS}
    return MetricsReport(names, per_class, accuracy(cm), macro, excluded, cm.counts.tolist())


def fold_average(reports: Sequence[MetricsReport]) -> MetricsReport:
    """各折报告逐项取已定义值的算术平均。"""
    if not reports:
        raise DataError("fold_average needs at least one report")
    names = list(reports[0].class_names)
    for r in reports[1:]:
        if list(r.class_names) != names:
            raise DataError("fold reports have different class structures")

    per_class = []
    for k, name in enumerate(names):
        values = {metric: _mean([r.per_class[k].get(metric) for r in reports]) for metric in METRICS}
        support = sum(r.per_class[k].support for r in reports)
        per_class.append(ClassMetrics(name, support, **values))
    macro = {metric: _mean([r.macro[metric] for r in reports]) for metric in METRICS}
    excluded = [f"fold{i + 1}:{flag}" for i, r in enumerate(reports) for flag in r.excluded]
    return MetricsReport(names, per_class, _mean([r.accuracy for r in reports]), macro, excluded,
                         None, list(reports))


def _pct(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{100.0 * value:.2f}"


def render_table(report: MetricsReport) -> str:
    """
    纯文本表格。带 folds 的报告按 "Fold 1 … Fold k  Average" 排列，
    否则每个指标一行；宏平均块之后是逐类别块。
    """
    if report.folds:
        header = [f"Fold {i + 1}" for i in range(len(report.folds))] + ["Average"]
        sources = report.folds + [report]
    else:
        header = ["Value"]
        sources = [report]

    def block(title, getter):
        rows = [f"[{title}]", "Metric".ljust(14) + "".join(h.rjust(10) for h in header)]
        for metric in METRICS + ("accuracy",):
            cells = [_pct(getter(src, metric)) for src in sources]
            rows.append(METRIC_TITLES[metric].ljust(14) + "".join(c.rjust(10) for c in cells))
        return rows

    lines = block("macro", lambda src, m: src.accuracy if m == "accuracy" else src.macro[m])
    for k, name in enumerate(report.class_names):
        lines.append("")
        lines += block(f"class {name}",
                       lambda src, m, k=k: src.accuracy if m == "accuracy" else src.per_class[k].get(m))
    if report.excluded:
        lines.append("")
        lines.append("undefined (excluded from averages): " + ", ".join(report.excluded))
    return "\n".join(lines) + "\n"
