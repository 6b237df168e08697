"""
特征矩阵数据集（Dataset）与 CSV 读写。

数据集是不可变的：构造时完成全部校验，之后数组被置为只读，可被多个线程安全读取。
CSV 约定：UTF-8、逗号分隔、必须有表头、小数点为 `.`、数值单元不加引号。
"""

import csv
import logging
import math
import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dataset:
    """
    n×s 实数特征矩阵 + 整数类别标签。

    - features: (n, s) float64，行主序，全部有限
    - labels: (n,) int64，取值 [0, C)，每一类至少出现一次
    - feature_names: 长度 s，互不重复
    - class_names: 长度 C
    """

    features: np.ndarray
    labels: np.ndarray
    feature_names: Tuple[str, ...]
    class_names: Tuple[str, ...]

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        self._validate()
        features.setflags(write=False)
        labels.setflags(write=False)

    def _validate(self):
        if self.features.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got {self.features.ndim}-D")
        n, s = self.features.shape
        if n == 0:
            raise DataError("empty dataset")
        if self.labels.shape != (n,):
            raise DataError(f"label count {self.labels.shape[0]} does not match row count {n}")
        if len(self.feature_names) != s:
            raise DataError(f"{len(self.feature_names)} feature names for {s} columns")
        if len(set(self.feature_names)) != s:
            raise DataError("feature names are not unique")
        c = len(self.class_names)
        if c == 0:
            raise DataError("no classes")
        if self.labels.min() < 0 or self.labels.max() >= c:
            raise DataError(f"labels must lie in [0, {c})")
        missing = np.flatnonzero(np.bincount(self.labels, minlength=c) == 0)
        if missing.size:
            names = ", ".join(self.class_names[i] for i in missing)
            raise DataError(f"classes without samples: {names}")
        if not np.all(np.isfinite(self.features)):
            row, col = np.argwhere(~np.isfinite(self.features))[0]
            raise DataError("non-finite feature value", row=int(row) + 1, column=self.feature_names[col],
                            column_index=int(col) + 1)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, rows: Sequence[int]) -> "Dataset":
        """按行索引取子集，类别表保持不变。"""
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.features[rows], self.labels[rows], self.feature_names, self.class_names)


def read_matrix_csv(path: str, label_column: Optional[str] = None,
                    feature_columns: Optional[Sequence[str]] = None
                    ) -> Tuple[List[str], np.ndarray, Optional[List[str]]]:
    """
    读取数值 CSV。

    返回 (特征列名, (n, s) 矩阵, 原始标签字符串或 None)。
    label_column 为 None 时不要求标签列；给定时必须存在。
    feature_columns 给定时只按该顺序读取这些列，其余列忽略；缺列时报错并列出缺失与多余的列。
    错误位置：行号为 1 起的数据行号（表头不计），列给出 1 起的列号与列名。
    """
    if not os.path.isfile(path):
        raise DataError(f"dataset file not found: {path}")

    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or not any(cell.strip() for cell in header):
            raise DataError(f"missing header row in {path}")
        header = [cell.strip() for cell in header]
        if len(set(header)) != len(header):
            raise DataError(f"duplicate column names in header of {path}")

        label_pos = None
        if label_column is not None:
            if label_column not in header:
                raise DataError(f"label column not found in header of {path}", column=label_column)
            label_pos = header.index(label_column)
        if feature_columns is None:
            feature_pos = [j for j in range(len(header)) if j != label_pos]
        else:
            missing = [name for name in feature_columns if name not in header]
            extra = [name for name in header if name not in set(feature_columns) and name != label_column]
            if missing:
                raise DataError(
                    f"schema mismatch in {path}: missing columns [{', '.join(missing)}]; "
                    f"extra columns [{', '.join(extra)}]")
            if extra:
                logger.info(f"忽略 {len(extra)} 个模型未使用的列")
            feature_pos = [header.index(name) for name in feature_columns]
        feature_names = [header[j] for j in feature_pos]

        rows: List[List[float]] = []
        raw_labels: List[str] = []
        width = len(header)
        for row_no, cells in enumerate(reader, start=1):
            if not cells:
                continue  # 空行
            if len(cells) != width:
                raise DataError(f"ragged row: expected {width} cells, got {len(cells)}", row=row_no)
            values = []
            for j in feature_pos:
                cell = cells[j].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(f"non-numeric feature cell {cell!r}", row=row_no, column=header[j],
                                    column_index=j + 1) from None
                if not math.isfinite(value):
                    raise DataError(f"non-finite feature cell {cell!r}", row=row_no, column=header[j],
                                    column_index=j + 1)
                values.append(value)
            rows.append(values)
            if label_pos is not None:
                label = cells[label_pos].strip()
                if not label:
                    raise DataError("empty label cell", row=row_no, column=label_column, column_index=label_pos + 1)
                raw_labels.append(label)

    matrix = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(feature_names))
    return feature_names, matrix, (raw_labels if label_pos is not None else None)


def intern_labels(raw_labels: Sequence[str]) -> Tuple[np.ndarray, Tuple[str, ...]]:
    """
    把标签字符串映射为稠密整数。

    全部是整数时按数值升序编号，否则按首次出现的顺序编号。
    """
    try:
        ints = [int(label) for label in raw_labels]
    except ValueError:
        ints = None

    if ints is not None:
        classes = sorted(set(ints))
        index = {v: i for i, v in enumerate(classes)}
        labels = np.array([index[v] for v in ints], dtype=np.int64)
        return labels, tuple(str(v) for v in classes)

    index = {}
    for label in raw_labels:
        if label not in index:
            index[label] = len(index)
    labels = np.array([index[label] for label in raw_labels], dtype=np.int64)
    return labels, tuple(index)


def load_csv(path: str, label_column: str) -> Dataset:
    """读取带标签的特征 CSV 并构造 Dataset。"""
    feature_names, matrix, raw_labels = read_matrix_csv(path, label_column)
    if matrix.shape[0] == 0:
        raise DataError(f"empty dataset: {path}")
    if matrix.shape[1] == 0:
        raise DataError(f"no feature columns in {path}")
    labels, class_names = intern_labels(raw_labels)
    dataset = Dataset(matrix, labels, feature_names, class_names)
    logger.info(f"读取数据集 {path}：{dataset.n_samples} 行 × {dataset.n_features} 列，{dataset.n_classes} 类")
    return dataset


def write_csv(path: str, header: Sequence[str], rows) -> None:
    """写出 CSV；实数使用 repr 以保证可逐位回读。"""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def write_dataset_csv(dataset: Dataset, path: str, label_column: str = "label") -> None:
    """把数据集写回 CSV，标签列写类别名。"""
    header = list(dataset.feature_names) + [label_column]
    rows = (
        [float(v) for v in dataset.features[i]] + [dataset.class_names[dataset.labels[i]]]
        for i in range(dataset.n_samples)
    )
    write_csv(path, header, rows)
