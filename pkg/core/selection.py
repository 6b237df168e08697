"""
单因素方差分析（one-way ANOVA）F 检验特征选择。

F_j = [Σ_c n_c (x̄_cj - x̄_j)² / (C-1)] / [Σ_c Σ_{i∈c} (x_ij - x̄_cj)² / (n-C)]

两遍累加：先求均值，再累加离差平方，避免大均值激活值下一遍公式的精度损失。
组内方差为 0 而组间方差为正时得分为 +inf（排在所有有限得分之前），
两者都为 0 时得分为 0。
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import fdtrc

from core.errors import ConfigError, DataError
from data.dataset import Dataset, write_csv

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FScores:
    """逐特征 F 统计量、按得分降序的排名（同分按特征号升序）以及 p 值。"""

    scores: np.ndarray
    ranking: np.ndarray
    p_values: np.ndarray

    @property
    def n_features(self) -> int:
        return self.scores.size

    def ranks(self) -> np.ndarray:
        """每个特征的名次（1 起）。"""
        out = np.empty(self.n_features, dtype=np.int64)
        out[self.ranking] = np.arange(1, self.n_features + 1)
        return out


def anova_f_scores(dataset: Dataset) -> FScores:
    c = dataset.n_classes
    counts = dataset.class_counts()
    if c < 2:
        raise DataError("ANOVA scoring needs at least two classes")
    small = np.flatnonzero(counts < 2)
    if small.size:
        raise DataError(f"class {dataset.class_names[small[0]]!r} has fewer than 2 samples")

    x = dataset.features
    n, s = x.shape
    grand_mean = x.mean(axis=0)
    ss_between = np.zeros(s)
    ss_within = np.zeros(s)
    for k in range(c):
        xk = x[dataset.labels == k]
        mean_k = xk.mean(axis=0)
        dev = xk - mean_k
        within = np.sum(dev * dev, axis=0)
        within[xk.max(axis=0) == xk.min(axis=0)] = 0.0  # 组内恒定列
        ss_within += within
        ss_between += counts[k] * (mean_k - grand_mean) ** 2

    ms_between = ss_between / (c - 1)
    ms_within = ss_within / (n - c)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = ms_between / ms_within
    scores = np.where(ms_within > 0, scores, np.where(ms_between > 0, np.inf, 0.0))

    p_values = np.where(np.isinf(scores), 0.0, fdtrc(c - 1, n - c, np.where(np.isinf(scores), 0.0, scores)))
    ranking = np.argsort(-scores, kind="stable")
    n_inf = int(np.isinf(scores).sum())
    if n_inf:
        logger.info(f"{n_inf} 个特征组内方差为 0 且组间可分，F 记为 +inf")
    return FScores(scores, ranking.astype(np.int64), p_values)


def select_top_k(fscores: FScores, k: int) -> np.ndarray:
    """取排名前 k 的特征，按特征号升序返回。"""
    if not 1 <= k <= fscores.n_features:
        raise ConfigError(f"k must lie in [1, {fscores.n_features}], got {k}")
    return np.sort(fscores.ranking[:k])


def project_dataset(dataset: Dataset, indices: Sequence[int]) -> Dataset:
    """只保留 indices 指定的特征列（必须严格递增且在范围内），标签不变。"""
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1 or idx.size == 0:
        raise DataError("feature index list must be a non-empty 1-D sequence")
    if idx.min() < 0 or idx.max() >= dataset.n_features:
        raise DataError(f"feature index out of range [0, {dataset.n_features})")
    if np.any(np.diff(idx) <= 0):
        raise DataError("feature indices must be strictly increasing without duplicates")
    return Dataset(
        dataset.features[:, idx],
        dataset.labels,
        tuple(dataset.feature_names[i] for i in idx),
        dataset.class_names,
    )


def write_scores_csv(fscores: FScores, feature_names: Sequence[str], path: str) -> None:
    """审计用 CSV：feature_name, f_score, rank, p_value（按特征顺序）。"""
    ranks = fscores.ranks()
    rows = (
        (feature_names[j], float(fscores.scores[j]), int(ranks[j]), float(fscores.p_values[j]))
        for j in range(fscores.n_features)
    )
    write_csv(path, ["feature_name", "f_score", "rank", "p_value"], rows)
