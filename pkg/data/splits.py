"""
确定性分层划分：60/20/20 划分计划（SplitPlan）与 k 折计划（FoldPlan）。

同一 (数据集, 比例或 k, seed) 必然得到逐位相同的计划。
每个类别使用独立的 Philox 子流洗牌（见 core/rng.py），因此类别之间互不影响。
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from core.errors import ConfigError, DataError
from core.rng import Stage, seeded_order, stream
from data.dataset import Dataset

logger = logging.getLogger(__name__)

_RATIO_TOL = 1e-9


def _frozen(a) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SplitPlan:
    """训练 / 验证 / 测试三个互不相交的索引集合，并集为 {0..n-1}。"""

    train_idx: np.ndarray
    valid_idx: np.ndarray
    test_idx: np.ndarray
    seed: int

    def partitions(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.train_idx, self.valid_idx, self.test_idx


@dataclass(frozen=True)
class FoldPlan:
    """k 个测试折；每个样本恰好出现在一个折中。"""

    k: int
    fold_test_sets: Tuple[np.ndarray, ...]
    seed: int

    def train_indices(self, fold: int) -> np.ndarray:
        """第 fold 折的训练集：其余各折的并集（升序）。"""
        others = [s for i, s in enumerate(self.fold_test_sets) if i != fold]
        return np.sort(np.concatenate(others))


def largest_remainder(total: int, ratios: Sequence[float]) -> List[int]:
    """
    按比例把 total 个样本分给各分区，余数给小数部分最大的分区（同值取靠前分区）。
    """
    quotas = [r * total for r in ratios]
    counts = [int(math.floor(q + _RATIO_TOL)) for q in quotas]
    remainder = total - sum(counts)
    fractions = [q - c for q, c in zip(quotas, counts)]
    for p in sorted(range(len(ratios)), key=lambda p: (-fractions[p], p))[:max(remainder, 0)]:
        counts[p] += 1
    return counts


def _check_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3:
        raise ConfigError(f"expected three split ratios, got {len(ratios)}")
    if any(r <= 0 for r in ratios):
        raise ConfigError(f"split ratios must be positive: {ratios}")
    if abs(sum(ratios) - 1.0) > _RATIO_TOL:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)!r}")
    return ratios


def _shuffled_class_members(dataset: Dataset, stage: Stage, seed: int, c: int) -> np.ndarray:
    members = np.flatnonzero(dataset.labels == c)
    return members[seeded_order(stream(seed, stage, c), members.size)]


def stratified_split(dataset: Dataset, ratios: Sequence[float], seed: int) -> SplitPlan:
    """分层划分：每个类别内先用种子洗牌，再按最大余数法切成三段。"""
    ratios = _check_ratios(ratios)
    parts: List[List[np.ndarray]] = [[], [], []]
    for c, count in enumerate(dataset.class_counts()):
        name = dataset.class_names[c]
        if count < 3:
            raise DataError(f"class {name!r} has {count} samples; at least 3 are needed for a three-way split")
        sizes = largest_remainder(int(count), ratios)
        if min(sizes) == 0:
            raise DataError(f"class {name!r} with {count} samples cannot appear in every partition for ratios {ratios}")
        shuffled = _shuffled_class_members(dataset, Stage.SPLIT, seed, c)
        cuts = np.cumsum(sizes)[:-1]
        for p, chunk in enumerate(np.split(shuffled, cuts)):
            parts[p].append(chunk)

    train, valid, test = (np.sort(np.concatenate(p)) for p in parts)
    logger.info(f"分层划分完成：train={train.size} valid={valid.size} test={test.size}（seed={seed}）")
    return SplitPlan(_frozen(train), _frozen(valid), _frozen(test), int(seed))


def stratified_kfold(dataset: Dataset, k: int, seed: int) -> FoldPlan:
    """
    分层 k 折：每个类别内洗牌后轮转分配到各折。

    轮转起点随前面各类的累计样本数偏移，使各折总样本数也尽量均衡。
    """
    if k < 2:
        raise ConfigError(f"fold count must be at least 2, got {k}")
    counts = dataset.class_counts()
    if k > counts.min():
        raise ConfigError(f"fold count {k} exceeds the smallest class size {int(counts.min())}")

    folds: List[List[np.ndarray]] = [[] for _ in range(k)]
    start = 0
    for c in range(dataset.n_classes):
        shuffled = _shuffled_class_members(dataset, Stage.FOLD, seed, c)
        assignment = (start + np.arange(shuffled.size)) % k
        for f in range(k):
            folds[f].append(shuffled[assignment == f])
        start = (start + shuffled.size) % k

    test_sets = tuple(_frozen(np.sort(np.concatenate(f))) for f in folds)
    logger.info(f"分层 {k} 折完成：各折大小 {[s.size for s in test_sets]}（seed={seed}）")
    return FoldPlan(int(k), test_sets, int(seed))
