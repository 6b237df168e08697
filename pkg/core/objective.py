"""
目标函数（Objective）

与调度策略一样，目标函数是可互换的一等对象：同一接口，两种实现。

  binary_logistic     p = 1/(1+e^-raw)，g = p - y，h = p(1-p)
  multiclass_softmax  p_k = softmax(raw)_k，g_k = p_k - 1{y=k}，h_k = p_k(1-p_k)

g 是损失对原始得分的正向梯度；叶子值的负号在 Newton 步中吸收。
h 下限截断为 1e-16。
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Dict

import numpy as np
from scipy.special import expit, logsumexp, softmax

from core.errors import ConfigError, DataError

HESSIAN_FLOOR = 1e-16


class ObjectiveType(Enum):
    """目标函数类型。"""
    BINARY_LOGISTIC = "binary_logistic"
    MULTICLASS_SOFTMAX = "multiclass_softmax"


@dataclass(frozen=True)
class GradientVector:
    """一阶梯度 g 与二阶导 h；二分类为 (n,)，多分类为 (n, C)。"""
    g: np.ndarray
    h: np.ndarray

    def ranking_magnitude(self) -> np.ndarray:
        """GOSS 排序用的逐样本标量：多分类取 Σ_k |g_k|。"""
        if self.g.ndim == 1:
            return np.abs(self.g)
        return np.abs(self.g).sum(axis=1)


class Objective(ABC):
    """抽象目标函数基类。"""

    @property
    @abstractmethod
    def objective_type(self) -> ObjectiveType:
        pass

    @property
    def name(self) -> str:
        return self.objective_type.value

    @abstractmethod
    def trees_per_iteration(self, num_classes: int) -> int:
        """每轮迭代生长的树数。"""

    @abstractmethod
    def base_score(self, labels: np.ndarray, num_classes: int) -> np.ndarray:
        """由类别先验得到的初始原始得分，形状 (trees_per_iteration,)。"""

    @abstractmethod
    def gradients(self, labels: np.ndarray, raw: np.ndarray) -> GradientVector:
        pass

    @abstractmethod
    def probabilities(self, raw: np.ndarray) -> np.ndarray:
        """返回 (n, C) 的类别概率。"""

    @abstractmethod
    def loss(self, labels: np.ndarray, raw: np.ndarray) -> float:
        """平均对数损失。"""


class BinaryLogistic(Objective):
    """二分类逻辑损失，类别 1 为正类。"""

    @property
    def objective_type(self) -> ObjectiveType:
        return ObjectiveType.BINARY_LOGISTIC

    def trees_per_iteration(self, num_classes: int) -> int:
        return 1

    def base_score(self, labels: np.ndarray, num_classes: int) -> np.ndarray:
        prior = float(np.mean(labels == 1))
        return np.array([np.log(prior) - np.log1p(-prior)])

    def gradients(self, labels: np.ndarray, raw: np.ndarray) -> GradientVector:
        p = expit(raw)
        g = p - labels
        h = np.maximum(p * (1.0 - p), HESSIAN_FLOOR)
        return GradientVector(g, h)

    def probabilities(self, raw: np.ndarray) -> np.ndarray:
        p = expit(raw)
        return np.column_stack([1.0 - p, p])

    def loss(self, labels: np.ndarray, raw: np.ndarray) -> float:
        return float(np.mean(np.logaddexp(0.0, raw) - labels * raw))


class MulticlassSoftmax(Objective):
    """多分类 softmax 交叉熵，每轮每类一棵树。"""

    @property
    def objective_type(self) -> ObjectiveType:
        return ObjectiveType.MULTICLASS_SOFTMAX

    def trees_per_iteration(self, num_classes: int) -> int:
        return num_classes

    def base_score(self, labels: np.ndarray, num_classes: int) -> np.ndarray:
        prior = np.bincount(labels, minlength=num_classes) / labels.size
        return np.log(prior)

    def gradients(self, labels: np.ndarray, raw: np.ndarray) -> GradientVector:
        p = softmax(raw, axis=1)
        onehot = np.zeros_like(p)
        onehot[np.arange(labels.size), labels] = 1.0
        g = p - onehot
        h = np.maximum(p * (1.0 - p), HESSIAN_FLOOR)
        return GradientVector(g, h)

    def probabilities(self, raw: np.ndarray) -> np.ndarray:
        return softmax(raw, axis=1)

    def loss(self, labels: np.ndarray, raw: np.ndarray) -> float:
        return float(np.mean(logsumexp(raw, axis=1) - raw[np.arange(labels.size), labels]))


_OBJECTIVES: Dict[ObjectiveType, Objective] = {
    ObjectiveType.BINARY_LOGISTIC: BinaryLogistic(),
    ObjectiveType.MULTICLASS_SOFTMAX: MulticlassSoftmax(),
}


def get_objective(name) -> Objective:
    """按名称或类型取目标函数。"""
    try:
        key = name if isinstance(name, ObjectiveType) else ObjectiveType(name)
    except ValueError:
        raise ConfigError(f"unknown objective {name!r}") from None
    return _OBJECTIVES[key]


def compute_gradients(objective, labels: np.ndarray, raw_scores: np.ndarray) -> GradientVector:
    """在当前原始得分处计算 g、h。raw_scores 形状为 (n,) 或 (n, C)。"""
    objective = get_objective(objective) if not isinstance(objective, Objective) else objective
    labels = np.asarray(labels, dtype=np.int64)
    raw_scores = np.asarray(raw_scores, dtype=np.float64)
    if raw_scores.shape[0] != labels.size:
        raise DataError(f"raw score rows {raw_scores.shape[0]} do not match label count {labels.size}")
    if objective.objective_type is ObjectiveType.BINARY_LOGISTIC:
        if raw_scores.ndim != 1:
            raise DataError("binary_logistic expects a 1-D raw score vector")
        num_classes = 2
    else:
        if raw_scores.ndim != 2:
            raise DataError("multiclass_softmax expects an (n, C) raw score matrix")
        num_classes = raw_scores.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
        raise DataError(f"labels must lie in [0, {num_classes})")
    return objective.gradients(labels, raw_scores)
