"""
基于梯度的单侧采样（GOSS）。

按 |g| 降序取前 ceil(a·n) 个样本为集合 A（同值按样本号升序），
再从其余样本 A^c 中无放回均匀抽取 min(ceil(b·n), |A^c|) 个为集合 B，
B 中样本以 w = (1-a)/b 加权，使 w·Σ_B g 成为 Σ_{A^c} g 的无偏估计。
a = 1 为全量模式：B 为空，w 定义为 1。
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from core.errors import ConfigError
from core.objective import GradientVector
from core.rng import seeded_order

logger = logging.getLogger(__name__)

_SIZE_TOL = 1e-9


@dataclass(frozen=True)
class GossSample:
    """A：大梯度样本；B：随机保留的小梯度样本；weight：B 的权重。"""

    A: np.ndarray
    B: np.ndarray
    weight: float
    n: int

    def rows(self) -> np.ndarray:
        """参与本轮建树的样本（A ∪ B，升序）。"""
        return np.sort(np.concatenate([self.A, self.B]))

    def sample_weights(self) -> np.ndarray:
        """长度 n 的样本权重：A 为 1，B 为 w，其余为 0。"""
        wt = np.zeros(self.n, dtype=np.float64)
        wt[self.A] = 1.0
        wt[self.B] = self.weight
        return wt


def check_rates(a: float, b: float) -> None:
    if not 0.0 < a <= 1.0:
        raise ConfigError(f"goss_top_rate must lie in (0, 1], got {a}")
    if not 0.0 <= b < 1.0:
        raise ConfigError(f"goss_other_rate must lie in [0, 1), got {b}")
    if a + b > 1.0 + _SIZE_TOL:
        raise ConfigError(f"goss_top_rate + goss_other_rate must not exceed 1, got {a + b}")
    if a == 1.0 and b != 0.0:
        raise ConfigError("goss_other_rate must be 0 when goss_top_rate is 1")
    if a < 1.0 and b == 0.0:
        raise ConfigError("goss_other_rate must be positive when goss_top_rate is below 1")


def goss_sample(grad: GradientVector, a: float, b: float, rng: np.random.BitGenerator) -> GossSample:
    """执行一次 GOSS 采样；rng 为 core.rng.stream 返回的比特生成器。"""
    check_rates(a, b)
    magnitude = grad.ranking_magnitude()
    n = magnitude.size
    order = np.argsort(-magnitude, kind="stable")

    top = min(n, int(math.ceil(a * n - _SIZE_TOL)))
    A = np.sort(order[:top])
    if a == 1.0:
        return GossSample(A=A, B=np.empty(0, dtype=np.int64), weight=1.0, n=n)

    rest = order[top:]
    size = min(rest.size, int(math.ceil(b * n - _SIZE_TOL)))
    picked = seeded_order(rng, rest.size)[:size]
    B = np.sort(rest[picked])
    return GossSample(A=A, B=B, weight=(1.0 - a) / b, n=n)


def estimated_variance_gain(left_gsum, right_gsum, left_count, right_count, n):
    """
    估计方差增益 (1/n)·(G_L²/n_l + G_R²/n_r)。

    G 为 GOSS 加权梯度和，n_l、n_r 为加权计数 |A_l| + w·|B_l|。
    支持 numpy 数组逐元素计算。
    """
    return (np.square(left_gsum) / left_count + np.square(right_gsum) / right_count) / n
