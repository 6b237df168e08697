"""
计数器式随机流（Counter-based Random Streams）

所有随机性都来自一个顶层 seed，经由 Philox4x64-10 派生出互不相交的流。
派生规则（与 ARCHITECTURE.md 中的说明逐位一致）：

    key = (seed mod 2^64) + ((stage << 32 | sub) << 64)
    bitgen = numpy.random.Philox(key=key)      # counter 从 0 开始

stage 区分流水线阶段，sub 区分同一阶段内的子流（类别、迭代轮次等）。
洗牌顺序定义为 random_raw 输出的稳定 argsort：键相同则按原位置。
"""

from enum import IntEnum

import numpy as np

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


class Stage(IntEnum):
    """随机流所属的流水线阶段。"""
    SPLIT = 1  # 60/20/20 划分，sub = 类别
    FOLD = 2   # k 折划分，sub = 类别
    GOSS = 3   # 每轮 GOSS 采样，sub = 迭代轮次


def stream(seed: int, stage: int, sub: int = 0) -> np.random.Philox:
    """返回 (seed, stage, sub) 对应的 Philox 比特生成器。"""
    if sub < 0 or sub > _MASK32:
        raise ValueError(f"sub stream index {sub} out of range")
    key = (int(seed) & _MASK64) + (((int(stage) << 32) | int(sub)) << 64)
    return np.random.Philox(key=key)


def seeded_order(bitgen: np.random.Philox, m: int) -> np.ndarray:
    """用 m 个原始 64 位输出做排序键，得到 0..m-1 的一个置换。"""
    if m == 0:
        return np.empty(0, dtype=np.int64)
    keys = bitgen.random_raw(m)
    return np.argsort(keys, kind="stable").astype(np.int64)
