"""
合成特征矩阵：少量按类别平移的信息特征 + 大量纯噪声特征。

用于测试与基准，模拟“预训练网络特征 + 标签”的形态（例如 1125 行、125/500/500、1664 列）。
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from data.dataset import Dataset


def informative_dataset(class_counts: Sequence[int], n_features: int, n_informative: int,
                        separation: float = 3.0, seed: int = 0,
                        class_names: Optional[Sequence[str]] = None) -> Tuple[Dataset, np.ndarray]:
    """
    返回 (数据集, 信息特征的列号)。

    每个类别在信息特征上有一个随机均值向量（尺度为 separation），
    所有列叠加标准正态噪声；信息特征随机分布在各列中，行按类别交错打乱。
    """
    rng = np.random.default_rng(seed)
    c = len(class_counts)
    n = int(sum(class_counts))
    labels = np.repeat(np.arange(c), class_counts)
    labels = labels[rng.permutation(n)]

    features = rng.standard_normal((n, n_features))
    informative = np.sort(rng.choice(n_features, size=n_informative, replace=False))
    centers = rng.standard_normal((c, n_informative)) * separation
    features[:, informative] += centers[labels]

    names = tuple(f"f{j}" for j in range(n_features))
    classes = tuple(class_names) if class_names is not None else tuple(f"class{k}" for k in range(c))
    return Dataset(features, labels, names, classes), informative


def sparse_matrix(n_rows: int, n_features: int, density: float, seed: int = 0,
                  levels: int = 5) -> np.ndarray:
    """非零比例约为 density 的稀疏矩阵，非零取值来自 1..levels。"""
    rng = np.random.default_rng(seed)
    mask = rng.random((n_rows, n_features)) < density
    values = rng.integers(1, levels + 1, size=(n_rows, n_features)).astype(np.float64)
    return np.where(mask, values, 0.0)
