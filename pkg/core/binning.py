"""
直方图分箱与互斥特征捆绑（EFB）。

分箱：每个特征按不同取值的等距分位点切分，最多 max_bin 个箱；
      不同取值不超过 max_bin 时每个取值一箱（此时直方图分裂即精确贪心）；
      列中出现 0 时，0 单独占一箱（其箱号称为默认箱，EFB 据此判断“非零”）。
捆绑：冲突图贪心。两个特征的冲突数 = 二者同时非零的行数。
      捆绑列中 0 号槽表示“所有成员都在默认箱”，成员 f 的第 b 箱写作 offset_f + b。
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from core.errors import ConfigError

logger = logging.getLogger(__name__)

MAX_BUNDLE_WIDTH = 65535
BIN_DTYPE = np.uint16


@dataclass(frozen=True)
class BinnedMatrix:
    """
    分箱后的矩阵。

    bins          (n, 列数)；未捆绑时一列一个特征、offset 为 0，捆绑后一列一个 bundle
    boundaries    每个原始特征的有限上边界（严格递增），箱数 = len + 1
    num_bins      每个原始特征的箱数
    default_bins  每个原始特征中 0 所在的箱；列中没有 0 时为 -1
    bundle_map    原始特征 -> (列号, 取值偏移)
    bundles       每一列的成员特征，按偏移升序
    """

    bins: np.ndarray
    boundaries: Tuple[np.ndarray, ...]
    num_bins: np.ndarray
    default_bins: np.ndarray
    bundle_map: Tuple[Tuple[int, int], ...]
    bundles: Tuple[Tuple[int, ...], ...]

    @property
    def n_rows(self) -> int:
        return self.bins.shape[0]

    @property
    def n_features(self) -> int:
        return len(self.boundaries)

    @property
    def n_columns(self) -> int:
        return self.bins.shape[1]

    @property
    def bundled(self) -> bool:
        return any(offset > 0 for _, offset in self.bundle_map)

    def column_widths(self) -> np.ndarray:
        """每一列可能出现的取值个数。"""
        widths = np.zeros(self.n_columns, dtype=np.int64)
        for f, (col, offset) in enumerate(self.bundle_map):
            widths[col] = max(widths[col], offset + int(self.num_bins[f]))
        return widths

    def fill_bins(self) -> np.ndarray:
        """解码时“不在本列取值范围内”的特征所落入的箱。"""
        return np.where(self.default_bins >= 0, self.default_bins, 0)


def _midpoints(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    return lo / 2.0 + hi / 2.0


def feature_boundaries(values: np.ndarray, max_bin: int) -> np.ndarray:
    """计算单列的有限上边界。"""
    distinct = np.unique(values)
    if distinct.size <= 1:
        return np.empty(0, dtype=np.float64)
    if distinct.size <= max_bin:
        return _midpoints(distinct[:-1], distinct[1:])

    zero_edges = []
    pos = int(np.searchsorted(distinct, 0.0))
    if pos < distinct.size and distinct[pos] == 0.0:
        if pos > 0:
            zero_edges.append(distinct[pos - 1] / 2.0)
        if pos + 1 < distinct.size:
            zero_edges.append(distinct[pos + 1] / 2.0)
    if len(zero_edges) > max_bin - 1:
        # max_bin=2 且 0 两侧都有取值：只能把 0 与负值放在同一箱
        zero_edges = zero_edges[-1:]

    budget = max_bin - 1 - len(zero_edges)
    edges = list(zero_edges)
    if budget > 0:
        positions = np.linspace(0, distinct.size - 1, budget + 2)[1:-1]
        idx = np.minimum(np.floor(positions).astype(np.int64), distinct.size - 2)
        edges.extend(_midpoints(distinct[idx], distinct[idx + 1]))
    return np.unique(np.asarray(edges, dtype=np.float64))


def bin_values(features: np.ndarray, boundaries) -> np.ndarray:
    """用已保存的边界把原始特征映射为箱号：x <= edge[k] 落入第 k 箱。"""
    features = np.asarray(features, dtype=np.float64)
    out = np.empty(features.shape, dtype=BIN_DTYPE)
    for f, edges in enumerate(boundaries):
        out[:, f] = np.searchsorted(edges, features[:, f], side="left")
    return out


def bin_features(dataset, max_bin: int) -> BinnedMatrix:
    """对数据集逐列分箱，返回未捆绑的 BinnedMatrix。"""
    if max_bin < 2:
        raise ConfigError(f"max_bin must be at least 2, got {max_bin}")
    features = dataset.features
    boundaries = tuple(feature_boundaries(features[:, f], max_bin) for f in range(features.shape[1]))
    bins = bin_values(features, boundaries)
    num_bins = np.array([b.size + 1 for b in boundaries], dtype=np.int64)

    default_bins = np.full(features.shape[1], -1, dtype=np.int64)
    for f in range(features.shape[1]):
        zeros = features[:, f] == 0.0
        if zeros.any():
            default_bins[f] = int(bins[np.argmax(zeros), f])

    constant = int(np.sum(num_bins == 1))
    if constant:
        logger.warning(f"{constant} 个特征在训练行上为常数，只有一个箱")
    s = features.shape[1]
    return BinnedMatrix(
        bins=bins,
        boundaries=boundaries,
        num_bins=num_bins,
        default_bins=default_bins,
        bundle_map=tuple((f, 0) for f in range(s)),
        bundles=tuple((f,) for f in range(s)),
    )


def efb_bundle(binned: BinnedMatrix, efb_max_conflict_rate: float) -> BinnedMatrix:
    """
    贪心捆绑互斥特征。

    特征按非零行数降序（同数按特征号）依次尝试加入第一个新增冲突不超过
    rate·n 的 bundle，否则新开一个。冲突行上后加入的特征覆盖先加入的。
    """
    if not 0.0 <= efb_max_conflict_rate <= 1.0:
        raise ConfigError(f"efb_max_conflict_rate must lie in [0, 1], got {efb_max_conflict_rate}")
    if binned.bundled:
        raise ValueError("matrix is already bundled")

    n = binned.n_rows
    masks = binned.bins != binned.default_bins[None, :]
    nnz = masks.sum(axis=0)
    order = np.argsort(-nnz, kind="stable")
    limit = efb_max_conflict_rate * n

    members: List[List[int]] = []
    used: List[np.ndarray] = []
    widths: List[int] = []
    for f in order:
        f = int(f)
        width = int(binned.num_bins[f])
        for b in range(len(members)):
            if widths[b] + width > MAX_BUNDLE_WIDTH:
                continue
            if np.count_nonzero(used[b] & masks[:, f]) <= limit:
                members[b].append(f)
                used[b] |= masks[:, f]
                widths[b] += width
                break
        else:
            members.append([f])
            used.append(masks[:, f].copy())
            widths.append(1 + width)

    bins = np.zeros((n, len(members)), dtype=BIN_DTYPE)
    bundle_map = [None] * binned.n_features
    for col, group in enumerate(members):
        offset = 1
        for f in group:
            rows = masks[:, f]
            bins[rows, col] = offset + binned.bins[rows, f]
            bundle_map[f] = (col, offset)
            offset += int(binned.num_bins[f])

    logger.debug(f"EFB：{binned.n_features} 个特征捆绑为 {len(members)} 列")
    return BinnedMatrix(
        bins=bins,
        boundaries=binned.boundaries,
        num_bins=binned.num_bins,
        default_bins=binned.default_bins,
        bundle_map=tuple(bundle_map),
        bundles=tuple(tuple(g) for g in members),
    )


def decode_feature(binned: BinnedMatrix, f: int, rows=None) -> np.ndarray:
    """从（可能已捆绑的）列中还原特征 f 的箱号。"""
    col, offset = binned.bundle_map[f]
    values = binned.bins[:, col] if rows is None else binned.bins[rows, col]
    values = values.astype(np.int64)
    inside = (values >= offset) & (values < offset + binned.num_bins[f])
    return np.where(inside, values - offset, binned.fill_bins()[f])


def decode_bins(binned: BinnedMatrix) -> np.ndarray:
    """还原全部特征的箱号，(n, s)。冲突率为 0 时与捆绑前逐格相同。"""
    out = np.empty((binned.n_rows, binned.n_features), dtype=np.int64)
    for f in range(binned.n_features):
        out[:, f] = decode_feature(binned, f)
    return out
