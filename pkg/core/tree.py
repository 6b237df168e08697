"""
直方图决策树与按叶生长（leaf-wise / best-first）。

每个待分裂叶子带着它的最佳分裂增益进入优先队列（heapq，(-gain, 计数器, 节点)），
每次取全局增益最大的叶子分裂，直到叶子数达到 num_leaves、深度上限生效，
或没有叶子存在可接受的分裂。

直方图按“列”（bundle）累加，复杂度 O(#data × #bundle)；分裂搜索前再按
bundle_map 展开为逐特征直方图，默认箱（0 所在箱）由节点总量减去其余箱得到。
较大的子节点直方图由父节点减去较小子节点得到。
"""

import heapq
import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from core.binning import BinnedMatrix, decode_feature
from core.goss import GossSample, estimated_variance_gain

logger = logging.getLogger(__name__)

LEAF_LAMBDA = 1e-3
GAIN_RTOL = 1e-12


@dataclass(frozen=True)
class NodeStats:
    """节点上的 GOSS 加权统计量。"""
    g_sum: float
    h_sum: float
    weight: float  # |A| + w·|B|
    count: int     # 参与建树的样本数

    def leaf_value(self) -> float:
        return -self.g_sum / (self.h_sum + LEAF_LAMBDA)


@dataclass(frozen=True)
class SplitInfo:
    feature: int
    bin: int
    gain: float


@dataclass
class SlotHistogram:
    """按列槽位展开的直方图：加权 g、加权 h、加权计数、样本数。"""
    g: np.ndarray
    h: np.ndarray
    w: np.ndarray
    c: np.ndarray

    def __sub__(self, other: "SlotHistogram") -> "SlotHistogram":
        return SlotHistogram(self.g - other.g, self.h - other.h, self.w - other.w, self.c - other.c)


@dataclass(frozen=True)
class FeatureHistogram:
    """逐特征直方图，形状 (s, max_bins)，无效箱为 0。"""
    g: np.ndarray
    h: np.ndarray
    w: np.ndarray
    c: np.ndarray
    num_bins: np.ndarray


class HistogramLayout:
    """列槽位布局：第 j 列取值 v 位于全局槽位 col_base[j] + v。"""

    def __init__(self, binned: BinnedMatrix):
        self.binned = binned
        widths = binned.column_widths()
        self.col_base = np.concatenate([[0], np.cumsum(widths)[:-1]]).astype(np.int64)
        self.n_slots = int(widths.sum())
        self.positions = binned.bins.astype(np.int64) + self.col_base[None, :]

        bin_ids = np.arange(int(binned.num_bins.max()))
        self.valid = bin_ids[None, :] < binned.num_bins[:, None]
        starts = np.array([self.col_base[col] + offset for col, offset in binned.bundle_map], dtype=np.int64)
        self.feature_slots = np.where(self.valid, starts[:, None] + bin_ids[None, :], 0)
        # 不在本列取值范围内的行（默认箱，或冲突中被覆盖）解码到 fill 箱
        self.features = np.arange(binned.n_features)
        self.fill_of = binned.fill_bins()

    def build(self, rows: np.ndarray, gw: np.ndarray, hw: np.ndarray, wt: np.ndarray) -> SlotHistogram:
        """对 rows 累加槽位直方图；同一槽位内按行号顺序串行累加。"""
        ncols = self.positions.shape[1]
        pos = self.positions[rows].ravel()

        def acc(values):
            return np.bincount(pos, weights=np.repeat(values[rows], ncols), minlength=self.n_slots)

        counts = np.bincount(pos, minlength=self.n_slots).astype(np.int64)
        return SlotHistogram(acc(gw), acc(hw), acc(wt), counts)

    def feature_view(self, hist: SlotHistogram, stats: NodeStats) -> FeatureHistogram:
        """展开为逐特征直方图，并由节点总量回填 fill 箱，使计数与解码后的分流一致。"""
        parts = []
        for values, total in ((hist.g, stats.g_sum), (hist.h, stats.h_sum),
                              (hist.w, stats.weight), (hist.c, stats.count)):
            x = np.where(self.valid, values[self.feature_slots], 0)
            x[self.features, self.fill_of] = 0
            x[self.features, self.fill_of] = total - x.sum(axis=1)
            parts.append(x)
        return FeatureHistogram(*parts, num_bins=self.binned.num_bins)


def node_stats(rows: np.ndarray, gw: np.ndarray, hw: np.ndarray, wt: np.ndarray) -> NodeStats:
    return NodeStats(float(np.sum(gw[rows])), float(np.sum(hw[rows])), float(np.sum(wt[rows])), int(rows.size))


def find_best_split(hist: FeatureHistogram, parent: NodeStats, config, n: int) -> Optional[SplitInfo]:
    """
    在所有特征、所有箱阈值上最大化估计方差增益减去父节点项。

    子节点样本数低于 min_samples_leaf、增益不超过 γ（或数值上为 0）时返回 None。
    同增益取特征号小者，再取箱号小者。
    """
    gl = np.cumsum(hist.g, axis=1)
    wl = np.cumsum(hist.w, axis=1)
    cl = np.cumsum(hist.c, axis=1)
    gr = parent.g_sum - gl
    wr = parent.weight - wl
    cr = parent.count - cl

    parent_term = (parent.g_sum ** 2 / parent.weight) / n if parent.weight > 0 else 0.0
    thresholds = np.arange(hist.g.shape[1])[None, :] < (hist.num_bins[:, None] - 1)
    ok = (thresholds & (cl >= config.min_samples_leaf) & (cr >= config.min_samples_leaf)
          & (wl > 0) & (wr > 0))
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = estimated_variance_gain(gl, gr, wl, wr, n) - parent_term
    gain = np.where(ok, gain, -np.inf)

    value = float(np.max(gain))
    if not np.isfinite(value) or value <= config.min_split_gain or value <= GAIN_RTOL * parent_term:
        return None
    # 相对差在 GAIN_RTOL 以内视为同增益，取 (特征号, 箱号) 最小者
    tie = GAIN_RTOL * max(abs(value), parent_term)
    best = int(np.argmax(gain >= value - tie))
    value = float(gain.flat[best])
    feature, bin_ = divmod(best, gain.shape[1])
    return SplitInfo(int(feature), int(bin_), value)


class Tree:
    """
    数组形式的回归树。节点 0 为根；split_feature 为 -1 的节点是叶子。

    split_bin 是原始特征的箱阈值（箱号 <= split_bin 走左子树），
    threshold 是对应的原始取值上边界，split_bundle 是训练时该特征所在的列。
    """

    def __init__(self, split_feature, split_bundle, split_bin, threshold, left, right,
                 value, gain, count):
        self.split_feature = np.asarray(split_feature, dtype=np.int64)
        self.split_bundle = np.asarray(split_bundle, dtype=np.int64)
        self.split_bin = np.asarray(split_bin, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.gain = np.asarray(gain, dtype=np.float64)
        self.count = np.asarray(count, dtype=np.int64)
        for a in (self.split_feature, self.split_bundle, self.split_bin, self.threshold,
                  self.left, self.right, self.value, self.gain, self.count):
            a.setflags(write=False)
        self.validate()

    @property
    def n_nodes(self) -> int:
        return self.split_feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.split_feature < 0))

    def is_leaf(self, node: int) -> bool:
        return self.split_feature[node] < 0

    def validate(self):
        n = self.n_nodes
        if n == 0:
            raise ValueError("tree has no nodes")
        parents = np.zeros(n, dtype=np.int64)
        for i in range(n):
            if self.is_leaf(i):
                if self.left[i] != -1 or self.right[i] != -1:
                    raise ValueError(f"leaf {i} has children")
                if not np.isfinite(self.value[i]):
                    raise ValueError(f"leaf {i} has a non-finite value")
                continue
            for child in (self.left[i], self.right[i]):
                if not 0 < child < n or child <= i:
                    raise ValueError(f"node {i} has an invalid child {child}")
                parents[child] += 1
        if parents[0] != 0 or np.any(parents[1:] != 1):
            raise ValueError("tree nodes do not form a single rooted tree")

    def leaf_index(self, feature_bins: np.ndarray) -> np.ndarray:
        """逐行下降到叶子，返回叶子节点号。"""
        node = np.zeros(feature_bins.shape[0], dtype=np.int64)
        rows = np.arange(feature_bins.shape[0])
        active = ~self.is_leaf_mask(node)
        while np.any(active):
            r = rows[active]
            nd = node[r]
            go_left = feature_bins[r, self.split_feature[nd]] <= self.split_bin[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = ~self.is_leaf_mask(node)
        return node

    def is_leaf_mask(self, nodes: np.ndarray) -> np.ndarray:
        return self.split_feature[nodes] < 0

    def predict_bins(self, feature_bins: np.ndarray) -> np.ndarray:
        """对箱号矩阵 (n, s) 输出叶子值。"""
        return self.value[self.leaf_index(feature_bins)]

    def split_features(self) -> np.ndarray:
        return self.split_feature[self.split_feature >= 0]


class _TreeBuilder:
    def __init__(self):
        self.split_feature: List[int] = []
        self.split_bundle: List[int] = []
        self.split_bin: List[int] = []
        self.threshold: List[float] = []
        self.left: List[int] = []
        self.right: List[int] = []
        self.value: List[float] = []
        self.gain: List[float] = []
        self.count: List[int] = []

    def add_leaf(self, stats: NodeStats) -> int:
        self.split_feature.append(-1)
        self.split_bundle.append(-1)
        self.split_bin.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(stats.leaf_value())
        self.gain.append(0.0)
        self.count.append(stats.count)
        return len(self.value) - 1

    def make_split(self, node: int, split: SplitInfo, binned: BinnedMatrix, left: int, right: int):
        self.split_feature[node] = split.feature
        self.split_bundle[node] = binned.bundle_map[split.feature][0]
        self.split_bin[node] = split.bin
        self.threshold[node] = float(binned.boundaries[split.feature][split.bin])
        self.left[node] = left
        self.right[node] = right
        self.gain[node] = split.gain

    def build(self) -> Tree:
        return Tree(self.split_feature, self.split_bundle, self.split_bin, self.threshold,
                    self.left, self.right, self.value, self.gain, self.count)


@dataclass
class _Leaf:
    node: int
    rows: np.ndarray
    depth: int
    stats: NodeStats
    hist: SlotHistogram
    split: Optional[SplitInfo]


def grow_tree_leafwise(binned: BinnedMatrix, g: np.ndarray, h: np.ndarray, sample: GossSample,
                       config, layout: Optional[HistogramLayout] = None) -> Tree:
    """
    按叶生长一棵树。

    g、h 为本棵树对应的 (n,) 梯度；样本权重取自 sample（A 为 1，B 为 w）。
    叶子值 = -(Σ 加权 g)/(Σ 加权 h + λ)，λ = 1e-3；学习率在集成累加时施加。
    """
    layout = layout or HistogramLayout(binned)
    wt = sample.sample_weights()
    gw, hw = g * wt, h * wt
    n = sample.n

    builder = _TreeBuilder()
    counter = itertools.count()
    heap = []

    def admit(leaf: _Leaf):
        if config.max_depth > 0 and leaf.depth >= config.max_depth:
            return
        view = layout.feature_view(leaf.hist, leaf.stats)
        leaf.split = find_best_split(view, leaf.stats, config, n)
        if leaf.split is not None:
            heapq.heappush(heap, (-leaf.split.gain, next(counter), leaf))

    rows = sample.rows()
    stats = node_stats(rows, gw, hw, wt)
    root = _Leaf(builder.add_leaf(stats), rows, 0, stats, layout.build(rows, gw, hw, wt), None)
    admit(root)

    n_leaves = 1
    while heap and n_leaves < config.num_leaves:
        _, _, leaf = heapq.heappop(heap)
        split = leaf.split
        go_left = decode_feature(binned, split.feature, leaf.rows) <= split.bin
        left_rows, right_rows = leaf.rows[go_left], leaf.rows[~go_left]

        if left_rows.size <= right_rows.size:
            left_hist = layout.build(left_rows, gw, hw, wt)
            right_hist = leaf.hist - left_hist
        else:
            right_hist = layout.build(right_rows, gw, hw, wt)
            left_hist = leaf.hist - right_hist

        children = []
        for child_rows, child_hist in ((left_rows, left_hist), (right_rows, right_hist)):
            child_stats = node_stats(child_rows, gw, hw, wt)
            children.append(_Leaf(builder.add_leaf(child_stats), child_rows, leaf.depth + 1,
                                  child_stats, child_hist, None))
        builder.make_split(leaf.node, split, binned, children[0].node, children[1].node)
        logger.debug(f"分裂节点 {leaf.node}：特征 {split.feature} 箱 {split.bin} 增益 {split.gain:.6g}")
        leaf.hist = None
        for child in children:
            admit(child)
        n_leaves += 1

    return builder.build()
