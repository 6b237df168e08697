"""
直方图树测试：分裂增益、叶子值、叶子数与深度上限、直方图相减，
以及“全量采样 + 每个取值一箱”时与逐阈值穷举建树逐节点一致。
"""

import heapq
import itertools
import logging
import unittest

import numpy as np

from core.binning import bin_features, decode_feature, efb_bundle
from core.booster import BoosterConfig, train
from core.goss import GossSample
from core.objective import get_objective
from core.tree import (GAIN_RTOL, LEAF_LAMBDA, HistogramLayout, Tree, find_best_split,
                       grow_tree_leafwise, node_stats)
from data.dataset import Dataset

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


def _binned(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    ds = Dataset(x, np.arange(x.shape[0]) % 2, tuple(f"f{j}" for j in range(x.shape[1])), ("a", "b"))
    return bin_features(ds, max_bin=255)


def _full(n):
    return GossSample(A=np.arange(n), B=np.empty(0, dtype=np.int64), weight=1.0, n=n)


def _config(**kw):
    base = dict(min_samples_leaf=1, num_leaves=31, max_depth=0, min_split_gain=0.0)
    base.update(kw)
    return BoosterConfig(**base)


def _reference_tree(x, g, h, config):
    """逐原始阈值穷举的按叶生长，增益公式与并列规则同直方图实现。"""
    n, s = x.shape
    edges = []
    for f in range(s):
        distinct = np.unique(x[:, f])
        edges.append(distinct[:-1] / 2.0 + distinct[1:] / 2.0)

    def best(rows):
        G, W = g[rows].sum(), rows.size
        parent = G * G / W / n
        candidates = []
        for f in range(s):
            for b, edge in enumerate(edges[f]):
                left = rows[x[rows, f] <= edge]
                right = rows[x[rows, f] > edge]
                if left.size < config.min_samples_leaf or right.size < config.min_samples_leaf:
                    continue
                gl, gr = g[left].sum(), g[right].sum()
                gain = (gl * gl / left.size + gr * gr / right.size) / n - parent
                candidates.append((f, b, gain, left, right))
        if not candidates:
            return None
        value = max(c[2] for c in candidates)
        if value <= config.min_split_gain or value <= GAIN_RTOL * parent:
            return None
        tie = GAIN_RTOL * max(abs(value), parent)
        return next(c for c in candidates if c[2] >= value - tie)

    nodes = {}
    counter = itertools.count()
    heap = []

    def add(rows, depth):
        node_id = len(nodes)
        nodes[node_id] = {'rows': rows, 'value': -g[rows].sum() / (h[rows].sum() + LEAF_LAMBDA)}
        if not (config.max_depth > 0 and depth >= config.max_depth):
            split = best(rows)
            if split is not None:
                heapq.heappush(heap, (-split[2], next(counter), node_id, depth, split))
        return node_id

    add(np.arange(n), 0)
    leaves = 1
    while heap and leaves < config.num_leaves:
        _, _, node_id, depth, (f, b, gain, left, right) = heapq.heappop(heap)
        l_id = add(left, depth + 1)
        r_id = add(right, depth + 1)
        nodes[node_id].update(feature=f, threshold=edges[f][b], left=l_id, right=r_id)
        leaves += 1
    return nodes


def _canon_tree(tree, node=0):
    if tree.is_leaf(node):
        return "leaf"
    return (int(tree.split_feature[node]), float(tree.threshold[node]),
            _canon_tree(tree, tree.left[node]), _canon_tree(tree, tree.right[node]))


def _canon_ref(nodes, node=0):
    if 'feature' not in nodes[node]:
        return "leaf"
    rec = nodes[node]
    return (rec['feature'], float(rec['threshold']), _canon_ref(nodes, rec['left']), _canon_ref(nodes, rec['right']))


class SplitTests(unittest.TestCase):

    def test_01_variance_gain_example(self):
        """手算的方差增益与分裂位置。"""
        binned = _binned([0.0, 1.0, 2.0, 3.0])
        g = np.array([-1.5, -1.5, 1.5, 1.5])
        h = np.ones(4)
        tree = grow_tree_leafwise(binned, g, h, _full(4), _config(num_leaves=2))
        self.assertEqual(tree.n_leaves, 2)
        self.assertEqual(tree.split_bin[0], 1)
        self.assertAlmostEqual(tree.gain[0], 2.25, places=12)
        self.assertAlmostEqual(tree.threshold[0], 1.5)
        self.assertAlmostEqual(tree.value[tree.left[0]], 3.0 / (2.0 + LEAF_LAMBDA), places=12)
        self.assertAlmostEqual(tree.value[tree.right[0]], -3.0 / (2.0 + LEAF_LAMBDA), places=12)

    def test_02_large_gamma_blocks_split(self):
        """γ 不小于最佳增益时不分裂。"""
        binned = _binned([0.0, 1.0, 2.0, 3.0])
        g = np.array([-1.5, -1.5, 1.5, 1.5])
        tree = grow_tree_leafwise(binned, g, np.ones(4), _full(4), _config(min_split_gain=2.25))
        self.assertEqual(tree.n_nodes, 1)

    def test_03_pure_gradients_do_not_split(self):
        """梯度全部相同时不分裂。"""
        binned = _binned(np.arange(10.0))
        tree = grow_tree_leafwise(binned, np.full(10, 0.3), np.ones(10), _full(10), _config())
        self.assertEqual(tree.n_leaves, 1)

    def test_04_constant_feature_does_not_split(self):
        """常数特征不分裂。"""
        binned = _binned(np.full(8, 2.0))
        g = np.random.default_rng(0).standard_normal(8)
        tree = grow_tree_leafwise(binned, g, np.ones(8), _full(8), _config())
        self.assertEqual(tree.n_nodes, 1)

    def test_05_min_samples_leaf(self):
        """分裂后两侧都至少有 min_samples_leaf 个样本。"""
        binned = _binned(np.arange(10.0))
        g = np.where(np.arange(10) == 0, -5.0, 0.5)
        tree = grow_tree_leafwise(binned, g, np.ones(10), _full(10), _config(min_samples_leaf=3))
        self.assertTrue(np.all(tree.count[tree.split_feature < 0] >= 3))

    def test_06_find_best_split_directly(self):
        """直接调用 find_best_split 得到最佳分裂。"""
        binned = _binned([0.0, 1.0, 2.0, 3.0])
        g = np.array([-1.5, -1.5, 1.5, 1.5])
        h = np.ones(4)
        wt = np.ones(4)
        rows = np.arange(4)
        layout = HistogramLayout(binned)
        stats = node_stats(rows, g, h, wt)
        split = find_best_split(layout.feature_view(layout.build(rows, g, h, wt), stats), stats, _config(), 4)
        self.assertEqual((split.feature, split.bin), (0, 1))


class GrowthTests(unittest.TestCase):

    def setUp(self):
        rng = np.random.default_rng(11)
        self.x = rng.integers(0, 8, size=(80, 4)).astype(np.float64)
        self.g = rng.standard_normal(80)
        self.h = rng.uniform(0.2, 1.0, 80)
        self.binned = _binned(self.x)

    def test_01_num_leaves_cap(self):
        """叶子数不超过 num_leaves。"""
        for leaves in (2, 3, 7):
            tree = grow_tree_leafwise(self.binned, self.g, self.h, _full(80), _config(num_leaves=leaves))
            self.assertLessEqual(tree.n_leaves, leaves)
        tree = grow_tree_leafwise(self.binned, self.g, self.h, _full(80), _config(num_leaves=2))
        self.assertEqual(tree.n_leaves, 2)

    def test_02_depth_limit(self):
        """深度不超过 max_depth。"""
        tree = grow_tree_leafwise(self.binned, self.g, self.h, _full(80), _config(max_depth=2, num_leaves=4))
        root_children = (tree.left[0], tree.right[0])
        for child in root_children:
            if not tree.is_leaf(child):
                self.assertTrue(tree.is_leaf(tree.left[child]))
                self.assertTrue(tree.is_leaf(tree.right[child]))

    def test_03_histogram_subtraction(self):
        """子节点直方图可由父节点减去兄弟节点得到。"""
        layout = HistogramLayout(self.binned)
        wt = np.ones(80)
        parent = layout.build(np.arange(80), self.g, self.h, wt)
        left_rows = np.flatnonzero(self.x[:, 0] <= 3)
        right_rows = np.flatnonzero(self.x[:, 0] > 3)
        direct = layout.build(right_rows, self.g, self.h, wt)
        derived = parent - layout.build(left_rows, self.g, self.h, wt)
        np.testing.assert_array_equal(direct.c, derived.c)
        np.testing.assert_allclose(direct.g, derived.g, atol=1e-12)
        np.testing.assert_allclose(direct.h, derived.h, atol=1e-12)

    def test_04_matches_exhaustive_reference(self):
        """与逐阈值穷举的参考建树结果一致。"""
        for seed in range(20):
            rng = np.random.default_rng(seed)
            x = rng.integers(0, 6, size=(60, 3)).astype(np.float64)
            g = rng.standard_normal(60)
            h = rng.uniform(0.1, 1.0, 60)
            config = _config(num_leaves=6, min_samples_leaf=3)
            tree = grow_tree_leafwise(_binned(x), g, h, _full(60), config)
            nodes = _reference_tree(x, g, h, config)
            self.assertEqual(_canon_tree(tree), _canon_ref(nodes))

            reference_values = np.empty(60)
            for rec in nodes.values():
                if 'feature' not in rec:
                    reference_values[rec['rows']] = rec['value']
            np.testing.assert_allclose(tree.predict_bins(_binned(x).bins.astype(np.int64)),
                                       reference_values, rtol=1e-9)

    def test_05_feature_view_follows_decoded_routing_under_conflicts(self):
        """冲突率 > 0 时，被覆盖的稠密特征行计入 fill 箱，逐特征计数与解码后的分流一致。"""
        rng = np.random.default_rng(21)
        n = 300
        dense = rng.uniform(1.0, 10.0, n)
        sparse = np.where(rng.random(n) < 0.4, rng.integers(1, 5, n), 0).astype(np.float64)
        bundled = efb_bundle(_binned(np.column_stack([dense, sparse])), 0.5)
        self.assertEqual(bundled.n_columns, 1)
        layout = HistogramLayout(bundled)
        rows = np.flatnonzero(rng.random(n) < 0.7)
        g, h, wt = rng.standard_normal(n), np.ones(n), np.ones(n)
        view = layout.feature_view(layout.build(rows, g, h, wt), node_stats(rows, g, h, wt))
        for f in range(2):
            decoded = decode_feature(bundled, f, rows)
            expected = np.bincount(decoded, minlength=view.c.shape[1])
            np.testing.assert_array_equal(view.c[f], expected)
            np.testing.assert_allclose(view.g[f], np.bincount(decoded, weights=g[rows], minlength=view.c.shape[1]),
                                       atol=1e-9)

    def test_06_full_sample_training_matches_reference(self):
        """a=1、b=0 时 train 生长的每棵树与逐阈值穷举建树结构一致，叶子值误差 1e-10 以内（50 个随机数据集）。"""
        objective = get_objective("binary_logistic")
        for seed in range(50):
            rng = np.random.default_rng(100 + seed)
            n, s = int(rng.integers(20, 201)), int(rng.integers(1, 11))
            x = np.column_stack([rng.integers(0, int(rng.integers(2, 10)), n) for _ in range(s)]).astype(np.float64)
            x[:, 0] += 1.0  # 无 0 的列
            y = (rng.random(n) < 0.3 + 0.1 * x[:, 0] / x[:, 0].max()).astype(np.int64)
            y[:2] = [0, 1]
            ds = Dataset(x, y, tuple(f"f{j}" for j in range(s)), ("a", "b"))
            config = _config(num_trees=3, learning_rate=0.3, min_samples_leaf=10,
                             goss_top_rate=1.0, goss_other_rate=0.0)
            ens = train(ds, config)
            fb = ens.feature_bins(x)
            raw = np.full(n, ens.base_score[0])
            for tree in ens.trees:
                grad = objective.gradients(y, raw)
                nodes = _reference_tree(x, grad.g, grad.h, config)
                self.assertEqual(_canon_tree(tree), _canon_ref(nodes))
                reference_values = np.empty(n)
                for rec in nodes.values():
                    if 'feature' not in rec:
                        reference_values[rec['rows']] = rec['value']
                np.testing.assert_allclose(tree.predict_bins(fb), reference_values, rtol=0, atol=1e-10)
                raw += config.learning_rate * tree.predict_bins(fb)

    def test_07_tree_structure_validation(self):
        """不构成有根树的节点数组被拒绝。"""
        with self.assertRaises(ValueError):
            Tree([0, -1, -1], [0, -1, -1], [0, -1, -1], [0.5, 0, 0], [2, -1, -1], [2, -1, -1],
                 [0.0, 1.0, 2.0], [1.0, 0, 0], [3, 1, 2])
        with self.assertRaises(ValueError):
            Tree([-1], [-1], [-1], [0.0], [-1], [-1], [np.nan], [0.0], [1])


if __name__ == "__main__":
    unittest.main()
