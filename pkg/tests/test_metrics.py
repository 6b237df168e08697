"""
评估指标测试：混淆矩阵、五个指标、未定义值处理、宏平均与折平均、文本表格。
"""

import logging
import unittest
from fractions import Fraction

import numpy as np

from core.errors import DataError
from core.metrics import (METRICS, BinaryCounts, ConfusionMatrix, MetricsReport, accuracy,
                          binary_accuracy, binary_counts, confusion, f1, fold_average, macro_report,
                          precision, render_table, sensitivity, specificity)

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class ConfusionTests(unittest.TestCase):

    def test_01_counts(self):
        """混淆矩阵按（真实，预测）计数。"""
        cm = confusion([0, 0, 1, 1, 2], [0, 1, 1, 1, 0], 3)
        np.testing.assert_array_equal(cm.counts, [[1, 1, 0], [0, 2, 0], [1, 0, 0]])
        self.assertEqual(cm.total, 5)

    def test_02_perfect_predictions_are_diagonal(self):
        """全对时混淆矩阵为对角阵。"""
        labels = [0, 1, 2, 2, 1]
        cm = confusion(labels, labels, 3)
        np.testing.assert_array_equal(cm.counts, np.diag([1, 2, 2]))

    def test_03_constant_predictor_fills_one_column(self):
        """常数预测只占混淆矩阵的一列。"""
        cm = confusion([0, 1, 2, 1], [0, 0, 0, 0], 3)
        self.assertEqual(np.count_nonzero(cm.counts[:, 1:]), 0)

    def test_04_errors(self):
        """长度不符或标签越界时报错。"""
        with self.assertRaises(DataError):
            confusion([0, 1], [0], 2)
        with self.assertRaises(DataError):
            confusion([0, 2], [0, 1], 2)

    def test_05_binary_counts_total(self):
        """一对多计数的总和等于样本数。"""
        rng = np.random.default_rng(0)
        cm = confusion(rng.integers(0, 4, 200), rng.integers(0, 4, 200), 4)
        for k in range(4):
            bc = binary_counts(cm, k)
            self.assertEqual(bc.total, 200)
            self.assertEqual(bc.tp, cm.counts[k, k])


class MetricTests(unittest.TestCase):

    def test_01_formulas(self):
        """灵敏度、特异度、精确率按定义计算。"""
        bc = BinaryCounts(tp=8, tn=5, fp=2, fn=1)
        self.assertEqual(sensitivity(bc), 8 / 9)
        self.assertEqual(specificity(bc), 5 / 7)
        self.assertEqual(precision(bc), 0.8)
        self.assertEqual(binary_accuracy(bc), 13 / 16)
        self.assertAlmostEqual(f1(bc), 2 * 0.8 * (8 / 9) / (0.8 + 8 / 9), places=14)

    def test_02_f1_is_harmonic_mean(self):
        """F1 是精确率与灵敏度的调和平均。"""
        rng = np.random.default_rng(1)
        for _ in range(50):
            tp, tn, fp, fn = (int(v) for v in rng.integers(1, 50, 4))
            bc = BinaryCounts(tp, tn, fp, fn)
            harmonic = 2 / (1 / precision(bc) + 1 / sensitivity(bc))
            self.assertAlmostEqual(f1(bc), harmonic, delta=1e-12)

    def test_03_undefined_on_zero_denominator(self):
        """分母为 0 的指标未定义。"""
        bc = BinaryCounts(tp=0, tn=5, fp=0, fn=0)
        self.assertIsNone(sensitivity(bc))
        self.assertIsNone(precision(bc))
        self.assertIsNone(f1(bc))
        self.assertEqual(specificity(bc), 1.0)
        self.assertIsNone(f1(BinaryCounts(tp=0, tn=1, fp=3, fn=2)))

    def test_04_accuracy(self):
        """准确率为对角线之和除以总数。"""
        cm = confusion([0, 1, 1, 2], [0, 1, 2, 2], 3)
        self.assertEqual(accuracy(cm), 0.75)

    def test_05_rational_oracle_on_random_matrices(self):
        """1000 个随机混淆矩阵：逐类指标与准确率同有理数直接计算的结果一致。"""
        rng = np.random.default_rng(3)

        def exact(num, den):
            return None if den == 0 else float(Fraction(num, den))

        for _ in range(1000):
            c = int(rng.integers(2, 6))
            cm = ConfusionMatrix(rng.integers(0, 6, size=(c, c)).astype(np.int64))
            counts = cm.counts.tolist()
            total = sum(map(sum, counts))
            self.assertEqual(accuracy(cm), exact(sum(counts[k][k] for k in range(c)), total))
            for k in range(c):
                tp = counts[k][k]
                fn = sum(counts[k]) - tp
                fp = sum(row[k] for row in counts) - tp
                tn = total - tp - fn - fp
                bc = binary_counts(cm, k)
                self.assertEqual((bc.tp, bc.tn, bc.fp, bc.fn), (tp, tn, fp, fn))
                self.assertEqual(sensitivity(bc), exact(tp, tp + fn))
                self.assertEqual(specificity(bc), exact(tn, tn + fp))
                self.assertEqual(precision(bc), exact(tp, tp + fp))
                defined = tp + fn > 0 and tp + fp > 0 and tp > 0
                self.assertEqual(f1(bc), exact(2 * tp, 2 * tp + fp + fn) if defined else None)


class ReportTests(unittest.TestCase):

    def test_01_diagonal_matrix(self):
        """全对时所有宏平均指标为 1。"""
        cm = confusion([0, 1, 2, 0], [0, 1, 2, 0], 3)
        report = macro_report(cm, ["covid", "normal", "pneumonia"])
        for metric in METRICS:
            self.assertEqual(report.macro[metric], 1.0)
        self.assertEqual(report.accuracy, 1.0)
        self.assertEqual(report.excluded, [])

    def test_02_never_predicted_class_is_excluded(self):
        """从未被预测的类别其精确率未定义，宏平均时排除。"""
        cm = confusion([0, 1, 2, 2], [0, 1, 1, 1], 3)
        report = macro_report(cm, ["a", "b", "c"])
        self.assertIsNone(report.per_class[2].precision)
        self.assertIn("c:precision", report.excluded)
        defined = [m.precision for m in report.per_class if m.precision is not None]
        self.assertAlmostEqual(report.macro["precision"], sum(defined) / len(defined))

    def test_03_matches_per_class_reduction(self):
        """宏平均等于逐类指标的算术平均。"""
        rng = np.random.default_rng(2)
        y, p = rng.integers(0, 3, 300), rng.integers(0, 3, 300)
        report = macro_report(confusion(y, p, 3))
        for k in range(3):
            tp = np.sum((y == k) & (p == k))
            fp = np.sum((y != k) & (p == k))
            fn = np.sum((y == k) & (p != k))
            tn = 300 - tp - fp - fn
            self.assertAlmostEqual(report.per_class[k].sensitivity, tp / (tp + fn))
            self.assertAlmostEqual(report.per_class[k].specificity, tn / (tn + fp))
            self.assertAlmostEqual(report.per_class[k].precision, tp / (tp + fp))
            self.assertEqual(report.per_class[k].support, int(np.sum(y == k)))
        self.assertAlmostEqual(report.accuracy, np.mean(y == p))

    def test_04_dict_round_trip(self):
        """报告经 to_dict / from_dict 往返不变。"""
        report = macro_report(confusion([0, 1, 1], [0, 0, 1], 2), ["neg", "pos"])
        back = MetricsReport.from_dict(report.to_dict())
        self.assertEqual(back.to_dict(), report.to_dict())
        with self.assertRaises(DataError):
            MetricsReport.from_dict({"class_names": ["a"]})


class FoldAverageTests(unittest.TestCase):

    def _report(self, y, p):
        return macro_report(confusion(y, p, 2), ["covid", "normal"])

    def test_01_identical_reports(self):
        """相同报告的折平均等于其本身。"""
        report = self._report([0, 1, 1, 0, 1], [0, 1, 0, 0, 1])
        avg = fold_average([report] * 5)
        self.assertEqual(avg.accuracy, report.accuracy)
        self.assertEqual(avg.macro, report.macro)
        for a, b in zip(avg.per_class, report.per_class):
            for metric in METRICS:
                self.assertEqual(a.get(metric), b.get(metric))
        self.assertEqual(len(avg.folds), 5)

    def test_02_two_folds(self):
        """两折平均准确率。"""
        perfect = self._report([0, 1] * 5, [0, 1] * 5)
        ninety = self._report([0, 1] * 5, [0, 1] * 4 + [1, 1])
        self.assertEqual(fold_average([perfect, ninety]).accuracy, 0.95)

    def test_03_random_reports_match_hand_mean(self):
        """随机报告的折平均与手算平均一致。"""
        rng = np.random.default_rng(3)
        reports = [self._report(rng.integers(0, 2, 40), rng.integers(0, 2, 40)) for _ in range(5)]
        avg = fold_average(reports)
        self.assertAlmostEqual(avg.accuracy, np.mean([r.accuracy for r in reports]), places=14)
        self.assertAlmostEqual(avg.macro["f1"], np.mean([r.macro["f1"] for r in reports]), places=14)

    def test_04_undefined_folds_skipped(self):
        """未定义的折在平均时跳过。"""
        defined = self._report([0, 1], [0, 1])
        undefined = self._report([1, 1], [1, 1])
        avg = fold_average([defined, undefined])
        self.assertEqual(avg.per_class[0].sensitivity, 1.0)
        self.assertTrue(any(flag.startswith("fold2:") for flag in avg.excluded))

    def test_05_errors(self):
        """空列表或类别不一致时报错。"""
        with self.assertRaises(DataError):
            fold_average([])
        a = self._report([0, 1], [0, 1])
        b = macro_report(confusion([0, 1, 2], [0, 1, 2], 3))
        with self.assertRaises(DataError):
            fold_average([a, b])


class TableTests(unittest.TestCase):

    def test_01_fold_grid_layout(self):
        """折报告按 Fold 1..k 与 Average 排列。"""
        reports = [macro_report(confusion([0, 1, 1], [0, 1, 1], 2), ["covid", "normal"])] * 5
        text = render_table(fold_average(reports))
        header = text.splitlines()[1]
        for i in range(1, 6):
            self.assertIn(f"Fold {i}", header)
        self.assertIn("Average", header)
        self.assertIn("100.00", text)

    def test_02_undefined_renders_as_na(self):
        """未定义值显示为 n/a。"""
        report = macro_report(confusion([0, 0], [0, 0], 2), ["covid", "normal"])
        text = render_table(report)
        self.assertIn("n/a", text)
        self.assertIn("normal:sensitivity", text)


if __name__ == "__main__":
    unittest.main()
