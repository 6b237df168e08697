"""
模型文件测试：逐位往返、校验和、截断与版本检查。
"""

import hashlib
import logging
import os
import tempfile
import unittest

import numpy as np

from core.booster import BoosterConfig, train
from core.errors import ModelFormatError
from data.model_store import FORMAT_VERSION, format_model, load_model, parse_model, save_model
from data.synthetic import informative_dataset

logging.basicConfig(level=logging.INFO)
logger = logging.getLogger(__name__)


class ModelStoreTests(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.ds, _ = informative_dataset([30, 40, 35], n_features=8, n_informative=3, seed=1)
        config = BoosterConfig(num_trees=4, learning_rate=0.24, max_depth=3, num_leaves=8,
                               min_samples_leaf=3, objective="multiclass_softmax", num_classes=3,
                               goss_top_rate=0.5, goss_other_rate=0.3, seed=17)
        cls.ens = train(cls.ds, config)
        cls.text = format_model(cls.ens)

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = os.path.join(self.tmp.name, "model.txt")
        save_model(self.ens, self.path)

    def _write(self, text):
        with open(self.path, "w", encoding="utf-8", newline="") as f:
            f.write(text)

    def test_01_resave_is_byte_identical(self):
        """读入后再保存逐字节相同。"""
        loaded = load_model(self.path)
        other = os.path.join(self.tmp.name, "again.txt")
        save_model(loaded, other)
        with open(self.path, "rb") as a, open(other, "rb") as b:
            self.assertEqual(a.read(), b.read())

    def test_02_predictions_survive_round_trip(self):
        """保存再读取后预测完全一致。"""
        loaded = load_model(self.path)
        x = np.random.default_rng(0).normal(0, 4, (100, self.ds.n_features))
        np.testing.assert_array_equal(loaded.raw_scores(x), self.ens.raw_scores(x))
        self.assertEqual(loaded.config, self.ens.config)
        self.assertEqual(loaded.class_names, self.ens.class_names)

    def test_03_checksum_detects_corruption(self):
        """修改任意内容都会被校验和发现。"""
        lines = self.text.split("\n")
        target = next(i for i, line in enumerate(lines) if "leaf value=" in line)
        lines[target] = lines[target].replace("value=", "value=1")
        self._write("\n".join(lines))
        with self.assertRaises(ModelFormatError):
            load_model(self.path)

    def test_04_truncation(self):
        """截断的文件被拒绝。"""
        for cut in (len(self.text) // 2, len(self.text) - 1, 10):
            self._write(self.text[:cut])
            with self.assertRaises(ModelFormatError):
                load_model(self.path)

    def test_05_version_mismatch(self):
        """版本号不符时报错，即使校验和正确。"""
        body = self.text[:self.text.rindex("checksum=")]
        body = body.replace(f"version={FORMAT_VERSION}\n", f"version={FORMAT_VERSION + 1}\n", 1)
        text = body + f"checksum=sha256:{hashlib.sha256(body.encode('utf-8')).hexdigest()}\n"
        with self.assertRaises(ModelFormatError) as ctx:
            parse_model(text)
        self.assertIn("version", str(ctx.exception))

    def test_06_missing_file(self):
        """文件不存在抛 ModelFormatError。"""
        with self.assertRaises(ModelFormatError):
            load_model(os.path.join(self.tmp.name, "absent.txt"))

    def test_07_format_is_line_oriented_text(self):
        """模型文件是按行组织的文本，以魔数与版本号开头。"""
        lines = self.text.splitlines()
        self.assertEqual(lines[0], "gbdt-model")
        self.assertEqual(lines[1], f"version={FORMAT_VERSION}")
        self.assertTrue(lines[-1].startswith("checksum=sha256:"))
        self.assertEqual(sum(1 for line in lines if line.startswith("tree ")), 12)


if __name__ == "__main__":
    unittest.main()
