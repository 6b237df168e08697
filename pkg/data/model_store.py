"""
模型文件读写（版本化、按行组织的文本格式）。

布局（逐行，详见 ARCHITECTURE.md）：
  gbdt-model
  version=1
  objective=... / num_classes=... / num_iterations=... / trees_per_iteration=...
  learning_rate=... / base_score=...
  config.<字段>=...                     BoosterConfig 各字段，按定义顺序
  feature_names=<JSON 数组> / class_names=<JSON 数组>
  features=<s>，随后每个特征一行：feature <f> num_bins= default_bin= bundle= offset= boundaries=
  trees=<数量>，随后每棵树：tree <t> nodes=<k> 与 k 行 node
  checksum=sha256:<此前全部字节的十六进制摘要>

整数原样写出；实数使用 repr（最短可逐位回读的十进制表示）。
"""

import hashlib
import json
import logging
import os
from dataclasses import fields
from typing import Dict, List

import numpy as np

from core.booster import BoosterConfig, Ensemble
from core.errors import ModelFormatError
from core.tree import Tree

logger = logging.getLogger(__name__)

MAGIC = "gbdt-model"
FORMAT_VERSION = 1


def _real(x) -> str:
    return repr(float(x))


def _config_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return _real(value)
    return str(value)


def _parse_config_value(kind, text: str):
    if kind is bool:
        if text not in ("true", "false"):
            raise ValueError(f"bad boolean {text!r}")
        return text == "true"
    return kind(text)


def format_model(ensemble: Ensemble) -> str:
    """把集成序列化为模型文本（含末尾校验和行）。"""
    lines: List[str] = [
        MAGIC,
        f"version={FORMAT_VERSION}",
        f"objective={ensemble.config.objective}",
        f"num_classes={ensemble.config.num_classes}",
        f"num_iterations={ensemble.n_iterations}",
        f"trees_per_iteration={ensemble.trees_per_iteration}",
        f"learning_rate={_real(ensemble.config.learning_rate)}",
        "base_score=" + " ".join(_real(v) for v in ensemble.base_score),
    ]
    for f in fields(BoosterConfig):
        lines.append(f"config.{f.name}={_config_value(getattr(ensemble.config, f.name))}")
    lines.append("feature_names=" + json.dumps(list(ensemble.feature_names), ensure_ascii=False))
    lines.append("class_names=" + json.dumps(list(ensemble.class_names), ensure_ascii=False))
    lines.append(f"features={ensemble.n_features}")
    for f in range(ensemble.n_features):
        col, offset = ensemble.bundle_map[f]
        edges = " ".join(_real(e) for e in ensemble.boundaries[f])
        lines.append(f"feature {f} num_bins={int(ensemble.num_bins[f])} default_bin={int(ensemble.default_bins[f])} "
                     f"bundle={col} offset={offset} boundaries={edges}")
    lines.append(f"trees={len(ensemble.trees)}")
    for t, tree in enumerate(ensemble.trees):
        lines.append(f"tree {t} nodes={tree.n_nodes}")
        for i in range(tree.n_nodes):
            if tree.is_leaf(i):
                lines.append(f"node {i} leaf value={_real(tree.value[i])} count={int(tree.count[i])}")
            else:
                lines.append(
                    f"node {i} split feature={int(tree.split_feature[i])} bundle={int(tree.split_bundle[i])} "
                    f"bin={int(tree.split_bin[i])} threshold={_real(tree.threshold[i])} "
                    f"left={int(tree.left[i])} right={int(tree.right[i])} gain={_real(tree.gain[i])} "
                    f"count={int(tree.count[i])} value={_real(tree.value[i])}")
    body = "".join(line + "\n" for line in lines)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    return body + f"checksum=sha256:{digest}\n"


def save_model(ensemble: Ensemble, path: str) -> None:
    text = format_model(ensemble)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"模型已保存到 {path}（{len(ensemble.trees)} 棵树）")


class _Lines:
    """顺序读取模型行；读到末尾即视为文件被截断。"""

    def __init__(self, lines: List[str]):
        self.lines = lines
        self.pos = 0

    def next(self) -> str:
        if self.pos >= len(self.lines):
            raise ModelFormatError("truncated model file")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def value(self, key: str) -> str:
        line = self.next()
        prefix = key + "="
        if not line.startswith(prefix):
            raise ModelFormatError(f"expected '{key}=' at line {self.pos}, got {line[:40]!r}")
        return line[len(prefix):]

    def record(self, kind: str, index: int) -> Dict[str, str]:
        """解析形如 `kind index k=v k=v ...` 的行。"""
        line = self.next()
        parts = line.split(" ")
        if len(parts) < 2 or parts[0] != kind or parts[1] != str(index):
            raise ModelFormatError(f"expected '{kind} {index}' at line {self.pos}")
        out: Dict[str, str] = {}
        rest = parts[2:]
        if kind == "node":
            out["kind"] = rest[0] if rest else ""
            rest = rest[1:]
        for i, token in enumerate(rest):
            if "=" not in token:
                raise ModelFormatError(f"malformed field {token!r} at line {self.pos}")
            key, value = token.split("=", 1)
            if key == "boundaries":
                out[key] = " ".join([value] + rest[i + 1:]).strip()
                break
            out[key] = value
        return out


def _verify(text: str) -> List[str]:
    if not text.endswith("\n"):
        raise ModelFormatError("truncated model file")
    lines = text[:-1].split("\n")
    last = lines[-1]
    if not last.startswith("checksum=sha256:"):
        raise ModelFormatError("truncated model file: checksum line missing")
    body = "".join(line + "\n" for line in lines[:-1])
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if last != f"checksum=sha256:{digest}":
        raise ModelFormatError("checksum mismatch: model file is corrupted")
    return lines[:-1]


def parse_model(text: str) -> Ensemble:
    lines = _Lines(_verify(text))
    try:
        if lines.next() != MAGIC:
            raise ModelFormatError("not a model file")
        version = int(lines.value("version"))
        if version != FORMAT_VERSION:
            raise ModelFormatError(f"unsupported model version {version}, expected {FORMAT_VERSION}")
        lines.value("objective")
        lines.value("num_classes")
        n_iterations = int(lines.value("num_iterations"))
        per_iteration = int(lines.value("trees_per_iteration"))
        lines.value("learning_rate")
        base_score = np.array([float(v) for v in lines.value("base_score").split(" ")])

        settings = {}
        for f in fields(BoosterConfig):
            settings[f.name] = _parse_config_value(f.type, lines.value(f"config.{f.name}"))
        config = BoosterConfig(**settings)

        feature_names = tuple(json.loads(lines.value("feature_names")))
        class_names = tuple(json.loads(lines.value("class_names")))
        s = int(lines.value("features"))
        boundaries, num_bins, default_bins, bundle_map = [], [], [], []
        for f in range(s):
            rec = lines.record("feature", f)
            edges = rec["boundaries"]
            boundaries.append(np.array([float(v) for v in edges.split(" ")] if edges else [], dtype=np.float64))
            num_bins.append(int(rec["num_bins"]))
            default_bins.append(int(rec["default_bin"]))
            bundle_map.append((int(rec["bundle"]), int(rec["offset"])))

        n_trees = int(lines.value("trees"))
        if n_trees != n_iterations * per_iteration or per_iteration != base_score.size:
            raise ModelFormatError("tree count does not match iterations × trees per iteration")
        trees = [_parse_tree(lines, t) for t in range(n_trees)]
    except (ValueError, KeyError, IndexError) as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f"malformed model file: {e}") from None
    if lines.pos != len(lines.lines):
        raise ModelFormatError("unexpected trailing lines in model file")

    return Ensemble(
        trees=trees,
        config=config,
        base_score=base_score,
        feature_names=feature_names,
        class_names=class_names,
        boundaries=tuple(boundaries),
        num_bins=np.array(num_bins, dtype=np.int64),
        default_bins=np.array(default_bins, dtype=np.int64),
        bundle_map=tuple(bundle_map),
    )


def _parse_tree(lines: _Lines, t: int) -> Tree:
    n_nodes = int(lines.record("tree", t)["nodes"])
    cols = {k: [] for k in ("split_feature", "split_bundle", "split_bin", "threshold",
                            "left", "right", "value", "gain", "count")}
    for i in range(n_nodes):
        rec = lines.record("node", i)
        if rec["kind"] == "leaf":
            row = dict(split_feature=-1, split_bundle=-1, split_bin=-1, threshold=0.0,
                       left=-1, right=-1, value=float(rec["value"]), gain=0.0, count=int(rec["count"]))
        elif rec["kind"] == "split":
            row = dict(split_feature=int(rec["feature"]), split_bundle=int(rec["bundle"]),
                       split_bin=int(rec["bin"]), threshold=float(rec["threshold"]),
                       left=int(rec["left"]), right=int(rec["right"]), value=float(rec["value"]),
                       gain=float(rec["gain"]), count=int(rec["count"]))
        else:
            raise ModelFormatError(f"unknown node kind {rec['kind']!r} in tree {t}")
        for k, v in row.items():
            cols[k].append(v)
    return Tree(**cols)


def load_model(path: str) -> Ensemble:
    if not os.path.isfile(path):
        raise ModelFormatError(f"model file not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as f:
        text = f.read()
    ensemble = parse_model(text)
    logger.info(f"已加载模型 {path}：{len(ensemble.trees)} 棵树，{ensemble.n_features} 个特征")
    return ensemble
