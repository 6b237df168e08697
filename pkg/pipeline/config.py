"""
流水线配置：PipelineConfig、key=value 配置文件解析与命令行覆盖。

配置文件格式（UTF-8）：

    # 注释
    task = multi_class
    k_features = 116
    ratios = 0.6, 0.2, 0.2

键名即 PipelineConfig 字段名；未知键报错并给出行号。
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from typing import Any, Dict, Optional, Tuple

from core.booster import BoosterConfig
from core.errors import ConfigError
from core.objective import ObjectiveType

logger = logging.getLogger(__name__)

PRESET_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "presets")

TASKS = {
    "two_class": ObjectiveType.BINARY_LOGISTIC,
    "multi_class": ObjectiveType.MULTICLASS_SOFTMAX,
}
SCORE_ON = ("train", "all")
DEFAULT_NUM_LEAVES = 31


@dataclass(frozen=True)
class PipelineConfig:
    data: Optional[str] = None
    label_column: str = "label"
    ratios: Tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0
    task: str = "two_class"
    k_features: Optional[int] = None
    score_on: str = "train"
    folds: int = 5
    out: str = "out"

    num_trees: int = 100
    learning_rate: float = 0.1
    max_depth: int = 0
    num_leaves: Optional[int] = None
    min_samples_leaf: int = 20
    min_split_gain: float = 0.0
    goss_top_rate: float = 1.0
    goss_other_rate: float = 0.0
    max_bin: int = 255
    efb_max_conflict_rate: float = 0.0
    enable_bundle: bool = True

    def validate(self) -> "PipelineConfig":
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; expected one of {', '.join(TASKS)}")
        if self.score_on not in SCORE_ON:
            raise ConfigError(f"score_on must be 'train' or 'all', got {self.score_on!r}")
        if len(self.ratios) != 3:
            raise ConfigError(f"ratios needs three values, got {len(self.ratios)}")
        if self.k_features is not None and self.k_features < 1:
            raise ConfigError(f"k_features must be positive, got {self.k_features}")
        if self.folds < 2:
            raise ConfigError(f"folds must be at least 2, got {self.folds}")
        # 剩余约束（比例之和、树参数）由 splits 与 BoosterConfig 校验
        self.booster_config(2 if self.task == "two_class" else 3).validate()
        return self

    @property
    def leaves(self) -> int:
        """未显式给出 num_leaves 时：限深则取 min(31, 2^depth)，否则 31。"""
        if self.num_leaves is not None:
            return self.num_leaves
        if self.max_depth > 0:
            return min(DEFAULT_NUM_LEAVES, 2 ** self.max_depth)
        return DEFAULT_NUM_LEAVES

    def booster_config(self, num_classes: int) -> BoosterConfig:
        return BoosterConfig(
            num_trees=self.num_trees,
            learning_rate=self.learning_rate,
            max_depth=self.max_depth,
            num_leaves=self.leaves,
            min_samples_leaf=self.min_samples_leaf,
            min_split_gain=self.min_split_gain,
            goss_top_rate=self.goss_top_rate,
            goss_other_rate=self.goss_other_rate,
            max_bin=self.max_bin,
            efb_max_conflict_rate=self.efb_max_conflict_rate,
            enable_bundle=self.enable_bundle,
            objective=TASKS[self.task].value,
            num_classes=num_classes,
            seed=self.seed,
        )

    def check_classes(self, n_classes: int) -> None:
        """二分类任务要求恰好 2 类，多分类任务要求至少 3 类。"""
        if self.task == "two_class" and n_classes != 2:
            raise ConfigError(f"task two_class needs 2 classes, dataset has {n_classes}")
        if self.task == "multi_class" and n_classes < 3:
            raise ConfigError(f"task multi_class needs at least 3 classes, dataset has {n_classes}")

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_optional_int(text: str) -> Optional[int]:
    return None if text.lower() in ("", "none", "all") else int(text)


def _parse_ratios(text: str) -> Tuple[float, float, float]:
    return tuple(float(part) for part in text.split(","))


_PARSERS = {
    int: int,
    float: float,
    str: str,
    bool: _parse_bool,
    Optional[int]: _parse_optional_int,
    Optional[str]: lambda text: text or None,
    Tuple[float, float, float]: _parse_ratios,
}


def parse_value(key: str, text: str) -> Any:
    """按字段类型把字符串转换成配置值；未知键抛 ConfigError。"""
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        return _PARSERS[_FIELD_TYPES[key]](text.strip())
    except ValueError as e:
        raise ConfigError(f"bad value for {key}: {e}") from None


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        try:
            values[key] = parse_value(key, value)
        except ConfigError as e:
            raise ConfigError(f"{source}:{lineno}: {e}") from None
    return values


def load_config_file(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        values = parse_config_text(f.read(), path)
    logger.info(f"读取配置 {path}：{len(values)} 项")
    return values


def preset_path(name: str) -> str:
    return os.path.join(PRESET_DIR, f"{name}.conf")


def build_config(config_path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None
                 ) -> PipelineConfig:
    """默认值 <- 配置文件 <- 命令行覆盖（值为 None 的覆盖项被忽略）。"""
    values: Dict[str, Any] = {}
    if config_path:
        values.update(load_config_file(config_path))
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = value
    return replace(PipelineConfig(), **values).validate()
