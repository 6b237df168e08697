"""
梯度提升树集成：训练（train）与预测（predict）。

F_m(x) = F_{m-1}(x) + η·h_m(x)，F_0 为类别先验的对数几率（二分类）
或对数先验（多分类，每轮每类一棵树）。
每轮：在当前得分处算梯度 -> 采样 GOSS -> 按叶生长树 -> 以 η 收缩累加。
"""

import logging
from dataclasses import dataclass, asdict, field, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from core.binning import BinnedMatrix, bin_features, bin_values, decode_bins, efb_bundle
from core.errors import ConfigError, DataError, TrainingError
from core.goss import check_rates, goss_sample
from core.objective import ObjectiveType, get_objective
from core.rng import Stage, stream
from core.training_log import TrainingEventType, TrainingLog
from core.tree import HistogramLayout, Tree, grow_tree_leafwise

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoosterConfig:
    """提升树超参数。max_depth <= 0 表示不限深度，此时由 num_leaves 约束生长。"""

    num_trees: int = 100
    learning_rate: float = 0.1
    max_depth: int = 0
    num_leaves: int = 31
    min_samples_leaf: int = 20
    min_split_gain: float = 0.0
    goss_top_rate: float = 1.0
    goss_other_rate: float = 0.0
    max_bin: int = 255
    efb_max_conflict_rate: float = 0.0
    enable_bundle: bool = True
    objective: str = ObjectiveType.BINARY_LOGISTIC.value
    num_classes: int = 2
    seed: int = 0

    def validate(self) -> "BoosterConfig":
        if self.num_trees < 1:
            raise ConfigError(f"num_trees must be positive, got {self.num_trees}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if self.num_leaves < 2:
            raise ConfigError(f"num_leaves must be at least 2, got {self.num_leaves}")
        if self.max_depth > 0 and self.num_leaves > 2 ** self.max_depth:
            raise ConfigError(
                f"num_leaves {self.num_leaves} exceeds 2^max_depth = {2 ** self.max_depth}")
        if self.min_samples_leaf < 1:
            raise ConfigError(f"min_samples_leaf must be positive, got {self.min_samples_leaf}")
        if self.min_split_gain < 0:
            raise ConfigError(f"min_split_gain must be non-negative, got {self.min_split_gain}")
        check_rates(self.goss_top_rate, self.goss_other_rate)
        if not 2 <= self.max_bin <= 65535:
            raise ConfigError(f"max_bin must lie in [2, 65535], got {self.max_bin}")
        if not 0.0 <= self.efb_max_conflict_rate <= 1.0:
            raise ConfigError(f"efb_max_conflict_rate must lie in [0, 1], got {self.efb_max_conflict_rate}")
        objective = get_objective(self.objective)
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be at least 2, got {self.num_classes}")
        if objective.objective_type is ObjectiveType.BINARY_LOGISTIC and self.num_classes != 2:
            raise ConfigError("binary_logistic requires num_classes = 2")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "BoosterConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown booster settings: {', '.join(sorted(unknown))}")
        return cls(**values)


@dataclass(eq=False)
class Ensemble:
    """
    训练好的集成：trees 按迭代分组，第 m 轮第 k 类的树位于 m·K + k。

    同时保存预测时所需的特征元数据（分箱边界、默认箱、捆绑映射），
    预测时输入的是选择后的原始特征，分箱在内部完成。
    """

    trees: List[Tree]
    config: BoosterConfig
    base_score: np.ndarray
    feature_names: Tuple[str, ...]
    class_names: Tuple[str, ...]
    boundaries: Tuple[np.ndarray, ...]
    num_bins: np.ndarray
    default_bins: np.ndarray
    bundle_map: Tuple[Tuple[int, int], ...]
    training_log: Optional[TrainingLog] = field(default=None, compare=False)

    @property
    def trees_per_iteration(self) -> int:
        return int(self.base_score.size)

    @property
    def n_iterations(self) -> int:
        return len(self.trees) // self.trees_per_iteration

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def objective(self):
        return get_objective(self.config.objective)

    def feature_bins(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2:
            raise DataError(f"features must be a 2-D matrix, got {features.ndim}-D")
        if features.shape[1] != self.n_features:
            raise DataError(
                f"Input feature count {features.shape[1]} doesn't match model expected {self.n_features}. "
                "Check the selected feature columns."
            )
        return bin_values(features, self.boundaries).astype(np.int64)

    def raw_scores(self, features: np.ndarray) -> np.ndarray:
        """base + η·Σ 树输出；二分类返回 (n,)，多分类返回 (n, C)。"""
        fb = self.feature_bins(features)
        k = self.trees_per_iteration
        eta = self.config.learning_rate
        raw = np.tile(self.base_score, (fb.shape[0], 1))
        for i, tree in enumerate(self.trees):
            raw[:, i % k] += eta * tree.predict_bins(fb)
        return raw[:, 0] if k == 1 else raw

    def feature_importance(self) -> np.ndarray:
        """各特征作为分裂特征时的增益之和。"""
        importance = np.zeros(self.n_features, dtype=np.float64)
        for tree in self.trees:
            internal = tree.split_feature >= 0
            np.add.at(importance, tree.split_feature[internal], tree.gain[internal])
        return importance


def predict(ensemble: Ensemble, features) -> Tuple[np.ndarray, np.ndarray]:
    """返回 (n, C) 类别概率与 argmax 类别（同概率取类别号小者）。"""
    if hasattr(features, "features"):
        features = features.features
    proba = ensemble.objective.probabilities(ensemble.raw_scores(features))
    return proba, np.argmax(proba, axis=1)


def prepare_bins(dataset, config: BoosterConfig) -> BinnedMatrix:
    """训练用分箱：先逐列分箱，enable_bundle 时再做 EFB。"""
    binned = bin_features(dataset, config.max_bin)
    if config.enable_bundle:
        binned = efb_bundle(binned, config.efb_max_conflict_rate)
    return binned


def train(dataset, config: BoosterConfig) -> Ensemble:
    """在 dataset 上训练集成；固定 seed 与配置时结果确定。"""
    config.validate()
    if dataset.n_classes != config.num_classes:
        raise ConfigError(
            f"dataset has {dataset.n_classes} classes but config expects {config.num_classes}")

    objective = get_objective(config.objective)
    labels = dataset.labels
    binned = prepare_bins(dataset, config)
    layout = HistogramLayout(binned)
    feature_bins = decode_bins(binned)

    base = objective.base_score(labels, config.num_classes)
    k = objective.trees_per_iteration(config.num_classes)
    raw = np.tile(base, (dataset.n_samples, 1))

    def current():
        return raw[:, 0] if k == 1 else raw

    log = TrainingLog()
    log.append(TrainingEventType.TRAINING_START, 0, {
        'rows': dataset.n_samples, 'features': dataset.n_features,
        'bundles': binned.n_columns, 'loss': objective.loss(labels, current()),
    })
    logger.info(f"开始训练：{config.objective}，{config.num_trees} 轮 × {k} 棵，"
                f"{dataset.n_features} 个特征捆绑为 {binned.n_columns} 列")

    trees: List[Tree] = []
    for m in range(config.num_trees):
        grad = objective.gradients(labels, current())
        sample = goss_sample(grad, config.goss_top_rate, config.goss_other_rate,
                             stream(config.seed, Stage.GOSS, m))
        leaves = 0
        for c in range(k):
            g = grad.g if k == 1 else grad.g[:, c]
            h = grad.h if k == 1 else grad.h[:, c]
            tree = grow_tree_leafwise(binned, g, h, sample, config, layout)
            raw[:, c] += config.learning_rate * tree.predict_bins(feature_bins)
            trees.append(tree)
            leaves += tree.n_leaves
        if not np.all(np.isfinite(raw)):
            raise TrainingError(f"non-finite raw scores after iteration {m}")
        loss = objective.loss(labels, current())
        log.append(TrainingEventType.ITERATION_END, m, {
            'loss': loss, 'leaves': leaves, 'sampled': int(sample.A.size + sample.B.size),
        })
        logger.debug(f"第 {m} 轮：训练损失 {loss:.6f}，叶子 {leaves}")

    log.append(TrainingEventType.TRAINING_END, config.num_trees, {'loss': log.losses()[-1]})
    logger.info(f"训练完成：{len(trees)} 棵树，训练损失 {log.losses()[-1]:.6f}")
    return Ensemble(
        trees=trees,
        config=config,
        base_score=np.asarray(base, dtype=np.float64),
        feature_names=dataset.feature_names,
        class_names=dataset.class_names,
        boundaries=binned.boundaries,
        num_bins=binned.num_bins,
        default_bins=binned.default_bins,
        bundle_map=binned.bundle_map,
        training_log=log,
    )
