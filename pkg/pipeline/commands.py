"""
流水线命令：读入 -> ANOVA 选择 -> 训练 -> 评估，以及交叉验证、k 扫描、预测与报告。

每个命令返回报告字典（predict 返回输出路径）；所有产物在计算全部成功后才写盘，
因此配置或数据错误不会留下半成品。
"""

import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from core.booster import Ensemble, predict, train
from core.errors import ConfigError
from core.metrics import ConfusionMatrix, MetricsReport, confusion, fold_average, macro_report
from core.selection import FScores, anova_f_scores, project_dataset, select_top_k, write_scores_csv
from data.dataset import Dataset, load_csv, read_matrix_csv, write_csv
from data.model_store import load_model, save_model
from data.splits import stratified_kfold, stratified_split
from pipeline.config import PipelineConfig
from pipeline.report_io import read_report, render_report, write_report

logger = logging.getLogger(__name__)

MODEL_FILE = "model.txt"
SELECTED_FILE = "selected_features.csv"
SCORES_FILE = "feature_scores.csv"
PREDICTIONS_FILE = "predictions.csv"


def _load_dataset(config: PipelineConfig) -> Dataset:
    if not config.data:
        raise ConfigError("no dataset given (set data = ... or pass --data)")
    if not os.path.isfile(config.data):
        raise ConfigError(f"dataset path does not exist: {config.data}")
    dataset = load_csv(config.data, config.label_column)
    config.check_classes(dataset.n_classes)
    return dataset


def _resolve_k(k: Optional[int], n_features: int) -> int:
    if k is None:
        return n_features
    if not 1 <= k <= n_features:
        raise ConfigError(f"k_features {k} out of range [1, {n_features}]")
    return k


def _evaluate(ensemble: Ensemble, dataset: Dataset) -> Tuple[ConfusionMatrix, MetricsReport]:
    _, predicted = predict(ensemble, dataset.features)
    cm = confusion(dataset.labels, predicted, dataset.n_classes)
    return cm, macro_report(cm, dataset.class_names)


def _select_and_train(config: PipelineConfig, train_set: Dataset, score_set: Dataset, k: int
                      ) -> Tuple[FScores, np.ndarray, Ensemble]:
    fscores = anova_f_scores(score_set)
    selected = select_top_k(fscores, k)
    booster = config.booster_config(train_set.n_classes)
    ensemble = train(project_dataset(train_set, selected), booster)
    return fscores, selected, ensemble


def _selected_rows(fscores: FScores, selected: np.ndarray, names: Sequence[str]):
    ranks = fscores.ranks()
    for f in selected:
        yield [int(f), names[f], float(fscores.scores[f]), int(ranks[f])]


def cmd_run(config: PipelineConfig) -> Dict[str, Any]:
    """划分 -> 在训练集上算 F 分数并取前 k -> 训练 -> 验证/测试评估 -> 写产物。"""
    dataset = _load_dataset(config)
    k = _resolve_k(config.k_features, dataset.n_features)
    plan = stratified_split(dataset, config.ratios, config.seed)
    train_set, valid_set, test_set = (dataset.subset(idx) for idx in plan.partitions())
    logger.info(f"划分：训练 {train_set.n_samples}，验证 {valid_set.n_samples}，测试 {test_set.n_samples}")

    if config.score_on == "all":
        logger.warning("score_on = all：F 分数使用了全部数据（含验证与测试行）")
    score_set = train_set if config.score_on == "train" else dataset
    fscores, selected, ensemble = _select_and_train(config, train_set, score_set, k)
    logger.info(f"选择 {k} / {dataset.n_features} 个特征")

    reports = {}
    for name, part in (("valid", valid_set), ("test", test_set)):
        _, report = _evaluate(ensemble, project_dataset(part, selected))
        reports[name] = report.to_dict()
        logger.info(f"{name} 准确率：{report.accuracy}")

    importance = ensemble.feature_importance()
    report = {
        'command': 'run',
        'config': config.to_dict(),
        'splits': {'train': train_set.n_samples, 'valid': valid_set.n_samples, 'test': test_set.n_samples},
        'selected_features': list(ensemble.feature_names),
        'feature_importance': {name: float(v) for name, v in zip(ensemble.feature_names, importance)},
        'training_events': ensemble.training_log.to_dicts(),
        'training_loss': ensemble.training_log.losses(),
        'reports': reports,
    }

    os.makedirs(config.out, exist_ok=True)
    model_path = os.path.join(config.out, MODEL_FILE)
    save_model(ensemble, model_path)
    write_csv(os.path.join(config.out, SELECTED_FILE),
              ["feature_index", "feature_name", "f_score", "rank"],
              _selected_rows(fscores, selected, dataset.feature_names))
    write_report(report, config.out)
    logger.info(f"模型已写入 {model_path}")
    return report


def cmd_cv(config: PipelineConfig) -> Dict[str, Any]:
    """分层 k 折：每折在训练折上重新选择特征并训练，测试折评估；输出各折、平均与汇总矩阵。"""
    dataset = _load_dataset(config)
    k = _resolve_k(config.k_features, dataset.n_features)
    plan = stratified_kfold(dataset, config.folds, config.seed)

    fold_reports: List[MetricsReport] = []
    pooled = None
    for i, test_idx in enumerate(plan.fold_test_sets):
        train_set = dataset.subset(plan.train_indices(i))
        test_set = dataset.subset(test_idx)
        _, selected, ensemble = _select_and_train(config, train_set, train_set, k)
        cm, report = _evaluate(ensemble, project_dataset(test_set, selected))
        fold_reports.append(report)
        pooled = cm if pooled is None else pooled + cm
        logger.info(f"第 {i + 1}/{plan.k} 折：测试 {test_set.n_samples} 行，准确率 {report.accuracy}")

    average = fold_average(fold_reports)
    report = {
        'command': 'cv',
        'config': config.to_dict(),
        'folds': [int(s.size) for s in plan.fold_test_sets],
        'reports': {
            'cross_validation': average.to_dict(),
            'pooled': macro_report(pooled, dataset.class_names).to_dict(),
        },
    }
    write_report(report, config.out)
    logger.info(f"交叉验证平均准确率：{average.accuracy}")
    return report


def sweep_best_k(rows: Sequence[Dict[str, Any]]) -> int:
    """验证准确率最高的 k；同分取较小的 k。"""
    defined = [r for r in rows if r["valid_accuracy"] is not None]
    if not defined:
        raise ConfigError("no k produced a defined validation accuracy")
    return min(defined, key=lambda r: (-r["valid_accuracy"], r["k"]))["k"]


def cmd_sweep_k(config: PipelineConfig, k_list: Sequence[int]) -> Dict[str, Any]:
    """在同一训练划分上对每个 k 训练一次，比较验证准确率。"""
    if not k_list:
        raise ConfigError("k list is empty")
    dataset = _load_dataset(config)
    ks = [_resolve_k(int(k), dataset.n_features) for k in k_list]
    plan = stratified_split(dataset, config.ratios, config.seed)
    train_set, valid_set, _ = (dataset.subset(idx) for idx in plan.partitions())
    fscores = anova_f_scores(train_set)
    booster = config.booster_config(dataset.n_classes)

    rows = []
    for k in ks:
        selected = select_top_k(fscores, k)
        ensemble = train(project_dataset(train_set, selected), booster)
        _, report = _evaluate(ensemble, project_dataset(valid_set, selected))
        rows.append({'k': k, 'valid_accuracy': report.accuracy})
        logger.info(f"k = {k}：验证准确率 {report.accuracy}")

    best_k = sweep_best_k(rows)
    report = {'command': 'sweep-k', 'config': config.to_dict(), 'sweep': rows, 'best_k': best_k}
    write_report(report, config.out)
    logger.info(f"最佳 k = {best_k}")
    return report


def cmd_select(config: PipelineConfig) -> Dict[str, Any]:
    """只做特征打分与选择：写出全部特征的 F 分数审计表和选中的特征表。"""
    dataset = _load_dataset(config)
    k = _resolve_k(config.k_features, dataset.n_features)
    if config.score_on == "train":
        plan = stratified_split(dataset, config.ratios, config.seed)
        score_set = dataset.subset(plan.train_idx)
    else:
        score_set = dataset
    fscores = anova_f_scores(score_set)
    selected = select_top_k(fscores, k)

    os.makedirs(config.out, exist_ok=True)
    write_scores_csv(fscores, dataset.feature_names, os.path.join(config.out, SCORES_FILE))
    write_csv(os.path.join(config.out, SELECTED_FILE),
              ["feature_index", "feature_name", "f_score", "rank"],
              _selected_rows(fscores, selected, dataset.feature_names))
    logger.info(f"在 {score_set.n_samples} 行上打分，选择 {k} 个特征")
    return {
        'command': 'select',
        'scored_rows': score_set.n_samples,
        'selected_features': [dataset.feature_names[f] for f in selected],
    }


def cmd_predict(model_path: str, input_csv: str, output_csv: str) -> str:
    """按模型的特征列名读取输入，输出每行各类别概率与预测类别名。"""
    ensemble = load_model(model_path)
    _, matrix, _ = read_matrix_csv(input_csv, feature_columns=ensemble.feature_names)
    header = [f"p_{name}" for name in ensemble.class_names] + ["predicted"]
    if matrix.shape[0] == 0:
        rows = []
    else:
        proba, predicted = predict(ensemble, matrix)
        rows = ([float(p) for p in proba[i]] + [ensemble.class_names[predicted[i]]]
                for i in range(matrix.shape[0]))
    out_dir = os.path.dirname(output_csv)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    write_csv(output_csv, header, rows)
    logger.info(f"预测 {matrix.shape[0]} 行，结果写入 {output_csv}")
    return output_csv


def cmd_report(report_path: str) -> str:
    return render_report(read_report(report_path))
