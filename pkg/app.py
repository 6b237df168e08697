import argparse
import logging
import sys

from core.errors import ConfigError, DataError, GbdtError, TrainingError
from pipeline.commands import cmd_cv, cmd_predict, cmd_report, cmd_run, cmd_select, cmd_sweep_k
from pipeline.config import build_config, preset_path

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_TRAINING = 4

# 命令行选项 -> PipelineConfig 字段
FLAG_FIELDS = {
    'data': 'data',
    'label_col': 'label_column',
    'task': 'task',
    'k_features': 'k_features',
    'trees': 'num_trees',
    'learning_rate': 'learning_rate',
    'max_depth': 'max_depth',
    'num_leaves': 'num_leaves',
    'min_samples_leaf': 'min_samples_leaf',
    'min_split_gain': 'min_split_gain',
    'goss_a': 'goss_top_rate',
    'goss_b': 'goss_other_rate',
    'max_bin': 'max_bin',
    'efb_conflict': 'efb_max_conflict_rate',
    'seed': 'seed',
    'folds': 'folds',
    'score_on': 'score_on',
    'out': 'out',
}


def _add_config_flags(p: argparse.ArgumentParser):
    p.add_argument('--config', help='key=value 配置文件')
    p.add_argument('--preset', choices=['two_class', 'multi_class'], help='使用 presets/ 下的预置配置')
    p.add_argument('--data', help='带标签的特征 CSV')
    p.add_argument('--label-col', help='标签列名（默认 label）')
    p.add_argument('--task', choices=['two_class', 'multi_class'])
    p.add_argument('--k-features', type=int)
    p.add_argument('--trees', type=int)
    p.add_argument('--learning-rate', type=float)
    p.add_argument('--max-depth', type=int)
    p.add_argument('--num-leaves', type=int)
    p.add_argument('--min-samples-leaf', type=int)
    p.add_argument('--min-split-gain', type=float)
    p.add_argument('--goss-a', type=float, help='GOSS 大梯度保留比例 a')
    p.add_argument('--goss-b', type=float, help='GOSS 小梯度采样比例 b')
    p.add_argument('--max-bin', type=int)
    p.add_argument('--efb-conflict', type=float, help='EFB 最大冲突率')
    p.add_argument('--no-bundle', action='store_true', help='关闭特征捆绑')
    p.add_argument('--seed', type=int)
    p.add_argument('--folds', type=int)
    p.add_argument('--score-on', choices=['train', 'all'])
    p.add_argument('--out', help='输出目录')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='app.py', description='GOSS/EFB 梯度提升树 + ANOVA 特征选择流水线')
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true')
    verbosity.add_argument('-q', '--quiet', action='store_true')
    sub = parser.add_subparsers(dest='command', required=True)

    for name, help_text in (('run', '划分、选择、训练并评估'),
                            ('cv', 'k 折交叉验证'),
                            ('sweep-k', '比较不同 k 的验证准确率'),
                            ('select', '只做 ANOVA 特征打分与选择')):
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        if name == 'sweep-k':
            p.add_argument('--k-list', required=True, help='逗号分隔的 k，例如 116,133')

    p = sub.add_parser('predict', help='用已保存的模型预测')
    p.add_argument('--model', required=True)
    p.add_argument('--input', required=True)
    p.add_argument('--output', default='predictions.csv')

    p = sub.add_parser('report', help='渲染 report.json')
    p.add_argument('path')
    return parser


def _config_from_args(args):
    overrides = {field: getattr(args, flag) for flag, field in FLAG_FIELDS.items()}
    if args.no_bundle:
        overrides['enable_bundle'] = False
    config_path = args.config or (preset_path(args.preset) if args.preset else None)
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    return build_config(config_path, overrides)


def _parse_k_list(text: str):
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise ConfigError(f"invalid --k-list {text!r}") from None


def run_command(args) -> None:
    if args.command == 'predict':
        cmd_predict(args.model, args.input, args.output)
    elif args.command == 'report':
        sys.stdout.write(cmd_report(args.path))
    else:
        config = _config_from_args(args)
        if args.command == 'run':
            cmd_run(config)
        elif args.command == 'cv':
            cmd_cv(config)
        elif args.command == 'sweep-k':
            cmd_sweep_k(config, _parse_k_list(args.k_list))
        elif args.command == 'select':
            cmd_select(config)


def exit_code(error: GbdtError) -> int:
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, DataError):
        return EXIT_DATA
    if isinstance(error, TrainingError):
        return EXIT_TRAINING
    return 1


def _origin(error: BaseException) -> str:
    """抛出异常的模块名。"""
    tb = error.__traceback__
    while tb is not None and tb.tb_next is not None:
        tb = tb.tb_next
    return tb.tb_frame.f_globals.get("__name__", "?") if tb is not None else "?"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format='[%(levelname)s] %(asctime)s %(name)s: %(message)s'
    )

    try:
        run_command(args)
    except GbdtError as e:
        logger.error(f"[{_origin(e)}] {type(e).__name__}: {e}")
        return exit_code(e)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
