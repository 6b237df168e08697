"""
运行报告的读写：report.json（机器可读）与 report.txt（纯文本表格）。

report.json 顶层结构：

    {
      "command": "run" | "cv" | "sweep-k",
      "config": {...},                     # PipelineConfig 字段
      "reports": {"valid": MetricsReport, "test": MetricsReport, ...},
      ...                                  # 各命令的附加字段
    }
"""

import json
import logging
import os
from typing import Any, Dict, List

from core.errors import DataError
from core.metrics import MetricsReport, render_table

logger = logging.getLogger(__name__)

REPORT_JSON = "report.json"
REPORT_TXT = "report.txt"


def _jsonable(value):
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    if isinstance(value, list):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    return value


def dumps_report(report: Dict[str, Any]) -> str:
    return json.dumps(_jsonable(report), indent=2, ensure_ascii=False, allow_nan=False) + "\n"


def render_sweep(rows: List[Dict[str, Any]], best_k: int) -> str:
    lines = ["k".rjust(8) + "valid_accuracy".rjust(18)]
    for row in rows:
        acc = row["valid_accuracy"]
        cell = "n/a" if acc is None else f"{100.0 * acc:.2f}"
        mark = "  *" if row["k"] == best_k else ""
        lines.append(str(row["k"]).rjust(8) + cell.rjust(18) + mark)
    return "\n".join(lines) + "\n"


def render_report(report: Dict[str, Any]) -> str:
    """把 report.json 的内容渲染为文本；结构不符时抛 DataError。"""
    try:
        command = report["command"]
        sections = [f"command: {command}"]
        if "selected_features" in report:
            sections.append(f"selected features: {len(report['selected_features'])}")
        if command == "sweep-k":
            sections.append(render_sweep(report["sweep"], report["best_k"]))
        for name, payload in report.get("reports", {}).items():
            metrics = MetricsReport.from_dict(payload)
            sections.append(f"== {name} ==\n" + render_table(metrics))
    except (KeyError, TypeError, AttributeError) as e:
        raise DataError(f"malformed report: {e}") from None
    return "\n".join(sections)


def write_report(report: Dict[str, Any], out_dir: str) -> List[str]:
    """写出 report.json 与 report.txt，返回两个路径。"""
    text = render_report(report)
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, REPORT_JSON)
    txt_path = os.path.join(out_dir, REPORT_TXT)
    with open(json_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dumps_report(report))
    with open(txt_path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)
    logger.info(f"报告已写入 {json_path}")
    return [json_path, txt_path]


def read_report(path: str) -> Dict[str, Any]:
    if not os.path.isfile(path):
        raise DataError(f"report file not found: {path}")
    with open(path, encoding="utf-8") as f:
        try:
            report = json.load(f)
        except json.JSONDecodeError as e:
            raise DataError(f"malformed report {path}: {e}") from None
    if not isinstance(report, dict) or "command" not in report:
        raise DataError(f"malformed report {path}: missing 'command'")
    return report
