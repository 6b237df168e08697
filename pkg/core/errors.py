"""
异常层次（Error Hierarchy）

所有可预期的失败都落在 GbdtError 之下，CLI 边界层按类型映射退出码：
  ConfigError      -> 2
  DataError        -> 3（ModelFormatError 属于数据错误）
  TrainingError    -> 4
"""

from typing import Optional


class GbdtError(Exception):
    """项目内所有可预期错误的基类。"""


class ConfigError(GbdtError, ValueError):
    """配置非法：参数越界、未知键、比例之和不为 1 等。"""


class DataError(GbdtError, ValueError):
    """
    数据非法。可选地携带位置，便于定位 CSV 中的问题：
    row 为 1 起的数据行号（表头不计），column_index 为 1 起的列号，column 为列名。
    """

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None,
                 column_index: Optional[int] = None):
        self.row = row
        self.column = column
        self.column_index = column_index
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column_index is not None and column is not None:
            where.append(f"column {column_index} {column!r}")
        elif column_index is not None:
            where.append(f"column {column_index}")
        elif column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ModelFormatError(DataError):
    """模型文件损坏、被截断、版本不符或校验和失败。"""


class TrainingError(GbdtError, RuntimeError):
    """训练过程中的不可恢复错误。"""
