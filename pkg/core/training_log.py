"""
训练事件日志（Training Log）

训练过程的“事实记录”：每条事件不可变、按发生顺序追加、可导出。
最小事件词汇表：
- TRAINING_START: 开始训练（样本数、列数、bundle 数）
- ITERATION_END: 一轮迭代结束（训练对数损失、叶子数、GOSS 样本数）
- TRAINING_END: 训练结束（最终损失）
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class TrainingEventType(Enum):
    """事件类型枚举。"""
    TRAINING_START = "TRAINING_START"
    ITERATION_END = "ITERATION_END"
    TRAINING_END = "TRAINING_END"


@dataclass(frozen=True)
class TrainingEvent:
    """不可变事件：某一轮 iteration 发生了 event_type，附带 context。"""

    event_type: TrainingEventType
    iteration: int
    context: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {'type': self.event_type.value, 'iteration': self.iteration, 'context': dict(self.context)}

    def to_narrative(self) -> str:
        narratives = {
            TrainingEventType.TRAINING_START: f"开始训练：{self.context.get('rows')} 行，{self.context.get('bundles')} 列",
            TrainingEventType.ITERATION_END: f"第 {self.iteration} 轮结束，训练损失 {self.context.get('loss')}",
            TrainingEventType.TRAINING_END: f"训练结束，最终损失 {self.context.get('loss')}",
        }
        return narratives.get(self.event_type, "未知事件")


class TrainingLog:
    """按顺序追加的训练事件序列。"""

    def __init__(self):
        self.events: List[TrainingEvent] = []

    def append(self, event_type: TrainingEventType, iteration: int,
               context: Optional[Dict[str, Any]] = None) -> TrainingEvent:
        if self.events and iteration < self.events[-1].iteration:
            raise ValueError(f"iteration {iteration} precedes the last recorded event")
        event = TrainingEvent(event_type, iteration, dict(context or {}))
        self.events.append(event)
        logger.debug(f"事件记录：{event.to_narrative()}")
        return event

    def get_events_by_type(self, event_type: TrainingEventType) -> List[TrainingEvent]:
        return [e for e in self.events if e.event_type == event_type]

    def losses(self) -> List[float]:
        """初始损失（第 0 轮之前）加上每轮结束时的训练对数损失。"""
        start = self.get_events_by_type(TrainingEventType.TRAINING_START)
        head = [start[0].context['loss']] if start else []
        return head + [e.context['loss'] for e in self.get_events_by_type(TrainingEventType.ITERATION_END)]

    def to_dicts(self) -> List[Dict[str, Any]]:
        return [e.to_dict() for e in self.events]
