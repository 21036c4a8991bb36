# -*- coding: utf-8 -*-
"""病人队列数据模型模块.

定义生命体征通道、结局标签、单个病人的观测序列和带类别先验的队列，
以及队列CSV文件的读写。所有对象构造后不可变，可在并发任务间只读共享。

CSV格式(每行一次观测，表头必需)::

    patient_id,hours_to_outcome,HR,RR,DBP,SBP,SPO2,TEMP,AVPU,FIO2,outcome

缺失的读数为空单元格；预处理后的队列在表头前多一行 ``#normalized=true``。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Dict, List, Sequence, Tuple

# 第三方库导入 (Third-party library imports)
import numpy as np
import pandas as pd
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import CohortParseError, PhenoIOError, ValidationError
from .tools_utils import Tools


class VitalChannel(IntEnum):
    """8个生命体征通道，顺序固定(下标0=HR … 7=FIO2)."""

    HR = 0     # 心率 beats/min
    RR = 1     # 呼吸频率 breaths/min
    DBP = 2    # 舒张压 mmHg
    SBP = 3    # 收缩压 mmHg
    SPO2 = 4   # 血氧饱和度 %
    TEMP = 5   # 体温 °C
    AVPU = 6   # 意识水平，1=Alert 2=Verbal 3=Pain 4=Unresponsive
    FIO2 = 7   # 吸入氧浓度，分数 0.21–1.0


class Outcome(IntEnum):
    """住院结局，每次入院恰好一个."""

    DISCHARGE = 0
    ICU_ADMISSION = 1
    CARDIAC_ARREST = 2
    DEATH = 3


CHANNELS: Tuple[str, ...] = tuple(c.name for c in VitalChannel)
N_CHANNELS: int = len(CHANNELS)
N_OUTCOMES: int = len(Outcome)

# CSV中outcome列的取值
OUTCOME_CODES: Dict[str, Outcome] = {
    "discharge": Outcome.DISCHARGE,
    "icu": Outcome.ICU_ADMISSION,
    "cardiac_arrest": Outcome.CARDIAC_ARREST,
    "death": Outcome.DEATH,
}
OUTCOME_NAMES: Tuple[str, ...] = tuple(OUTCOME_CODES)

CSV_COLUMNS: Tuple[str, ...] = ("patient_id", "hours_to_outcome") + CHANNELS + ("outcome",)
NORMALIZED_HEADER = "#normalized=true"

# Σα 与 1 的容差
PRIOR_TOLERANCE = 1e-12


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class OutcomeLabel:
    """one-hot编码的结局标签.

    属性:
        one_hot: 长度为C的0/1向量，和为1.
    """

    one_hot: np.ndarray

    def __post_init__(self) -> None:
        one_hot = np.asarray(self.one_hot, dtype=float)
        if one_hot.ndim != 1 or one_hot.size < 1:
            raise ValidationError(f"one-hot标签必须是非空向量, shape={one_hot.shape}")
        if not np.all((one_hot == 0.0) | (one_hot == 1.0)) or one_hot.sum() != 1.0:
            raise ValidationError(f"one-hot标签取值必须为0/1且和为1: {one_hot.tolist()}")
        object.__setattr__(self, "one_hot", _frozen(one_hot))

    @classmethod
    def from_outcome(cls, outcome: int, n_classes: int = N_OUTCOMES) -> "OutcomeLabel":
        """由类别下标构造标签."""
        if not 0 <= int(outcome) < n_classes:
            raise ValidationError(f"结局下标越界: {outcome} (C={n_classes})")
        one_hot = np.zeros(n_classes)
        one_hot[int(outcome)] = 1.0
        return cls(one_hot)

    @property
    def index(self) -> int:
        """类别下标."""
        return int(np.argmax(self.one_hot))

    @property
    def n_classes(self) -> int:
        return int(self.one_hot.size)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, OutcomeLabel) and np.array_equal(self.one_hot, other.one_hot)

    def __hash__(self) -> int:
        return hash(tuple(self.one_hot.tolist()))


@dataclass(frozen=True)
class ClassPrior:
    """类别先验 α，α_c 为标签c的病人比例.

    属性:
        alpha: 长度为C的比例向量，非负且和为1.
    """

    alpha: np.ndarray

    def __post_init__(self) -> None:
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim != 1 or alpha.size < 1:
            raise ValidationError(f"先验必须是非空向量, shape={alpha.shape}")
        if not np.all(np.isfinite(alpha)) or np.any(alpha < 0.0) or np.any(alpha > 1.0):
            raise ValidationError(f"先验取值必须在[0, 1]内: {alpha.tolist()}")
        if abs(float(alpha.sum()) - 1.0) > PRIOR_TOLERANCE:
            raise ValidationError(f"先验之和必须为1: sum={alpha.sum()!r}")
        object.__setattr__(self, "alpha", _frozen(alpha))

    @classmethod
    def uniform(cls, n_classes: int = N_OUTCOMES) -> "ClassPrior":
        """均匀先验(1/C)，用于复现未加权的损失."""
        return cls(np.full(n_classes, 1.0 / n_classes))

    def require_positive(self) -> np.ndarray:
        """返回α，要求所有分量严格为正(作为损失的除数).

        Raises:
            ValidationError: 存在α_c ≤ 0.
        """
        if np.any(self.alpha <= 0.0):
            missing = [OUTCOME_NAMES[i] if i < len(OUTCOME_NAMES) else str(i)
                       for i in np.flatnonzero(self.alpha <= 0.0)]
            raise ValidationError(f"加权损失要求所有类别先验为正, 缺失类别: {', '.join(missing)}")
        return self.alpha

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ClassPrior) and np.array_equal(self.alpha, other.alpha)

    def __hash__(self) -> int:
        return hash(tuple(self.alpha.tolist()))


@dataclass(frozen=True)
class PatientSeries:
    """单个病人的多通道生命体征序列.

    属性:
        patient_id: 病人标识.
        times: 距结局的小时数，按时间先后存储(即数值严格递减).
        values: T×8 读数矩阵，未观测处为NaN.
        mask: T×8 布尔矩阵，True表示已观测.
    """

    patient_id: str
    times: np.ndarray
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        mask = np.asarray(self.mask, dtype=bool)
        if times.ndim != 1:
            raise ValidationError(f"[{self.patient_id}] times必须是一维向量")
        if values.ndim != 2 or values.shape[1] != N_CHANNELS:
            raise ValidationError(f"[{self.patient_id}] values必须是T×{N_CHANNELS}矩阵, shape={values.shape}")
        if values.shape != mask.shape or values.shape[0] != times.size:
            raise ValidationError(f"[{self.patient_id}] times/values/mask形状不一致")
        if not np.all(np.isfinite(times)) or np.any(times < 0.0):
            raise ValidationError(f"[{self.patient_id}] hours_to_outcome必须为非负有限值")
        if np.any(np.diff(times) >= 0.0):
            raise ValidationError(f"[{self.patient_id}] 观测时间必须严格按时间先后排列(距结局小时数严格递减)")
        if not np.all(np.isfinite(values[mask])):
            raise ValidationError(f"[{self.patient_id}] 已观测的读数必须为有限值")
        values = np.where(mask, values, np.nan)
        object.__setattr__(self, "patient_id", str(self.patient_id))
        object.__setattr__(self, "times", _frozen(times))
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "mask", _frozen(mask))

    @property
    def n_obs(self) -> int:
        """观测时间点个数."""
        return int(self.times.size)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PatientSeries):
            return NotImplemented
        return (self.patient_id == other.patient_id
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.mask, other.mask)
                and np.array_equal(self.values, other.values, equal_nan=True))


def compute_priors(labels: Sequence[OutcomeLabel]) -> ClassPrior:
    """由标签计算类别先验 α_c = count(c) / N.

    Args:
        labels: 非空标签列表.

    Returns:
        ClassPrior.

    Raises:
        ValidationError: 标签列表为空或类别数不一致.
    """
    if len(labels) == 0:
        raise ValidationError("计算类别先验需要至少一个标签")
    sizes = {label.n_classes for label in labels}
    if len(sizes) != 1:
        raise ValidationError(f"标签类别数不一致: {sorted(sizes)}")
    counts = np.sum([label.one_hot for label in labels], axis=0)
    return ClassPrior(counts / float(len(labels)))


@dataclass(frozen=True)
class Cohort:
    """带标签的病人队列.

    属性:
        patients: PatientSeries元组.
        labels: 与patients一一对应的OutcomeLabel元组.
        priors: 由labels计算的类别先验.
        normalized: 是否为预处理(标准化)后的数据.
    """

    patients: Tuple[PatientSeries, ...]
    labels: Tuple[OutcomeLabel, ...]
    priors: ClassPrior
    normalized: bool = field(default=False)

    def __post_init__(self) -> None:
        patients = tuple(self.patients)
        labels = tuple(self.labels)
        if len(patients) < 1 or len(patients) != len(labels):
            raise ValidationError(f"队列需要至少一个病人且标签数与病人数相同: "
                                  f"{len(patients)} 个病人, {len(labels)} 个标签")
        ids = [p.patient_id for p in patients]
        if len(set(ids)) != len(ids):
            raise ValidationError("队列中存在重复的patient_id")
        expected = compute_priors(labels)
        if expected.alpha.shape != self.priors.alpha.shape or \
                np.max(np.abs(expected.alpha - self.priors.alpha)) > PRIOR_TOLERANCE:
            raise ValidationError("存储的类别先验与由标签重新计算的结果不一致")
        object.__setattr__(self, "patients", patients)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_patients(cls, patients: Sequence[PatientSeries], labels: Sequence[OutcomeLabel],
                      normalized: bool = False) -> "Cohort":
        """由病人与标签构造队列，并计算先验."""
        return cls(tuple(patients), tuple(labels), compute_priors(labels), normalized)

    def __len__(self) -> int:
        return len(self.patients)

    @property
    def patient_ids(self) -> List[str]:
        return [p.patient_id for p in self.patients]

    def label_indices(self) -> np.ndarray:
        """每个病人的结局类别下标."""
        return np.array([label.index for label in self.labels], dtype=int)

    def subset(self, indices: Sequence[int]) -> "Cohort":
        """按下标取子队列(先验在子集上重新计算).

        Raises:
            ValidationError: 子集为空.
        """
        indices = list(indices)
        return Cohort.from_patients([self.patients[i] for i in indices],
                                    [self.labels[i] for i in indices],
                                    normalized=self.normalized)


def _parse_cell(text: str, column: str, line_number: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CohortParseError(f"列 {column} 不是数值: {text!r}", line_number) from None
    if not np.isfinite(value):
        raise CohortParseError(f"列 {column} 不是有限值: {text!r}", line_number)
    return value


def load_cohort(path: str) -> Cohort:
    """读取队列CSV文件.

    同一病人的行按patient_id分组(保持首次出现的顺序)，组内按时间先后排序；
    类别先验由outcome列计算。原始数据中FIO2大于1.0的读数视为百分数并除以100。

    Args:
        path: CSV文件路径.

    Returns:
        Cohort.

    Raises:
        PhenoIOError: 文件无法读取.
        CohortParseError: 表头或某行格式错误(消息包含行号).
        ValidationError: 未知结局、同一病人结局不一致或病人没有任何观测.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            first_line = f.readline().rstrip("\r\n")
    except OSError as e:
        raise PhenoIOError(f"无法读取队列文件 {path}: {e}") from e

    normalized = first_line.strip() == NORMALIZED_HEADER
    skip = 1 if normalized else 0
    # 文件行号 = DataFrame下标 + 表头行 + 可选的注释行 + 1
    line_offset = 2 + skip

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skiprows=skip,
                            encoding="utf-8")
    except pd.errors.ParserError as e:
        raise CohortParseError(f"CSV格式错误: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise CohortParseError("队列文件为空", 1) from e
    except OSError as e:
        raise PhenoIOError(f"无法读取队列文件 {path}: {e}") from e

    if tuple(frame.columns) != CSV_COLUMNS:
        raise CohortParseError(f"表头必须为 {','.join(CSV_COLUMNS)}，实际为 {','.join(frame.columns)}",
                               1 + skip)
    if frame.empty:
        raise ValidationError(f"队列文件没有任何观测行: {path}")

    rows: Dict[str, List[Tuple[float, np.ndarray, np.ndarray, int]]] = {}
    outcomes: Dict[str, Tuple[str, int]] = {}
    for position, record in enumerate(frame.itertuples(index=False, name=None)):
        line_number = position + line_offset
        # 字段不足的行被pandas补齐为空值
        record = tuple(cell if isinstance(cell, str) else "" for cell in record)
        if not record[-1].strip():
            raise CohortParseError(f"字段数不足或结局为空，每行需要 {len(CSV_COLUMNS)} 个字段", line_number)
        patient_id = record[0].strip()
        if not patient_id:
            raise CohortParseError("patient_id为空", line_number)
        hours = _parse_cell(record[1].strip(), "hours_to_outcome", line_number)
        if hours < 0.0:
            raise CohortParseError(f"hours_to_outcome不能为负: {hours}", line_number)

        values = np.full(N_CHANNELS, np.nan)
        for ch, text in enumerate(record[2:2 + N_CHANNELS]):
            text = text.strip()
            if text:
                values[ch] = _parse_cell(text, CHANNELS[ch], line_number)
        if not normalized and values[VitalChannel.FIO2] > 1.0:
            values[VitalChannel.FIO2] /= 100.0
        mask = np.isfinite(values)

        outcome = record[-1].strip().lower()
        if outcome not in OUTCOME_CODES:
            raise ValidationError(f"line {line_number}: 未知结局 {record[-1]!r}, "
                                  f"可选值: {', '.join(OUTCOME_NAMES)}")
        previous = outcomes.setdefault(patient_id, (outcome, line_number))
        if previous[0] != outcome:
            raise ValidationError(f"line {line_number}: 病人 {patient_id} 的结局 {outcome!r} "
                                  f"与第 {previous[1]} 行的 {previous[0]!r} 不一致")
        rows.setdefault(patient_id, []).append((hours, values, mask, line_number))

    patients = []
    labels = []
    for patient_id, patient_rows in rows.items():
        # 距结局小时数越大越早，按时间先后排列即按小时数降序
        patient_rows.sort(key=lambda r: -r[0])
        hours = np.array([r[0] for r in patient_rows])
        duplicated = np.flatnonzero(np.diff(hours) == 0.0)
        if duplicated.size:
            raise CohortParseError(f"病人 {patient_id} 存在重复的hours_to_outcome={hours[duplicated[0]]}",
                                   patient_rows[duplicated[0] + 1][3])
        values = np.vstack([r[1] for r in patient_rows])
        mask = np.vstack([r[2] for r in patient_rows])
        if not mask.any():
            raise ValidationError(f"病人 {patient_id} 没有任何观测值")
        patients.append(PatientSeries(patient_id, hours, values, mask))
        labels.append(OutcomeLabel.from_outcome(OUTCOME_CODES[outcomes[patient_id][0]]))

    cohort = Cohort.from_patients(patients, labels, normalized=normalized)
    logger.info(f"读取队列 {path}: {len(cohort)} 个病人, {len(frame)} 行观测, "
                f"先验 {np.round(cohort.priors.alpha, 4).tolist()}")
    return cohort


def cohort_to_frame(cohort: Cohort) -> pd.DataFrame:
    """把队列展开为每行一次观测的DataFrame(列顺序与CSV一致)."""
    frames = []
    for patient, label in zip(cohort.patients, cohort.labels):
        frame = pd.DataFrame(patient.values, columns=list(CHANNELS))
        frame.insert(0, "hours_to_outcome", patient.times)
        frame.insert(0, "patient_id", patient.patient_id)
        frame["outcome"] = OUTCOME_NAMES[label.index]
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def save_cohort(cohort: Cohort, path: str) -> str:
    """把队列写为CSV文件(UTF-8, LF换行).

    数值以最短往返表示输出，load_cohort(save_cohort(c)) 与 c 相同；
    标准化队列额外写入 ``#normalized=true`` 注释行。

    Args:
        cohort: 队列.
        path: 目标文件路径，父目录不存在时自动创建.

    Returns:
        写入的文件路径.

    Raises:
        PhenoIOError: 写入失败.
    """
    Tools.makedirs(path, flag_file=True)
    frame = cohort_to_frame(cohort)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            if cohort.normalized:
                f.write(NORMALIZED_HEADER + "\n")
            frame.to_csv(f, index=False, na_rep="", lineterminator="\n")
    except OSError as e:
        raise PhenoIOError(f"无法写入队列文件 {path}: {e}") from e
    logger.info(f"写入队列 {path}: {len(cohort)} 个病人")
    return path


__all__ = [
    "VitalChannel",
    "Outcome",
    "CHANNELS",
    "N_CHANNELS",
    "N_OUTCOMES",
    "OUTCOME_CODES",
    "OUTCOME_NAMES",
    "CSV_COLUMNS",
    "OutcomeLabel",
    "ClassPrior",
    "PatientSeries",
    "Cohort",
    "compute_priors",
    "load_cohort",
    "save_cohort",
    "cohort_to_frame",
]
