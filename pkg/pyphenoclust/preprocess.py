# -*- coding: utf-8 -*-
"""预处理模块：把不规则的原始观测转换为固定网格上的完整标准化张量.

流水线: clamp_outliers → regrid → 按覆盖率剔除病人 → impute → normalize.
中位数与均值/标准差只在训练集上拟合，测试集复用训练集的NormStats。

网格按距结局小时数定义，第i个(按时间先后)分箱覆盖
``[start - (i+1)·bin, start - i·bin)``，输入窗口为 ``[end, start)``。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

# 第三方库导入 (Third-party library imports)
import numpy as np
import pandas as pd
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import UsageError, ValidationError
from .cohort import (CHANNELS, N_CHANNELS, ClassPrior, Cohort, OutcomeLabel, PatientSeries,
                     VitalChannel, compute_priors)
from .tools_utils import Tools

# 窗口长度与分箱宽度整除的容差
GRID_TOLERANCE = 1e-9

# 生理合理范围(闭区间)，超出范围的读数视为异常值并屏蔽
DEFAULT_RANGES: Dict[str, Tuple[float, float]] = {
    "HR": (20.0, 250.0),
    "RR": (4.0, 60.0),
    "DBP": (20.0, 150.0),
    "SBP": (40.0, 250.0),
    "SPO2": (50.0, 100.0),
    "TEMP": (30.0, 43.0),
    "AVPU": (1.0, 4.0),
    "FIO2": (0.21, 1.0),
}

# 只接受整数读数的通道
ORDINAL_CHANNELS = (VitalChannel.AVPU,)

DEFAULT_MIN_COVERAGE = 0.1


@dataclass(frozen=True)
class GridSpec:
    """距结局时间轴上的规则网格.

    属性:
        bin_hours: 分箱宽度(小时).
        window_start_hours: 窗口起点(距结局小时数，较早的一端).
        window_end_hours: 窗口终点(距结局小时数，较晚的一端).
    """

    bin_hours: float = 4.0
    window_start_hours: float = 168.0
    window_end_hours: float = 72.0

    def __post_init__(self) -> None:
        if not self.bin_hours > 0:
            raise ValidationError(f"bin_hours必须为正: {self.bin_hours}")
        if not self.window_start_hours > self.window_end_hours >= 0:
            raise ValidationError(f"需要 window_start_hours > window_end_hours >= 0: "
                                  f"{self.window_start_hours}, {self.window_end_hours}")
        ratio = (self.window_start_hours - self.window_end_hours) / self.bin_hours
        if abs(ratio - round(ratio)) > GRID_TOLERANCE:
            raise ValidationError(f"窗口长度必须是bin_hours的整数倍: {ratio}")
        if round(ratio) < 1:
            raise ValidationError("网格至少需要一个分箱")

    @property
    def n_bins(self) -> int:
        """分箱数 T."""
        return int(round((self.window_start_hours - self.window_end_hours) / self.bin_hours))

    def bin_index(self, hours: np.ndarray) -> np.ndarray:
        """距结局小时数对应的分箱下标(按时间先后)，窗口外为-1."""
        hours = np.asarray(hours, dtype=float)
        inside = (hours >= self.window_end_hours) & (hours < self.window_start_hours)
        index = np.ceil((self.window_start_hours - hours) / self.bin_hours).astype(int) - 1
        # 浮点误差可能把窗口边界上的点算到相邻分箱
        index = np.clip(index, 0, self.n_bins - 1)
        return np.where(inside, index, -1)

    def bin_midpoints(self) -> np.ndarray:
        """各分箱中点的距结局小时数(按时间先后，数值递减)."""
        i = np.arange(self.n_bins)
        return self.window_start_hours - (i + 0.5) * self.bin_hours

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


@dataclass(frozen=True)
class NormStats:
    """训练集上拟合的逐通道统计量.

    属性:
        mean: 长度8的均值.
        std: 长度8的总体标准差，全部为正.
        median: 长度8的中位数(插补空白分箱用).
    """

    mean: np.ndarray
    std: np.ndarray
    median: np.ndarray

    def __post_init__(self) -> None:
        arrays = {}
        for name in ("mean", "std", "median"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (N_CHANNELS,) or not np.all(np.isfinite(value)):
                raise ValidationError(f"NormStats.{name} 必须是长度{N_CHANNELS}的有限向量")
            value = value.copy()
            value.setflags(write=False)
            arrays[name] = value
        if np.any(arrays["std"] <= 0.0):
            bad = [CHANNELS[i] for i in np.flatnonzero(arrays["std"] <= 0.0)]
            raise ValidationError(f"通道方差为零，无法标准化: {', '.join(bad)}")
        for name, value in arrays.items():
            object.__setattr__(self, name, value)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "channels": list(CHANNELS),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "median": self.median.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "NormStats":
        if list(data.get("channels", CHANNELS)) != list(CHANNELS):
            raise ValidationError(f"NormStats通道顺序不匹配: {data.get('channels')}")
        return cls(np.array(data["mean"]), np.array(data["std"]), np.array(data["median"]))


@dataclass(frozen=True)
class RegularGridSeries:
    """规则网格上的完整标准化序列.

    属性:
        patient_id: 病人标识.
        grid: 所用网格.
        values: T×8 标准化值，全部为有限值.
        observed_fraction: 每个通道至少有一次原始观测的分箱比例.
    """

    patient_id: str
    grid: GridSpec
    values: np.ndarray
    observed_fraction: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n_bins, N_CHANNELS):
            raise ValidationError(f"[{self.patient_id}] 网格序列形状应为 "
                                  f"({self.grid.n_bins}, {N_CHANNELS}), 实际为 {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"[{self.patient_id}] 网格序列存在缺失或非有限值")
        values.setflags(write=False)
        fraction = np.array(self.observed_fraction, dtype=float)
        fraction.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "observed_fraction", fraction)

    @property
    def coverage(self) -> float:
        """通道平均覆盖率."""
        return float(self.observed_fraction.mean())


def ranges_from_mapping(mapping: Mapping[str, Any],
                        base: Optional[Mapping[str, Tuple[float, float]]] = None) -> Dict[str, Tuple[float, float]]:
    """由配置段 ``clamp.*`` 构造异常值范围表.

    Args:
        mapping: 扁平配置字典，如 ``{"clamp.HR": "20,250"}``.
        base: 起始范围表，默认 DEFAULT_RANGES.

    Returns:
        通道名到 (下界, 上界) 的字典.

    Raises:
        UsageError: 未知通道或范围格式错误.
    """
    ranges = dict(base or DEFAULT_RANGES)
    for key, value in Tools.section(mapping, "clamp").items():
        channel = key.upper()
        if channel not in CHANNELS:
            raise UsageError(f"配置段 [clamp] 存在未知通道: {key}")
        bounds = Tools.parse_float_list(value)
        if len(bounds) != 2 or not bounds[0] <= bounds[1]:
            raise UsageError(f"clamp.{key} 需要 '下界,上界' 且下界不大于上界: {value!r}")
        ranges[channel] = (bounds[0], bounds[1])
    return ranges


def clamp_outliers(series: PatientSeries,
                   ranges: Optional[Mapping[str, Tuple[float, float]]] = None) -> PatientSeries:
    """屏蔽超出生理范围的读数.

    Args:
        series: 原始序列.
        ranges: 范围表，默认 DEFAULT_RANGES.

    Returns:
        新的PatientSeries，范围内的读数保持不变.
    """
    ranges = ranges or DEFAULT_RANGES
    lower = np.array([ranges[c][0] for c in CHANNELS])
    upper = np.array([ranges[c][1] for c in CHANNELS])
    values = np.where(series.mask, series.values, lower)
    keep = series.mask & (values >= lower) & (values <= upper)
    for channel in ORDINAL_CHANNELS:
        keep[:, channel] &= values[:, channel] == np.round(values[:, channel])
    return PatientSeries(series.patient_id, series.times, series.values, keep)


def regrid(series: PatientSeries, grid: GridSpec) -> Tuple[np.ndarray, np.ndarray]:
    """把观测聚合到规则网格上，分箱值取落入该箱的观测均值.

    Args:
        series: 已剔除异常值的序列.
        grid: 网格.

    Returns:
        (T×8 矩阵，空分箱为NaN; T×8 每箱观测计数).
    """
    n_bins = grid.n_bins
    index = grid.bin_index(series.times)
    sums = np.zeros((n_bins, N_CHANNELS))
    counts = np.zeros((n_bins, N_CHANNELS), dtype=int)
    rows = index >= 0
    if rows.any():
        mask = series.mask[rows]
        values = np.where(mask, series.values[rows], 0.0)
        np.add.at(sums, index[rows], values)
        np.add.at(counts, index[rows], mask.astype(int))
    with np.errstate(invalid="ignore", divide="ignore"):
        matrix = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return matrix, counts


def fit_channel_medians(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """在训练集的网格矩阵上计算逐通道中位数(忽略空分箱).

    Raises:
        ValidationError: 某个通道在整个训练集中从未被观测.
    """
    if len(matrices) == 0:
        raise ValidationError("计算通道中位数需要至少一个病人")
    stacked = np.concatenate([np.asarray(m, dtype=float) for m in matrices], axis=0)
    observed = np.isfinite(stacked).any(axis=0)
    if not observed.all():
        missing = [CHANNELS[i] for i in np.flatnonzero(~observed)]
        raise ValidationError(f"训练集中从未观测到的通道: {', '.join(missing)}")
    return np.nanmedian(stacked, axis=0)


def impute(matrix: np.ndarray, medians: np.ndarray) -> np.ndarray:
    """逐通道按时间先后前向填充，首次观测之前与全空通道用训练集中位数填充."""
    frame = pd.DataFrame(np.asarray(matrix, dtype=float))
    filled = frame.ffill().fillna(pd.Series(np.asarray(medians, dtype=float), index=frame.columns))
    return filled.to_numpy(dtype=float)


def fit_norm_stats(matrices: Sequence[np.ndarray], medians: Optional[np.ndarray] = None) -> NormStats:
    """在完整的训练矩阵上拟合逐通道均值与总体标准差.

    Args:
        matrices: 已插补的 T×8 矩阵列表，至少两个病人.
        medians: 插补所用的中位数，为None时由矩阵本身计算.

    Returns:
        NormStats.

    Raises:
        ValidationError: 病人少于两个或存在零方差通道.
    """
    if len(matrices) < 2:
        raise ValidationError(f"拟合标准化统计量至少需要2个病人, 实际为 {len(matrices)}")
    stacked = np.concatenate([np.asarray(m, dtype=float) for m in matrices], axis=0)
    if medians is None:
        medians = np.median(stacked, axis=0)
    return NormStats(stacked.mean(axis=0), stacked.std(axis=0), medians)


def normalize(matrix: np.ndarray, stats: NormStats, patient_id: str = "",
              grid: Optional[GridSpec] = None,
              observed_fraction: Optional[np.ndarray] = None) -> RegularGridSeries:
    """按通道标准化: (x - mean) / std."""
    matrix = np.asarray(matrix, dtype=float)
    if grid is None:
        grid = GridSpec()
    if observed_fraction is None:
        observed_fraction = np.ones(N_CHANNELS)
    values = (matrix - stats.mean) / stats.std
    return RegularGridSeries(patient_id, grid, values, observed_fraction)


def denormalize(values: np.ndarray, stats: NormStats) -> np.ndarray:
    """normalize的逆变换，恢复通道单位."""
    return np.asarray(values, dtype=float) * stats.std + stats.mean


@dataclass(frozen=True)
class PreprocessedCohort:
    """预处理结果.

    属性:
        series: 保留病人的RegularGridSeries.
        labels: 与series对应的标签.
        priors: 在保留集合上重新计算的类别先验.
        stats: 使用的标准化统计量.
        grid: 网格.
        dropped: 因覆盖率不足被剔除的病人ID.
    """

    series: Tuple[RegularGridSeries, ...]
    labels: Tuple[OutcomeLabel, ...]
    priors: ClassPrior
    stats: NormStats
    grid: GridSpec
    dropped: Tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.series)

    @property
    def patient_ids(self) -> List[str]:
        return [s.patient_id for s in self.series]

    def tensor(self) -> np.ndarray:
        """N×T×8 张量."""
        return np.stack([s.values for s in self.series])

    def label_matrix(self) -> np.ndarray:
        """N×C one-hot矩阵."""
        return np.stack([label.one_hot for label in self.labels])

    def label_indices(self) -> np.ndarray:
        return np.array([label.index for label in self.labels], dtype=int)

    def to_cohort(self) -> Cohort:
        """转换为标准化队列(时间为分箱中点，全部已观测)，用于CSV导出."""
        times = self.grid.bin_midpoints()
        patients = [PatientSeries(s.patient_id, times, s.values, np.ones_like(s.values, dtype=bool))
                    for s in self.series]
        return Cohort.from_patients(patients, self.labels, normalized=True)


def regrid_cohort(cohort: Cohort, grid: GridSpec,
                  ranges: Optional[Mapping[str, Tuple[float, float]]] = None) -> List[Tuple[np.ndarray, np.ndarray]]:
    """对队列中每个病人执行 clamp → regrid."""
    return [regrid(clamp_outliers(p, ranges), grid) for p in cohort.patients]


def preprocess_cohort(cohort: Cohort, grid: Optional[GridSpec] = None, stats: Optional[NormStats] = None,
                      ranges: Optional[Mapping[str, Tuple[float, float]]] = None,
                      min_coverage: float = DEFAULT_MIN_COVERAGE) -> PreprocessedCohort:
    """完整预处理流水线.

    Args:
        cohort: 原始单位的队列.
        grid: 网格，默认 GridSpec().
        stats: 训练集统计量；为None时在本队列上拟合(即本队列为训练集).
        ranges: 异常值范围表.
        min_coverage: 通道平均覆盖率的下限，低于该值(或完全无观测)的病人被剔除.

    Returns:
        PreprocessedCohort.

    Raises:
        ValidationError: 队列已标准化、全部病人被剔除或统计量无法拟合.
    """
    if cohort.normalized:
        raise ValidationError("队列已经标准化，预处理需要原始单位的数据")
    grid = grid or GridSpec()
    if not 0.0 <= min_coverage <= 1.0:
        raise ValidationError(f"min_coverage必须在[0, 1]内: {min_coverage}")

    kept_matrices, kept_fractions, kept_patients, kept_labels, dropped = [], [], [], [], []
    for patient, label, (matrix, counts) in zip(cohort.patients, cohort.labels,
                                                 regrid_cohort(cohort, grid, ranges)):
        fraction = (counts > 0).mean(axis=0)
        coverage = float(fraction.mean())
        if coverage == 0.0 or coverage < min_coverage:
            dropped.append(patient.patient_id)
            continue
        kept_matrices.append(matrix)
        kept_fractions.append(fraction)
        kept_patients.append(patient.patient_id)
        kept_labels.append(label)

    if not kept_matrices:
        raise ValidationError(f"全部 {len(cohort)} 个病人的覆盖率低于 {min_coverage}, 没有可用数据")
    if dropped:
        logger.info(f"覆盖率不足，剔除 {len(dropped)}/{len(cohort)} 个病人")

    if stats is None:
        medians = fit_channel_medians(kept_matrices)
        imputed = [impute(m, medians) for m in kept_matrices]
        stats = fit_norm_stats(imputed, medians)
        logger.debug(f"拟合标准化统计量: mean={np.round(stats.mean, 3).tolist()}, "
                     f"std={np.round(stats.std, 3).tolist()}")
    else:
        imputed = [impute(m, stats.median) for m in kept_matrices]

    series = tuple(normalize(m, stats, pid, grid, f)
                   for m, pid, f in zip(imputed, kept_patients, kept_fractions))
    return PreprocessedCohort(series, tuple(kept_labels), compute_priors(kept_labels), stats, grid,
                              tuple(dropped))


__all__ = [
    "DEFAULT_RANGES",
    "DEFAULT_MIN_COVERAGE",
    "GridSpec",
    "NormStats",
    "RegularGridSeries",
    "PreprocessedCohort",
    "ranges_from_mapping",
    "clamp_outliers",
    "regrid",
    "regrid_cohort",
    "fit_channel_medians",
    "impute",
    "fit_norm_stats",
    "normalize",
    "denormalize",
    "preprocess_cohort",
]
