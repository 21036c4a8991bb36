# -*- coding: utf-8 -*-
"""合成队列生成模块.

按预设的表型动态生成带结局标签的病人队列，并单独导出每个病人的真实表型，
用于在没有真实数据时检验聚类算法能否恢复表型以及加权损失的效果。

每个通道在距结局t小时处的取值::

    baseline + trend·(window_start - t) + amplitude·sin(2πt/period) + N(0, noise_std²)

病人i的随机数流由 ``SeedSequence(seed, spawn_key=(i,))`` 派生，串行与并行生成的结果一致。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from dataclasses import dataclass
from typing import Dict, NamedTuple, Sequence, Tuple

# 第三方库导入 (Third-party library imports)
import numpy as np
import pandas as pd
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import PhenoIOError, ValidationError
from .cohort import (CHANNELS, N_CHANNELS, N_OUTCOMES, Cohort, OutcomeLabel, PatientSeries,
                     VitalChannel)
from .preprocess import GridSpec
from .tools_utils import Tools

DEFAULT_IMBALANCE: Tuple[float, ...] = (0.939, 0.030, 0.011, 0.020)

# dynamics最后一维的含义
DYNAMICS_FIELDS: Tuple[str, ...] = ("baseline", "trend", "amplitude", "period", "noise_std")
BASELINE, TREND, AMPLITUDE, PERIOD, NOISE = range(len(DYNAMICS_FIELDS))

DISTRIBUTION_TOLERANCE = 1e-9

# 稳定状态下的通道动态(baseline, trend, amplitude, period, noise_std)
STABLE_DYNAMICS: Dict[str, Tuple[float, float, float, float, float]] = {
    "HR": (78.0, 0.0, 3.0, 24.0, 3.0),
    "RR": (16.0, 0.0, 0.0, 24.0, 1.0),
    "DBP": (70.0, 0.0, 0.0, 24.0, 4.0),
    "SBP": (120.0, 0.0, 0.0, 24.0, 6.0),
    "SPO2": (96.0, 0.0, 0.0, 24.0, 0.8),
    "TEMP": (36.8, 0.0, 0.2, 24.0, 0.2),
    "AVPU": (1.0, 0.0, 0.0, 24.0, 0.3),
    "FIO2": (0.21, 0.0, 0.0, 24.0, 0.01),
}

# 各表型相对稳定状态的偏移: {表型: {通道: (baseline偏移, trend)}}
PHENOTYPE_SHIFTS: Dict[int, Dict[str, Tuple[float, float]]] = {
    0: {},
    1: {"HR": (18.0, 0.0)},
    2: {"RR": (6.0, 0.0)},
    # 恶化型：呼吸频率逐渐升高、血氧逐渐下降
    3: {"SPO2": (-3.0, -0.03), "RR": (0.0, 0.06)},
}

PRESET_SCALE = {"easy": 1.0, "hard": 0.1}


def _as_array(value, shape_name: str, ndim: int) -> np.ndarray:
    array = np.array(value, dtype=float)
    if array.ndim != ndim:
        raise ValidationError(f"{shape_name} 维度应为{ndim}, 实际为 {array.ndim}")
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class SynthConfig:
    """合成队列配置.

    属性:
        n_patients: 病人数.
        phenotype_count: 表型数 P.
        outcome_mix: P×4，每个表型的结局分布(行和为1).
        imbalance: 长度4，目标总体结局比例(和为1).
        dynamics: P×8×5，每个表型每个通道的 (baseline, trend, amplitude, period, noise_std).
        seed: 随机种子.
        window_start_hours: 最早观测的距结局小时数.
        cadence_hours: 名义观测间隔.
        jitter_hours: 观测时间的均匀抖动幅度(±).
        dropout: 单次观测整体缺失的概率.
    """

    n_patients: int
    phenotype_count: int
    outcome_mix: np.ndarray
    dynamics: np.ndarray
    imbalance: np.ndarray = DEFAULT_IMBALANCE  # type: ignore[assignment]
    seed: int = 0
    window_start_hours: float = 168.0
    cadence_hours: float = 4.0
    jitter_hours: float = 1.5
    dropout: float = 0.2

    def __post_init__(self) -> None:
        mix = _as_array(self.outcome_mix, "outcome_mix", 2)
        imbalance = _as_array(self.imbalance, "imbalance", 1)
        dynamics = _as_array(self.dynamics, "dynamics", 3)
        p = int(self.phenotype_count)
        if self.n_patients < 1 or p < 1:
            raise ValidationError(f"n_patients与phenotype_count必须为正: {self.n_patients}, {p}")
        if mix.shape != (p, N_OUTCOMES):
            raise ValidationError(f"outcome_mix形状应为 ({p}, {N_OUTCOMES}), 实际为 {mix.shape}")
        if np.any(mix < 0) or np.any(np.abs(mix.sum(axis=1) - 1.0) > DISTRIBUTION_TOLERANCE):
            raise ValidationError("outcome_mix每行必须是和为1的非负分布")
        if imbalance.shape != (N_OUTCOMES,) or np.any(imbalance < 0) or \
                abs(imbalance.sum() - 1.0) > DISTRIBUTION_TOLERANCE:
            raise ValidationError(f"imbalance必须是长度{N_OUTCOMES}、和为1的非负分布")
        if np.any((imbalance > 0) & (mix.sum(axis=0) <= 0)):
            raise ValidationError("存在目标比例为正但没有任何表型会产生的结局")
        if dynamics.shape != (p, N_CHANNELS, len(DYNAMICS_FIELDS)):
            raise ValidationError(f"dynamics形状应为 ({p}, {N_CHANNELS}, {len(DYNAMICS_FIELDS)}), "
                                  f"实际为 {dynamics.shape}")
        if not np.all(np.isfinite(dynamics)) or np.any(dynamics[..., NOISE] < 0) or \
                np.any(dynamics[..., PERIOD] <= 0):
            raise ValidationError("dynamics需要有限值、noise_std >= 0 且 period > 0")
        if not self.window_start_hours > self.cadence_hours > 2 * self.jitter_hours >= 0:
            raise ValidationError("需要 window_start_hours > cadence_hours > 2·jitter_hours >= 0")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError(f"dropout必须在[0, 1)内: {self.dropout}")
        object.__setattr__(self, "outcome_mix", mix)
        object.__setattr__(self, "imbalance", imbalance)
        object.__setattr__(self, "dynamics", dynamics)
        object.__setattr__(self, "phenotype_count", p)

    def joint_distribution(self) -> np.ndarray:
        """表型×结局的联合分布.

        结局边缘分布严格等于imbalance，给定结局时表型按outcome_mix的该列加权，
        因此表型间的结局差异得以保留，总体不平衡比例也得以满足。
        """
        column = self.outcome_mix.sum(axis=0)
        conditional = np.divide(self.outcome_mix, column, out=np.zeros_like(self.outcome_mix),
                                where=column > 0)
        return conditional * self.imbalance

    def nominal_times(self) -> np.ndarray:
        """名义观测时间(距结局小时数，按时间先后)."""
        first = self.window_start_hours - self.cadence_hours / 2.0
        count = int(np.floor(first / self.cadence_hours)) + 1
        times = first - self.cadence_hours * np.arange(count)
        return times[times > self.jitter_hours]

    def mean_trajectory(self, phenotype: int, times: np.ndarray) -> np.ndarray:
        """不含噪声的 len(times)×8 均值轨迹."""
        d = self.dynamics[phenotype]
        t = np.asarray(times, dtype=float)[:, None]
        return (d[:, BASELINE] + d[:, TREND] * (self.window_start_hours - t)
                + d[:, AMPLITUDE] * np.sin(2.0 * np.pi * t / d[:, PERIOD]))


class SyntheticCohort(NamedTuple):
    """合成结果：队列与对应的真实表型ID."""

    cohort: Cohort
    phenotype_ids: np.ndarray


def _bound_channels(values: np.ndarray) -> np.ndarray:
    values[:, VitalChannel.SPO2] = np.minimum(values[:, VitalChannel.SPO2], 100.0)
    values[:, VitalChannel.FIO2] = np.clip(values[:, VitalChannel.FIO2], 0.21, 1.0)
    values[:, VitalChannel.AVPU] = np.clip(np.round(values[:, VitalChannel.AVPU]), 1.0, 4.0)
    return values


def _generate_patient(config: SynthConfig, index: int, joint: np.ndarray,
                      nominal: np.ndarray) -> Tuple[PatientSeries, int, int]:
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(index,)))
    cell = int(rng.choice(joint.size, p=joint.ravel()))
    phenotype, outcome = divmod(cell, N_OUTCOMES)

    times = nominal + rng.uniform(-config.jitter_hours, config.jitter_hours, size=nominal.size)
    keep = rng.random(nominal.size) >= config.dropout
    if not keep.any():
        keep[int(rng.integers(nominal.size))] = True
    times = times[keep]

    noise = rng.standard_normal((times.size, N_CHANNELS)) * config.dynamics[phenotype, :, NOISE]
    values = _bound_channels(config.mean_trajectory(phenotype, times) + noise)
    patient = PatientSeries(f"P{index:06d}", times, values, np.ones_like(values, dtype=bool))
    return patient, phenotype, outcome


def generate(config: SynthConfig) -> SyntheticCohort:
    """按配置生成合成队列.

    Args:
        config: 合成配置.

    Returns:
        SyntheticCohort(cohort, phenotype_ids).
    """
    joint = config.joint_distribution()
    joint = joint / joint.sum()
    nominal = config.nominal_times()
    patients, labels, phenotypes = [], [], []
    for index in range(config.n_patients):
        patient, phenotype, outcome = _generate_patient(config, index, joint, nominal)
        patients.append(patient)
        labels.append(OutcomeLabel.from_outcome(outcome))
        phenotypes.append(phenotype)
    cohort = Cohort.from_patients(patients, labels)
    phenotype_ids = np.array(phenotypes, dtype=int)
    logger.info(f"生成合成队列: {config.n_patients} 个病人, {config.phenotype_count} 个表型, "
                f"表型规模 {np.bincount(phenotype_ids, minlength=config.phenotype_count).tolist()}, "
                f"seed={config.seed}")
    return SyntheticCohort(cohort, phenotype_ids)


def make_separable_preset(level: str, n_patients: int = 500, seed: int = 0,
                          imbalance: Sequence[float] = DEFAULT_IMBALANCE) -> SynthConfig:
    """四表型预设.

    easy: 表型0稳定，表型1心率升高，表型2呼吸频率升高，表型3呼吸频率上升且血氧下降(恶化型)，
    两两之间至少一个通道的均值轨迹相差3个噪声标准差以上；
    hard: 所有偏移缩小为十分之一，分离度不超过1个噪声标准差。

    Args:
        level: "easy" 或 "hard".
        n_patients: 病人数.
        seed: 随机种子.
        imbalance: 总体结局比例.

    Returns:
        SynthConfig.

    Raises:
        ValidationError: 未知的level.
    """
    if level not in PRESET_SCALE:
        raise ValidationError(f"未知的预设: {level!r}, 可选值: {', '.join(PRESET_SCALE)}")
    scale = PRESET_SCALE[level]
    stable = np.array([STABLE_DYNAMICS[c] for c in CHANNELS])
    dynamics = np.repeat(stable[None], len(PHENOTYPE_SHIFTS), axis=0)
    for phenotype, shifts in PHENOTYPE_SHIFTS.items():
        for channel, (offset, trend) in shifts.items():
            ch = CHANNELS.index(channel)
            dynamics[phenotype, ch, BASELINE] += scale * offset
            dynamics[phenotype, ch, TREND] += scale * trend
    # 表型p主要产生结局p
    mix = np.full((len(PHENOTYPE_SHIFTS), N_OUTCOMES), 0.05) + np.eye(len(PHENOTYPE_SHIFTS)) * 0.80
    return SynthConfig(n_patients=n_patients, phenotype_count=len(PHENOTYPE_SHIFTS), outcome_mix=mix,
                       dynamics=dynamics, imbalance=np.asarray(imbalance, dtype=float), seed=seed)


def phenotype_separation(config: SynthConfig, grid: GridSpec = GridSpec(4.0, 168.0, 0.0)) -> Tuple[float, float]:
    """两两表型之间的分离度(最小值, 最大值).

    一对表型的分离度取各通道中最大的 RMS(均值轨迹之差) / 合并噪声标准差，
    轨迹在grid的分箱中点上求值。两者均无噪声且轨迹相同的通道不参与比较。

    Raises:
        ValidationError: 表型少于两个.
    """
    if config.phenotype_count < 2:
        raise ValidationError("计算分离度至少需要两个表型")
    times = grid.bin_midpoints()
    means = [config.mean_trajectory(p, times) for p in range(config.phenotype_count)]
    ratios = []
    for p in range(config.phenotype_count):
        for q in range(p + 1, config.phenotype_count):
            rms = np.sqrt(np.mean((means[p] - means[q]) ** 2, axis=0))
            noise = np.sqrt((config.dynamics[p, :, NOISE] ** 2 + config.dynamics[q, :, NOISE] ** 2) / 2.0)
            best = 0.0
            for ch in range(N_CHANNELS):
                if noise[ch] > 0:
                    best = max(best, float(rms[ch] / noise[ch]))
                elif rms[ch] > 0:
                    best = np.inf
            ratios.append(best)
    return min(ratios), max(ratios)


def write_truth(path: str, patient_ids: Sequence[str], phenotype_ids: Sequence[int]) -> str:
    """写入真实表型文件 ``patient_id,phenotype_id``."""
    frame = pd.DataFrame({"patient_id": list(patient_ids),
                          "phenotype_id": np.asarray(phenotype_ids, dtype=int)})
    Tools.makedirs(path, flag_file=True)
    try:
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise PhenoIOError(f"无法写入表型文件 {path}: {e}") from e
    return path


def read_truth(path: str) -> Dict[str, int]:
    """读取真实表型文件，返回 patient_id → phenotype_id."""
    try:
        frame = pd.read_csv(path, dtype={"patient_id": str, "phenotype_id": int})
    except OSError as e:
        raise PhenoIOError(f"无法读取表型文件 {path}: {e}") from e
    except ValueError as e:
        raise ValidationError(f"表型文件格式错误 {path}: {e}") from e
    if list(frame.columns) != ["patient_id", "phenotype_id"]:
        raise ValidationError(f"表型文件表头必须为 patient_id,phenotype_id: {path}")
    return dict(zip(frame["patient_id"], frame["phenotype_id"].astype(int)))


def truth_path_for(cohort_path: str) -> str:
    """队列文件对应的表型文件路径: ``x.csv`` → ``x.truth.csv``."""
    stem = cohort_path[:-4] if cohort_path.lower().endswith(".csv") else cohort_path
    return f"{stem}.truth.csv"


__all__ = [
    "DEFAULT_IMBALANCE",
    "DYNAMICS_FIELDS",
    "SynthConfig",
    "SyntheticCohort",
    "generate",
    "make_separable_preset",
    "phenotype_separation",
    "write_truth",
    "read_truth",
    "truth_path_for",
]
