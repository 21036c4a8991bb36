# -*- coding: utf-8 -*-
"""聚类质量评估模块.

包括有监督指标(一对多AUROC、平均精度AUPRC、NMI)、每个簇的结局分布与平均轨迹，
以及指标JSON和簇画像CSV的读写。

簇到分数的映射: 病人的分数向量取其所在簇在训练集上的结局分布。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

# 第三方库导入 (Third-party library imports)
import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import rankdata

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import PhenoIOError, ValidationError
from .cohort import CHANNELS, N_OUTCOMES, OUTCOME_NAMES, Cohort
from .preprocess import GridSpec, NormStats, clamp_outliers, denormalize, regrid
from .tools_utils import Tools

PROFILE_COLUMNS: Tuple[str, ...] = ("cluster", "size") + tuple(f"p_{name}" for name in OUTCOME_NAMES)
TRAJECTORY_COLUMNS: Tuple[str, ...] = ("hours_to_outcome",) + CHANNELS

# 可视化窗口: 结局前7天，不截去最后72小时
VISUAL_GRID = GridSpec(4.0, 168.0, 0.0)

Assignments = Union[Mapping[str, int], Sequence[int], np.ndarray]


@dataclass
class ClusterProfile:
    """单个簇的画像.

    属性:
        cluster: 簇编号.
        size: 病人数.
        outcome_distribution: 长度C的结局比例.
        mean_trajectory: 可视化窗口上的 T×8 通道均值(原始单位，无观测的分箱为NaN).
    """

    cluster: int
    size: int
    outcome_distribution: np.ndarray
    mean_trajectory: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.outcome_distribution = np.asarray(self.outcome_distribution, dtype=float)
        if self.size > 0 and abs(float(self.outcome_distribution.sum()) - 1.0) > 1e-9:
            raise ValidationError(f"簇 {self.cluster} 的结局分布之和不为1")


class ClassMetric(NamedTuple):
    """一个指标的宏平均、逐类值(未定义为NaN)与按患病率加权的平均."""

    macro: float
    per_class: np.ndarray
    weighted: float


@dataclass
class MetricsReport:
    """一个模型在测试集上的有监督指标."""

    model_tag: str
    auroc: float
    auprc: float
    nmi: float
    per_class_auroc: np.ndarray
    per_class_auprc: np.ndarray
    n_patients: int
    auroc_weighted: float = float("nan")
    auprc_weighted: float = float("nan")
    nmi_truth: Optional[float] = None
    n_clusters: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        def _clean(values: np.ndarray) -> Dict[str, Optional[float]]:
            return {name: (None if np.isnan(v) else float(v)) for name, v in zip(OUTCOME_NAMES, values)}

        data = {
            "model_tag": self.model_tag,
            "auroc": float(self.auroc),
            "auprc": float(self.auprc),
            "nmi": float(self.nmi),
            "per_class": {"auroc": _clean(self.per_class_auroc), "auprc": _clean(self.per_class_auprc)},
            "weighted": {"auroc": float(self.auroc_weighted), "auprc": float(self.auprc_weighted)},
            "n_patients": int(self.n_patients),
            "n_clusters": int(self.n_clusters),
        }
        if self.nmi_truth is not None:
            data["nmi_truth"] = float(self.nmi_truth)
        data.update(self.extra)
        return data


""" 一、簇画像 """


def assignment_array(assignments: Assignments, patient_ids: Sequence[str]) -> np.ndarray:
    """把 病人→簇 映射或序列转换为与patient_ids对齐的整数数组.

    Raises:
        ValidationError: 有病人缺少分配或长度不一致.
    """
    if isinstance(assignments, Mapping):
        missing = [pid for pid in patient_ids if pid not in assignments]
        if missing:
            raise ValidationError(f"{len(missing)} 个病人没有簇分配，例如 {missing[0]}")
        return np.array([int(assignments[pid]) for pid in patient_ids], dtype=int)
    array = np.asarray(assignments, dtype=int)
    if array.shape != (len(patient_ids),):
        raise ValidationError(f"分配数 {array.shape} 与病人数 {len(patient_ids)} 不一致")
    return array


def patient_trajectories(cohort: Cohort, grid: GridSpec = VISUAL_GRID, stats: Optional[NormStats] = None,
                         ranges: Optional[Mapping[str, Tuple[float, float]]] = None) -> np.ndarray:
    """每个病人在可视化网格上的原始单位矩阵 N×T×8(未观测为NaN).

    标准化队列需要提供stats以恢复单位。
    """
    if cohort.normalized and stats is None:
        raise ValidationError("标准化队列需要NormStats才能恢复原始单位")
    matrices = []
    for patient in cohort.patients:
        if cohort.normalized:
            matrix = denormalize(regrid(patient, grid)[0], stats)
        else:
            matrix = regrid(clamp_outliers(patient, ranges), grid)[0]
        matrices.append(matrix)
    return np.stack(matrices)


def cluster_profiles(assignments: Assignments, cohort: Cohort, grid: Optional[GridSpec] = VISUAL_GRID,
                     stats: Optional[NormStats] = None,
                     ranges: Optional[Mapping[str, Tuple[float, float]]] = None) -> List[ClusterProfile]:
    """计算每个簇的结局分布与平均轨迹.

    Args:
        assignments: 病人→簇 映射，或与队列顺序一致的簇编号序列.
        cohort: 队列(原始单位；或标准化队列加stats).
        grid: 平均轨迹使用的网格，为None时不计算轨迹.
        stats: 标准化统计量.
        ranges: 异常值范围表.

    Returns:
        按规模从大到小排列的ClusterProfile列表(规模相同时按簇编号).
    """
    clusters = assignment_array(assignments, cohort.patient_ids)
    outcomes = cohort.label_indices()
    n_classes = cohort.priors.alpha.size
    trajectories = None if grid is None else patient_trajectories(cohort, grid, stats, ranges)

    profiles = []
    for cluster in np.unique(clusters):
        members = clusters == cluster
        size = int(members.sum())
        distribution = np.bincount(outcomes[members], minlength=n_classes) / size
        mean_trajectory = None
        if trajectories is not None:
            mean_trajectory = _nanmean(trajectories[members])
        profiles.append(ClusterProfile(int(cluster), size, distribution, mean_trajectory))
    profiles.sort(key=lambda p: (-p.size, p.cluster))
    logger.debug(f"簇画像: {[(p.cluster, p.size) for p in profiles]}")
    return profiles


def _nanmean(stack: np.ndarray) -> np.ndarray:
    counts = np.sum(np.isfinite(stack), axis=0)
    sums = np.nansum(stack, axis=0)
    return np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)


def score_patients(assignments: Assignments, train_profiles: Sequence[ClusterProfile],
                   patient_ids: Optional[Sequence[str]] = None) -> np.ndarray:
    """病人的分数向量 = 所在簇在训练集上的结局分布.

    Returns:
        N×C 分数矩阵，每行之和为1.

    Raises:
        ValidationError: 分配中出现训练集没有的簇.
    """
    if isinstance(assignments, Mapping):
        clusters = assignment_array(assignments, list(patient_ids or assignments))
    else:
        clusters = np.asarray(assignments, dtype=int)
    table = {p.cluster: p.outcome_distribution for p in train_profiles if p.size > 0}
    unseen = sorted(set(clusters.tolist()) - set(table))
    if unseen:
        raise ValidationError(f"簇 {unseen} 在训练集中没有画像")
    return np.stack([table[c] for c in clusters]) if clusters.size else np.zeros((0, N_OUTCOMES))


""" 二、有监督指标 """


def _label_matrix(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels.astype(bool)
    return np.eye(n_classes, dtype=bool)[labels.astype(int)]


def binary_auroc(positive: np.ndarray, scores: np.ndarray) -> float:
    """秩公式的AUROC，并列取平均秩(等价于梯形积分).

    Raises:
        ValidationError: 缺少正例或负例.
    """
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUROC需要同时存在正例与负例")
    ranks = rankdata(np.asarray(scores, dtype=float))
    return float((ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def average_precision(positive: np.ndarray, scores: np.ndarray) -> float:
    """按分数降序扫描的平均精度 Σ (R_i - R_{i-1})·P_i，相同分数作为一组处理.

    Raises:
        ValidationError: 没有正例.
    """
    positive = np.asarray(positive, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    n_pos = int(positive.sum())
    if n_pos == 0:
        raise ValidationError("平均精度需要至少一个正例")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    tp = np.cumsum(positive[order])
    # 每组相同分数的最后一个位置
    last = np.flatnonzero(np.r_[sorted_scores[1:] != sorted_scores[:-1], True])
    precision = tp[last] / (last + 1.0)
    recall = tp[last] / n_pos
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


def _per_class(metric, scores: np.ndarray, labels: np.ndarray, defined) -> ClassMetric:
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    truth = _label_matrix(labels, scores.shape[1])
    if truth.shape != scores.shape:
        raise ValidationError(f"分数 {scores.shape} 与标签 {truth.shape} 形状不一致")
    values = np.full(scores.shape[1], np.nan)
    for c in range(scores.shape[1]):
        if defined(truth[:, c]):
            values[c] = metric(truth[:, c], scores[:, c])
    present = ~np.isnan(values)
    if not present.any():
        raise ValidationError(f"没有任何类别可以计算 {metric.__name__}")
    prevalence = truth[:, present].sum(axis=0).astype(float)
    weighted = float(np.sum(values[present] * prevalence) / prevalence.sum())
    return ClassMetric(float(np.mean(values[present])), values, weighted)


def auroc_macro(scores: np.ndarray, labels: np.ndarray) -> ClassMetric:
    """一对多AUROC，宏平均只包含同时有正负例的类别.

    Args:
        scores: N×C 分数.
        labels: 长度N的类别下标或 N×C one-hot.

    Raises:
        ValidationError: 没有类别同时有正负例.
    """
    return _per_class(binary_auroc, scores, labels, lambda y: 0 < y.sum() < y.size)


def auprc_macro(scores: np.ndarray, labels: np.ndarray) -> ClassMetric:
    """一对多平均精度，没有正例的类别不计入宏平均."""
    return _per_class(average_precision, scores, labels, lambda y: y.sum() > 0)


def contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """两个划分的列联表."""
    _, ia = np.unique(np.asarray(a), return_inverse=True)
    _, ib = np.unique(np.asarray(b), return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia.ravel(), ib.ravel()), 1.0)
    return table


def nmi(assignments: np.ndarray, labels: np.ndarray) -> float:
    """归一化互信息 I(A;L) / sqrt(H(A)·H(L))，自然对数；任一熵为0时定义为0.

    Raises:
        ValidationError: 输入为空或长度不一致.
    """
    assignments = np.asarray(assignments)
    labels = np.asarray(labels)
    if assignments.size == 0 or assignments.shape != labels.shape:
        raise ValidationError(f"NMI需要等长的非空划分: {assignments.shape} vs {labels.shape}")
    joint = contingency(assignments, labels) / assignments.size
    pa = joint.sum(axis=1)
    pl = joint.sum(axis=0)
    h_a = -float(np.sum(pa * np.log(pa)))
    h_l = -float(np.sum(pl * np.log(pl)))
    if h_a <= 0.0 or h_l <= 0.0:
        return 0.0
    nz = joint > 0
    mutual = float(np.sum(joint[nz] * np.log(joint[nz] / np.outer(pa, pl)[nz])))
    return float(min(max(mutual / np.sqrt(h_a * h_l), 0.0), 1.0))


def nmi_truth(assignments: Assignments, truth: Mapping[str, int], patient_ids: Sequence[str]) -> float:
    """与合成数据真实表型之间的NMI.

    Raises:
        ValidationError: 真值文件缺少某个病人.
    """
    missing = [pid for pid in patient_ids if pid not in truth]
    if missing:
        raise ValidationError(f"真值文件缺少 {len(missing)} 个病人，例如 {missing[0]}")
    clusters = assignment_array(assignments, patient_ids)
    return nmi(clusters, np.array([truth[pid] for pid in patient_ids]))


def evaluate(model_tag: str, assignments: np.ndarray, scores: np.ndarray, labels: np.ndarray,
             truth: Optional[np.ndarray] = None) -> MetricsReport:
    """汇总三项指标.

    Args:
        model_tag: 模型标签.
        assignments: 长度N的簇编号.
        scores: N×C 分数.
        labels: 长度N的结局类别下标.
        truth: 可选的真实表型编号.

    Returns:
        MetricsReport.
    """
    assignments = np.asarray(assignments, dtype=int)
    labels = np.asarray(labels, dtype=int)
    if not (assignments.shape[0] == labels.shape[0] == np.asarray(scores).shape[0]):
        raise ValidationError("分配、分数与标签的长度不一致")
    roc = auroc_macro(scores, labels)
    prc = auprc_macro(scores, labels)
    report = MetricsReport(model_tag, roc.macro, prc.macro, nmi(assignments, labels), roc.per_class,
                           prc.per_class, int(labels.size), roc.weighted, prc.weighted,
                           None if truth is None else nmi(assignments, np.asarray(truth)),
                           int(np.unique(assignments).size))
    logger.info(f"{model_tag}: AUROC={report.auroc:.4f}, AUPRC={report.auprc:.4f}, NMI={report.nmi:.4f}")
    return report


""" 三、读写 """


def write_metrics(report: MetricsReport, path: str) -> str:
    return Tools.write_json(path, report.to_dict())


def profiles_frame(profiles: Sequence[ClusterProfile]) -> pd.DataFrame:
    rows = [[p.cluster, p.size] + [float(v) for v in p.outcome_distribution] for p in profiles]
    return pd.DataFrame(rows, columns=list(PROFILE_COLUMNS))


def write_profiles(profiles: Sequence[ClusterProfile], path: str) -> str:
    """写出 ``cluster,size,p_discharge,p_icu,p_cardiac_arrest,p_death``."""
    Tools.makedirs(path, flag_file=True)
    try:
        profiles_frame(profiles).to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise PhenoIOError(f"写入簇画像失败 {path}: {e}") from e
    return path


def read_profiles(path: str) -> List[ClusterProfile]:
    """读取簇画像CSV(不含轨迹).

    Raises:
        PhenoIOError: 文件无法读取.
        ValidationError: 列名不符.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise PhenoIOError(f"读取簇画像失败 {path}: {e}") from e
    if tuple(frame.columns) != PROFILE_COLUMNS:
        raise ValidationError(f"簇画像CSV列名不符: {list(frame.columns)}")
    return [ClusterProfile(int(row[0]), int(row[1]), np.asarray(row[2:], dtype=float))
            for row in frame.itertuples(index=False)]


def write_assignments(path: str, patient_ids: Sequence[str], clusters: Sequence[int]) -> str:
    """写出 ``patient_id,cluster``，每个病人一行."""
    frame = pd.DataFrame({"patient_id": list(patient_ids), "cluster": np.asarray(clusters, dtype=int)})
    if frame["patient_id"].duplicated().any():
        raise ValidationError("分配中存在重复的patient_id")
    Tools.makedirs(path, flag_file=True)
    try:
        frame.to_csv(path, index=False, lineterminator="\n")
    except OSError as e:
        raise PhenoIOError(f"写入分配失败 {path}: {e}") from e
    return path


def read_assignments(path: str) -> Dict[str, int]:
    """读取分配CSV，返回按文件顺序的 patient_id → cluster."""
    try:
        frame = pd.read_csv(path, dtype={"patient_id": str})
    except (OSError, pd.errors.ParserError) as e:
        raise PhenoIOError(f"读取分配失败 {path}: {e}") from e
    if list(frame.columns) != ["patient_id", "cluster"]:
        raise ValidationError(f"分配CSV表头必须为 patient_id,cluster: {path}")
    if frame["patient_id"].duplicated().any():
        raise ValidationError(f"分配CSV中存在重复的patient_id: {path}")
    return dict(zip(frame["patient_id"], frame["cluster"].astype(int).tolist()))


def trajectory_frame(profile: ClusterProfile, grid: GridSpec = VISUAL_GRID) -> pd.DataFrame:
    frame = pd.DataFrame(profile.mean_trajectory, columns=list(CHANNELS))
    frame.insert(0, "hours_to_outcome", grid.bin_midpoints())
    return frame


def write_trajectories(profiles: Sequence[ClusterProfile], directory: str,
                       grid: GridSpec = VISUAL_GRID) -> List[str]:
    """每个簇一个 ``trajectory_cluster{id}.csv``，列为 ``hours_to_outcome,HR,...,FIO2``."""
    Tools.makedirs(directory)
    paths = []
    for profile in profiles:
        if profile.mean_trajectory is None:
            continue
        path = os.path.join(directory, f"trajectory_cluster{profile.cluster}.csv")
        try:
            trajectory_frame(profile, grid).to_csv(path, index=False, na_rep="", lineterminator="\n")
        except OSError as e:
            raise PhenoIOError(f"写入轨迹失败 {path}: {e}") from e
        paths.append(path)
    return paths


__all__ = [
    "PROFILE_COLUMNS",
    "TRAJECTORY_COLUMNS",
    "VISUAL_GRID",
    "ClusterProfile",
    "ClassMetric",
    "MetricsReport",
    "assignment_array",
    "patient_trajectories",
    "cluster_profiles",
    "score_patients",
    "binary_auroc",
    "average_precision",
    "auroc_macro",
    "auprc_macro",
    "contingency",
    "nmi",
    "nmi_truth",
    "evaluate",
    "write_metrics",
    "profiles_frame",
    "write_profiles",
    "read_profiles",
    "write_assignments",
    "read_assignments",
    "trajectory_frame",
    "write_trajectories",
]
