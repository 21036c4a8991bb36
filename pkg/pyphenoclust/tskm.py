# -*- coding: utf-8 -*-
"""时间序列k-means模块.

支持欧氏距离与DTW两种度量：k-means++初始化、Lloyd迭代(欧氏距离取均值，
DTW使用DBA重心)、最近质心分配、多次重启的惯性曲线以及基于最大离散曲率的肘部法选K。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

# 第三方库导入 (Third-party library imports)
import numpy as np
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import ValidationError
from .decorator_utils import timer
from .dtw import Metric, MetricKind

FORMAT_VERSION = 1
DEFAULT_RESTARTS = 5


@dataclass(frozen=True)
class TskmConfig:
    """TSKM训练配置(配置文件段 ``tskm.*``).

    k为None时在 [k_min, k_max] 上用肘部法选择。
    """

    k: Optional[int] = None
    k_min: int = 2
    k_max: int = 8
    restarts: int = DEFAULT_RESTARTS
    max_iter: int = 50
    band: Optional[int] = None
    independent: bool = False
    dba_iters: int = 10

    def __post_init__(self) -> None:
        if self.k is not None and self.k < 1:
            raise ValidationError(f"tskm.k必须为正: {self.k}")
        if not (1 <= self.k_min and self.k_min + 2 <= self.k_max):
            raise ValidationError(f"肘部法需要 1 <= k_min 且 k_max - k_min >= 2: {self.k_min}, {self.k_max}")
        if self.restarts < 1 or self.max_iter < 1 or self.dba_iters < 1:
            raise ValidationError("restarts、max_iter、dba_iters必须为正")


@dataclass(frozen=True)
class CentroidSet:
    """拟合得到的质心集合.

    属性:
        metric: 距离度量.
        centroids: K×T×D 质心.
        inertia: 最终簇内距离平方和.
        seed: 拟合所用种子.
        history: 每次Lloyd迭代的惯性.
    """

    metric: Metric
    centroids: np.ndarray
    inertia: float
    seed: int
    history: Tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        centroids = np.array(self.centroids, dtype=float)
        if centroids.ndim != 3 or centroids.shape[0] < 1:
            raise ValidationError(f"centroids必须是 K×T×D 张量, shape={centroids.shape}")
        if not np.all(np.isfinite(centroids)):
            raise ValidationError("centroids存在非有限值")
        if not self.inertia >= 0:
            raise ValidationError(f"inertia必须非负: {self.inertia}")
        centroids.setflags(write=False)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "history", tuple(float(h) for h in self.history))

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])

    def assign(self, series: np.ndarray) -> np.ndarray:
        """N×T×D 序列的最近质心编号."""
        return tskm_assign_many(self, series)

    def to_json(self) -> Dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "model": "tskm",
            "metric": self.metric.to_dict(),
            "K": self.k,
            "T": int(self.centroids.shape[1]),
            "D": int(self.centroids.shape[2]),
            "centroids": self.centroids.tolist(),
            "inertia": float(self.inertia),
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> "CentroidSet":
        if data.get("format_version") != FORMAT_VERSION:
            raise ValidationError(f"不支持的模型格式版本: {data.get('format_version')}")
        centroids = np.array(data["centroids"], dtype=float)
        if centroids.shape != (data["K"], data["T"], data["D"]):
            raise ValidationError(f"质心形状 {centroids.shape} 与声明的 K/T/D 不一致")
        return cls(Metric.from_dict(data["metric"]), centroids, float(data["inertia"]), int(data["seed"]))


def _as_batch(series: Sequence[np.ndarray]) -> np.ndarray:
    series = np.asarray(series, dtype=float)
    if series.ndim == 2:
        series = series[:, :, None]
    if series.ndim != 3:
        raise ValidationError(f"序列集合必须是 N×T×D 张量, shape={series.shape}")
    return series


def kmeans_plus_plus(series: np.ndarray, k: int, metric: Metric, rng: np.random.Generator) -> List[int]:
    """k-means++ 初始化：后续质心按到已选质心最小距离的平方成比例抽样.

    Args:
        series: N×T×D 序列.
        k: 质心数.
        metric: 距离度量.
        rng: 随机数生成器.

    Returns:
        被选为初始质心的序列下标.
    """
    series = _as_batch(series)
    n = series.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"需要 1 <= K <= N: K={k}, N={n}")
    chosen = [int(rng.integers(n))]
    closest = metric.distances_to(series[chosen[0]], series) ** 2
    while len(chosen) < k:
        total = float(closest.sum())
        if total > 0.0:
            candidate = int(rng.choice(n, p=closest / total))
        else:
            # 剩余序列全部与已选质心重合
            candidate = int(np.setdiff1d(np.arange(n), chosen)[0])
        chosen.append(candidate)
        closest = np.minimum(closest, metric.distances_to(series[candidate], series) ** 2)
    return chosen


def _repair_empty(labels: np.ndarray, distances: np.ndarray, k: int) -> Tuple[np.ndarray, List[int]]:
    """把离所属质心最远的点移入空簇，返回新标签与被移动点的下标."""
    labels = labels.copy()
    own = distances[np.arange(labels.size), labels].copy()
    moved = []
    for cluster in range(k):
        if np.any(labels == cluster):
            continue
        sizes = np.bincount(labels, minlength=k)
        movable = sizes[labels] > 1
        candidates = np.where(movable, own, -np.inf)
        point = int(np.argmax(candidates))
        labels[point] = cluster
        own[point] = 0.0
        moved.append(point)
        logger.debug(f"簇 {cluster} 为空，用距质心最远的点 {point} 重新播种")
    return labels, moved


def _update_centroids(series: np.ndarray, labels: np.ndarray, centroids: np.ndarray, metric: Metric,
                      dba_iters: int) -> np.ndarray:
    updated = centroids.copy()
    for cluster in range(centroids.shape[0]):
        members = series[labels == cluster]
        if metric.is_dtw:
            updated[cluster] = metric.average(members, init=centroids[cluster], iters=dba_iters)
        else:
            updated[cluster] = metric.average(members)
    return updated


def tskm_fit(series: Sequence[np.ndarray], k: int, metric: Optional[Metric] = None, seed: int = 0,
             max_iter: int = 50, dba_iters: int = 10) -> CentroidSet:
    """拟合时间序列k-means.

    Args:
        series: N条 T×D 序列.
        k: 簇数，1 <= K <= N.
        metric: 距离度量，默认欧氏距离.
        seed: 随机种子.
        max_iter: 最大Lloyd迭代次数.
        dba_iters: DTW度量下每次质心更新的DBA迭代次数.

    Returns:
        CentroidSet.

    Raises:
        ValidationError: K大于序列数或K < 1.
    """
    metric = metric or Metric.euclidean()
    series = _as_batch(series)
    n = series.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"需要 1 <= K <= N: K={k}, N={n}")
    rng = np.random.default_rng(seed)
    centroids = series[kmeans_plus_plus(series, k, metric, rng)].copy()

    labels: Optional[np.ndarray] = None
    history = []
    converged = False
    for iteration in range(max_iter):
        distances = metric.distance_matrix(series, centroids)
        assigned = np.argmin(distances, axis=1)
        history.append(float(np.sum(distances[np.arange(n), assigned] ** 2)))
        if labels is not None and np.array_equal(assigned, labels):
            converged = True
            break
        labels, moved = _repair_empty(assigned, distances, k)
        for point in moved:
            centroids[labels[point]] = series[point]
        centroids = _update_centroids(series, labels, centroids, metric, dba_iters)

    if not converged:
        distances = metric.distance_matrix(series, centroids)
        assigned = np.argmin(distances, axis=1)
        history.append(float(np.sum(distances[np.arange(n), assigned] ** 2)))
    logger.trace(f"tskm K={k} seed={seed}: {len(history)} 次迭代, inertia={history[-1]:.6g}")
    return CentroidSet(metric, centroids, history[-1], seed, tuple(history))


def tskm_assign(model: CentroidSet, series: np.ndarray) -> int:
    """单条序列的最近质心编号，距离相同时取编号最小者.

    Raises:
        ValidationError: 形状与质心不兼容.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    return int(tskm_assign_many(model, series[None])[0])


def tskm_assign_many(model: CentroidSet, series: np.ndarray) -> np.ndarray:
    """N×T×D 序列的最近质心编号."""
    series = _as_batch(series)
    _, t, d = model.centroids.shape
    if series.shape[2] != d or (not model.metric.is_dtw and series.shape[1] != t):
        raise ValidationError(f"序列形状 {series.shape[1:]} 与质心 {(t, d)} 不兼容")
    return np.argmin(model.metric.distance_matrix(series, model.centroids), axis=1)


def restart_seed(seed: int, k: int, restart: int) -> int:
    """第restart次重启的种子，由 (seed, K, restart) 派生."""
    return int(np.random.SeedSequence([seed, k, restart]).generate_state(1)[0])


@timer
def fit_best(series: Sequence[np.ndarray], k: int, metric: Optional[Metric] = None, seed: int = 0,
             restarts: int = DEFAULT_RESTARTS, max_iter: int = 50, dba_iters: int = 10) -> CentroidSet:
    """多次重启中惯性最小的模型(并列时取较早的重启)."""
    best: Optional[CentroidSet] = None
    for restart in range(restarts):
        model = tskm_fit(series, k, metric, restart_seed(seed, k, restart), max_iter, dba_iters)
        logger.debug(f"tskm K={k} 重启 {restart}: inertia={model.inertia:.6g}")
        if best is None or model.inertia < best.inertia:
            best = model
    return best


@timer
def inertia_curve(series: Sequence[np.ndarray], k_range: Sequence[int], metric: Optional[Metric] = None,
                  seed: int = 0, restarts: int = DEFAULT_RESTARTS, max_iter: int = 50,
                  dba_iters: int = 10) -> List[Tuple[int, float]]:
    """每个K在多次重启中的最佳惯性，取累计最小值使曲线随K单调不增.

    Raises:
        ValidationError: k_range为空或非升序.
    """
    k_range = [int(k) for k in k_range]
    if not k_range or any(b <= a for a, b in zip(k_range, k_range[1:])):
        raise ValidationError(f"k_range必须非空且严格升序: {k_range}")
    curve = []
    running = np.inf
    for k in k_range:
        running = min(running, fit_best(series, k, metric, seed, restarts, max_iter, dba_iters).inertia)
        curve.append((k, float(running)))
        logger.info(f"惯性曲线 K={k}: {running:.6g}")
    return curve


def elbow_select(curve: Sequence[Tuple[int, float]]) -> int:
    """肘部法：最大化离散二阶差分 I(K-1) - 2·I(K) + I(K+1)，端点不参与，并列取最小K.

    Raises:
        ValidationError: 点数少于3或K不连续.
    """
    if len(curve) < 3:
        raise ValidationError(f"肘部法至少需要3个点, 实际为 {len(curve)}")
    ks = [int(k) for k, _ in curve]
    if any(b - a != 1 for a, b in zip(ks, ks[1:])):
        raise ValidationError(f"肘部法要求K连续: {ks}")
    inertia = np.array([float(i) for _, i in curve])
    second = inertia[:-2] - 2.0 * inertia[1:-1] + inertia[2:]
    return ks[1 + int(np.argmax(second))]


def metric_from_name(name: str, band: Optional[int] = None, independent: bool = False) -> Metric:
    """由名称("euclidean"/"dtw")构造度量."""
    try:
        kind = MetricKind(name.lower())
    except ValueError:
        raise ValidationError(f"未知的度量: {name!r}, 可选值: euclidean, dtw") from None
    return Metric(kind, band if kind is MetricKind.DTW else None, independent and kind is MetricKind.DTW)


__all__ = [
    "TskmConfig",
    "CentroidSet",
    "kmeans_plus_plus",
    "tskm_fit",
    "tskm_assign",
    "tskm_assign_many",
    "restart_seed",
    "fit_best",
    "inertia_curve",
    "elbow_select",
    "metric_from_name",
]
