# -*- coding: utf-8 -*-
"""多变量时间序列的相似性度量：欧氏距离、动态时间规整(DTW)与DTW重心平均(DBA).

局部代价为所有通道联合的平方欧氏距离，报告的距离为累计代价的平方根，
因此欧氏距离与DTW距离单位相同。``Metric.independent=True`` 时每个通道
单独规整，距离为各通道累计代价之和的平方根。

路径下标从0开始，回溯时遇到并列按 对角 > 竖直(i-1, j) > 水平(i, j-1) 的顺序选择。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

# 第三方库导入 (Third-party library imports)
import numpy as np
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import ValidationError

Path = List[Tuple[int, int]]


class MetricKind(str, Enum):
    EUCLIDEAN = "euclidean"
    DTW = "dtw"


@dataclass(frozen=True)
class Metric:
    """序列距离度量.

    属性:
        kind: 欧氏距离或DTW.
        band: Sakoe-Chiba带宽(分箱数)，None表示不限制.
        independent: DTW是否逐通道独立规整.
    """

    kind: MetricKind = MetricKind.EUCLIDEAN
    band: Optional[int] = None
    independent: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.band is not None and int(self.band) < 0:
            raise ValidationError(f"band必须非负: {self.band}")
        if self.band is not None:
            object.__setattr__(self, "band", int(self.band))

    @classmethod
    def euclidean(cls) -> "Metric":
        return cls(MetricKind.EUCLIDEAN)

    @classmethod
    def dtw(cls, band: Optional[int] = None, independent: bool = False) -> "Metric":
        return cls(MetricKind.DTW, band, independent)

    @property
    def is_dtw(self) -> bool:
        return self.kind is MetricKind.DTW

    def distance(self, a: np.ndarray, b: np.ndarray) -> float:
        """两条序列之间的距离."""
        if self.is_dtw:
            return dtw_distance(a, b, self.band, self.independent)
        return euclidean_distance(a, b)

    def distances_to(self, reference: np.ndarray, series: np.ndarray) -> np.ndarray:
        """reference到N条等长序列(N×T×D)的距离."""
        series = _as_batch(series)
        reference = _as_series(reference, "reference")
        if self.is_dtw:
            return np.sqrt(_batch_cost(reference, series, self.band, self.independent))
        if series.shape[1:] != reference.shape:
            raise ValidationError(f"形状不一致: {reference.shape} vs {series.shape[1:]}")
        return np.sqrt(np.sum((series - reference) ** 2, axis=(1, 2)))

    def distance_matrix(self, series: np.ndarray, references: np.ndarray) -> np.ndarray:
        """N×K 距离矩阵."""
        return np.stack([self.distances_to(r, series) for r in references], axis=1)

    def average(self, members: np.ndarray, init: Optional[np.ndarray] = None, iters: int = 10) -> np.ndarray:
        """一组序列在该度量下的重心: 欧氏距离取逐点均值，DTW使用DBA."""
        if self.is_dtw:
            return dtw_barycenter(members, init=init, iters=iters, band=self.band,
                                  independent=self.independent)
        members = _as_batch(members)
        return members.mean(axis=0)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "band": self.band, "independent": self.independent}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Metric":
        return cls(MetricKind(data["kind"]), data.get("band"), bool(data.get("independent", False)))


def _as_series(a: Union[np.ndarray, Sequence], name: str = "series") -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.ndim != 2:
        raise ValidationError(f"{name} 必须是 T×D 矩阵, shape={a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValidationError(f"{name} 不能为空, shape={a.shape}")
    return a


def _as_batch(series: Union[np.ndarray, Sequence]) -> np.ndarray:
    series = np.asarray(series, dtype=float)
    if series.ndim == 2:
        series = series[:, :, None]
    if series.ndim != 3 or series.shape[0] < 1 or series.shape[1] < 1:
        raise ValidationError(f"序列集合必须是非空的 N×T×D 张量, shape={series.shape}")
    return series


def _check_band(t_a: int, t_b: int, band: Optional[int]) -> None:
    if band is not None and abs(t_a - t_b) > band:
        raise ValidationError(f"band={band} 无法连接长度 {t_a} 与 {t_b} 的序列")


def _accumulate(cost: np.ndarray, band: Optional[int]) -> np.ndarray:
    """在 (..., Ta, Tb) 局部代价上运行DTW递推，返回累计代价矩阵(带外为inf).

    按反对角线 i+j=s 推进，同一条反对角线上的单元只依赖前两条，可整体向量化。
    """
    t_a, t_b = cost.shape[-2:]
    _check_band(t_a, t_b, band)
    # padded[..., i+1, j+1] 对应 acc[..., i, j]，第0行/列为inf边界
    padded = np.full(cost.shape[:-2] + (t_a + 1, t_b + 1), np.inf)
    padded[..., 0, 0] = 0.0
    for s in range(t_a + t_b - 1):
        i = np.arange(max(0, s - t_b + 1), min(t_a - 1, s) + 1)
        j = s - i
        if band is not None:
            keep = np.abs(i - j) <= band
            i, j = i[keep], j[keep]
            if i.size == 0:
                continue
        best = np.minimum(np.minimum(padded[..., i, j], padded[..., i, j + 1]), padded[..., i + 1, j])
        padded[..., i + 1, j + 1] = cost[..., i, j] + best
    return padded[..., 1:, 1:].copy()


def _local_cost(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Ta×Tb 联合平方欧氏局部代价."""
    return np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=-1)


def _batch_cost(reference: np.ndarray, series: np.ndarray, band: Optional[int], independent: bool) -> np.ndarray:
    """reference与每条序列的最小累计代价(N,)."""
    if series.shape[2] != reference.shape[1]:
        raise ValidationError(f"通道数不一致: {reference.shape[1]} vs {series.shape[2]}")
    diff = reference[None, :, None, :] - series[:, None, :, :]
    if independent:
        # (N, D, Ta, Tb)
        acc = _accumulate(np.moveaxis(diff ** 2, -1, 1), band)
        return acc[..., -1, -1].sum(axis=1)
    acc = _accumulate(np.sum(diff ** 2, axis=-1), band)
    return acc[:, -1, -1]


def _backtrack(acc: np.ndarray) -> Path:
    i, j = acc.shape[0] - 1, acc.shape[1] - 1
    path = [(i, j)]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            diagonal, vertical, horizontal = acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1]
            if diagonal <= vertical and diagonal <= horizontal:
                i, j = i - 1, j - 1
            elif vertical <= horizontal:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return path


def euclidean_distance(a: np.ndarray, b: np.ndarray) -> float:
    """逐点欧氏距离 sqrt(Σ_{t,d} (a-b)²).

    Raises:
        ValidationError: 形状不一致.
    """
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if a.shape != b.shape:
        raise ValidationError(f"欧氏距离要求形状相同: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def dtw_distance(a: np.ndarray, b: np.ndarray, band: Optional[int] = None, independent: bool = False) -> float:
    """DTW距离：所有单调规整路径上最小累计平方代价的平方根.

    Args:
        a: Ta×D 序列(一维输入视为D=1).
        b: Tb×D 序列.
        band: Sakoe-Chiba带宽，None不限制.
        independent: 是否逐通道独立规整.

    Returns:
        非负距离.

    Raises:
        ValidationError: 空序列、通道数不一致或带宽无法连接两端.
    """
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"通道数不一致: {a.shape[1]} vs {b.shape[1]}")
    return float(np.sqrt(_batch_cost(a, b[None], band, independent)[0]))


def dtw_path(a: np.ndarray, b: np.ndarray, band: Optional[int] = None) -> Path:
    """一条最优规整路径，从(0, 0)到(Ta-1, Tb-1)，两个下标均单调不减.

    Raises:
        ValidationError: 同 dtw_distance.
    """
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"通道数不一致: {a.shape[1]} vs {b.shape[1]}")
    return _backtrack(_accumulate(_local_cost(a, b), band))


def path_cost(a: np.ndarray, b: np.ndarray, path: Path) -> float:
    """路径上的累计平方代价."""
    a = _as_series(a, "a")
    b = _as_series(b, "b")
    return float(sum(np.sum((a[i] - b[j]) ** 2) for i, j in path))


def _align_members(barycenter: np.ndarray, members: Sequence[np.ndarray],
                   band: Optional[int]) -> Tuple[float, np.ndarray, np.ndarray]:
    """把全部成员对齐到重心，返回 (总代价, 每个重心帧的成员帧之和, 计数).

    等长成员堆叠后只运行一次批量DTW递推，回溯也在整批上同步进行。
    """
    t_a = barycenter.shape[0]
    sums = np.zeros_like(barycenter)
    counts = np.zeros(t_a)
    total = 0.0
    groups: Dict[int, List[np.ndarray]] = {}
    for member in members:
        groups.setdefault(member.shape[0], []).append(member)
    for length in sorted(groups):
        batch = np.stack(groups[length])
        cost = np.sum((barycenter[None, :, None, :] - batch[:, None, :, :]) ** 2, axis=-1)
        acc = _accumulate(cost, band)
        total += float(acc[:, -1, -1].sum())
        _backtrack_sums(acc, batch, sums, counts)
    return total, sums, counts


def _backtrack_sums(acc: np.ndarray, batch: np.ndarray, sums: np.ndarray, counts: np.ndarray) -> None:
    """在 (N, Ta, Tb) 累计代价上同时回溯N条路径，把对齐的成员帧累加到sums/counts.

    每一步的选择与 _backtrack 相同: 对角 > 竖直 > 水平。
    """
    n, t_a, t_b = acc.shape
    rows = np.arange(n)
    i = np.full(n, t_a - 1)
    j = np.full(n, t_b - 1)
    np.add.at(sums, i, batch[rows, j])
    np.add.at(counts, i, 1.0)
    active = (i > 0) | (j > 0)
    while np.any(active):
        idx = rows[active]
        ii, jj = i[idx], j[idx]
        up, left = np.maximum(ii - 1, 0), np.maximum(jj - 1, 0)
        diagonal = np.where((ii > 0) & (jj > 0), acc[idx, up, left], np.inf)
        vertical = np.where(ii > 0, acc[idx, up, jj], np.inf)
        horizontal = np.where(jj > 0, acc[idx, ii, left], np.inf)
        step_diagonal = (ii > 0) & (jj > 0) & (diagonal <= vertical) & (diagonal <= horizontal)
        step_vertical = ~step_diagonal & (ii > 0) & ((jj == 0) | (vertical <= horizontal))
        step_horizontal = ~step_diagonal & ~step_vertical
        i[idx] = ii - (step_diagonal | step_vertical)
        j[idx] = jj - (step_diagonal | step_horizontal)
        np.add.at(sums, i[idx], batch[idx, j[idx]])
        np.add.at(counts, i[idx], 1.0)
        active = (i > 0) | (j > 0)


def dtw_barycenter(members: Union[np.ndarray, Sequence[np.ndarray]], init: Optional[np.ndarray] = None,
                   iters: int = 10, band: Optional[int] = None, tol: float = 1e-6,
                   independent: bool = False, return_costs: bool = False):
    """DTW重心平均(DBA).

    每次迭代把所有成员按dtw_path对齐到当前重心，再对映射到同一重心帧的成员帧取平均。
    迭代 ``iters`` 次，或总代价的相对下降小于 ``tol`` 时提前停止。

    Args:
        members: 非空成员列表，每个为 T×D，通道数相同.
        init: 初始重心，默认成员逐点均值(长度不同时取第一个成员).
        iters: 最大迭代次数.
        band: Sakoe-Chiba带宽.
        tol: 相对下降阈值.
        independent: 逐通道独立对齐与平均.
        return_costs: 是否同时返回每次迭代后的总代价(首项为初始代价).

    Returns:
        重心矩阵；return_costs=True 时为 (重心, 代价列表).

    Raises:
        ValidationError: 成员为空或通道数不一致.
    """
    if len(members) == 0:
        raise ValidationError("DBA至少需要一个成员")
    members = [_as_series(m, "member") for m in members]
    n_channels = members[0].shape[1]
    if any(m.shape[1] != n_channels for m in members):
        raise ValidationError("DBA成员的通道数不一致")
    if init is None:
        same_length = all(m.shape[0] == members[0].shape[0] for m in members)
        init = np.mean(members, axis=0) if same_length else members[0]
    barycenter = _as_series(init, "init").copy()
    if barycenter.shape[1] != n_channels:
        raise ValidationError(f"初始重心通道数 {barycenter.shape[1]} 与成员 {n_channels} 不一致")

    if independent:
        results = [dtw_barycenter([m[:, [d]] for m in members], barycenter[:, [d]], iters, band, tol,
                                  return_costs=True) for d in range(n_channels)]
        barycenter = np.hstack([r[0] for r in results])
        length = max(len(r[1]) for r in results)
        costs = [float(sum(r[1][min(k, len(r[1]) - 1)] for r in results)) for k in range(length)]
        return (barycenter, costs) if return_costs else barycenter

    cost, sums, counts = _align_members(barycenter, members, band)
    costs = [cost]
    for iteration in range(iters):
        barycenter = sums / counts[:, None]
        cost, sums, counts = _align_members(barycenter, members, band)
        costs.append(cost)
        previous, current = costs[-2], costs[-1]
        if previous <= 0.0 or (previous - current) / previous < tol:
            logger.trace(f"DBA在第 {iteration + 1} 次迭代收敛, cost={current:.6g}")
            break
    return (barycenter, costs) if return_costs else barycenter


__all__ = [
    "MetricKind",
    "Metric",
    "euclidean_distance",
    "dtw_distance",
    "dtw_path",
    "path_cost",
    "dtw_barycenter",
]
