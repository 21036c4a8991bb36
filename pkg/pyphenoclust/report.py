# -*- coding: utf-8 -*-
"""报告图表模块.

由簇画像生成静态SVG图:
    - 每个簇一个面板的结局分布柱状图(按规模从大到小，标注病人数);
    - 选定通道(默认RR)的各簇平均轨迹折线图，横轴为距结局小时数;
以及图背后的CSV数据。SVG输出在相同输入下逐字节一致。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
import os
from typing import List, Optional, Sequence

# 第三方库导入 (Third-party library imports)
import numpy as np
import pandas as pd
from loguru import logger
from matplotlib import rc_context
from matplotlib.figure import Figure

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import PhenoIOError, UsageError
from .cohort import CHANNELS, OUTCOME_NAMES
from .evaluation import (TRAJECTORY_COLUMNS, VISUAL_GRID, ClusterProfile, read_profiles, write_profiles,
                         write_trajectories)
from .preprocess import GridSpec
from .tools_utils import Tools

DEFAULT_CHANNEL = "RR"
OUTCOME_COLORS = ("#4c72b0", "#dd8452", "#c44e52", "#55a868")

# 固定SVG中的随机id与元数据
SVG_RC = {"svg.hashsalt": "pyphenoclust", "svg.fonttype": "none"}
SVG_METADATA = {"Date": None, "Creator": None}


def resolve_channel(name: str) -> str:
    """校验通道名(不区分大小写).

    Raises:
        UsageError: 未知通道.
    """
    upper = str(name).strip().upper()
    if upper not in CHANNELS:
        raise UsageError(f"未知通道 {name!r}，可选: {', '.join(CHANNELS)}")
    return upper


def _save(figure: Figure, path: str) -> str:
    Tools.makedirs(path, flag_file=True)
    try:
        figure.savefig(path, format="svg", metadata=SVG_METADATA)
    except OSError as e:
        raise PhenoIOError(f"写入图表失败 {path}: {e}") from e
    logger.debug(f"已写入图表: {path}")
    return path


def plot_outcome_distribution(profiles: Sequence[ClusterProfile], path: str) -> str:
    """每个簇一个面板的结局分布柱状图."""
    n = max(len(profiles), 1)
    with rc_context(SVG_RC):
        figure = Figure(figsize=(3.0 * n, 3.2))
        axes = figure.subplots(1, n, squeeze=False)[0]
        for ax, profile in zip(axes, profiles):
            ax.bar(range(len(OUTCOME_NAMES)), profile.outcome_distribution, color=OUTCOME_COLORS)
            ax.set_xticks(range(len(OUTCOME_NAMES)))
            ax.set_xticklabels(OUTCOME_NAMES, rotation=45, ha="right")
            ax.set_ylim(0.0, 1.0)
            ax.set_title(f"Cluster {profile.cluster} (n={profile.size})")
        axes[0].set_ylabel("proportion of patients")
        figure.tight_layout()
        return _save(figure, path)


def trajectory_table(profiles: Sequence[ClusterProfile], channel: str,
                     grid: GridSpec = VISUAL_GRID) -> pd.DataFrame:
    """选定通道的各簇平均轨迹，列为 ``hours_to_outcome,cluster{id},...``."""
    index = CHANNELS.index(resolve_channel(channel))
    frame = pd.DataFrame({"hours_to_outcome": grid.bin_midpoints()})
    for profile in profiles:
        if profile.mean_trajectory is not None:
            frame[f"cluster{profile.cluster}"] = profile.mean_trajectory[:, index]
    return frame


def plot_trajectory(profiles: Sequence[ClusterProfile], channel: str, path: str,
                    grid: GridSpec = VISUAL_GRID) -> str:
    """选定通道的各簇平均轨迹折线图，每个簇一条线."""
    channel = resolve_channel(channel)
    table = trajectory_table(profiles, channel, grid)
    sizes = {f"cluster{p.cluster}": p.size for p in profiles}
    with rc_context(SVG_RC):
        figure = Figure(figsize=(7.0, 4.0))
        ax = figure.subplots()
        for column in table.columns[1:]:
            ax.plot(table["hours_to_outcome"], table[column], marker="o", markersize=2,
                    label=f"{column} (n={sizes[column]})")
        ax.invert_xaxis()
        ax.set_xlabel("hours to outcome")
        ax.set_ylabel(f"mean {channel}")
        ax.set_title(f"{channel} mean trajectory per cluster")
        ax.legend(loc="best", fontsize="small")
        figure.tight_layout()
        return _save(figure, path)


def read_trajectory(path: str) -> np.ndarray:
    """读取 ``trajectory_cluster{id}.csv``，返回 T×8 矩阵.

    Raises:
        PhenoIOError: 文件无法读取或列名不符.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError) as e:
        raise PhenoIOError(f"读取轨迹失败 {path}: {e}") from e
    if tuple(frame.columns) != TRAJECTORY_COLUMNS:
        raise PhenoIOError(f"轨迹CSV列名不符 {path}: {list(frame.columns)}")
    return frame[list(CHANNELS)].to_numpy(dtype=float)


def load_profiles(profiles_path: str, trajectory_dir: Optional[str] = None) -> List[ClusterProfile]:
    """读取簇画像CSV，并从同目录(或trajectory_dir)加载各簇的轨迹CSV(存在时)."""
    profiles = read_profiles(profiles_path)
    directory = trajectory_dir or os.path.dirname(profiles_path)
    for profile in profiles:
        path = os.path.join(directory, f"trajectory_cluster{profile.cluster}.csv")
        if os.path.exists(path):
            profile.mean_trajectory = read_trajectory(path)
    return profiles


def write_report(profiles: Sequence[ClusterProfile], output_dir: str, channel: str = DEFAULT_CHANNEL,
                 grid: GridSpec = VISUAL_GRID) -> List[str]:
    """输出全部报告文件.

    Args:
        profiles: 簇画像(按规模从大到小).
        output_dir: 输出目录.
        channel: 轨迹图的通道.
        grid: 轨迹网格.

    Returns:
        写入的文件路径列表: outcome_distribution.svg/.csv、trajectory_<channel>.svg/.csv
        以及每个簇的 trajectory_cluster{id}.csv.
    """
    channel = resolve_channel(channel)
    ordered = sorted(profiles, key=lambda p: (-p.size, p.cluster))
    paths = [
        plot_outcome_distribution(ordered, os.path.join(output_dir, "outcome_distribution.svg")),
        write_profiles(ordered, os.path.join(output_dir, "outcome_distribution.csv")),
    ]
    if any(p.mean_trajectory is not None for p in ordered):
        csv_path = os.path.join(output_dir, f"trajectory_{channel}.csv")
        Tools.makedirs(csv_path, flag_file=True)
        try:
            trajectory_table(ordered, channel, grid).to_csv(csv_path, index=False, na_rep="", lineterminator="\n")
        except OSError as e:
            raise PhenoIOError(f"写入轨迹失败 {csv_path}: {e}") from e
        paths.append(plot_trajectory(ordered, channel, os.path.join(output_dir, f"trajectory_{channel}.svg"), grid))
        paths.append(csv_path)
        paths.extend(write_trajectories(ordered, output_dir, grid))
    else:
        logger.warning("簇画像不含平均轨迹，跳过轨迹图")
    logger.info(f"报告已生成: {len(paths)} 个文件 -> {output_dir}")
    return paths


__all__ = [
    "DEFAULT_CHANNEL",
    "resolve_channel",
    "plot_outcome_distribution",
    "trajectory_table",
    "plot_trajectory",
    "read_trajectory",
    "load_profiles",
    "write_report",
]
