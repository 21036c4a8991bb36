# -*- coding: utf-8 -*-
"""SOM-VAE模块：逐时刻编码、SOM网格节点量化、双解码器与节点间的马尔可夫转移模型.

每个时刻的观测 x(8维) 经编码器得到 z_e，量化到最近的网格节点嵌入 z_q = e_k，
两个解码器分别从 z_e 与 z_q 重建 x。单时刻损失::

    ||x - dec_e(z_e)||² + ||x - dec_q(z_q)||²
    + commit·||z_e - sg(z_q)||² + som·Σ_{j∈N(k)} ||sg(z_e) - e_j||²
    + trans·(-log P[prev, k]) + smooth·Σ_j P[prev, j]·||z_e - e_j||²

sg(·) 为停止梯度的副本；N(k) 为节点k及其4邻域；首个时刻没有前一节点，省略两个转移项。
训练从不读取结局标签。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Mapping, NamedTuple, Optional, Sequence, Tuple

# 第三方库导入 (Third-party library imports)
import numpy as np
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import ValidationError
from .cohort import N_CHANNELS
from .decorator_utils import timer
from .diffkern import PROB_FLOOR, ParamStore, check_finite, mlp_backward, mlp_forward, mlp_init, optimizer_step
from .dtw import Metric
from .tskm import kmeans_plus_plus

FORMAT_VERSION = 1
EMBEDDINGS = "som.embeddings"
LOSS_TERMS: Tuple[str, ...] = ("rec_e", "rec_q", "commit", "som", "trans", "smooth")
TRANSITION_TOLERANCE = 1e-9

NodeAssignmentTrace = np.ndarray


@dataclass(frozen=True)
class SomGrid:
    """rows×cols 的SOM网格，节点编号按行优先，邻接关系为4连通."""

    rows: int = 2
    cols: int = 2

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValidationError(f"SOM网格行列数必须为正: {self.rows}×{self.cols}")

    @property
    def k(self) -> int:
        return self.rows * self.cols

    def neighbors(self, node: int) -> List[int]:
        """节点的4邻域(不含自身)."""
        r, c = divmod(node, self.cols)
        result = []
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < self.rows and 0 <= cc < self.cols:
                result.append(rr * self.cols + cc)
        return sorted(result)

    def neighborhood_mask(self) -> np.ndarray:
        """K×K 布尔矩阵，mask[k, j] 表示 j ∈ N(k)(含k自身)."""
        mask = np.eye(self.k, dtype=bool)
        for node in range(self.k):
            mask[node, self.neighbors(node)] = True
        return mask


@dataclass(frozen=True)
class SomVaeConfig:
    """SOM-VAE训练配置(配置文件段 ``somvae.*``)."""

    latent_dim: int = 8
    hidden: int = 16
    grid_rows: int = 2
    grid_cols: int = 2
    commit: float = 0.25
    som: float = 0.25
    trans: float = 0.1
    smooth: float = 0.05
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    laplace: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.latent_dim < 1 or self.hidden < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ValidationError("latent_dim、hidden、epochs、batch_size必须为正")
        if min(self.commit, self.som, self.trans, self.smooth, self.laplace) < 0 or self.lr <= 0:
            raise ValidationError("损失权重与laplace必须非负，lr必须为正")

    @property
    def weights(self) -> Dict[str, float]:
        return {"commit": self.commit, "som": self.som, "trans": self.trans, "smooth": self.smooth}


@dataclass
class SomVaeModel:
    """SOM-VAE模型状态.

    属性:
        params: 编码器 ``enc.*``、解码器 ``dec_e.*``/``dec_q.*`` 与节点嵌入 ``som.embeddings``.
        grid: SOM网格.
        transition: K×K 行随机转移矩阵.
        weights: 损失权重 commit/som/trans/smooth.
        seed: 训练种子.
        history: 每个epoch的平均损失.
    """

    params: ParamStore
    grid: SomGrid
    transition: np.ndarray
    weights: Dict[str, float]
    seed: int = 0
    history: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.transition = np.asarray(self.transition, dtype=float)
        check_transition(self.transition, self.grid.k)
        embeddings = self.params[EMBEDDINGS]
        if embeddings.shape[0] != self.grid.k or not np.all(np.isfinite(embeddings)):
            raise ValidationError(f"节点嵌入必须是 {self.grid.k}×latent 的有限矩阵, shape={embeddings.shape}")

    @property
    def k(self) -> int:
        return self.grid.k

    @property
    def embeddings(self) -> np.ndarray:
        return self.params[EMBEDDINGS]

    @property
    def latent_dim(self) -> int:
        return int(self.embeddings.shape[1])

    def encode(self, x: np.ndarray) -> np.ndarray:
        """...×8 观测到 ...×latent 表示."""
        return mlp_forward(self.params, "enc", np.asarray(x, dtype=float))[0]

    def quantize(self, z_e: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return quantize(z_e, self.embeddings)

    def assign(self, matrix: np.ndarray) -> NodeAssignmentTrace:
        return somvae_assign(self, matrix)

    def to_json(self) -> Dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "model": "somvae",
            "latent_dim": self.latent_dim,
            "grid_rows": self.grid.rows,
            "grid_cols": self.grid.cols,
            "params": {name: value for name, value in self.params.to_dict().items() if name != EMBEDDINGS},
            "embeddings": self.embeddings.tolist(),
            "transition": self.transition.tolist(),
            "loss_weights": dict(self.weights),
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "SomVaeModel":
        if data.get("format_version") != FORMAT_VERSION:
            raise ValidationError(f"不支持的模型格式版本: {data.get('format_version')}")
        params = ParamStore.from_dict(data["params"])
        params.add(EMBEDDINGS, np.array(data["embeddings"], dtype=float))
        return cls(params, SomGrid(int(data["grid_rows"]), int(data["grid_cols"])),
                   np.array(data["transition"], dtype=float), dict(data["loss_weights"]), int(data["seed"]))


class SomVaeLoss(NamedTuple):
    """somvae_loss的结果.

    属性:
        total: 按时刻平均的总损失.
        components: 各项(已乘权重)的平均值.
        nodes: 每个时刻的量化节点.
        frozen: 停止梯度副本与节点，可传回somvae_loss以固定这些量.
    """

    total: float
    components: Dict[str, float]
    nodes: np.ndarray
    frozen: Dict[str, np.ndarray]


def check_transition(transition: np.ndarray, k: int) -> None:
    """校验K×K行随机矩阵.

    Raises:
        ValidationError: 形状错误、存在负值或某行和不为1.
    """
    if transition.shape != (k, k):
        raise ValidationError(f"转移矩阵形状应为 ({k}, {k}), 实际为 {transition.shape}")
    if np.any(transition < 0) or np.any(np.abs(transition.sum(axis=1) - 1.0) > TRANSITION_TOLERANCE):
        raise ValidationError("转移矩阵每行必须非负且和为1")


def quantize(z_e: np.ndarray, embeddings: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """最近嵌入量化，距离相同时取编号最小的节点.

    Returns:
        (节点编号, z_q = embeddings[节点]).
    """
    z_e = np.asarray(z_e, dtype=float)
    distances = np.sum((z_e[..., None, :] - embeddings) ** 2, axis=-1)
    nodes = np.argmin(distances, axis=-1)
    return nodes, embeddings[nodes]


def fit_transition(traces: Sequence[Sequence[int]], k: int, laplace: float = 1.0) -> np.ndarray:
    """由节点轨迹估计转移矩阵 (count(i→j) + laplace) / (count(i→·) + laplace·K).

    没有任何出发计数且laplace为0的行取均匀分布。
    """
    if k < 1:
        raise ValidationError(f"K必须为正: {k}")
    counts = np.zeros((k, k))
    for trace in traces:
        trace = np.asarray(trace, dtype=int)
        if trace.size and (trace.min() < 0 or trace.max() >= k):
            raise ValidationError(f"节点编号越界 [0, {k}): {trace.tolist()}")
        np.add.at(counts, (trace[:-1], trace[1:]), 1.0)
    smoothed = counts + laplace
    totals = smoothed.sum(axis=1, keepdims=True)
    return np.where(totals > 0, smoothed / np.where(totals > 0, totals, 1.0), 1.0 / k)


def previous_nodes(nodes: np.ndarray) -> np.ndarray:
    """B×T 节点序列中每个时刻的前一节点，首个时刻为-1."""
    prev = np.full_like(nodes, -1)
    prev[:, 1:] = nodes[:, :-1]
    return prev


def somvae_loss(model: SomVaeModel, x: np.ndarray, prev_nodes: Optional[np.ndarray] = None,
                terms: Optional[FrozenSet[str]] = None,
                frozen: Optional[Mapping[str, np.ndarray]] = None) -> SomVaeLoss:
    """M个时刻上的平均损失，梯度累加进 model.params.

    Args:
        model: 模型.
        x: M×8 观测.
        prev_nodes: 长度M的前一节点，-1(或None)表示没有前一时刻.
        terms: 只计算这些损失项(LOSS_TERMS的子集)，默认全部.
        frozen: 上一次调用返回的停止梯度副本与节点；给出时这些量保持不变.

    Returns:
        SomVaeLoss.
    """
    terms = frozenset(LOSS_TERMS if terms is None else terms)
    unknown = terms - set(LOSS_TERMS)
    if unknown:
        raise ValidationError(f"未知的损失项: {sorted(unknown)}")
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] != N_CHANNELS:
        raise ValidationError(f"x必须是 M×{N_CHANNELS}, shape={x.shape}")
    m = x.shape[0]
    prev = np.full(m, -1) if prev_nodes is None else np.asarray(prev_nodes, dtype=int)
    store, w = model.params, model.weights
    E = store[EMBEDDINGS]

    z_e, enc_cache = mlp_forward(store, "enc", x)
    if frozen is None:
        nodes = quantize(z_e, E)[0]
        frozen = {"nodes": nodes, "z_e": z_e.copy(), "z_q": E[nodes].copy()}
    nodes = frozen["nodes"]
    z_q = E[nodes]
    has_prev = prev >= 0
    P = np.where(has_prev[:, None], model.transition[np.maximum(prev, 0)], 0.0)

    components = {name: 0.0 for name in LOSS_TERMS}
    grad_z = np.zeros_like(z_e)
    grad_E = np.zeros_like(E)

    if "rec_e" in terms:
        out, cache = mlp_forward(store, "dec_e", z_e)
        residual = out - x
        components["rec_e"] = float(np.sum(residual ** 2)) / m
        grad_z += mlp_backward(store, "dec_e", 2.0 * residual / m, cache)
    if "rec_q" in terms:
        out, cache = mlp_forward(store, "dec_q", z_q)
        residual = out - x
        components["rec_q"] = float(np.sum(residual ** 2)) / m
        np.add.at(grad_E, nodes, mlp_backward(store, "dec_q", 2.0 * residual / m, cache))
    if "commit" in terms:
        diff = z_e - frozen["z_q"]
        components["commit"] = w["commit"] * float(np.sum(diff ** 2)) / m
        grad_z += 2.0 * w["commit"] * diff / m
    if "som" in terms:
        neighborhood = model.grid.neighborhood_mask()[nodes]
        diff = frozen["z_e"][:, None, :] - E[None, :, :]
        components["som"] = w["som"] * float(np.sum(neighborhood * np.sum(diff ** 2, axis=-1))) / m
        grad_E -= 2.0 * w["som"] * np.sum(neighborhood[:, :, None] * diff, axis=0) / m
    if "trans" in terms and has_prev.any():
        chosen = model.transition[prev[has_prev], nodes[has_prev]]
        components["trans"] = w["trans"] * float(-np.sum(np.log(np.maximum(chosen, PROB_FLOOR)))) / m
    if "smooth" in terms and has_prev.any():
        diff = z_e[:, None, :] - E[None, :, :]
        components["smooth"] = w["smooth"] * float(np.sum(P * np.sum(diff ** 2, axis=-1))) / m
        weighted = P[:, :, None] * diff
        grad_z += 2.0 * w["smooth"] * np.sum(weighted, axis=1) / m
        grad_E -= 2.0 * w["smooth"] * np.sum(weighted, axis=0) / m

    mlp_backward(store, "enc", grad_z, enc_cache)
    store.accumulate(EMBEDDINGS, grad_E)
    total = float(sum(components.values()))
    return SomVaeLoss(total, components, nodes, dict(frozen))


def init_somvae(config: SomVaeConfig, rng: np.random.Generator) -> SomVaeModel:
    """随机初始化的模型(嵌入为零，待k-means++初始化)."""
    store = ParamStore()
    mlp_init(store, "enc", [N_CHANNELS, config.hidden, config.latent_dim], rng)
    mlp_init(store, "dec_e", [config.latent_dim, config.hidden, N_CHANNELS], rng)
    mlp_init(store, "dec_q", [config.latent_dim, config.hidden, N_CHANNELS], rng)
    grid = SomGrid(config.grid_rows, config.grid_cols)
    store.add(EMBEDDINGS, np.zeros((grid.k, config.latent_dim)))
    return SomVaeModel(store, grid, np.full((grid.k, grid.k), 1.0 / grid.k), config.weights, config.seed)


def init_embeddings(model: SomVaeModel, tensors: np.ndarray, rng: np.random.Generator) -> None:
    """用全部时刻编码输出上的k-means++种子初始化节点嵌入."""
    z = model.encode(tensors.reshape(-1, N_CHANNELS))
    if np.unique(z, axis=0).shape[0] < model.k:
        raise ValidationError(f"编码输出中不同的状态少于 K={model.k} 个")
    chosen = kmeans_plus_plus(z[:, None, :], model.k, Metric.euclidean(), rng)
    model.params[EMBEDDINGS][...] = z[chosen]


def somvae_assign(model: SomVaeModel, matrix: np.ndarray) -> NodeAssignmentTrace:
    """逐时刻编码并量化，返回长度T的节点轨迹."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != N_CHANNELS:
        raise ValidationError(f"病人矩阵必须是 T×{N_CHANNELS}, shape={matrix.shape}")
    return quantize(model.encode(matrix), model.embeddings)[0]


def somvae_assign_many(model: SomVaeModel, tensors: np.ndarray) -> np.ndarray:
    """N×T×8 张量的节点轨迹 N×T."""
    tensors = np.asarray(tensors, dtype=float)
    return quantize(model.encode(tensors), model.embeddings)[0]


@timer
def somvae_train(tensors: np.ndarray, config: Optional[SomVaeConfig] = None) -> SomVaeModel:
    """训练SOM-VAE(无监督，不接收标签).

    每个epoch按病人打乱后分批做梯度更新，epoch结束后用当前分配重新估计转移矩阵。

    Args:
        tensors: N×T×8 预处理后的张量.
        config: 训练配置.

    Returns:
        SomVaeModel，history为每个epoch的平均损失.

    Raises:
        TrainingError: 损失出现非有限值(消息包含epoch).
    """
    config = config or SomVaeConfig()
    tensors = np.asarray(tensors, dtype=float)
    if tensors.ndim != 3 or tensors.shape[2] != N_CHANNELS or tensors.shape[0] < 1:
        raise ValidationError(f"训练张量必须是 N×T×{N_CHANNELS}, shape={tensors.shape}")
    rng = np.random.default_rng(config.seed)
    model = init_somvae(config, rng)
    init_embeddings(model, tensors, rng)

    n = tensors.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total, steps = 0.0, 0
        for start in range(0, n, config.batch_size):
            batch = tensors[order[start:start + config.batch_size]]
            prev = previous_nodes(somvae_assign_many(model, batch))
            result = somvae_loss(model, batch.reshape(-1, N_CHANNELS), prev.reshape(-1))
            check_finite(result.total, f"somvae epoch {epoch}")
            optimizer_step(model.params, lr=config.lr)
            total += result.total * batch.shape[0] * batch.shape[1]
            steps += batch.shape[0] * batch.shape[1]
        model.transition = fit_transition(somvae_assign_many(model, tensors), model.k, config.laplace)
        model.history.append(total / steps)
        logger.info(f"somvae epoch {epoch + 1}/{config.epochs}: loss={model.history[-1]:.6f}")
    return model


__all__ = [
    "LOSS_TERMS",
    "NodeAssignmentTrace",
    "SomGrid",
    "SomVaeConfig",
    "SomVaeModel",
    "SomVaeLoss",
    "check_transition",
    "quantize",
    "fit_transition",
    "previous_nodes",
    "somvae_loss",
    "init_somvae",
    "init_embeddings",
    "somvae_assign",
    "somvae_assign_many",
    "somvae_train",
]
