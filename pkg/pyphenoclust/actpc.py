# -*- coding: utf-8 -*-
"""AC-TPC模块：循环编码器 → 簇选择器 → 抽样的簇嵌入 → 结局预测器.

训练分四个阶段:
    1. pretrain: 编码器直接接预测器(自编码通路)，最小化类别先验加权交叉熵;
    2. init_clusters: 在全部时刻的隐藏状态上运行k-means++初始化的k-means，质心作为簇嵌入;
    3. 选择器预热: 让选择器复现k-means的分配;
    4. 主训练: critic步用加权损失更新预测器与嵌入，actor步用得分函数梯度更新选择器，
       并以样本熵(下降)与批次分配熵(上升)为辅助项，编码器同时经由两条通路获得梯度。

测试时每个时刻取 argmax π，病人的最终簇为最后48小时分配的众数。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

# 第三方库导入 (Third-party library imports)
import numpy as np
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import ValidationError
from .cohort import ClassPrior
from .decorator_utils import timer
from .diffkern import (PROB_FLOOR, ParamStore, check_finite, cross_entropy_weighted,
                       cross_entropy_weighted_backward, gru_init, gru_sequence_backward,
                       gru_sequence_forward, mlp_backward, mlp_forward, mlp_init, optimizer_step,
                       softmax)
from .dtw import Metric
from .tskm import tskm_fit

FORMAT_VERSION = 1
FINAL_WINDOW_HOURS = 48.0
EMBEDDINGS = "emb"

AssignmentTrace = np.ndarray


@dataclass(frozen=True)
class ActpcConfig:
    """AC-TPC训练配置(配置文件段 ``actpc.*``)."""

    k: int = 4
    hidden: int = 16
    pretrain_epochs: int = 20
    selector_epochs: int = 5
    epochs: int = 30
    batch_size: int = 32
    lr: float = 1e-3
    subseq_per_patient: int = 4
    weight_entropy_sample: float = 0.1
    weight_entropy_batch: float = 1.0
    weight_pred_path: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValidationError(f"AC-TPC需要 K >= 2: {self.k}")
        if min(self.hidden, self.batch_size, self.subseq_per_patient) < 1 or \
                min(self.pretrain_epochs, self.selector_epochs, self.epochs) < 0:
            raise ValidationError("hidden、batch_size、subseq_per_patient必须为正，epoch数必须非负")
        if min(self.weight_entropy_sample, self.weight_entropy_batch, self.weight_pred_path) < 0 or self.lr <= 0:
            raise ValidationError("辅助损失权重必须非负，lr必须为正")


@dataclass
class ActpcModel:
    """AC-TPC模型状态.

    编码器、选择器、预测器与簇嵌入各自使用独立的ParamStore。

    属性:
        encoder: 门控循环单元参数 ``enc.*``.
        selector: 感知机参数 ``sel.*``(hidden → K logits).
        predictor: 感知机参数 ``pred.*``(嵌入 → C logits).
        embeddings: 簇嵌入 ``emb``(K×hidden).
        priors: 损失中使用的类别先验 α(训练集).
        seed: 训练种子.
        history: 各阶段每个epoch的平均损失.
    """

    encoder: ParamStore
    selector: ParamStore
    predictor: ParamStore
    embeddings: ParamStore
    priors: ClassPrior
    seed: int = 0
    history: Dict[str, List[float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.priors.require_positive()
        if self.k < 2:
            raise ValidationError(f"AC-TPC需要 K >= 2: {self.k}")
        for store in (self.encoder, self.selector, self.predictor, self.embeddings):
            for name, value in store.arrays().items():
                if not np.all(np.isfinite(value)):
                    raise ValidationError(f"参数 {name} 存在非有限值")

    @property
    def k(self) -> int:
        return int(self.embeddings[EMBEDDINGS].shape[0])

    @property
    def hidden(self) -> int:
        return int(self.encoder["enc.Uz"].shape[0])

    @property
    def n_classes(self) -> int:
        return int(self.priors.alpha.size)

    def to_json(self) -> Dict[str, Any]:
        return {
            "format_version": FORMAT_VERSION,
            "model": "actpc",
            "K": self.k,
            "hidden": self.hidden,
            "encoder": self.encoder.to_dict(),
            "selector": self.selector.to_dict(),
            "predictor": self.predictor.to_dict(),
            "embeddings": self.embeddings[EMBEDDINGS].tolist(),
            "alpha": self.priors.alpha.tolist(),
            "seed": int(self.seed),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ActpcModel":
        if data.get("format_version") != FORMAT_VERSION:
            raise ValidationError(f"不支持的模型格式版本: {data.get('format_version')}")
        embeddings = ParamStore()
        embeddings.add(EMBEDDINGS, np.array(data["embeddings"], dtype=float))
        model = cls(ParamStore.from_dict(data["encoder"]), ParamStore.from_dict(data["selector"]),
                    ParamStore.from_dict(data["predictor"]), embeddings,
                    ClassPrior(np.array(data["alpha"], dtype=float)), int(data["seed"]))
        if model.k != int(data["K"]) or model.hidden != int(data["hidden"]):
            raise ValidationError("模型文件中的K/hidden与参数形状不一致")
        return model


def init_actpc(config: ActpcConfig, priors: ClassPrior, rng: np.random.Generator,
               input_size: int) -> ActpcModel:
    """随机初始化的模型，簇嵌入为零(由init_clusters填充)."""
    encoder, selector, predictor, embeddings = ParamStore(), ParamStore(), ParamStore(), ParamStore()
    gru_init(encoder, "enc", input_size, config.hidden, rng)
    mlp_init(selector, "sel", [config.hidden, config.hidden, config.k], rng)
    mlp_init(predictor, "pred", [config.hidden, config.hidden, priors.alpha.size], rng)
    embeddings.add(EMBEDDINGS, np.zeros((config.k, config.hidden)))
    return ActpcModel(encoder, selector, predictor, embeddings, priors, config.seed)


""" 一、前向通路 """


def weighted_loss(y: np.ndarray, p: np.ndarray, alpha: Union[ClassPrior, np.ndarray]) -> float:
    """-Σ_c (1/α_c)·y_c·log p_c，二维输入时对行取平均.

    Raises:
        ValidationError: 存在 α_c <= 0.
    """
    alpha = alpha.require_positive() if isinstance(alpha, ClassPrior) else np.asarray(alpha, dtype=float)
    return cross_entropy_weighted(y, p, alpha)


def encode_sequences(model: ActpcModel, tensors: np.ndarray) -> Tuple[np.ndarray, List]:
    """N×T×8 张量的隐藏状态序列 N×T×hidden(h_0 = 0)."""
    return gru_sequence_forward(model.encoder, "enc", np.asarray(tensors, dtype=float))


def encode_history(model: ActpcModel, history: np.ndarray) -> np.ndarray:
    """前缀 x_{1:t}(t×8) 的最终隐藏状态 h_t."""
    history = np.asarray(history, dtype=float)
    if history.ndim != 2 or history.shape[0] < 1:
        raise ValidationError(f"历史序列必须是 t×D 且 t >= 1, shape={history.shape}")
    return encode_sequences(model, history[None])[0][0, -1]


def select(model: ActpcModel, h: np.ndarray) -> np.ndarray:
    """簇选择概率 π = softmax(selector(h))."""
    return softmax(mlp_forward(model.selector, "sel", np.asarray(h, dtype=float))[0])


def sample_cluster(pi: np.ndarray, rng: np.random.Generator) -> Union[int, np.ndarray]:
    """按π抽样簇编号；π为二维时逐行抽样."""
    pi = np.asarray(pi, dtype=float)
    if pi.ndim == 1:
        return int(rng.choice(pi.size, p=pi))
    u = rng.random(pi.shape[0])
    cumulative = np.cumsum(pi, axis=1)
    return np.minimum(np.sum(cumulative < u[:, None], axis=1), pi.shape[1] - 1)


def predict(model: ActpcModel, embedding: np.ndarray) -> np.ndarray:
    """结局概率 softmax(predictor(e))."""
    return softmax(mlp_forward(model.predictor, "pred", np.asarray(embedding, dtype=float))[0])


""" 二、梯度 """


def score_function_gradient(pi: np.ndarray, samples: np.ndarray, losses: np.ndarray,
                            baseline: float = 0.0) -> np.ndarray:
    """得分函数估计量对选择器logits的逐样本梯度 (l - b)·(onehot(k) - π).

    对 E_k~π[l_k] 求梯度的无偏估计(b与k无关时)。

    Returns:
        M×K 矩阵，每行为一个样本的估计.
    """
    pi = np.atleast_2d(np.asarray(pi, dtype=float))
    samples = np.atleast_1d(np.asarray(samples, dtype=int))
    losses = np.atleast_1d(np.asarray(losses, dtype=float))
    onehot = np.zeros_like(pi)
    onehot[np.arange(samples.size), samples] = 1.0
    return (losses - baseline)[:, None] * (onehot - pi)


def entropy(pi: np.ndarray) -> np.ndarray:
    """逐行熵."""
    return -np.sum(pi * np.log(np.maximum(pi, PROB_FLOOR)), axis=-1)


def actor_logit_gradient(pi: np.ndarray, samples: np.ndarray, losses: np.ndarray,
                         weight_entropy_sample: float, weight_entropy_batch: float) -> np.ndarray:
    """actor目标对选择器logits的梯度(已对M个样本取平均).

    目标 = 得分函数项(批均值基线) + w_s·mean H(π_i) - w_b·H(mean π)。
    """
    m = pi.shape[0]
    grad = score_function_gradient(pi, samples, losses, float(np.mean(losses))) / m
    log_pi = np.log(np.maximum(pi, PROB_FLOOR))
    h = entropy(pi)
    grad -= weight_entropy_sample * pi * (log_pi + h[:, None]) / m
    log_mean = np.log(np.maximum(pi.mean(axis=0), PROB_FLOOR))
    grad += weight_entropy_batch * pi * (log_mean[None, :] - np.sum(pi * log_mean, axis=1, keepdims=True)) / m
    return grad


""" 三、训练阶段 """


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def pretrain(model: ActpcModel, tensors: np.ndarray, labels: np.ndarray, config: ActpcConfig,
             rng: np.random.Generator) -> List[float]:
    """自编码通路预训练：编码器 → 预测器，标签广播到每个时刻.

    Returns:
        每个epoch的平均损失.
    """
    alpha = model.priors.require_positive()
    history = []
    for epoch in range(config.pretrain_epochs):
        total, count = 0.0, 0
        for batch_index, batch in enumerate(_batches(tensors.shape[0], config.batch_size, rng)):
            x = tensors[batch]
            y = np.broadcast_to(labels[batch][:, None, :], (x.shape[0], x.shape[1], labels.shape[1]))
            states, gru_caches = encode_sequences(model, x)
            logits, pred_caches = mlp_forward(model.predictor, "pred", states)
            p = softmax(logits)
            loss = check_finite(cross_entropy_weighted(y, p, alpha),
                                f"actpc pretrain epoch {epoch} batch {batch_index}")
            grad_states = mlp_backward(model.predictor, "pred", cross_entropy_weighted_backward(y, p, alpha),
                                       pred_caches)
            gru_sequence_backward(model.encoder, "enc", grad_states, gru_caches)
            optimizer_step(model.predictor, lr=config.lr)
            optimizer_step(model.encoder, lr=config.lr)
            total += loss * x.shape[0]
            count += x.shape[0]
        history.append(total / count)
        logger.info(f"actpc pretrain epoch {epoch + 1}/{config.pretrain_epochs}: loss={history[-1]:.6f}")
    return history


def init_clusters(model: ActpcModel, tensors: np.ndarray, k: int, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """在全部隐藏状态上运行k-means，质心作为簇嵌入.

    Returns:
        (K×hidden 嵌入, 每个(病人, 时刻)的初始分配 N×T).

    Raises:
        ValidationError: 不同的隐藏状态少于K个.
    """
    states = encode_sequences(model, tensors)[0]
    flat = states.reshape(-1, states.shape[-1])
    if np.unique(flat, axis=0).shape[0] < k:
        raise ValidationError(f"不同的隐藏状态少于 K={k} 个，无法初始化簇")
    fitted = tskm_fit(flat[:, None, :], k, Metric.euclidean(), seed)
    embeddings = fitted.centroids[:, 0, :]
    assignments = fitted.assign(flat[:, None, :]).reshape(states.shape[:2])
    if k == model.k:
        model.embeddings[EMBEDDINGS][...] = embeddings
    logger.info(f"簇初始化完成: K={k}, 初始簇规模 {np.bincount(assignments.ravel(), minlength=k).tolist()}")
    return embeddings, assignments


def warm_start_selector(model: ActpcModel, tensors: np.ndarray, assignments: np.ndarray, config: ActpcConfig,
                        rng: np.random.Generator) -> List[float]:
    """让选择器拟合初始分配(标准交叉熵，只更新选择器)."""
    states = encode_sequences(model, tensors)[0]
    targets = np.eye(model.k)[assignments]
    uniform = np.ones(model.k)
    history = []
    for epoch in range(config.selector_epochs):
        total, count = 0.0, 0
        for batch in _batches(tensors.shape[0], config.batch_size, rng):
            logits, caches = mlp_forward(model.selector, "sel", states[batch])
            pi = softmax(logits)
            loss = check_finite(cross_entropy_weighted(targets[batch], pi, uniform), f"actpc selector epoch {epoch}")
            mlp_backward(model.selector, "sel", cross_entropy_weighted_backward(targets[batch], pi, uniform), caches)
            optimizer_step(model.selector, lr=config.lr)
            total += loss * batch.size
            count += batch.size
        history.append(total / count)
        logger.info(f"actpc selector epoch {epoch + 1}/{config.selector_epochs}: loss={history[-1]:.6f}")
    return history


def critic_backward(model: ActpcModel, samples: np.ndarray, targets: np.ndarray,
                    alpha: np.ndarray) -> np.ndarray:
    """critic损失经抽中簇嵌入的反向传播.

    平均加权损失对预测器参数与簇嵌入的梯度累加进各自的ParamStore，
    同一簇被多次抽中时梯度相加。

    Args:
        model: 模型.
        samples: 每个子序列抽中的簇编号.
        targets: 对应的one-hot标签.
        alpha: 类别先验.

    Returns:
        每个子序列的加权损失.
    """
    e = model.embeddings[EMBEDDINGS][samples]
    pred_logits, pred_caches = mlp_forward(model.predictor, "pred", e)
    p = softmax(pred_logits)
    losses = -np.sum(targets * np.log(np.maximum(p, PROB_FLOOR)) / alpha, axis=1)
    grad_e = mlp_backward(model.predictor, "pred", cross_entropy_weighted_backward(targets, p, alpha), pred_caches)
    grad_embeddings = np.zeros_like(model.embeddings[EMBEDDINGS])
    np.add.at(grad_embeddings, samples, grad_e)
    model.embeddings.accumulate(EMBEDDINGS, grad_embeddings)
    return losses


def pred_path_backward(model: ActpcModel, h: np.ndarray, targets: np.ndarray, alpha: np.ndarray,
                       weight: float) -> Tuple[float, np.ndarray]:
    """隐藏状态直接经预测器的辅助损失 weight·L(y, pred(h)).

    预测器梯度同样被累加，调用方负责清空。

    Returns:
        (损失, 对h的梯度).
    """
    direct_logits, direct_caches = mlp_forward(model.predictor, "pred", h)
    direct = softmax(direct_logits)
    loss = weight * cross_entropy_weighted(targets, direct, alpha)
    grad_direct = cross_entropy_weighted_backward(targets, direct, alpha) * weight
    return loss, mlp_backward(model.predictor, "pred", grad_direct, direct_caches)


def actor_critic_step(model: ActpcModel, x: np.ndarray, y: np.ndarray, config: ActpcConfig,
                      rng: np.random.Generator, where: str = "actpc") -> Dict[str, float]:
    """一个批次的critic步与actor步.

    Args:
        model: 模型.
        x: B×T×8 批次.
        y: B×C 标签.
        config: 训练配置.
        rng: 训练循环持有的随机数生成器.
        where: 出错时消息中的位置.

    Returns:
        {"critic": 平均加权损失, "entropy": 平均样本熵, "batch_entropy": 批次分配熵}.
    """
    alpha = model.priors.require_positive()
    b, t = x.shape[:2]
    lengths = rng.integers(1, t + 1, size=(b, config.subseq_per_patient))
    rows = np.repeat(np.arange(b), config.subseq_per_patient)
    cols = lengths.ravel() - 1
    targets = y[rows]
    m = rows.size

    # critic: 预测器与簇嵌入
    states, gru_caches = encode_sequences(model, x)
    h = states[rows, cols]
    sel_logits, sel_caches = mlp_forward(model.selector, "sel", h)
    pi = softmax(sel_logits)
    samples = sample_cluster(pi, rng)
    losses = critic_backward(model, samples, targets, alpha)
    critic = check_finite(float(np.mean(losses)), where)
    optimizer_step(model.predictor, lr=config.lr)
    optimizer_step(model.embeddings, lr=config.lr)

    # actor: 选择器与编码器
    grad_logits = actor_logit_gradient(pi, samples, losses, config.weight_entropy_sample,
                                       config.weight_entropy_batch)
    grad_h = mlp_backward(model.selector, "sel", grad_logits, sel_caches)
    if config.weight_pred_path > 0:
        grad_h = grad_h + pred_path_backward(model, h, targets, alpha, config.weight_pred_path)[1]
        # 该通路只为编码器提供梯度
        model.predictor.zero_grad()
    grad_states = np.zeros_like(states)
    np.add.at(grad_states, (rows, cols), grad_h)
    gru_sequence_backward(model.encoder, "enc", grad_states, gru_caches)
    optimizer_step(model.selector, lr=config.lr)
    optimizer_step(model.encoder, lr=config.lr)
    return {"critic": critic, "entropy": float(np.mean(entropy(pi))),
            "batch_entropy": float(entropy(pi.mean(axis=0)))}


@timer
def actpc_train(tensors: np.ndarray, labels: np.ndarray, priors: ClassPrior,
                config: Optional[ActpcConfig] = None) -> ActpcModel:
    """完整的AC-TPC训练: 预训练 → 簇初始化 → 选择器预热 → actor-critic主训练.

    Args:
        tensors: N×T×8 预处理后的训练张量.
        labels: N×C one-hot标签.
        priors: 损失使用的类别先验(训练集；不加权时传入均匀先验).
        config: 训练配置.

    Returns:
        ActpcModel，history包含 pretrain/selector/critic 三个阶段.

    Raises:
        ValidationError: 输入形状不一致或先验存在零分量.
        TrainingError: 损失出现非有限值(消息包含epoch与batch).
    """
    config = config or ActpcConfig()
    tensors = np.asarray(tensors, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if tensors.ndim != 3 or labels.shape != (tensors.shape[0], priors.alpha.size):
        raise ValidationError(f"张量 {tensors.shape} 与标签 {labels.shape} 形状不一致")
    priors.require_positive()
    rng = np.random.default_rng(config.seed)
    model = init_actpc(config, priors, rng, tensors.shape[2])

    model.history["pretrain"] = pretrain(model, tensors, labels, config, rng)
    _, assignments = init_clusters(model, tensors, config.k, config.seed)
    model.history["selector"] = warm_start_selector(model, tensors, assignments, config, rng)

    model.history["critic"] = []
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        stats = []
        for batch_index, batch in enumerate(_batches(tensors.shape[0], config.batch_size, rng)):
            result = actor_critic_step(model, tensors[batch], labels[batch], config, rng,
                                       where=f"actpc epoch {epoch} batch {batch_index}")
            total += result["critic"] * batch.size
            count += batch.size
            stats.append(result["batch_entropy"])
        model.history["critic"].append(total / count)
        logger.info(f"actpc epoch {epoch + 1}/{config.epochs}: critic={model.history['critic'][-1]:.6f}, "
                    f"batch_entropy={np.mean(stats):.4f}")
    return model


""" 四、测试时分配 """


def actpc_assign_trace(model: ActpcModel, matrix: np.ndarray) -> AssignmentTrace:
    """逐时刻 argmax π(h_t)，并列取编号最小的簇."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2:
        raise ValidationError(f"病人矩阵必须是 T×D, shape={matrix.shape}")
    return actpc_assign_many(model, matrix[None])[0]


def actpc_assign_many(model: ActpcModel, tensors: np.ndarray) -> np.ndarray:
    """N×T×8 张量的分配轨迹 N×T."""
    states = encode_sequences(model, tensors)[0]
    return np.argmax(select(model, states), axis=-1)


def final_cluster(trace: np.ndarray, bin_hours: float = 4.0, window_hours: float = FINAL_WINDOW_HOURS) -> int:
    """最后 window_hours 小时内分配的众数，并列取编号最小的簇.

    Raises:
        ValidationError: 轨迹覆盖不足 window_hours.
    """
    trace = np.asarray(trace, dtype=int)
    n_bins = int(round(window_hours / bin_hours))
    if trace.ndim != 1 or trace.size < n_bins:
        raise ValidationError(f"轨迹需要覆盖至少 {window_hours:g} 小时({n_bins} 个分箱), 实际为 {trace.size}")
    return int(np.argmax(np.bincount(trace[-n_bins:])))


__all__ = [
    "AssignmentTrace",
    "ActpcConfig",
    "ActpcModel",
    "init_actpc",
    "weighted_loss",
    "encode_sequences",
    "encode_history",
    "select",
    "sample_cluster",
    "predict",
    "score_function_gradient",
    "entropy",
    "actor_logit_gradient",
    "pretrain",
    "init_clusters",
    "warm_start_selector",
    "critic_backward",
    "pred_path_backward",
    "actor_critic_step",
    "actpc_train",
    "actpc_assign_trace",
    "actpc_assign_many",
    "final_cluster",
]
