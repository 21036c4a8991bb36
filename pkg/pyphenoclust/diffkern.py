# -*- coding: utf-8 -*-
"""最小可微计算内核.

基于numpy的手写前向/反向传播：全连接层、tanh两层感知机、门控循环单元(GRU)
及其沿时间的反向传播、softmax与类别先验加权交叉熵(融合反向)、Adam优化器，
以及用中心差分检验解析梯度的 grad_check。

所有前向函数返回 ``(输出, cache)``，对应的反向函数接收输出梯度与cache，
返回输入梯度并把参数梯度累加进ParamStore。求和顺序固定，结果可复现。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterator, List, Mapping, Optional, Sequence, Tuple

# 第三方库导入 (Third-party library imports)
import numpy as np

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import TrainingError, ValidationError

PROB_FLOOR = 1e-12
MAX_RANK = 3

# 门控循环单元的参数名后缀
GRU_PARAMS = ("Wz", "Uz", "bz", "Wr", "Ur", "br", "Wh", "Uh", "bh")


@dataclass
class Tensor:
    """带可选梯度缓冲的数组.

    属性:
        value: 数值，最多3个轴.
        grad: 梯度缓冲，存在时形状与value相同.
    """

    value: np.ndarray
    grad: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        self.value = np.array(self.value, dtype=float)
        if self.value.ndim > MAX_RANK:
            raise ValidationError(f"Tensor最多{MAX_RANK}个轴, shape={self.value.shape}")
        if self.grad is not None:
            self.accumulate(np.asarray(self.grad, dtype=float), reset=True)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    def accumulate(self, grad: np.ndarray, reset: bool = False) -> None:
        """累加梯度(reset=True时覆盖)."""
        grad = np.asarray(grad, dtype=float)
        if grad.shape != self.value.shape:
            raise ValidationError(f"梯度形状 {grad.shape} 与参数形状 {self.value.shape} 不一致")
        if self.grad is None or reset:
            self.grad = grad.copy()
        else:
            self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None


class ParamStore:
    """命名参数集合及其Adam状态.

    同一模型的不同组件(编码器、选择器等)各用一个ParamStore，
    这样只更新某个组件时，其他组件的动量不会推动它们的参数。
    """

    def __init__(self) -> None:
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValidationError(f"参数名重复: {name}")
        tensor = Tensor(value)
        self._params[name] = tensor
        self._m[name] = np.zeros_like(tensor.value)
        self._v[name] = np.zeros_like(tensor.value)
        return tensor

    def __getitem__(self, name: str) -> np.ndarray:
        return self._params[name].value

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    @property
    def names(self) -> List[str]:
        return list(self._params)

    def tensor(self, name: str) -> Tensor:
        return self._params[name]

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        self._params[name].accumulate(grad)

    def grad(self, name: str) -> np.ndarray:
        """参数梯度，未累加过时为零."""
        tensor = self._params[name]
        return np.zeros_like(tensor.value) if tensor.grad is None else tensor.grad

    def grads(self) -> Dict[str, np.ndarray]:
        return {name: self.grad(name) for name in self._params}

    def arrays(self) -> Dict[str, np.ndarray]:
        """参数名到参数数组(原地可写)的映射，供grad_check扰动使用."""
        return {name: tensor.value for name, tensor in self._params.items()}

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.zero_grad()

    def n_parameters(self) -> int:
        return int(sum(t.value.size for t in self._params.values()))

    def copy(self) -> "ParamStore":
        other = ParamStore()
        for name, tensor in self._params.items():
            other.add(name, tensor.value)
            other._m[name] = self._m[name].copy()
            other._v[name] = self._v[name].copy()
        other.step = self.step
        return other

    def to_dict(self) -> Dict[str, Any]:
        return {name: tensor.value.tolist() for name, tensor in self._params.items()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ParamStore":
        store = cls()
        for name, value in data.items():
            store.add(name, np.array(value, dtype=float))
        return store


def optimizer_step(store: ParamStore, lr: float = 1e-3, betas: Tuple[float, float] = (0.9, 0.999),
                   eps: float = 1e-8) -> None:
    """带偏差校正的Adam更新，完成后清空梯度.

    没有累加过梯度的参数不更新(动量状态也不变)。

    Raises:
        TrainingError: 梯度包含NaN或inf，消息中给出参数名.
    """
    beta1, beta2 = betas
    for name, tensor in store._params.items():
        if tensor.grad is not None and not np.all(np.isfinite(tensor.grad)):
            raise TrainingError(f"参数 {name} 的梯度存在非有限值 (step {store.step + 1})")
    store.step += 1
    correction1 = 1.0 - beta1 ** store.step
    correction2 = 1.0 - beta2 ** store.step
    for name, tensor in store._params.items():
        if tensor.grad is None:
            continue
        grad = tensor.grad
        store._m[name] = beta1 * store._m[name] + (1.0 - beta1) * grad
        store._v[name] = beta2 * store._v[name] + (1.0 - beta2) * grad * grad
        m_hat = store._m[name] / correction1
        v_hat = store._v[name] / correction2
        tensor.value -= lr * m_hat / (np.sqrt(v_hat) + eps)
    store.zero_grad()


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Glorot均匀初始化."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


""" 一、基本运算 """


def dense_forward(x: np.ndarray, W: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, Tuple]:
    """y = xW + b，x的最后一维为输入维度.

    Raises:
        ValidationError: 维度不匹配.
    """
    x = np.asarray(x, dtype=float)
    if W.ndim != 2 or x.shape[-1] != W.shape[0] or b.shape != (W.shape[1],):
        raise ValidationError(f"全连接层形状不匹配: x{x.shape}, W{W.shape}, b{b.shape}")
    return x @ W + b, (x, W)


def dense_backward(grad_y: np.ndarray, cache: Tuple) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """返回 (grad_x, grad_W, grad_b)."""
    x, W = cache
    x2 = x.reshape(-1, x.shape[-1])
    g2 = grad_y.reshape(-1, grad_y.shape[-1])
    return grad_y @ W.T, x2.T @ g2, g2.sum(axis=0)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    positive = x >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-x[positive]))
    e = np.exp(x[~positive])
    out[~positive] = e / (1.0 + e)
    return out


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """数值稳定的softmax."""
    logits = np.asarray(logits, dtype=float)
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def softmax_backward(grad_p: np.ndarray, p: np.ndarray) -> np.ndarray:
    """softmax输出梯度到logits梯度."""
    return p * (grad_p - np.sum(grad_p * p, axis=-1, keepdims=True))


def _class_weights(alpha: np.ndarray) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0.0):
        raise ValidationError(f"加权交叉熵要求所有类别先验为正: {alpha.tolist()}")
    return 1.0 / alpha


def cross_entropy_weighted(y: np.ndarray, p: np.ndarray, alpha: np.ndarray) -> float:
    """类别先验加权交叉熵 -Σ_c (1/α_c)·y_c·log p_c.

    二维输入时对行取平均；概率在取对数前截断到不小于1e-12。

    Raises:
        ValidationError: 存在 α_c <= 0 或形状不一致.
    """
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    weights = _class_weights(alpha)
    if y.shape != p.shape or y.shape[-1] != weights.size:
        raise ValidationError(f"形状不一致: y{y.shape}, p{p.shape}, alpha({weights.size},)")
    per_row = -np.sum(weights * y * np.log(np.maximum(p, PROB_FLOOR)), axis=-1)
    return float(np.mean(per_row))


def cross_entropy_weighted_backward(y: np.ndarray, p: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """加权交叉熵对softmax输入(logits)的梯度，与 cross_entropy_weighted 的行平均一致."""
    y = np.asarray(y, dtype=float)
    p = np.asarray(p, dtype=float)
    weights = _class_weights(alpha)
    rows = int(np.prod(y.shape[:-1])) if y.ndim > 1 else 1
    active = p >= PROB_FLOOR
    # 截断处梯度为零
    grad_p = np.where(active, -weights * y / np.where(active, p, 1.0), 0.0)
    return softmax_backward(grad_p, p) / rows


""" 二、两层感知机 """


def mlp_init(store: ParamStore, prefix: str, sizes: Sequence[int], rng: np.random.Generator) -> None:
    """在store中创建感知机参数 ``{prefix}.W{i}``/``{prefix}.b{i}``."""
    if len(sizes) < 2:
        raise ValidationError(f"感知机至少需要输入与输出两层: {sizes}")
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        store.add(f"{prefix}.W{i}", glorot(rng, fan_in, fan_out))
        store.add(f"{prefix}.b{i}", np.zeros(fan_out))


def _mlp_layers(store: ParamStore, prefix: str) -> int:
    count = 0
    while f"{prefix}.W{count}" in store:
        count += 1
    if count == 0:
        raise ValidationError(f"ParamStore中没有感知机参数: {prefix}")
    return count


def mlp_forward(store: ParamStore, prefix: str, x: np.ndarray) -> Tuple[np.ndarray, List]:
    """隐藏层tanh、输出层线性的感知机前向."""
    caches = []
    h = x
    layers = _mlp_layers(store, prefix)
    for i in range(layers):
        h, dense_cache = dense_forward(h, store[f"{prefix}.W{i}"], store[f"{prefix}.b{i}"])
        if i < layers - 1:
            h = np.tanh(h)
            caches.append((dense_cache, h))
        else:
            caches.append((dense_cache, None))
    return h, caches


def mlp_backward(store: ParamStore, prefix: str, grad_y: np.ndarray, caches: List) -> np.ndarray:
    """感知机反向，参数梯度累加进store，返回输入梯度."""
    grad = grad_y
    for i in reversed(range(len(caches))):
        dense_cache, activation = caches[i]
        if activation is not None:
            grad = grad * (1.0 - activation ** 2)
        grad, grad_W, grad_b = dense_backward(grad, dense_cache)
        store.accumulate(f"{prefix}.W{i}", grad_W)
        store.accumulate(f"{prefix}.b{i}", grad_b)
    return grad


""" 三、门控循环单元 """


def gru_init(store: ParamStore, prefix: str, input_size: int, hidden_size: int, rng: np.random.Generator) -> None:
    """创建门控循环单元参数，偏置初始化为0."""
    for gate in ("z", "r", "h"):
        store.add(f"{prefix}.W{gate}", glorot(rng, input_size, hidden_size))
        store.add(f"{prefix}.U{gate}", glorot(rng, hidden_size, hidden_size))
        store.add(f"{prefix}.b{gate}", np.zeros(hidden_size))


def gru_params(store: ParamStore, prefix: str) -> Dict[str, np.ndarray]:
    return {name: store[f"{prefix}.{name}"] for name in GRU_PARAMS}


def rnn_cell_forward(x_t: np.ndarray, h_prev: np.ndarray, params: Mapping[str, np.ndarray]) -> Tuple[np.ndarray, Tuple]:
    """门控循环单元单步.

    z = σ(xWz + hUz + bz), r = σ(xWr + hUr + br),
    h~ = tanh(xWh + (r⊙h)Uh + bh), h_t = (1 - z)⊙h + z⊙h~.

    Raises:
        ValidationError: 维度不匹配.
    """
    x_t = np.atleast_2d(np.asarray(x_t, dtype=float))
    h_prev = np.atleast_2d(np.asarray(h_prev, dtype=float))
    hidden = params["Uz"].shape[0]
    if h_prev.shape[-1] != hidden or x_t.shape[-1] != params["Wz"].shape[0] or \
            x_t.shape[:-1] != h_prev.shape[:-1]:
        raise ValidationError(f"循环单元形状不匹配: x{x_t.shape}, h{h_prev.shape}, hidden={hidden}")
    z = sigmoid(x_t @ params["Wz"] + h_prev @ params["Uz"] + params["bz"])
    r = sigmoid(x_t @ params["Wr"] + h_prev @ params["Ur"] + params["br"])
    candidate = np.tanh(x_t @ params["Wh"] + (r * h_prev) @ params["Uh"] + params["bh"])
    h_t = (1.0 - z) * h_prev + z * candidate
    return h_t, (x_t, h_prev, z, r, candidate)


def rnn_cell_backward(grad_h: np.ndarray, cache: Tuple,
                      params: Mapping[str, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, Dict[str, np.ndarray]]:
    """返回 (grad_x, grad_h_prev, 参数梯度字典)."""
    x_t, h_prev, z, r, candidate = cache
    grad_candidate = grad_h * z
    grad_z = grad_h * (candidate - h_prev)
    grad_h_prev = grad_h * (1.0 - z)

    a_h = grad_candidate * (1.0 - candidate ** 2)
    grad_rh = a_h @ params["Uh"].T
    grad_r = grad_rh * h_prev
    grad_h_prev += grad_rh * r

    a_z = grad_z * z * (1.0 - z)
    a_r = grad_r * r * (1.0 - r)
    grad_h_prev += a_z @ params["Uz"].T + a_r @ params["Ur"].T
    grad_x = a_z @ params["Wz"].T + a_r @ params["Wr"].T + a_h @ params["Wh"].T

    grads = {
        "Wz": x_t.T @ a_z, "Uz": h_prev.T @ a_z, "bz": a_z.sum(axis=0),
        "Wr": x_t.T @ a_r, "Ur": h_prev.T @ a_r, "br": a_r.sum(axis=0),
        "Wh": x_t.T @ a_h, "Uh": (r * h_prev).T @ a_h, "bh": a_h.sum(axis=0),
    }
    return grad_x, grad_h_prev, grads


def gru_sequence_forward(store: ParamStore, prefix: str, x: np.ndarray,
                         h0: Optional[np.ndarray] = None) -> Tuple[np.ndarray, List]:
    """N×T×input 序列的前向，返回 N×T×hidden 的隐藏状态序列."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 3:
        raise ValidationError(f"序列输入必须是 N×T×input, shape={x.shape}")
    params = gru_params(store, prefix)
    n, t, _ = x.shape
    h = np.zeros((n, params["Uz"].shape[0])) if h0 is None else h0
    states = np.empty((n, t, h.shape[-1]))
    caches = []
    for step in range(t):
        h, cache = rnn_cell_forward(x[:, step, :], h, params)
        states[:, step, :] = h
        caches.append(cache)
    return states, caches


def gru_sequence_backward(store: ParamStore, prefix: str, grad_states: np.ndarray, caches: List) -> np.ndarray:
    """沿时间反向传播，参数梯度累加进store，返回输入梯度 N×T×input."""
    params = gru_params(store, prefix)
    n, t, _ = grad_states.shape
    grad_x = np.empty((n, t, params["Wz"].shape[0]))
    totals = {name: np.zeros_like(value) for name, value in params.items()}
    carry = np.zeros((n, params["Uz"].shape[0]))
    for step in reversed(range(t)):
        grad_x[:, step, :], carry, grads = rnn_cell_backward(grad_states[:, step, :] + carry, caches[step], params)
        for name, value in grads.items():
            totals[name] += value
    for name, value in totals.items():
        store.accumulate(f"{prefix}.{name}", value)
    return grad_x


""" 四、梯度检验 """


def grad_check(closure: Callable[[], Tuple[float, Mapping[str, np.ndarray]]], params: Mapping[str, np.ndarray],
               eps: float = 1e-5, floor: float = 1e-4, names: Optional[Sequence[str]] = None) -> float:
    """用中心差分检验解析梯度.

    相对误差定义为 |a - n| / max(|a| + |n|, floor)。

    Args:
        closure: 无参函数，在当前参数值处返回 (loss, {参数名: 解析梯度}).
        params: 参数名到参数数组的映射，数组会被原地扰动并恢复.
        eps: 差分步长.
        floor: 相对误差分母的下限.
        names: 只检验这些参数，默认全部.

    Returns:
        所有坐标上的最大相对误差.

    Raises:
        ValidationError: 损失为非有限值.
    """
    loss, analytic = closure()
    if not np.isfinite(loss):
        raise ValidationError(f"梯度检验要求损失为有限值: {loss}")
    analytic = {name: np.array(grad, dtype=float) for name, grad in analytic.items()}
    worst = 0.0
    for name in (names or list(params)):
        value = params[name]
        grad = analytic.get(name, np.zeros_like(value))
        flat = value.reshape(-1)
        for index in range(flat.size):
            original = flat[index]
            flat[index] = original + eps
            plus = closure()[0]
            flat[index] = original - eps
            minus = closure()[0]
            flat[index] = original
            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise ValidationError(f"参数 {name}[{index}] 扰动后损失为非有限值")
            numeric = (plus - minus) / (2.0 * eps)
            exact = grad.reshape(-1)[index]
            error = abs(exact - numeric) / max(abs(exact) + abs(numeric), floor)
            worst = max(worst, error)
    return float(worst)


def check_finite(value: float, where: str) -> float:
    """非有限的损失视为训练发散.

    Raises:
        TrainingError: 值为NaN或inf.
    """
    if not np.isfinite(value):
        raise TrainingError(f"{where}: 损失发散 ({value})")
    return value


__all__ = [
    "PROB_FLOOR",
    "Tensor",
    "ParamStore",
    "optimizer_step",
    "glorot",
    "dense_forward",
    "dense_backward",
    "sigmoid",
    "softmax",
    "softmax_backward",
    "cross_entropy_weighted",
    "cross_entropy_weighted_backward",
    "mlp_init",
    "mlp_forward",
    "mlp_backward",
    "gru_init",
    "gru_params",
    "rnn_cell_forward",
    "rnn_cell_backward",
    "gru_sequence_forward",
    "gru_sequence_backward",
    "grad_check",
    "check_finite",
]
