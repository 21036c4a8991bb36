# -*- coding: utf-8 -*-
"""可微计算内核的单元测试.

测试类:
    TestWeightedLoss: 加权交叉熵测试
    TestGradients: 解析梯度与数值梯度对比测试
    TestOptimizer: Adam与参数存储测试

作者: Guyue
许可证: MIT
"""

# 标准库导入 (Standard library imports)
import unittest

# 第三方库导入 (Third-party library imports)
import numpy as np

# 本地/自定义模块导入 (Local/custom module imports)
from pyphenoclust._errors import TrainingError, ValidationError
from pyphenoclust.diffkern import (ParamStore, Tensor, check_finite, cross_entropy_weighted,
                                   cross_entropy_weighted_backward, grad_check, gru_init,
                                   gru_sequence_backward, gru_sequence_forward, mlp_backward, mlp_forward,
                                   mlp_init, optimizer_step, softmax)

GRAD_TOLERANCE = 1e-5


class TestWeightedLoss(unittest.TestCase):
    """测试类别先验加权交叉熵"""

    def test_known_values(self):
        """测试手算的损失值"""
        alpha = np.array([0.5, 0.5])
        self.assertEqual(cross_entropy_weighted(np.array([1.0, 0.0]), np.array([1.0, 0.0]), alpha), 0.0)
        self.assertAlmostEqual(cross_entropy_weighted(np.array([1.0, 0.0]), np.array([0.5, 0.5]), alpha),
                               2.0 * np.log(2.0), places=12)
        self.assertAlmostEqual(cross_entropy_weighted(np.array([0.0, 1.0]), np.array([0.5, 0.5]), np.array([0.9, 0.1])),
                               10.0 * np.log(2.0), places=9)
        rare = np.array([0.02, 0.98])
        loss = cross_entropy_weighted(np.array([1.0, 0.0]), np.array([0.25, 0.75]), rare)
        self.assertAlmostEqual(loss, 50.0 * np.log(4.0), places=9)
        self.assertAlmostEqual(loss, 69.31, places=2)

    def test_uniform_prior_scales_plain_ce(self):
        """测试均匀先验等于C倍的普通交叉熵"""
        rng = np.random.default_rng(0)
        p = softmax(rng.normal(size=(5, 4)))
        y = np.eye(4)[rng.integers(0, 4, size=5)]
        plain = -np.mean(np.sum(y * np.log(p), axis=1))
        self.assertAlmostEqual(cross_entropy_weighted(y, p, np.full(4, 0.25)), 4.0 * plain, places=12)

    def test_zero_prior_rejected(self):
        """测试先验存在零分量"""
        with self.assertRaises(ValidationError):
            cross_entropy_weighted(np.array([1.0, 0.0]), np.array([0.5, 0.5]), np.array([1.0, 0.0]))
        with self.assertRaises(ValidationError):
            cross_entropy_weighted(np.array([1.0, 0.0]), np.array([0.5, 0.5, 0.0]), np.array([0.5, 0.5]))

    def test_softmax_stable(self):
        """测试大logits下的softmax"""
        np.testing.assert_allclose(softmax(np.array([1000.0, 1000.0])), [0.5, 0.5])
        self.assertTrue(np.isfinite(softmax(np.array([-1000.0, 1000.0]))).all())


class TestGradients(unittest.TestCase):
    """测试解析梯度"""

    def test_weighted_loss_gradient(self):
        """测试加权交叉熵对logits的梯度"""
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(3, 2, 4))
        y = np.eye(4)[rng.integers(0, 4, size=(3, 2))]
        alpha = np.array([0.7, 0.1, 0.15, 0.05])

        def closure():
            p = softmax(logits)
            return cross_entropy_weighted(y, p, alpha), {"logits": cross_entropy_weighted_backward(y, p, alpha)}

        self.assertLess(grad_check(closure, {"logits": logits}), GRAD_TOLERANCE)

    def test_mlp_gradient(self):
        """测试感知机的参数与输入梯度"""
        rng = np.random.default_rng(2)
        store = ParamStore()
        mlp_init(store, "net", [3, 5, 2], rng)
        x = rng.normal(size=(4, 3))
        weights = rng.normal(size=(4, 2))

        def closure():
            store.zero_grad()
            y, caches = mlp_forward(store, "net", x)
            grad_x = mlp_backward(store, "net", weights, caches)
            return float(np.sum(y * weights)), dict(store.grads(), x=grad_x)

        params = dict(store.arrays(), x=x)
        self.assertLess(grad_check(closure, params), GRAD_TOLERANCE)

    def test_gru_gradient_through_time(self):
        """测试门控循环单元沿时间反向传播的梯度"""
        rng = np.random.default_rng(3)
        store = ParamStore()
        gru_init(store, "enc", 2, 3, rng)
        x = rng.normal(size=(2, 4, 2))
        weights = rng.normal(size=(2, 4, 3))

        def closure():
            store.zero_grad()
            states, caches = gru_sequence_forward(store, "enc", x)
            grad_x = gru_sequence_backward(store, "enc", weights, caches)
            return float(np.sum(states * weights)), dict(store.grads(), x=grad_x)

        params = dict(store.arrays(), x=x)
        self.assertLess(grad_check(closure, params), GRAD_TOLERANCE)

    def test_grad_check_detects_wrong_gradient(self):
        """测试错误的解析梯度被发现"""
        w = np.array([1.0, 2.0])

        def closure():
            return float(np.sum(w ** 2)), {"w": w.copy()}

        self.assertGreater(grad_check(closure, {"w": w}), 0.1)


class TestOptimizer(unittest.TestCase):
    """测试Adam与参数存储"""

    def test_first_step_size(self):
        """测试偏差校正后首步步长约为学习率"""
        store = ParamStore()
        store.add("w", np.array([1.0, -1.0]))
        store.add("frozen", np.array([3.0]))
        store.accumulate("w", np.array([2.0, -0.5]))
        optimizer_step(store, lr=0.1)
        np.testing.assert_allclose(store["w"], [0.9, -0.9], atol=1e-6)
        self.assertEqual(store["frozen"].tolist(), [3.0])
        self.assertIsNone(store.tensor("w").grad)
        self.assertEqual(store.step, 1)

    def test_minimizes_quadratic(self):
        """测试Adam最小化二次函数"""
        store = ParamStore()
        store.add("w", np.array([5.0]))
        for _ in range(500):
            store.accumulate("w", 2.0 * store["w"])
            optimizer_step(store, lr=0.05)
        self.assertLess(abs(float(store["w"][0])), 0.1)

    def test_non_finite_gradient(self):
        """测试梯度非有限时报告参数名"""
        store = ParamStore()
        store.add("enc.Wz", np.zeros(2))
        store.accumulate("enc.Wz", np.array([np.nan, 0.0]))
        with self.assertRaises(TrainingError) as ctx:
            optimizer_step(store)
        self.assertIn("enc.Wz", str(ctx.exception))
        with self.assertRaises(TrainingError):
            check_finite(float("inf"), "critic")
        self.assertEqual(check_finite(1.5, "critic"), 1.5)

    def test_store_copy_and_dict(self):
        """测试参数存储的复制与字典表示"""
        store = ParamStore()
        store.add("a", np.ones((2, 2)))
        clone = store.copy()
        clone.arrays()["a"][0, 0] = 7.0
        self.assertEqual(store["a"][0, 0], 1.0)
        self.assertEqual(ParamStore.from_dict(store.to_dict()).to_dict(), store.to_dict())
        self.assertEqual(store.n_parameters(), 4)
        with self.assertRaises(ValidationError):
            store.add("a", np.zeros(1))

    def test_tensor_validation(self):
        """测试张量秩与梯度形状"""
        with self.assertRaises(ValidationError):
            Tensor(np.zeros((1, 1, 1, 1)))
        tensor = Tensor(np.zeros(3))
        with self.assertRaises(ValidationError):
            tensor.accumulate(np.zeros(2))
        tensor.accumulate(np.ones(3))
        tensor.accumulate(np.ones(3))
        self.assertEqual(tensor.grad.tolist(), [2.0, 2.0, 2.0])


if __name__ == '__main__':
    unittest.main()
