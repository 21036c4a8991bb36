# -*- coding: utf-8 -*-
"""AC-TPC的单元测试.

测试类:
    TestLossAndGradients: 加权损失与actor梯度测试
    TestFinalCluster: 最后48小时众数规则测试
    TestTraining: 训练、分配与序列化测试

作者: Guyue
许可证: MIT
"""

# 标准库导入 (Standard library imports)
import unittest

# 第三方库导入 (Third-party library imports)
import numpy as np

# 本地/自定义模块导入 (Local/custom module imports)
from pyphenoclust._errors import ValidationError
from pyphenoclust.actpc import (EMBEDDINGS, ActpcConfig, ActpcModel, actor_critic_step, actor_logit_gradient,
                                actpc_assign_many, actpc_assign_trace, actpc_train, critic_backward,
                                encode_history, encode_sequences, entropy, final_cluster, init_actpc,
                                init_clusters, pred_path_backward, predict, sample_cluster,
                                score_function_gradient, weighted_loss)
from pyphenoclust.cohort import ClassPrior
from pyphenoclust.diffkern import grad_check, gru_sequence_backward, softmax

TINY = ActpcConfig(k=2, hidden=4, pretrain_epochs=2, selector_epochs=1, epochs=2, batch_size=4,
                   subseq_per_patient=2, lr=1e-2, seed=0)
LABELS = np.eye(4)[[0, 1, 2, 3, 0, 1, 2, 3]]
PRIORS = ClassPrior(LABELS.mean(axis=0))


def toy_tensors(seed=0):
    rng = np.random.default_rng(seed)
    tensors = rng.normal(size=(8, 6, 8))
    # 前一半病人整体偏高
    tensors[:4] += 2.0
    return tensors


def fresh_model(seed=0):
    rng = np.random.default_rng(seed)
    model = init_actpc(TINY, PRIORS, rng, 8)
    model.embeddings.arrays()[EMBEDDINGS][...] = rng.normal(size=(TINY.k, TINY.hidden))
    return model


class TestLossAndGradients(unittest.TestCase):
    """测试加权损失与actor梯度"""

    def test_weighted_loss_values(self):
        """测试先验加权损失的手算值"""
        y = np.array([1.0, 0.0])
        self.assertEqual(weighted_loss(y, np.array([1.0, 0.0]), ClassPrior(np.array([0.5, 0.5]))), 0.0)
        self.assertAlmostEqual(weighted_loss(y, np.array([0.5, 0.5]), ClassPrior(np.array([0.5, 0.5]))),
                               2.0 * np.log(2.0), places=12)
        self.assertAlmostEqual(weighted_loss(np.array([0.0, 1.0]), np.array([0.5, 0.5]), np.array([0.9, 0.1])),
                               10.0 * np.log(2.0), places=9)
        self.assertAlmostEqual(weighted_loss(y, np.array([0.25, 0.75]), np.array([0.02, 0.98])),
                               50.0 * np.log(4.0), places=9)
        with self.assertRaises(ValidationError):
            weighted_loss(y, np.array([0.5, 0.5]), ClassPrior(np.array([0.0, 1.0])))

    def test_uniform_prior_is_scaled_ce(self):
        """测试均匀先验下损失为C倍的交叉熵"""
        p = np.array([[0.7, 0.1, 0.1, 0.1], [0.2, 0.2, 0.5, 0.1]])
        y = np.array([[1.0, 0, 0, 0], [0, 0, 1.0, 0]])
        plain = -np.mean(np.log([0.7, 0.5]))
        self.assertAlmostEqual(weighted_loss(y, p, ClassPrior.uniform(4)), 4.0 * plain, places=12)

    def test_score_function_expectation_is_exact_gradient(self):
        """测试得分函数估计量的期望等于真实梯度(与基线无关)"""
        pi = softmax(np.array([0.3, -0.2]))
        losses = np.array([1.0, 3.0])
        exact = pi * (losses - np.dot(pi, losses))
        for baseline in (0.0, 2.0, -5.0):
            expectation = sum(pi[k] * score_function_gradient(pi, [k], [losses[k]], baseline)[0] for k in range(2))
            np.testing.assert_allclose(expectation, exact, atol=1e-12)

    def test_score_function_monte_carlo(self):
        """测试两簇玩具问题上蒙特卡洛估计的无偏性"""
        rng = np.random.default_rng(0)
        pi = softmax(np.array([0.3, -0.2]))
        losses = np.array([1.0, 3.0])
        n = 200000
        tiled = np.tile(pi, (n, 1))
        samples = sample_cluster(tiled, rng)
        estimate = score_function_gradient(tiled, samples, losses[samples], baseline=2.0).mean(axis=0)
        exact = pi * (losses - np.dot(pi, losses))
        np.testing.assert_allclose(estimate, exact, atol=0.01)
        np.testing.assert_allclose(np.bincount(samples, minlength=2) / n, pi, atol=0.01)

    def test_actor_gradient_matches_objective(self):
        """测试actor梯度与目标函数的数值梯度一致"""
        rng = np.random.default_rng(1)
        logits = rng.normal(size=(5, 3))
        samples = np.array([0, 2, 1, 1, 0])
        losses = rng.uniform(0.5, 3.0, size=5)
        baseline = float(losses.mean())
        w_s, w_b = 0.3, 0.7

        def closure():
            pi = softmax(logits)
            chosen = np.log(pi[np.arange(5), samples])
            objective = (np.mean((losses - baseline) * chosen) + w_s * np.mean(entropy(pi))
                         - w_b * float(entropy(pi.mean(axis=0))))
            return float(objective), {"logits": actor_logit_gradient(pi, samples, losses, w_s, w_b)}

        self.assertLess(grad_check(closure, {"logits": logits}), 1e-5)

    def test_sample_cluster(self):
        """测试确定性分布下的抽样"""
        rng = np.random.default_rng(2)
        self.assertEqual(sample_cluster(np.array([0.0, 1.0, 0.0]), rng), 1)
        samples = sample_cluster(np.array([[1.0, 0.0], [0.0, 1.0]]), rng)
        self.assertEqual(samples.tolist(), [0, 1])

    def test_critic_gradient(self):
        """测试critic损失对预测器与簇嵌入的梯度(同一簇多次抽中)"""
        alpha = np.array([0.4, 0.3, 0.2, 0.1])
        for seed in range(4):
            model = fresh_model(seed)
            rng = np.random.default_rng(seed + 10)
            samples = rng.integers(0, TINY.k, size=8)
            targets = LABELS[rng.permutation(8)]
            params = dict(model.predictor.arrays())
            params[EMBEDDINGS] = model.embeddings.arrays()[EMBEDDINGS]

            def closure():
                model.predictor.zero_grad()
                model.embeddings.zero_grad()
                losses = critic_backward(model, samples, targets, alpha)
                grads = dict(model.predictor.grads())
                grads[EMBEDDINGS] = model.embeddings.grad(EMBEDDINGS)
                return float(np.mean(losses)), grads

            self.assertLess(grad_check(closure, params), 1e-5, msg=f"seed={seed}")

    def test_critic_losses_are_weighted(self):
        """测试critic逐样本损失的均值等于加权交叉熵"""
        model = fresh_model(1)
        alpha = np.array([0.4, 0.3, 0.2, 0.1])
        samples = np.array([0, 1, 1, 0, 1, 0, 0, 1])
        losses = critic_backward(model, samples, LABELS, alpha)
        expected = weighted_loss(LABELS, predict(model, model.embeddings[EMBEDDINGS][samples]), alpha)
        self.assertAlmostEqual(float(np.mean(losses)), expected, places=12)

    def test_pred_path_gradient(self):
        """测试预测通路损失对编码器与预测器的梯度"""
        alpha = np.array([0.4, 0.3, 0.2, 0.1])
        for seed in range(3):
            model = fresh_model(seed)
            rng = np.random.default_rng(seed + 20)
            x = toy_tensors(seed)[:4]
            rows = np.repeat(np.arange(4), 2)
            cols = rng.integers(0, x.shape[1], size=rows.size)
            targets = LABELS[rows]
            params = dict(model.encoder.arrays())
            params.update(model.predictor.arrays())

            def closure():
                model.encoder.zero_grad()
                model.predictor.zero_grad()
                states, caches = encode_sequences(model, x)
                loss, grad_h = pred_path_backward(model, states[rows, cols], targets, alpha, 0.5)
                grad_states = np.zeros_like(states)
                np.add.at(grad_states, (rows, cols), grad_h)
                gru_sequence_backward(model.encoder, "enc", grad_states, caches)
                grads = dict(model.encoder.grads())
                grads.update(model.predictor.grads())
                return loss, grads

            self.assertLess(grad_check(closure, params), 1e-4, msg=f"seed={seed}")


class TestFinalCluster(unittest.TestCase):
    """测试最后48小时的众数规则"""

    def test_mode_of_last_window(self):
        """测试只看最后12个4小时分箱"""
        trace = np.array([0] * 12 + [1] * 5 + [2] * 7)
        self.assertEqual(final_cluster(trace), 2)
        trace = np.array([3] * 30 + [1] * 7 + [0] * 5)
        self.assertEqual(final_cluster(trace), 1)

    def test_tie_takes_lowest(self):
        """测试并列时取编号最小的簇"""
        trace = np.array([0] * 6 + [2] * 6 + [1] * 6)
        self.assertEqual(final_cluster(trace), 1)

    def test_bin_width(self):
        """测试分箱宽度决定窗口内的分箱数"""
        trace = np.array([1] * 14 + [0] * 11)
        self.assertEqual(final_cluster(trace, bin_hours=2.0), 1)
        self.assertEqual(final_cluster(trace, bin_hours=4.0), 0)

    def test_matches_counting_oracle(self):
        """测试1000条随机轨迹上与直接计数(并列取最小编号)一致"""
        rng = np.random.default_rng(0)
        for _ in range(1000):
            k = int(rng.integers(1, 6))
            trace = rng.integers(0, k, size=int(rng.integers(12, 31)))
            counts = {}
            for cluster in trace[-12:].tolist():
                counts[cluster] = counts.get(cluster, 0) + 1
            top = max(counts.values())
            expected = min(cluster for cluster, count in counts.items() if count == top)
            self.assertEqual(final_cluster(trace), expected, msg=str(trace.tolist()))

    def test_too_short(self):
        """测试不足48小时的轨迹"""
        with self.assertRaises(ValidationError):
            final_cluster(np.zeros(11, dtype=int))


class TestTraining(unittest.TestCase):
    """测试训练与分配"""

    def test_config_validation(self):
        """测试非法配置"""
        with self.assertRaises(ValidationError):
            ActpcConfig(k=1)
        with self.assertRaises(ValidationError):
            ActpcConfig(lr=0.0)

    def test_encode_history(self):
        """测试前缀编码等于整段编码的对应时刻"""
        model = fresh_model()
        tensors = toy_tensors()
        states = encode_sequences(model, tensors[:1])[0]
        np.testing.assert_allclose(encode_history(model, tensors[0, :3]), states[0, 2], rtol=1e-12)
        with self.assertRaises(ValidationError):
            encode_history(model, np.zeros((0, 8)))
        self.assertAlmostEqual(float(predict(model, model.embeddings[EMBEDDINGS][0]).sum()), 1.0, places=12)

    def test_init_clusters_degenerate(self):
        """测试隐藏状态完全相同时无法初始化簇"""
        model = init_actpc(TINY, PRIORS, np.random.default_rng(0), 8)
        with self.assertRaises(ValidationError):
            init_clusters(model, np.zeros((4, 3, 8)), 2, 0)

    def test_pred_path_reaches_encoder_only(self):
        """测试预测通路只更新编码器"""
        tensors = toy_tensors()
        with_path, without_path = fresh_model(), fresh_model()
        actor_critic_step(with_path, tensors[:4], LABELS[:4], TINY, np.random.default_rng(5))
        no_path = ActpcConfig(**dict(TINY.__dict__, weight_pred_path=0.0))
        actor_critic_step(without_path, tensors[:4], LABELS[:4], no_path, np.random.default_rng(5))
        self.assertEqual(with_path.predictor.to_dict(), without_path.predictor.to_dict())
        self.assertEqual(with_path.selector.to_dict(), without_path.selector.to_dict())
        self.assertNotEqual(with_path.encoder.to_dict(), without_path.encoder.to_dict())

    def test_train_and_assign(self):
        """测试完整训练可复现并产生合法分配"""
        tensors = toy_tensors()
        first = actpc_train(tensors, LABELS, PRIORS, TINY)
        second = actpc_train(tensors, LABELS, PRIORS, TINY)
        self.assertEqual(set(first.history), {"pretrain", "selector", "critic"})
        self.assertEqual(len(first.history["pretrain"]), TINY.pretrain_epochs)
        self.assertEqual(len(first.history["critic"]), TINY.epochs)
        self.assertEqual(first.history, second.history)
        np.testing.assert_array_equal(first.embeddings[EMBEDDINGS], second.embeddings[EMBEDDINGS])

        traces = actpc_assign_many(first, tensors)
        self.assertEqual(traces.shape, (8, 6))
        self.assertTrue(np.all((traces >= 0) & (traces < TINY.k)))
        np.testing.assert_array_equal(actpc_assign_trace(first, tensors[3]), traces[3])

        loaded = ActpcModel.from_json(first.to_json())
        np.testing.assert_array_equal(actpc_assign_many(loaded, tensors), traces)
        self.assertEqual(loaded.to_json()["alpha"], PRIORS.alpha.tolist())

    def test_train_rejects_missing_class(self):
        """测试训练集缺少某个结局时拒绝加权训练"""
        labels = np.eye(4)[[0, 1, 2, 0, 0, 1, 2, 0]]
        with self.assertRaises(ValidationError):
            actpc_train(toy_tensors(), labels, ClassPrior(labels.mean(axis=0)), TINY)
        with self.assertRaises(ValidationError):
            actpc_train(toy_tensors(), LABELS[:3], PRIORS, TINY)


if __name__ == '__main__':
    unittest.main()
