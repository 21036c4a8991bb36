# -*- coding: utf-8 -*-
"""时间序列k-means的单元测试.

作者: Guyue
许可证: MIT
"""

# 标准库导入 (Standard library imports)
import itertools
import unittest

# 第三方库导入 (Third-party library imports)
import numpy as np

# 本地/自定义模块导入 (Local/custom module imports)
from pyphenoclust._errors import ValidationError
from pyphenoclust.dtw import Metric
from pyphenoclust.tskm import (CentroidSet, TskmConfig, elbow_select, fit_best, inertia_curve,
                               kmeans_plus_plus, metric_from_name, tskm_assign, tskm_fit)


def two_groups(seed=0):
    rng = np.random.default_rng(seed)
    low = rng.normal(0.0, 0.3, size=(4, 3, 1))
    high = rng.normal(4.0, 0.3, size=(4, 3, 1))
    return np.concatenate([low, high])


def brute_force_partition(series, k):
    """穷举恰好k个非空簇的全部划分，返回 (最小簇内平方和, 对应标签)."""
    n = series.shape[0]
    best, best_labels = np.inf, None
    for tail in itertools.product(range(k), repeat=n - 1):
        labels = np.array((0,) + tail)
        if len(set(labels.tolist())) != k:
            continue
        total = sum(float(np.sum((series[labels == c] - series[labels == c].mean(axis=0)) ** 2))
                    for c in range(k))
        if total < best:
            best, best_labels = total, labels
    return best, best_labels


def planted_instance(rng):
    """k个水平相距很远的组，每组至少一条序列(N <= 8, T <= 4, D <= 2)."""
    k = int(rng.integers(2, 4))
    n = int(rng.integers(k, 9))
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=n - k)])
    t, d = int(rng.integers(1, 5)), int(rng.integers(1, 3))
    levels = 10.0 * np.arange(k)[:, None, None] + rng.normal(size=(k, 1, d))
    return levels[labels] + rng.normal(scale=0.3, size=(n, t, d)), labels, k


def same_partition(a, b):
    return np.array_equal(a[:, None] == a[None, :], b[:, None] == b[None, :])


class TestTskmFit(unittest.TestCase):
    """测试k-means拟合"""

    def test_matches_brute_force(self):
        """测试50个随机实例上5次重启的最优惯性与穷举划分一致"""
        rng = np.random.default_rng(0)
        for instance in range(50):
            series, planted, k = planted_instance(rng)
            optimum, labels = brute_force_partition(series, k)
            self.assertTrue(same_partition(labels, planted))
            # band=0 的DTW与欧氏距离相同，覆盖DTW与DBA的代码路径
            for metric in (Metric.euclidean(), Metric.dtw(band=0)):
                model = fit_best(series, k, metric, seed=instance, restarts=5)
                self.assertAlmostEqual(model.inertia, optimum, delta=1e-9, msg=f"{instance} {metric}")
            model = fit_best(series, k, Metric.dtw(), seed=instance, restarts=5)
            self.assertTrue(same_partition(model.assign(series), labels), msg=str(instance))

    def test_two_groups(self):
        """测试两组序列被分开"""
        series = two_groups()
        model = fit_best(series, 2, seed=0)
        labels = model.assign(series)
        self.assertEqual(len(set(labels[:4].tolist())), 1)
        self.assertEqual(len(set(labels[4:].tolist())), 1)
        self.assertNotEqual(labels[0], labels[4])

    def test_history_non_increasing(self):
        """测试欧氏度量下每次迭代惯性不增"""
        rng = np.random.default_rng(1)
        model = tskm_fit(rng.normal(size=(30, 4, 2)), 3, seed=5)
        for previous, current in zip(model.history, model.history[1:]):
            self.assertLessEqual(current, previous + 1e-9)
        self.assertEqual(model.inertia, model.history[-1])

    def test_deterministic(self):
        """测试相同种子结果相同"""
        rng = np.random.default_rng(2)
        series = rng.normal(size=(20, 5, 2))
        first = fit_best(series, 3, seed=11, restarts=2)
        second = fit_best(series, 3, seed=11, restarts=2)
        np.testing.assert_array_equal(first.centroids, second.centroids)

    def test_dtw_groups_shifted_shapes(self):
        """测试DTW度量把平移的波峰归为一簇"""
        bumps = []
        for shift in range(4):
            series = np.zeros(10)
            series[2 + shift:4 + shift] = 5.0
            bumps.append(series)
        flats = [np.full(10, 0.1 * i) for i in range(4)]
        series = np.array(bumps + flats)[:, :, None]
        model = fit_best(series, 2, Metric.dtw(), seed=0, restarts=3, max_iter=10, dba_iters=3)
        labels = model.assign(series)
        self.assertEqual(len(set(labels[:4].tolist())), 1)
        self.assertEqual(len(set(labels[4:].tolist())), 1)
        self.assertNotEqual(labels[0], labels[4])

    def test_invalid_k(self):
        """测试K超过序列数"""
        with self.assertRaises(ValidationError):
            tskm_fit(np.zeros((2, 3, 1)), 3)
        with self.assertRaises(ValidationError):
            kmeans_plus_plus(np.zeros((2, 3, 1)), 0, Metric.euclidean(), np.random.default_rng(0))


class TestAssign(unittest.TestCase):
    """测试最近质心分配"""

    def test_tie_breaks_to_lowest(self):
        """测试距离相同时取编号最小的质心"""
        model = CentroidSet(Metric.euclidean(), np.array([[[2.0]], [[0.0]]]), 0.0, 0)
        self.assertEqual(tskm_assign(model, np.array([1.0])), 0)
        self.assertEqual(tskm_assign(model, np.array([0.2])), 1)

    def test_shape_mismatch(self):
        """测试形状不兼容"""
        model = CentroidSet(Metric.euclidean(), np.zeros((2, 3, 1)), 0.0, 0)
        with self.assertRaises(ValidationError):
            model.assign(np.zeros((1, 4, 1)))

    def test_json_round_trip(self):
        """测试模型JSON表示"""
        model = fit_best(two_groups(), 2, Metric.dtw(band=1), seed=3, restarts=1)
        data = model.to_json()
        self.assertEqual(data["model"], "tskm")
        self.assertEqual((data["K"], data["T"], data["D"]), (2, 3, 1))
        loaded = CentroidSet.from_json(data)
        np.testing.assert_array_equal(loaded.centroids, model.centroids)
        self.assertEqual(loaded.metric, model.metric)
        with self.assertRaises(ValidationError):
            CentroidSet.from_json(dict(data, format_version=99))


class TestElbow(unittest.TestCase):
    """测试肘部法选择K"""

    def test_elbow_select(self):
        """测试最大二阶差分处的K"""
        curve = list(zip(range(1, 7), [100.0, 70.0, 45.0, 15.0, 13.0, 12.0]))
        self.assertEqual(elbow_select(curve), 4)

    def test_elbow_tie_takes_smallest(self):
        """测试并列时取较小的K"""
        curve = list(zip(range(1, 6), [10.0, 5.0, 2.0, 1.0, 0.0]))
        # 二阶差分: K=2 → 2, K=3 → 2, K=4 → 0
        self.assertEqual(elbow_select(curve), 2)

    def test_elbow_invalid(self):
        """测试点数不足或K不连续"""
        with self.assertRaises(ValidationError):
            elbow_select([(1, 3.0), (2, 1.0)])
        with self.assertRaises(ValidationError):
            elbow_select([(1, 3.0), (2, 1.0), (4, 0.5)])

    def test_inertia_curve_monotone(self):
        """测试惯性曲线随K单调不增"""
        rng = np.random.default_rng(4)
        curve = inertia_curve(rng.normal(size=(12, 3, 1)), range(1, 5), restarts=2)
        self.assertEqual([k for k, _ in curve], [1, 2, 3, 4])
        values = [v for _, v in curve]
        self.assertEqual(values, sorted(values, reverse=True))
        with self.assertRaises(ValidationError):
            inertia_curve(np.zeros((3, 2, 1)), [2, 1])


class TestConfig(unittest.TestCase):
    """测试配置与度量名称"""

    def test_config_validation(self):
        """测试非法配置"""
        self.assertIsNone(TskmConfig().k)
        # 默认肘部曲线覆盖 K=2..8
        self.assertEqual((TskmConfig().k_min, TskmConfig().k_max), (2, 8))
        with self.assertRaises(ValidationError):
            TskmConfig(k_min=1, k_max=2)
        with self.assertRaises(ValidationError):
            TskmConfig(k=0)

    def test_metric_from_name(self):
        """测试由名称构造度量"""
        self.assertEqual(metric_from_name("DTW", band=2), Metric.dtw(band=2))
        self.assertEqual(metric_from_name("euclidean", band=2), Metric.euclidean())
        with self.assertRaises(ValidationError):
            metric_from_name("cosine")


if __name__ == '__main__':
    unittest.main()
