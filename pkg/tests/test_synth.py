# -*- coding: utf-8 -*-
"""合成队列生成的单元测试.

作者: Guyue
许可证: MIT
"""

# 标准库导入 (Standard library imports)
import os
import shutil
import tempfile
import unittest

# 第三方库导入 (Third-party library imports)
import numpy as np

# 本地/自定义模块导入 (Local/custom module imports)
from pyphenoclust._errors import ValidationError
from pyphenoclust.cohort import VitalChannel, load_cohort, save_cohort
from pyphenoclust.synth import (DEFAULT_IMBALANCE, SynthConfig, generate, make_separable_preset,
                                phenotype_separation, read_truth, truth_path_for, write_truth)


class TestSynthConfig(unittest.TestCase):
    """测试合成配置"""

    def test_joint_marginal_matches_imbalance(self):
        """测试联合分布的结局边缘等于目标比例"""
        config = make_separable_preset("easy", n_patients=10)
        joint = config.joint_distribution()
        np.testing.assert_allclose(joint.sum(axis=0), DEFAULT_IMBALANCE, atol=1e-12)
        # 表型p最可能产生结局p
        conditional = joint / joint.sum(axis=0)
        self.assertEqual(np.argmax(conditional, axis=0).tolist(), [0, 1, 2, 3])

    def test_separation_levels(self):
        """测试easy与hard预设的分离度"""
        easy_min, _ = phenotype_separation(make_separable_preset("easy"))
        _, hard_max = phenotype_separation(make_separable_preset("hard"))
        self.assertGreaterEqual(easy_min, 3.0)
        self.assertLessEqual(hard_max, 1.0)

    def test_invalid(self):
        """测试非法配置"""
        with self.assertRaises(ValidationError):
            make_separable_preset("medium")
        config = make_separable_preset("easy")
        with self.assertRaises(ValidationError):
            SynthConfig(n_patients=5, phenotype_count=4, outcome_mix=config.outcome_mix * 2,
                        dynamics=config.dynamics)
        with self.assertRaises(ValidationError):
            SynthConfig(n_patients=5, phenotype_count=4, outcome_mix=config.outcome_mix,
                        dynamics=config.dynamics, imbalance=np.array([0.5, 0.5, 0.5, 0.0]))
        with self.assertRaises(ValidationError):
            SynthConfig(n_patients=0, phenotype_count=4, outcome_mix=config.outcome_mix,
                        dynamics=config.dynamics)


class TestGenerate(unittest.TestCase):
    """测试队列生成"""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_deterministic(self):
        """测试相同种子生成相同队列"""
        first = generate(make_separable_preset("easy", n_patients=30, seed=7))
        second = generate(make_separable_preset("easy", n_patients=30, seed=7))
        other = generate(make_separable_preset("easy", n_patients=30, seed=8))
        self.assertEqual(first.cohort.patients, second.cohort.patients)
        self.assertEqual(first.cohort.labels, second.cohort.labels)
        np.testing.assert_array_equal(first.phenotype_ids, second.phenotype_ids)
        self.assertNotEqual(first.cohort.patients, other.cohort.patients)

    def test_patient_prefix_is_stable(self):
        """测试病人数不同时前面的病人不变"""
        small = generate(make_separable_preset("easy", n_patients=5, seed=3))
        large = generate(make_separable_preset("easy", n_patients=20, seed=3))
        self.assertEqual(small.cohort.patients, large.cohort.patients[:5])

    def test_outcome_imbalance(self):
        """测试结局比例接近目标"""
        imbalance = (0.4, 0.3, 0.2, 0.1)
        result = generate(make_separable_preset("easy", n_patients=2000, seed=1, imbalance=imbalance))
        np.testing.assert_allclose(result.cohort.priors.alpha, imbalance, atol=0.05)
        self.assertEqual(set(result.phenotype_ids.tolist()), {0, 1, 2, 3})

    def test_channel_bounds(self):
        """测试生成的读数处于生理边界内"""
        cohort = generate(make_separable_preset("easy", n_patients=50, seed=2)).cohort
        values = np.concatenate([p.values for p in cohort.patients])
        self.assertTrue(np.all(values[:, VitalChannel.SPO2] <= 100.0))
        self.assertTrue(np.all(values[:, VitalChannel.FIO2] >= 0.21))
        avpu = values[:, VitalChannel.AVPU]
        self.assertTrue(np.all((avpu >= 1) & (avpu <= 4) & (avpu == np.round(avpu))))
        for patient in cohort.patients:
            self.assertTrue(np.all(np.diff(patient.times) < 0))
            self.assertTrue(np.all(patient.times > 0))

    def test_csv_and_truth_round_trip(self):
        """测试写出队列与表型文件后可读回"""
        result = generate(make_separable_preset("hard", n_patients=12, seed=4))
        cohort_path = save_cohort(result.cohort, os.path.join(self.test_dir, "synth.csv"))
        truth_path = write_truth(truth_path_for(cohort_path), result.cohort.patient_ids, result.phenotype_ids)
        self.assertEqual(truth_path, os.path.join(self.test_dir, "synth.truth.csv"))
        self.assertEqual(load_cohort(cohort_path).patients, result.cohort.patients)
        truth = read_truth(truth_path)
        self.assertEqual(list(truth), result.cohort.patient_ids)
        self.assertEqual(list(truth.values()), result.phenotype_ids.tolist())


if __name__ == '__main__':
    unittest.main()
