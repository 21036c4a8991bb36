# -*- coding: utf-8 -*-
"""队列数据模型与CSV读写的单元测试.

测试类:
    TestOutcomeLabel: one-hot标签测试
    TestClassPrior: 类别先验测试
    TestPatientSeries: 病人序列校验测试
    TestCohortIO: CSV读写测试

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
from pyphenoclust._errors import CohortParseError, PhenoIOError, ValidationError
from pyphenoclust.cohort import (CSV_COLUMNS, NORMALIZED_HEADER, ClassPrior, Cohort, Outcome, OutcomeLabel,
                                 PatientSeries, VitalChannel, compute_priors, load_cohort, save_cohort)
from pyphenoclust.tools_utils import Tools

HEADER = ",".join(CSV_COLUMNS) + "\n"


def make_patient(pid, times, value=1.0):
    values = np.full((len(times), 8), value, dtype=float)
    return PatientSeries(pid, np.asarray(times, dtype=float), values, np.ones_like(values, dtype=bool))


class TestOutcomeLabel(unittest.TestCase):
    """测试OutcomeLabel"""

    def test_from_outcome(self):
        """测试由类别下标构造"""
        label = OutcomeLabel.from_outcome(Outcome.DEATH)
        self.assertEqual(label.one_hot.tolist(), [0.0, 0.0, 0.0, 1.0])
        self.assertEqual(label.index, 3)
        self.assertEqual(label.n_classes, 4)
        self.assertEqual(label, OutcomeLabel(np.array([0, 0, 0, 1])))

    def test_invalid(self):
        """测试非法标签"""
        for one_hot in ([1, 1, 0, 0], [0.5, 0.5, 0, 0], [0, 0, 0, 0], []):
            with self.assertRaises(ValidationError):
                OutcomeLabel(np.array(one_hot, dtype=float))
        with self.assertRaises(ValidationError):
            OutcomeLabel.from_outcome(4)


class TestClassPrior(unittest.TestCase):
    """测试ClassPrior与compute_priors"""

    def test_compute_priors(self):
        """测试先验为标签比例"""
        labels = [OutcomeLabel.from_outcome(i) for i in (0, 0, 0, 1, 3)]
        prior = compute_priors(labels)
        np.testing.assert_allclose(prior.alpha, [0.6, 0.2, 0.0, 0.2])
        self.assertAlmostEqual(float(prior.alpha.sum()), 1.0, places=12)

    def test_zero_component_rejected_for_loss(self):
        """测试零分量在作为损失权重时被拒绝"""
        prior = ClassPrior(np.array([0.5, 0.5, 0.0, 0.0]))
        with self.assertRaises(ValidationError):
            prior.require_positive()
        np.testing.assert_array_equal(ClassPrior.uniform(4).require_positive(), [0.25] * 4)

    def test_invalid(self):
        """测试和不为1或越界"""
        with self.assertRaises(ValidationError):
            ClassPrior(np.array([0.5, 0.6]))
        with self.assertRaises(ValidationError):
            ClassPrior(np.array([1.5, -0.5]))
        with self.assertRaises(ValidationError):
            compute_priors([])


class TestPatientSeries(unittest.TestCase):
    """测试PatientSeries校验"""

    def test_times_must_decrease(self):
        """测试观测时间必须严格递减"""
        with self.assertRaises(ValidationError):
            make_patient("P1", [10.0, 20.0])
        with self.assertRaises(ValidationError):
            make_patient("P1", [10.0, 10.0])

    def test_unobserved_values_are_nan(self):
        """测试未观测处为NaN"""
        values = np.ones((2, 8))
        mask = np.ones((2, 8), dtype=bool)
        mask[0, VitalChannel.RR] = False
        series = PatientSeries("P1", np.array([5.0, 1.0]), values, mask)
        self.assertTrue(np.isnan(series.values[0, VitalChannel.RR]))
        self.assertEqual(series.n_obs, 2)

    def test_cohort_consistency(self):
        """测试队列的一致性检查"""
        patients = [make_patient("A", [3.0]), make_patient("B", [2.0])]
        labels = [OutcomeLabel.from_outcome(0), OutcomeLabel.from_outcome(1)]
        cohort = Cohort.from_patients(patients, labels)
        self.assertEqual(len(cohort), 2)
        np.testing.assert_array_equal(cohort.label_indices(), [0, 1])
        self.assertEqual(cohort.subset([1]).patient_ids, ["B"])
        np.testing.assert_allclose(cohort.subset([1]).priors.alpha, [0, 1, 0, 0])
        with self.assertRaises(ValidationError):
            Cohort.from_patients([patients[0], patients[0]], labels)
        with self.assertRaises(ValidationError):
            Cohort(tuple(patients), tuple(labels), ClassPrior.uniform(4))


class TestCohortIO(unittest.TestCase):
    """测试队列CSV读写"""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def write(self, text, name="cohort.csv"):
        return Tools.write_str(os.path.join(self.test_dir, name), text)

    def test_load_basic(self):
        """测试读取、排序与先验"""
        path = self.write(HEADER
                          + "P1,10,80,16,70,120,97,36.8,1,0.21,discharge\n"
                          + "P1,20,82,,70,120,97,36.8,1,21,discharge\n"
                          + "P2,5,90,20,60,110,94,37.5,2,0.28,death\n")
        cohort = load_cohort(path)
        self.assertEqual(cohort.patient_ids, ["P1", "P2"])
        p1 = cohort.patients[0]
        # 按时间先后: 20h 在 10h 之前
        np.testing.assert_array_equal(p1.times, [20.0, 10.0])
        self.assertFalse(p1.mask[0, VitalChannel.RR])
        # 百分数FIO2被换算
        self.assertAlmostEqual(p1.values[0, VitalChannel.FIO2], 0.21)
        np.testing.assert_allclose(cohort.priors.alpha, [0.5, 0.0, 0.0, 0.5])
        self.assertFalse(cohort.normalized)

    def test_bad_cell_reports_line(self):
        """测试非数值单元格报告文件行号"""
        path = self.write(HEADER
                          + "P1,10,80,16,70,120,97,36.8,1,0.21,discharge\n"
                          + "P1,20,abc,16,70,120,97,36.8,1,0.21,discharge\n")
        with self.assertRaises(CohortParseError) as ctx:
            load_cohort(path)
        self.assertEqual(ctx.exception.line_number, 3)

    def test_short_row_reports_line(self):
        """测试字段数不足的行是格式错误而不是未知结局"""
        path = self.write(HEADER
                          + "P1,10,80,16,70,120,97,36.8,1,0.21,discharge\n"
                          + "P1,8,80\n")
        with self.assertRaises(CohortParseError) as ctx:
            load_cohort(path)
        self.assertEqual(ctx.exception.line_number, 3)
        empty = self.write(HEADER + "P1,10,80,16,70,120,97,36.8,1,0.21,\n", "e.csv")
        with self.assertRaises(CohortParseError) as ctx:
            load_cohort(empty)
        self.assertEqual(ctx.exception.line_number, 2)

    def test_duplicate_time(self):
        """测试同一病人重复时间"""
        path = self.write(HEADER
                          + "P1,10,80,16,70,120,97,36.8,1,0.21,icu\n"
                          + "P1,10,81,16,70,120,97,36.8,1,0.21,icu\n")
        with self.assertRaises(CohortParseError):
            load_cohort(path)

    def test_outcome_errors(self):
        """测试未知与不一致的结局"""
        unknown = self.write(HEADER + "P1,10,80,16,70,120,97,36.8,1,0.21,recovered\n", "u.csv")
        with self.assertRaises(ValidationError):
            load_cohort(unknown)
        mixed = self.write(HEADER
                           + "P1,10,80,16,70,120,97,36.8,1,0.21,icu\n"
                           + "P1,12,80,16,70,120,97,36.8,1,0.21,death\n", "m.csv")
        with self.assertRaises(ValidationError):
            load_cohort(mixed)

    def test_patient_without_observations(self):
        """测试没有任何观测值的病人"""
        path = self.write(HEADER + "P1,10,,,,,,,,,icu\n")
        with self.assertRaises(ValidationError):
            load_cohort(path)

    def test_bad_header_and_missing_file(self):
        """测试表头错误与文件不存在"""
        path = self.write("id,hours\nP1,1\n")
        with self.assertRaises(CohortParseError):
            load_cohort(path)
        with self.assertRaises(PhenoIOError):
            load_cohort(os.path.join(self.test_dir, "missing.csv"))

    def test_save_load_round_trip(self):
        """测试写出后读回得到相同队列"""
        rng = np.random.default_rng(0)
        patients, labels = [], []
        for i in range(3):
            times = np.array([100.0, 50.5, 3.25])
            values = rng.normal(50, 10, size=(3, 8))
            mask = rng.random((3, 8)) > 0.3
            mask[:, VitalChannel.FIO2] = False
            patients.append(PatientSeries(f"P{i}", times, values, mask))
            labels.append(OutcomeLabel.from_outcome(i))
        cohort = Cohort.from_patients(patients, labels)
        path = save_cohort(cohort, os.path.join(self.test_dir, "out", "c.csv"))
        loaded = load_cohort(path)
        self.assertEqual(loaded.patients, cohort.patients)
        self.assertEqual(loaded.labels, cohort.labels)

    def test_normalized_header(self):
        """测试标准化队列的注释行"""
        patient = PatientSeries("P1", np.array([2.0]), np.array([[1.5] * 8]), np.ones((1, 8), dtype=bool))
        cohort = Cohort.from_patients([patient], [OutcomeLabel.from_outcome(2)], normalized=True)
        path = save_cohort(cohort, os.path.join(self.test_dir, "n.csv"))
        with open(path, encoding="utf-8") as f:
            self.assertEqual(f.readline().strip(), NORMALIZED_HEADER)
        loaded = load_cohort(path)
        self.assertTrue(loaded.normalized)
        # 标准化数据不做FIO2百分数换算
        self.assertEqual(loaded.patients[0].values[0, VitalChannel.FIO2], 1.5)


if __name__ == '__main__':
    unittest.main()
