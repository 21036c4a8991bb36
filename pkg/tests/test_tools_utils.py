# -*- coding: utf-8 -*-
"""Tools工具类的单元测试.

此模块包含Tools类功能的测试，
包括文件读写、扁平配置解析、类型转换和稳定哈希。

测试类:
    TestFileUtils: 文件操作工具测试
    TestConfigUtils: 配置工具测试
    TestHashUtils: 哈希工具测试

作者: Guyue
许可证: MIT
"""

# 标准库导入 (Standard library imports)
import os
import shutil
import tempfile
import unittest
from dataclasses import dataclass
from typing import Optional, Tuple

# 本地/自定义模块导入 (Local/custom module imports)
from pyphenoclust._errors import PhenoIOError, UsageError
from pyphenoclust.tools_utils import Tools


@dataclass(frozen=True)
class Sample:
    lr: float = 0.001
    epochs: int = 10
    name: str = "x"
    flag: bool = False
    band: Optional[int] = None
    weights: Tuple[float, ...] = (1.0,)


class TestFileUtils(unittest.TestCase):
    """测试文件操作工具"""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_json_round_trip_and_stable_bytes(self):
        """测试JSON写入后读回，且相同数据得到相同字节"""
        path = os.path.join(self.test_dir, "a", "b.json")
        data = {"model": "tskm", "K": 4, "values": [0.1, 0.2]}
        Tools.write_json(path, data)
        self.assertEqual(Tools.read_json(path), data)
        with open(path, "rb") as f:
            first = f.read()
        Tools.write_json(path, data)
        with open(path, "rb") as f:
            self.assertEqual(f.read(), first)
        self.assertNotIn(b"\r\n", first)

    def test_read_json_errors(self):
        """测试读取失败"""
        with self.assertRaises(PhenoIOError):
            Tools.read_json(os.path.join(self.test_dir, "missing.json"))
        bad = Tools.write_str(os.path.join(self.test_dir, "bad.json"), "{not json")
        with self.assertRaises(PhenoIOError):
            Tools.read_json(bad)

    def test_makedirs_flag_file(self):
        """测试按文件路径创建父目录"""
        path = os.path.join(self.test_dir, "x", "y", "z.csv")
        directory = Tools.makedirs(path, flag_file=True)
        self.assertTrue(os.path.isdir(directory))


class TestConfigUtils(unittest.TestCase):
    """测试配置工具"""

    def setUp(self):
        self.test_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_read_config_flat(self):
        """测试读取key=value配置"""
        path = Tools.write_str(os.path.join(self.test_dir, "run.conf"),
                               "# 注释\n\nactpc.lr = 0.01\ngrid.bin_hours=4\nclamp.HR=20,250\n")
        config = Tools.read_config_flat(path)
        self.assertEqual(config, {"actpc.lr": "0.01", "grid.bin_hours": "4", "clamp.HR": "20,250"})

    def test_read_config_bad_line(self):
        """测试缺少等号的行"""
        path = Tools.write_str(os.path.join(self.test_dir, "bad.conf"), "actpc.lr 0.01\n")
        with self.assertRaises(UsageError):
            Tools.read_config_flat(path)

    def test_section(self):
        """测试段提取"""
        mapping = {"actpc.lr": "1", "tskm.k": "4", "top": "x"}
        self.assertEqual(Tools.section(mapping, "actpc"), {"lr": "1"})
        self.assertEqual(Tools.section(mapping, ""), {"top": "x"})

    def test_config_from_mapping(self):
        """测试填充dataclass与类型转换"""
        mapping = {"s.lr": "0.5", "s.epochs": "3", "s.flag": "yes", "s.band": "none", "s.weights": "1,2.5",
                   "other.k": "9"}
        sample = Tools.config_from_mapping(Sample, mapping, "s")
        self.assertEqual(sample, Sample(lr=0.5, epochs=3, flag=True, band=None, weights=(1.0, 2.5)))

    def test_config_from_mapping_base_and_errors(self):
        """测试基于已有实例填充与错误处理"""
        base = Sample(epochs=7)
        self.assertEqual(Tools.config_from_mapping(Sample, {"s.lr": "2"}, "s", base), Sample(lr=2.0, epochs=7))
        with self.assertRaises(UsageError):
            Tools.config_from_mapping(Sample, {"s.unknown": "1"}, "s")
        with self.assertRaises(UsageError):
            Tools.config_from_mapping(Sample, {"s.epochs": "many"}, "s")
        with self.assertRaises(UsageError):
            Tools.coerce("maybe", bool)

    def test_parse_float_list(self):
        """测试浮点数列表解析"""
        self.assertEqual(Tools.parse_float_list("0.939,0.030,0.011,0.020"), (0.939, 0.030, 0.011, 0.020))


class TestHashUtils(unittest.TestCase):
    """测试哈希工具"""

    def test_encode_md5(self):
        """测试md5摘要"""
        self.assertEqual(Tools.encode_md5("abc"), "900150983cd24fb0d6963f7d28e17f72")

    def test_hash_fraction_stable(self):
        """测试哈希值稳定且在[0, 1)内"""
        values = [Tools.hash_fraction(7, f"P{i:06d}") for i in range(200)]
        self.assertTrue(all(0.0 <= v < 1.0 for v in values))
        self.assertEqual(values[3], Tools.hash_fraction(7, "P000003"))
        self.assertNotEqual(Tools.hash_fraction(7, "P000003"), Tools.hash_fraction(8, "P000003"))
        # 约80%的病人落入训练集
        share = sum(v < 0.8 for v in values) / len(values)
        self.assertGreater(share, 0.6)
        self.assertLess(share, 0.95)


if __name__ == '__main__':
    unittest.main()
