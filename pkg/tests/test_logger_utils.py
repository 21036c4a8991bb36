# -*- coding: utf-8 -*-
"""LoggerUtils类的单元测试.

此模块包含LoggerUtils类功能的测试，
包括日志级别解析、重复配置与文件处理。

测试类:
    TestLoggerUtils: LoggerUtils类核心功能测试

作者: Guyue
许可证: MIT
"""

# 标准库导入 (Standard library imports)
import os
import shutil
import tempfile
import unittest
from unittest import mock

# 本地/自定义模块导入 (Local/custom module imports)
from pyphenoclust.logger_utils import LoggerUtils, logger


class TestLoggerUtils(unittest.TestCase):
    """测试LoggerUtils日志工具类的核心功能"""

    def setUp(self):
        """测试前准备工作"""
        self.test_dir = tempfile.mkdtemp()
        self.log_file = os.path.join(self.test_dir, "logs", "run.log")

    def tearDown(self):
        """测试后清理工作"""
        # 恢复为仅输出到stderr的默认配置，释放文件句柄
        LoggerUtils.set_log()
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_get_log(self):
        """测试获取日志实例功能"""
        self.assertIs(LoggerUtils.get_log(), logger)

    def test_default_level_from_env(self):
        """测试从环境变量读取默认级别"""
        with mock.patch.dict(os.environ, {LoggerUtils.ENV_LEVEL: "debug"}):
            self.assertEqual(LoggerUtils.default_level(), "DEBUG")
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(LoggerUtils.default_level(), "INFO")

    def test_set_log_with_file(self):
        """测试添加日志文件"""
        log = LoggerUtils.set_log(level="DEBUG", sink=self.log_file, output_stderr=False)
        log.info("写入文件的消息")
        LoggerUtils.set_log(output_stderr=False)
        self.assertTrue(os.path.exists(self.log_file))
        with open(self.log_file, encoding="utf-8") as f:
            self.assertIn("写入文件的消息", f.read())

    def test_repeated_configuration_keeps_one_handler_set(self):
        """测试重复配置不会累积处理器"""
        LoggerUtils.set_log(level="INFO")
        LoggerUtils.set_log(level="WARNING")
        self.assertEqual(len(LoggerUtils._handler_ids), 1)

    def test_default_settings(self):
        """测试默认设置"""
        self.assertEqual(LoggerUtils.DEFAULT["rotation"], "50 MB")
        self.assertEqual(LoggerUtils.DEFAULT["retention"], "7 days")
        self.assertIn("format", LoggerUtils.DEFAULT)


if __name__ == '__main__':
    unittest.main()
