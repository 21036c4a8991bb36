# -*- coding: utf-8 -*-
"""装饰器工具的单元测试.

测试类:
    TestTimer: timer装饰器测试
    TestGetPublicMethods: 公共方法枚举测试

作者: Guyue
许可证: MIT
"""

# 标准库导入 (Standard library imports)
import unittest

# 本地/自定义模块导入 (Local/custom module imports)
from pyphenoclust.decorator_utils import Decorate, DecoratorFactory, get_public_methods, log_with_level, timer
from pyphenoclust.logger_utils import logger


class TestTimer(unittest.TestCase):
    """测试timer装饰器"""

    def setUp(self):
        self.messages = []
        self.handler_id = logger.add(lambda m: self.messages.append(m.record["message"]), level="DEBUG")

    def tearDown(self):
        logger.remove(self.handler_id)

    def test_returns_result_and_logs(self):
        """测试返回原函数结果并记录耗时"""
        @timer
        def train(x):
            return x * 2

        self.assertEqual(train(21), 42)
        self.assertTrue(any("[train] 执行完成" in m for m in self.messages))
        self.assertEqual(train.__name__, "train")

    def test_logs_on_exception(self):
        """测试异常时仍记录耗时并继续抛出"""
        @timer
        def boom():
            raise RuntimeError("失败")

        with self.assertRaises(RuntimeError):
            boom()
        self.assertTrue(any("[boom] 执行完成" in m for m in self.messages))

    def test_aliases(self):
        """测试别名"""
        self.assertIs(Decorate, DecoratorFactory)
        self.assertIs(timer, DecoratorFactory.timer)

    def test_log_with_level_exception_maps_to_error(self):
        """测试exception级别按error输出"""
        levels = []
        handler = logger.add(lambda m: levels.append(m.record["level"].name), level="DEBUG")
        try:
            log_with_level("x", level="exception")
            log_with_level("y")
        finally:
            logger.remove(handler)
        self.assertEqual(levels, ["ERROR", "ERROR"])


class TestGetPublicMethods(unittest.TestCase):
    """测试get_public_methods"""

    def test_filters_private_and_properties(self):
        """测试过滤私有方法与property"""
        class Sample:
            def run(self):
                return 1

            def _hidden(self):
                return 2

            @property
            def value(self):
                return 3

        names = [name for name, _ in get_public_methods(Sample())]
        self.assertIn("run", names)
        self.assertNotIn("_hidden", names)
        self.assertNotIn("value", names)


if __name__ == '__main__':
    unittest.main()
