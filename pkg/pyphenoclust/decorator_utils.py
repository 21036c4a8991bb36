# -*- coding: utf-8 -*-
"""PyPhenoClust装饰器工具模块.

本模块提供训练流程计时装饰器以及命令类使用的公共方法枚举工具。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
import time
from functools import wraps
from typing import Any, Callable, List, Optional, Tuple

# 第三方库导入 (Third-party library imports)
from loguru import logger


def log_with_level(message: str, level: Optional[str] = None, depth: int = 1) -> None:
    """使用loguru输出指定级别的日志消息.

    Args:
        message: 要记录的日志消息.
        level: 日志级别，如debug/info/warning/error/exception.
            为None或"exception"时按"error"处理.
        depth: 调用深度，使日志中的位置信息指向调用方.
    """
    if not level or level.lower() == "exception":
        level = "error"
    logger.opt(depth=depth).log(level.upper(), message)


def get_public_methods(obj: Any, ignore_prefix: str = "_") -> List[Tuple[str, Callable]]:
    """获取对象的公共方法列表.

    过滤掉以下划线开头的方法和属性特性(property)。

    Args:
        obj: 要获取方法的对象或类.
        ignore_prefix: 需要忽略的名称前缀.

    Returns:
        (方法名, 方法对象)元组的列表.
    """
    methods = []
    for name in dir(obj):
        if name.startswith(ignore_prefix):
            continue
        try:
            attr = getattr(obj, name)
            class_attr = getattr(type(obj), name, None)
        except (AttributeError, TypeError):
            # 忽略无法访问的属性
            continue
        if not isinstance(class_attr, property) and callable(attr) and not isinstance(attr, type):
            methods.append((name, attr))
    return methods


class DecoratorFactory:
    """装饰器工厂类."""

    @staticmethod
    def timer(func: Callable[..., Any]) -> Callable[..., Any]:
        """性能计时装饰器.

        记录被装饰函数的执行耗时，训练入口函数统一使用此装饰器。

        Args:
            func: 要测量执行时间的函数.

        Returns:
            包装后的函数.

        Example:
            >>> @DecoratorFactory.timer
            ... def somvae_train(tensors, config):
            ...     ...
        """
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Any:
            start_time = time.perf_counter()
            log_with_level(f"开始执行 [{func.__name__}]", level="debug", depth=2)
            try:
                return func(*args, **kwargs)
            finally:
                elapsed = time.perf_counter() - start_time
                log_with_level(f"[{func.__name__}] 执行完成: {elapsed:.2f}秒", level="info", depth=2)
        return wrapper


timer = DecoratorFactory.timer
Decorate = DecoratorFactory

__all__ = [
    "DecoratorFactory",
    "Decorate",
    "log_with_level",
    "get_public_methods",
    "timer",
]
