# -*- coding: utf-8 -*-
"""PyPhenoClust基础类模块.

本模块提供具有日志记录和自动结果包装功能的基础类，
命令行的每个子命令都继承自此类。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from functools import wraps
from typing import Any, Callable

# 第三方库导入 (Third-party library imports)
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._response import Response
from .decorator_utils import get_public_methods
from .tools_utils import Tools


class Base:
    """提供日志记录和结果包装功能的基础类.

    实例化时为所有公共方法(非下划线开头)添加Response包装，
    调用这些方法不会抛出异常，而是返回携带退出码的Response。
    支持上下文管理器协议，退出时自动调用close()。

    属性:
        logger: 来自loguru的全局日志记录器实例.

    Example:
        >>> class Hello(Base):
        ...     def run(self):
        ...         return "hello"
        >>> Hello().run().result
        'hello'
    """
    logger = logger

    def __init__(self, **kwargs: Any) -> None:
        """初始化Base类.

        Args:
            **kwargs: _response_wrap=False 时不包装公共方法.
        """
        if kwargs.get("_response_wrap", True):
            self._apply_response_wrapper()

    def __enter__(self) -> "Base":
        return self

    def __exit__(self, exc_type: Any, exc_val: Any, exc_tb: Any) -> None:
        self.close()

    @property
    def Tools(self) -> type:
        """获取Tools工具类."""
        return Tools

    def close(self) -> None:
        """释放资源，子类按需重写."""

    def _apply_response_wrapper(self) -> None:
        """为实例的所有公共方法添加Response包装."""
        for name, method in get_public_methods(self):
            if name == "close":
                continue
            setattr(self, name, self._response_wrapper(method))

    @staticmethod
    def _response_wrapper(func: Callable[..., Any]) -> Callable[..., Response]:
        """把函数的执行结果包装为Response."""
        @wraps(func)
        def wrapper(*args: Any, **kwargs: Any) -> Response:
            return Response.execute(func, *args, **kwargs)
        return wrapper
