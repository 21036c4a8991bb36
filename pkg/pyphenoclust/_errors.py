# -*- coding: utf-8 -*-
"""PyPhenoClust异常定义模块.

本模块定义了库中使用的异常层级。每个异常类携带一个进程退出码，
命令行入口据此把异常映射为约定的退出码。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
from typing import Optional


class PhenoError(Exception):
    """库内所有异常的基类.

    属性:
        exit_code: 命令行遇到此异常时返回的退出码.
    """

    exit_code: int = 1


class ValidationError(PhenoError, ValueError):
    """输入数据或参数不满足约束时抛出."""

    exit_code = 4


class CohortParseError(ValidationError):
    """队列CSV文件格式错误.

    Args:
        message: 错误描述.
        line_number: 出错的文件行号(从1开始)，未知时为None.
    """

    def __init__(self, message: str, line_number: Optional[int] = None) -> None:
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class TrainingError(PhenoError, RuntimeError):
    """训练发散(损失或梯度非有限值)时抛出."""

    exit_code = 3


class UsageError(PhenoError):
    """命令行参数或配置值错误."""

    exit_code = 2


class PhenoIOError(PhenoError, OSError):
    """文件读写失败."""

    exit_code = 1


__all__ = [
    "PhenoError",
    "ValidationError",
    "CohortParseError",
    "TrainingError",
    "UsageError",
    "PhenoIOError",
]
