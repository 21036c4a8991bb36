# -*- coding: utf-8 -*-
"""日志工具模块.

封装loguru库，为命令行和训练流程提供统一的日志配置。
默认只输出到标准错误(stderr)，标准输出保留给数据和文件路径；
需要时可以追加一个带轮转策略的日志文件。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
import os
from copy import deepcopy
from sys import stderr
from typing import Any, Dict, List, Optional

# 第三方库导入 (Third-party library imports)
from loguru import logger
from loguru._logger import Logger


class LoggerUtils:
    """封装loguru库的日志配置.

    属性:
        logger: 全局日志实例.
        ENV_LEVEL: 读取默认日志级别的环境变量名.
        FORMAT: 标准日志格式.
        FORMAT_FILE: 日志文件格式，额外包含进程号.
        DEFAULT: 日志文件的默认配置参数.
    """

    logger: Logger = logger
    ENV_LEVEL: str = "PHENO_LOG_LEVEL"

    # 可用变量: {process} {thread} {time} {level} {name} {function} {line} {module} {message}
    FORMAT = "<green>{time:YY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | " \
             "<cyan>[{module}</cyan>:<cyan>{function}</cyan>:<cyan>{line}]</cyan>: " \
             "<level>{message}</level>"
    FORMAT_FILE = "{time:YY-MM-DD HH:mm:ss} | {level: <8} | [pid{process: <4}] | " \
                  "[{module}:{function}:{line}]: {message}"

    DEFAULT: Dict[str, Any] = dict(
        # 日志的轮转策略，支持大小和时间两种
        rotation="50 MB",
        retention="7 days",
        backtrace=True,
        # 生产环境中应关闭，避免在异常跟踪中泄露变量值
        diagnose=False,
        format=FORMAT_FILE,
        encoding="utf-8",
        # 延迟创建文件，有日志输出才生成
        delay=True,
    )

    # 已添加的处理器id，重复配置时先移除
    _handler_ids: List[int] = []

    @staticmethod
    def get_log() -> Logger:
        """获取全局日志实例.

        Returns:
            Logger: 全局日志实例.
        """
        return logger

    @classmethod
    def default_level(cls) -> str:
        """从环境变量读取默认日志级别.

        Returns:
            日志级别名称，默认为"INFO".
        """
        return os.environ.get(cls.ENV_LEVEL, "INFO").upper()

    @classmethod
    def set_log(cls, level: Optional[str] = None, sink: Optional[str] = None,
                rotation: str = "50 MB", retention: str = "7 days",
                output_stderr: bool = True, **kwargs: Any) -> Logger:
        """配置全局日志实例.

        每次调用都会移除之前由本方法添加的处理器，因此可以重复调用
        (例如命令行解析出 --log-level 之后)而不会重复输出。

        Args:
            level: 日志级别，如"INFO"、"DEBUG"，为None时读取环境变量.
            sink: 日志文件路径，为None时不写文件.
            rotation: 日志文件轮转策略.
            retention: 日志文件保留时间.
            output_stderr: 是否输出到标准错误.
            **kwargs: 其他loguru文件处理器参数.

        Returns:
            Logger: 配置后的日志实例.
        """
        level = (level or cls.default_level()).upper()

        if not cls._handler_ids:
            # 首次配置，移除loguru默认的控制台处理器
            logger.remove()
        for handler_id in cls._handler_ids:
            try:
                logger.remove(handler_id)
            except ValueError:
                # 处理器已经不存在，忽略
                pass
        cls._handler_ids = []

        if output_stderr:
            cls._handler_ids.append(logger.add(stderr, format=cls.FORMAT, level=level, colorize=None))

        if sink:
            log_dir = os.path.dirname(sink)
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)
            setting = deepcopy(cls.DEFAULT)
            setting.update(rotation=rotation, retention=retention, level=level)
            setting.update(kwargs)
            cls._handler_ids.append(logger.add(sink, **setting))
        return logger


# 设置日志实例: 仅输出到stderr
LoggerUtils.set_log()

__all__ = ["LoggerUtils", "logger"]
