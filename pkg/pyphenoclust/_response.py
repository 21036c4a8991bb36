# -*- coding: utf-8 -*-
"""PyPhenoClust响应类模块.

本模块定义了Response类，用于封装命令执行的结果、异常信息与耗时，
并把异常映射为命令行退出码。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
import time
import traceback
from typing import Any, Callable, Dict, Optional, Tuple

# 第三方库导入 (Third-party library imports)
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import PhenoError

# 成功时的退出码
EXIT_OK = 0
# 非库内异常(程序缺陷)的退出码
EXIT_UNEXPECTED = 1


def extract_exception_location(exception: BaseException, skip_frames: int = 1) -> Tuple[str, str]:
    """从异常对象中提取真实的执行位置信息和完整的traceback信息.

    Args:
        exception: 异常对象.
        skip_frames: 要跳过的调用栈帧数量，默认为1（跳过包装函数）.

    Returns:
        (位置字符串 "filename:lineno in funcname", 完整traceback字符串).
        无法提取位置时位置字符串为"未知位置".
    """
    tb_str = "".join(traceback.format_exception(type(exception), exception, exception.__traceback__))
    current_tb = exception.__traceback__
    if not current_tb:
        return "未知位置", tb_str

    for _ in range(skip_frames):
        if current_tb.tb_next:
            current_tb = current_tb.tb_next
        else:
            break
    # 定位到最内层的帧，即异常真正抛出的位置
    while current_tb.tb_next:
        current_tb = current_tb.tb_next
    code = current_tb.tb_frame.f_code
    return f"{code.co_filename}:{current_tb.tb_lineno} in {code.co_name}", tb_str


class Response:
    """命令执行结果包装类.

    属性:
        success (bool): 是否成功执行.
        result (Any): 返回结果.
        exception (Optional[BaseException]): 执行过程中的异常.
        execution_time (float): 执行时间（秒）.
        metadata (Dict[str, Any]): 额外的元数据信息.

    Example:
        >>> response = Response.execute(lambda: 1 / 0)
        >>> response.success
        False
        >>> response.exit_code
        1
    """

    def __init__(self, success: bool = True, result: Any = None,
                 exception: Optional[BaseException] = None,
                 execution_time: float = 0.0,
                 metadata: Optional[Dict[str, Any]] = None) -> None:
        self.success = success
        self.result = result
        self.exception = exception
        self.execution_time = execution_time
        self.metadata = metadata or {}

    @classmethod
    def execute(cls, func: Callable[..., Any], *args: Any, **kwargs: Any) -> "Response":
        """执行函数并返回包装的结果.

        库内异常(PhenoError)按其消息记录为一行错误日志；其他异常视为
        程序缺陷，记录完整traceback。

        Args:
            func: 要执行的函数.
            *args: 函数的位置参数.
            **kwargs: 函数的关键字参数.

        Returns:
            包含执行结果的Response实例.
        """
        start_time = time.perf_counter()
        success = True
        result = None
        exception = None

        try:
            result = func(*args, **kwargs)
        except Exception as e:
            success = False
            exception = e
            location, tb_str = extract_exception_location(e, skip_frames=1)
            if isinstance(e, PhenoError):
                logger.error(f"{type(e).__name__}: {e}")
                logger.debug(f"[{location}]\n{tb_str.rstrip()}")
            else:
                logger.error(f"[{location}] 执行异常: {getattr(func, '__name__', func)}\n{tb_str.rstrip()}")

        execution_time = time.perf_counter() - start_time
        return cls(success=success, result=result, exception=exception,
                   execution_time=round(execution_time, 6))

    @property
    def has_exception(self) -> bool:
        """是否有异常."""
        return self.exception is not None

    @property
    def error_message(self) -> Optional[str]:
        """异常的字符串表示，无异常时为None."""
        return str(self.exception) if self.exception else None

    @property
    def exit_code(self) -> int:
        """对应的进程退出码.

        Returns:
            成功为0；库内异常为其exit_code；其他异常为1.
        """
        if self.success:
            return EXIT_OK
        if isinstance(self.exception, PhenoError):
            return self.exception.exit_code
        return EXIT_UNEXPECTED

    def info(self) -> Dict[str, Any]:
        """获取Response的信息字典."""
        return {
            "success": self.success,
            "exit_code": self.exit_code,
            "execution_time": self.execution_time,
            "metadata": self.metadata,
            "error": self.error_message,
            "error_name": type(self.exception).__name__ if self.exception else None,
        }

    def __repr__(self) -> str:
        return (f"Response(success={self.success}, exit_code={self.exit_code}, "
                f"exception={self.exception!r}, execution_time={self.execution_time})")

    def __bool__(self) -> bool:
        return self.success
