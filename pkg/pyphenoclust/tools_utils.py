# coding: utf-8
"""常用工具函数模块.

封装文件读写、配置文件解析、类型转换与稳定哈希等基础功能，
尽量不涉及业务逻辑，仅为其他模块提供基础支持。

封装类型划分如下（可通过下列编号搜索代码分布）：
一、文件和目录操作：JSON读写、文本写入、目录创建
二、配置相关：key=value配置文件读取、字符串到字段类型的转换
三、哈希相关：md5、稳定的[0,1)哈希值

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
import dataclasses
import hashlib
import json
import os
from typing import Any, Dict, Mapping, Optional, Tuple, Type, TypeVar, Union, get_args, get_origin, get_type_hints

# 第三方库导入 (Third-party library imports)
from loguru import logger

# 本地/自定义模块导入 (Local/custom module imports)
from ._errors import PhenoIOError, UsageError

T = TypeVar("T")

_TRUE_STRINGS = ("1", "true", "yes", "on")
_FALSE_STRINGS = ("0", "false", "no", "off")


class Tools:
    """常用工具方法类."""

    """ 一、文件和目录操作 """

    @staticmethod
    def makedirs(path: str, flag_file: bool = False) -> str:
        """递归创建目录.

        Args:
            path: 目录路径，或flag_file为True时的文件路径.
            flag_file: path是否为文件路径(此时创建其父目录).

        Returns:
            创建(或已存在)的目录路径.

        Raises:
            PhenoIOError: 目录创建失败.
        """
        directory = os.path.dirname(path) if flag_file else path
        if directory:
            try:
                os.makedirs(directory, exist_ok=True)
            except OSError as e:
                raise PhenoIOError(f"无法创建目录 {directory}: {e}") from e
        return directory

    @staticmethod
    def write_str(filename: str, data: str, encoding: str = "utf-8") -> str:
        """写入文本文件(LF换行).

        Args:
            filename: 文件路径.
            data: 文本内容.
            encoding: 文件编码.

        Returns:
            写入的文件路径.

        Raises:
            PhenoIOError: 写入失败.
        """
        Tools.makedirs(filename, flag_file=True)
        try:
            with open(filename, "w", encoding=encoding, newline="\n") as f:
                f.write(data)
        except OSError as e:
            raise PhenoIOError(f"写入文件失败 {filename}: {e}") from e
        logger.debug(f"已写入文件: {filename}")
        return filename

    @staticmethod
    def write_json(filename: str, data: Any) -> str:
        """以JSON格式写入文件.

        键按插入顺序输出，相同数据总是得到相同字节。

        Args:
            filename: 文件路径.
            data: 可JSON序列化的数据.

        Returns:
            写入的文件路径.
        """
        return Tools.write_str(filename, json.dumps(data, ensure_ascii=False, indent=2) + "\n")

    @staticmethod
    def read_json(filename: str, encoding: str = "utf-8-sig") -> Any:
        """读取JSON文件.

        Args:
            filename: 文件路径.
            encoding: 文件编码.

        Returns:
            解析后的对象.

        Raises:
            PhenoIOError: 文件不存在或不是合法JSON.
        """
        try:
            with open(filename, "r", encoding=encoding) as f:
                return json.load(f)
        except OSError as e:
            raise PhenoIOError(f"读取文件失败 {filename}: {e}") from e
        except ValueError as e:
            raise PhenoIOError(f"JSON格式错误 {filename}: {e}") from e

    """ 二、配置相关 """

    @staticmethod
    def read_config_flat(name_config: str, encoding: str = "utf-8-sig") -> Dict[str, str]:
        """读取扁平的key=value配置文件.

        支持 # 注释和空行，键可带以 . 分隔的段前缀，如 actpc.lr=0.001。

        Args:
            name_config: 配置文件路径.
            encoding: 编码格式.

        Returns:
            所有配置参数的字典，值均为字符串.

        Raises:
            PhenoIOError: 文件无法读取.
            UsageError: 某行不是key=value格式.
        """
        try:
            with open(name_config, "r", encoding=encoding) as f:
                lines = f.read().splitlines()
        except OSError as e:
            raise PhenoIOError(f"读取配置文件失败 {name_config}: {e}") from e

        config: Dict[str, str] = {}
        for number, raw in enumerate(lines, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{name_config}:{number}: 配置行缺少'=': {raw!r}")
            key, value = line.split("=", 1)
            key = key.strip()
            if not key:
                raise UsageError(f"{name_config}:{number}: 配置键为空")
            config[key] = value.strip()
        logger.debug(f"读取配置文件 {name_config}: {len(config)} 项")
        return config

    @staticmethod
    def section(mapping: Mapping[str, Any], prefix: str) -> Dict[str, Any]:
        """提取某个段前缀下的配置项(去掉前缀).

        Args:
            mapping: 扁平配置字典.
            prefix: 段名，如"actpc"；为空字符串时返回不含 . 的顶层键.

        Returns:
            该段的配置字典.
        """
        if not prefix:
            return {k: v for k, v in mapping.items() if "." not in k}
        head = prefix + "."
        return {k[len(head):]: v for k, v in mapping.items() if k.startswith(head)}

    @staticmethod
    def coerce(value: Any, annotation: Any) -> Any:
        """把配置字符串转换为字段注解的类型.

        支持 int、float、bool、str、Optional[...] 以及 Tuple[x, ...]
        (逗号分隔)。已经是目标类型的值原样返回。

        Args:
            value: 原始值，通常为字符串.
            annotation: 目标类型注解.

        Returns:
            转换后的值.

        Raises:
            UsageError: 无法转换.
        """
        origin = get_origin(annotation)
        args = get_args(annotation)
        if origin is Union:
            if value is None or (isinstance(value, str) and value.strip().lower() in ("", "none", "null")):
                return None
            inner = [a for a in args if a is not type(None)]
            return Tools.coerce(value, inner[0])
        if origin in (tuple, list):
            if isinstance(value, (tuple, list)):
                parts = list(value)
            else:
                parts = [p.strip() for p in str(value).split(",") if p.strip()]
            element = args[0] if args else str
            return tuple(Tools.coerce(p, element) for p in parts)
        if annotation is bool:
            if isinstance(value, bool):
                return value
            lowered = str(value).strip().lower()
            if lowered in _TRUE_STRINGS:
                return True
            if lowered in _FALSE_STRINGS:
                return False
            raise UsageError(f"无法解析为布尔值: {value!r}")
        if annotation in (int, float, str):
            if isinstance(value, annotation) and not isinstance(value, bool):
                return value
            try:
                return annotation(str(value).strip())
            except ValueError as e:
                raise UsageError(f"无法解析为{annotation.__name__}: {value!r}") from e
        return value

    @staticmethod
    def config_from_mapping(cls: Type[T], mapping: Mapping[str, Any], prefix: str = "",
                            base: Optional[T] = None) -> T:
        """用配置字典填充dataclass.

        Args:
            cls: 目标dataclass类型.
            mapping: 扁平配置字典(可含其他段的键).
            prefix: 段前缀，如"actpc".
            base: 作为默认值的已有实例，为None时使用dataclass默认值.

        Returns:
            新的dataclass实例.

        Raises:
            UsageError: 段内存在未知键或值无法转换.
        """
        values = Tools.section(mapping, prefix)
        hints = get_type_hints(cls)
        names = {f.name for f in dataclasses.fields(cls) if f.init}
        if prefix:
            unknown = sorted(set(values) - names)
            if unknown:
                raise UsageError(f"配置段 [{prefix}] 存在未知键: {', '.join(unknown)}")
        kwargs = {k: Tools.coerce(v, hints[k]) for k, v in values.items() if k in names}
        if base is not None:
            return dataclasses.replace(base, **kwargs)
        return cls(**kwargs)

    """ 三、哈希相关 """

    @staticmethod
    def encode_md5(data: Union[str, bytes], encoding: str = "utf-8") -> str:
        """md5摘要.

        Args:
            data: 字符串或字节串.
            encoding: 字符串编码.

        Returns:
            十六进制摘要字符串.
        """
        if isinstance(data, str):
            data = data.encode(encoding)
        return hashlib.md5(data).hexdigest()

    @staticmethod
    def hash_fraction(*parts: Any) -> float:
        """把若干值稳定地映射到[0, 1)区间.

        与进程、平台无关(不使用内置hash)，用于按病人id划分训练/测试集。

        Args:
            *parts: 参与哈希的值，按 ":" 拼接.

        Returns:
            [0, 1)之间的浮点数.
        """
        digest = Tools.encode_md5(":".join(str(p) for p in parts))
        return int(digest[:13], 16) / float(16 ** 13)

    @staticmethod
    def parse_float_list(value: Union[str, Tuple[float, ...]]) -> Tuple[float, ...]:
        """解析逗号分隔的浮点数列表，如"0.939,0.030,0.011,0.020".

        Args:
            value: 字符串或浮点数序列.

        Returns:
            浮点数元组.
        """
        return Tools.coerce(value, Tuple[float, ...])


__all__ = ["Tools"]
