# -*- coding: utf-8 -*-
"""``python -m pyphenoclust`` 入口."""

# 标准库导入 (Standard library imports)
import sys

# 本地/自定义模块导入 (Local/custom module imports)
from .cli import main

sys.exit(main())
