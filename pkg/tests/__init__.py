# -*- coding: utf-8 -*-
"""PyPhenoClust的测试包.

此包包含所有PyPhenoClust模块的单元测试，测试按模块组织。

测试模块:
    test_base: Base类的测试
    test_response: Response类的测试
    test_decorator_utils: 装饰器工具的测试
    test_logger_utils: 日志工具的测试
    test_tools_utils: 实用函数的测试
    test_cohort ... test_cli: 各业务模块的测试

使用方法:
    运行所有测试:
        python -m pytest tests/

    运行特定测试模块:
        python -m pytest tests/test_dtw.py

    运行耗时较长的端到端测试:
        PHENO_SLOW_TESTS=1 python -m pytest tests/

作者: Guyue
许可证: MIT
"""
