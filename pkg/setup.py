# -*- coding: utf-8 -*-
"""pyphenoclust包的安装配置.

pyphenoclust对住院病人的生命体征轨迹做时间聚类，
比较TSKM、SOM-VAE与AC-TPC三类方法发现的临床表型。

作者: Guyue
邮箱: guyuecw@qq.com
许可证: MIT
"""

from setuptools import setup, find_packages

# Package metadata
PACKAGE_NAME = "pyphenoclust"
VERSION = "0.1.0"
AUTHOR = "Guyue"
AUTHOR_EMAIL = "guyuecw@qq.com"
DESCRIPTION = "Temporal clustering of vital-sign trajectories into outcome phenotypes"
URL = "https://github.com/guyue55/pyphenoclust"

# Read long description from README.md
with open('README.md', 'r', encoding='utf-8') as readme_file:
    LONG_DESCRIPTION = readme_file.read()

# Package dependencies
INSTALL_REQUIRES = [
    "loguru>=0.5.0",  # Logging library with better formatting and features
    "numpy>=1.21",  # Arrays, DTW recurrences and the hand-written autodiff kernel
    "pandas>=1.5",  # Cohort, assignment and profile CSV files
    "scipy>=1.7",  # Ranks for AUROC
    "matplotlib>=3.5",  # SVG report figures
]

# Package classifiers for PyPI
CLASSIFIERS = [
    "Development Status :: 3 - Alpha",
    "Intended Audience :: Science/Research",
    "Topic :: Scientific/Engineering :: Medical Science Apps.",
    "Programming Language :: Python :: 3",
    "Programming Language :: Python :: 3.8",
    "Programming Language :: Python :: 3.9",
    "Programming Language :: Python :: 3.10",
    "Programming Language :: Python :: 3.11",
    "License :: OSI Approved :: MIT License",
    "Operating System :: OS Independent",
]

setup(
    name=PACKAGE_NAME,
    version=VERSION,
    author=AUTHOR,
    author_email=AUTHOR_EMAIL,
    description=DESCRIPTION,
    long_description=LONG_DESCRIPTION,
    long_description_content_type="text/markdown",
    url=URL,
    packages=find_packages(exclude=["tests*", "examples*"]),
    install_requires=INSTALL_REQUIRES,
    classifiers=CLASSIFIERS,
    python_requires=">=3.8",
    keywords="time-series clustering dtw phenotypes vital-signs",
    entry_points={
        "console_scripts": [
            "pyphenoclust = pyphenoclust.cli:main",
        ],
    },
    project_urls={
        "Bug Reports": f"{URL}/issues",
        "Source": URL,
        "Documentation": f"{URL}#readme",
    },
    zip_safe=False,
)
