# -*- coding: utf-8 -*-
"""PyPhenoClust - 生命体征轨迹的时间聚类与表型评估.

实现并比较三类时间聚类模型(DTW时间序列k-means、SOM-VAE、AC-TPC)，
包括面向不平衡结局的类别先验加权损失，以及AUROC/AUPRC/NMI评估与报告生成。

模块:
    cohort: 队列数据模型与CSV读写
    preprocess: 异常值屏蔽、规则网格、插补与标准化
    synth: 带真实表型的合成队列
    dtw: 欧氏距离、DTW与DTW重心平均
    tskm: 时间序列k-means与肘部法
    diffkern: 基于numpy的可微分算子
    somvae: SOM-VAE
    actpc: AC-TPC
    evaluation: 有监督指标与簇画像
    report: SVG图表
    cli: 命令行入口

Example:
    >>> from pyphenoclust import generate, make_separable_preset, preprocess_cohort
    >>> synthetic = generate(make_separable_preset("easy", n_patients=50, seed=7))
    >>> prepared = preprocess_cohort(synthetic.cohort)
    >>> prepared.tensor().shape
    (50, 24, 8)

作者: Guyue <guyuecw@qq.com>
许可证: MIT
版本: 0.1.0
"""

# Package metadata
__version__ = "0.1.0"
__author__ = "Guyue"
__email__ = "guyuecw@qq.com"
__license__ = "MIT"
__description__ = "Temporal clustering and phenotyping of vital-sign trajectories"

# 本地/自定义模块导入 (Local/custom module imports)
from ._base import Base
from ._errors import (CohortParseError, PhenoError, PhenoIOError, TrainingError, UsageError,
                      ValidationError)
from ._response import Response
from .actpc import ActpcConfig, ActpcModel, actpc_train, final_cluster, weighted_loss
from .cohort import ClassPrior, Cohort, OutcomeLabel, PatientSeries, load_cohort, save_cohort
from .decorator_utils import Decorate
from .dtw import Metric, dtw_barycenter, dtw_distance, euclidean_distance
from .evaluation import MetricsReport, auprc_macro, auroc_macro, cluster_profiles, evaluate, nmi
from .logger_utils import LoggerUtils, logger
from .preprocess import GridSpec, NormStats, preprocess_cohort
from .somvae import SomVaeConfig, SomVaeModel, somvae_train
from .synth import SynthConfig, generate, make_separable_preset
from .tools_utils import Tools
from .tskm import CentroidSet, TskmConfig, elbow_select, tskm_fit

# Define public API
__all__ = [
    "Base",
    "Response",
    "Decorate",
    "logger",
    "LoggerUtils",
    "Tools",
    "PhenoError",
    "ValidationError",
    "CohortParseError",
    "TrainingError",
    "UsageError",
    "PhenoIOError",
    "ClassPrior",
    "Cohort",
    "OutcomeLabel",
    "PatientSeries",
    "load_cohort",
    "save_cohort",
    "GridSpec",
    "NormStats",
    "preprocess_cohort",
    "SynthConfig",
    "generate",
    "make_separable_preset",
    "Metric",
    "euclidean_distance",
    "dtw_distance",
    "dtw_barycenter",
    "CentroidSet",
    "TskmConfig",
    "tskm_fit",
    "elbow_select",
    "SomVaeConfig",
    "SomVaeModel",
    "somvae_train",
    "ActpcConfig",
    "ActpcModel",
    "actpc_train",
    "weighted_loss",
    "final_cluster",
    "MetricsReport",
    "auroc_macro",
    "auprc_macro",
    "nmi",
    "cluster_profiles",
    "evaluate",
]
