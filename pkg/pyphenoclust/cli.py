# -*- coding: utf-8 -*-
"""命令行入口.

子命令:
    synth     生成合成队列与真实表型文件
    fit       预处理训练集并训练一个模型
    assign    为病人分配最终簇
    evaluate  计算测试集指标与簇画像
    report    由簇画像生成SVG图与CSV
    compare   对多个模型依次执行 fit → assign → evaluate 并汇总对比表

标准输出只包含数据与写入的文件路径，日志写到标准错误。
退出码: 0 成功，2 用法错误，3 训练失败，4 数据校验错误，1 其他错误。

配置优先级: 命令行参数 > 配置文件 > 环境变量(PHENO_SEED) > 默认值。

Author: Guyue
License: MIT
Copyright (C) 2024-2025, Guyue.
"""

# 标准库导入 (Standard library imports)
import argparse
import os
import sys
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

# 第三方库导入 (Third-party library imports)
import numpy as np
import pandas as pd

# 本地/自定义模块导入 (Local/custom module imports)
from ._base import Base
from ._errors import PhenoIOError, UsageError, ValidationError
from ._response import Response
from .actpc import ActpcConfig, ActpcModel, actpc_assign_many, actpc_train, final_cluster
from .cohort import N_OUTCOMES, OUTCOME_NAMES, ClassPrior, Cohort, load_cohort, save_cohort
from .dtw import Metric
from .evaluation import (VISUAL_GRID, MetricsReport, assignment_array, cluster_profiles, evaluate,
                         read_assignments, read_profiles, score_patients, write_assignments, write_metrics,
                         write_profiles, write_trajectories)
from .logger_utils import LoggerUtils
from .preprocess import (DEFAULT_MIN_COVERAGE, GridSpec, NormStats, PreprocessedCohort, preprocess_cohort,
                         ranges_from_mapping, regrid)
from .report import DEFAULT_CHANNEL, load_profiles, resolve_channel, write_report
from .somvae import SomVaeConfig, SomVaeModel, somvae_assign_many, somvae_train
from .synth import DEFAULT_IMBALANCE, generate, make_separable_preset, truth_path_for, read_truth, write_truth
from .tools_utils import Tools
from .tskm import CentroidSet, TskmConfig, elbow_select, fit_best, inertia_curve

PROG = "pyphenoclust"
SEED_ENV = "PHENO_SEED"
MODEL_TAGS: Tuple[str, ...] = ("tskm-euclid", "tskm-dtw", "somvae", "actpc", "actpc-unweighted")
CONFIG_SECTIONS: Tuple[str, ...] = ("run", "grid", "clamp", "tskm", "somvae", "actpc")
LOG_LEVELS: Tuple[str, ...] = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")

# 模型目录中的文件名
MODEL_FILE = "model.json"
RUN_FILE = "run.json"
STATS_FILE = "norm_stats.json"
HISTORY_FILE = "loss_history.csv"
TRAIN_ASSIGNMENTS = "assignments_train.csv"
TEST_ASSIGNMENTS = "assignments_test.csv"
TRAIN_PROFILES = "profiles_train.csv"
METRICS_FILE = "metrics.json"
PROFILES_FILE = "profiles.csv"
COMPARISON_FILE = "comparison.csv"
COMPARISON_COLUMNS = ("model_tag", "auroc", "auprc", "nmi", "nmi_truth", "n_clusters")

Model = Union[CentroidSet, SomVaeModel, ActpcModel]
KValue = Union[int, str, None]


""" 一、配置 """


@dataclass(frozen=True)
class RunConfig:
    """运行级配置(配置文件段 ``run.*``).

    属性:
        seed: 随机种子，为None时读取环境变量PHENO_SEED，再缺省为0.
        split: 训练集比例，按病人id哈希划分.
        min_coverage: 预处理的最低覆盖率.
        channel: 报告轨迹图的默认通道.
    """

    seed: Optional[int] = None
    split: float = 0.8
    min_coverage: float = DEFAULT_MIN_COVERAGE
    channel: str = DEFAULT_CHANNEL

    def __post_init__(self) -> None:
        if not 0.0 < self.split < 1.0:
            raise UsageError(f"run.split必须在(0, 1)内: {self.split}")


@dataclass(frozen=True)
class Settings:
    """解析完成的全部配置."""

    run: RunConfig
    grid: GridSpec
    ranges: Dict[str, Tuple[float, float]]
    tskm: TskmConfig
    somvae: SomVaeConfig
    actpc: ActpcConfig
    seed: int


def resolve_seed(flag: Optional[int], run: RunConfig, environ: Optional[Mapping[str, str]] = None) -> int:
    """种子优先级: 命令行 > run.seed > PHENO_SEED > 0.

    Raises:
        UsageError: 环境变量不是整数.
    """
    if flag is not None:
        return int(flag)
    if run.seed is not None:
        return int(run.seed)
    value = (os.environ if environ is None else environ).get(SEED_ENV, "").strip()
    if not value:
        return 0
    try:
        return int(value)
    except ValueError:
        raise UsageError(f"环境变量 {SEED_ENV} 不是整数: {value!r}") from None


def load_settings(config_path: Optional[str] = None, seed: Optional[int] = None) -> Settings:
    """读取配置文件并合并命令行种子.

    模型段中的seed只在命令行没有给出--seed时生效，否则各模型使用运行种子。

    Raises:
        UsageError: 未知的段或键、值无法解析或取值非法.
    """
    mapping = Tools.read_config_flat(config_path) if config_path else {}
    sections = {key.split(".", 1)[0] if "." in key else "" for key in mapping}
    unknown = sorted(sections - set(CONFIG_SECTIONS))
    if unknown:
        raise UsageError(f"配置文件存在未知的段: {', '.join(s or '<无段前缀>' for s in unknown)}")
    try:
        run = Tools.config_from_mapping(RunConfig, mapping, "run")
        run_seed = resolve_seed(seed, run)
        models = {}
        for section, cls in (("tskm", TskmConfig), ("somvae", SomVaeConfig), ("actpc", ActpcConfig)):
            config = Tools.config_from_mapping(cls, mapping, section)
            if hasattr(config, "seed") and (seed is not None or f"{section}.seed" not in mapping):
                config = replace(config, seed=run_seed)
            models[section] = config
        settings = Settings(run, Tools.config_from_mapping(GridSpec, mapping, "grid"), ranges_from_mapping(mapping),
                            models["tskm"], models["somvae"], models["actpc"], run_seed)
        resolve_channel(run.channel)
    except ValidationError as e:
        raise UsageError(f"配置取值非法: {e}") from e
    return settings


def parse_k(value: str) -> KValue:
    """--k 的取值: 正整数或 auto."""
    if value.strip().lower() == "auto":
        return "auto"
    try:
        k = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--k 需要正整数或auto: {value!r}") from None
    if k < 1:
        raise argparse.ArgumentTypeError(f"--k 需要正整数: {k}")
    return k


def som_shape(k: int) -> Tuple[int, int]:
    """K个节点最接近正方形的网格 (rows <= cols)."""
    rows = max(r for r in range(1, int(np.sqrt(k)) + 1) if k % r == 0)
    return rows, k // rows


""" 二、工作流 """


def split_indices(patient_ids: Sequence[str], seed: int, fraction: float, part: str) -> List[int]:
    """按 hash(seed, patient_id) < fraction 划分的病人下标.

    Args:
        patient_ids: 病人id.
        seed: 运行种子.
        fraction: 训练集比例.
        part: "train"、"test" 或 "all".
    """
    if part == "all":
        return list(range(len(patient_ids)))
    train = [Tools.hash_fraction(seed, pid) < fraction for pid in patient_ids]
    return [i for i, is_train in enumerate(train) if is_train == (part == "train")]


def split_cohort(cohort: Cohort, seed: int, fraction: float, part: str) -> Cohort:
    """取队列的一个划分.

    Raises:
        ValidationError: 划分为空.
    """
    indices = split_indices(cohort.patient_ids, seed, fraction, part)
    if not indices:
        raise ValidationError(f"{part} 划分为空(共 {len(cohort)} 个病人, split={fraction})")
    return cohort.subset(indices)


def resolve_k(tag: str, k: KValue, tensor: np.ndarray, settings: Settings,
              history: List[Tuple[str, int, float]]) -> int:
    """确定簇数；auto时在训练张量上做惯性曲线并取肘部."""
    if k is None:
        if tag.startswith("tskm"):
            k = "auto" if settings.tskm.k is None else settings.tskm.k
        elif tag == "somvae":
            k = settings.somvae.grid_rows * settings.somvae.grid_cols
        else:
            k = settings.actpc.k
    if k != "auto":
        return int(k)
    config = settings.tskm
    metric = tskm_metric("tskm-dtw" if tag == "tskm-dtw" else "tskm-euclid", config)
    curve = inertia_curve(tensor, range(config.k_min, config.k_max + 1), metric, settings.seed, config.restarts,
                          config.max_iter, config.dba_iters)
    history.extend(("inertia_curve", kk, inertia) for kk, inertia in curve)
    selected = elbow_select(curve)
    LoggerUtils.logger.info(f"肘部法选择 K={selected}")
    return selected


def tskm_metric(tag: str, config: TskmConfig) -> Metric:
    return Metric.euclidean() if tag == "tskm-euclid" else Metric.dtw(config.band, config.independent)


def train_model(tag: str, prepared: PreprocessedCohort, settings: Settings,
                k: KValue = None) -> Tuple[Model, List[Tuple[str, int, float]]]:
    """在预处理后的训练集上训练指定模型.

    Returns:
        (模型, 损失历史 [(阶段, 步, 值)]).

    Raises:
        UsageError: 未知的模型标签.
    """
    if tag not in MODEL_TAGS:
        raise UsageError(f"未知模型 {tag!r}, 可选: {', '.join(MODEL_TAGS)}")
    tensor = prepared.tensor()
    history: List[Tuple[str, int, float]] = []
    k_value = resolve_k(tag, k, tensor, settings, history)

    if tag.startswith("tskm"):
        config = settings.tskm
        model = fit_best(tensor, k_value, tskm_metric(tag, config), settings.seed, config.restarts,
                         config.max_iter, config.dba_iters)
        history.extend(("lloyd", i, v) for i, v in enumerate(model.history))
        return model, history

    if tag == "somvae":
        rows, cols = som_shape(k_value)
        config = settings.somvae
        if rows * cols != config.grid_rows * config.grid_cols:
            config = replace(config, grid_rows=rows, grid_cols=cols)
        model = somvae_train(tensor, config)
        history.extend(("somvae", i, v) for i, v in enumerate(model.history))
        return model, history

    priors = prepared.priors if tag == "actpc" else ClassPrior.uniform(N_OUTCOMES)
    model = actpc_train(tensor, prepared.label_matrix(), priors, replace(settings.actpc, k=k_value))
    for stage in ("pretrain", "selector", "critic"):
        history.extend((stage, i, v) for i, v in enumerate(model.history.get(stage, [])))
    return model, history


def load_model(path: str) -> Model:
    """按 model 字段读取模型JSON.

    Raises:
        ValidationError: 未知的模型类型.
    """
    data = Tools.read_json(path)
    kind = data.get("model") if isinstance(data, dict) else None
    if kind == "tskm":
        return CentroidSet.from_json(data)
    if kind == "somvae":
        return SomVaeModel.from_json(data)
    if kind == "actpc":
        return ActpcModel.from_json(data)
    raise ValidationError(f"未知的模型类型 {kind!r}: {path}")


def prepare_for_model(cohort: Cohort, settings: Settings, stats: NormStats) -> Tuple[List[str], np.ndarray]:
    """把队列转换为模型输入张量.

    原始单位的队列使用训练集统计量预处理(覆盖率不足的病人被剔除)；
    标准化队列直接放到模型网格上，必须填满每个分箱。

    Raises:
        ValidationError: 标准化队列与模型网格不一致.
    """
    if cohort.normalized:
        matrices = [regrid(p, settings.grid)[0] for p in cohort.patients]
        for patient, matrix in zip(cohort.patients, matrices):
            if not np.all(np.isfinite(matrix)):
                raise ValidationError(f"标准化队列与模型网格不一致: 病人 {patient.patient_id} 存在空分箱")
        return cohort.patient_ids, np.stack(matrices)
    prepared = preprocess_cohort(cohort, settings.grid, stats, settings.ranges, settings.run.min_coverage)
    if prepared.dropped:
        LoggerUtils.logger.warning(f"{len(prepared.dropped)} 个病人覆盖率不足，未分配簇")
    return prepared.patient_ids, prepared.tensor()


def assign_clusters(model: Model, tensor: np.ndarray, grid: GridSpec) -> np.ndarray:
    """每个病人的最终簇: TSKM取最近质心，SOM-VAE与AC-TPC取最后48小时分配的众数.

    Raises:
        ValidationError: 模型与网格长度不一致.
    """
    if isinstance(model, CentroidSet):
        if model.centroids.shape[1] != tensor.shape[1]:
            raise ValidationError(f"模型序列长度 {model.centroids.shape[1]} 与网格分箱数 {tensor.shape[1]} 不一致")
        return model.assign(tensor)
    if isinstance(model, SomVaeModel):
        traces = somvae_assign_many(model, tensor)
    else:
        traces = actpc_assign_many(model, tensor)
    return np.array([final_cluster(trace, grid.bin_hours) for trace in traces], dtype=int)


def read_run(model_dir: str) -> Tuple[Dict[str, Any], Settings, NormStats]:
    """读取模型目录中的运行信息，恢复网格、范围与统计量."""
    run = Tools.read_json(os.path.join(model_dir, RUN_FILE))
    stats = NormStats.from_dict(Tools.read_json(os.path.join(model_dir, STATS_FILE)))
    run_config = RunConfig(seed=run["seed"], split=run["split"], min_coverage=run["min_coverage"])
    settings = Settings(run_config, GridSpec(**run["grid"]), {k: tuple(v) for k, v in run["ranges"].items()},
                        TskmConfig(), SomVaeConfig(), ActpcConfig(), int(run["seed"]))
    return run, settings, stats


def fit_run(cohort: Cohort, tag: str, output_dir: str, settings: Settings, k: KValue = None) -> List[str]:
    """fit子命令的主体，返回写入的文件路径."""
    train = split_cohort(cohort, settings.seed, settings.run.split, "train")
    prepared = preprocess_cohort(train, settings.grid, None, settings.ranges, settings.run.min_coverage)
    LoggerUtils.logger.info(f"{tag}: 训练集 {len(prepared)} 个病人(剔除 {len(prepared.dropped)} 个)")
    model, history = train_model(tag, prepared, settings, k)
    clusters = assign_clusters(model, prepared.tensor(), settings.grid)

    kept = set(prepared.patient_ids)
    train_kept = train.subset([i for i, pid in enumerate(train.patient_ids) if pid in kept])
    profiles = cluster_profiles(clusters, train_kept, VISUAL_GRID, ranges=settings.ranges)
    run = {
        "model_tag": tag,
        "seed": settings.seed,
        "split": settings.run.split,
        "min_coverage": settings.run.min_coverage,
        "grid": settings.grid.to_dict(),
        "ranges": {channel: list(bounds) for channel, bounds in settings.ranges.items()},
        "n_train": len(prepared),
        "n_dropped": len(prepared.dropped),
        "alpha": prepared.priors.alpha.tolist(),
    }
    history_path = os.path.join(output_dir, HISTORY_FILE)
    Tools.makedirs(output_dir)
    try:
        pd.DataFrame(history, columns=["stage", "step", "value"]).to_csv(history_path, index=False,
                                                                        lineterminator="\n")
    except OSError as e:
        raise PhenoIOError(f"写入损失历史失败 {history_path}: {e}") from e
    return [
        Tools.write_json(os.path.join(output_dir, MODEL_FILE), model.to_json()),
        Tools.write_json(os.path.join(output_dir, RUN_FILE), run),
        Tools.write_json(os.path.join(output_dir, STATS_FILE), prepared.stats.to_dict()),
        history_path,
        write_assignments(os.path.join(output_dir, TRAIN_ASSIGNMENTS), prepared.patient_ids, clusters),
        write_profiles(profiles, os.path.join(output_dir, TRAIN_PROFILES)),
    ]


def assign_run(cohort: Cohort, model_dir: str, part: str, output: str) -> str:
    """assign子命令的主体."""
    run, settings, stats = read_run(model_dir)
    model = load_model(os.path.join(model_dir, MODEL_FILE))
    subset = split_cohort(cohort, settings.seed, settings.run.split, part)
    patient_ids, tensor = prepare_for_model(subset, settings, stats)
    clusters = assign_clusters(model, tensor, settings.grid)
    LoggerUtils.logger.info(f"{run['model_tag']}: 分配 {len(patient_ids)} 个病人, "
                            f"簇规模 {np.bincount(clusters).tolist()}")
    return write_assignments(output, patient_ids, clusters)


def evaluate_run(cohort: Cohort, model_dir: str, assignments: Mapping[str, int], output_dir: str,
                 truth: Optional[Mapping[str, int]] = None, tag: Optional[str] = None) -> Tuple[MetricsReport, List[str]]:
    """evaluate子命令的主体.

    Raises:
        ValidationError: 分配中的病人不在队列中，或簇没有训练画像.
    """
    run, settings, stats = read_run(model_dir)
    train_profiles = read_profiles(os.path.join(model_dir, TRAIN_PROFILES))
    ids = list(assignments)
    index = {pid: i for i, pid in enumerate(cohort.patient_ids)}
    missing = [pid for pid in ids if pid not in index]
    if missing:
        raise ValidationError(f"{len(missing)} 个已分配病人不在队列中，例如 {missing[0]}")
    subset = cohort.subset([index[pid] for pid in ids])
    clusters = assignment_array(assignments, ids)
    scores = score_patients(clusters, train_profiles)
    truth_ids = None
    if truth is not None:
        absent = [pid for pid in ids if pid not in truth]
        if absent:
            raise ValidationError(f"真值文件缺少 {len(absent)} 个病人，例如 {absent[0]}")
        truth_ids = np.array([truth[pid] for pid in ids], dtype=int)
    report = evaluate(tag or run["model_tag"], clusters, scores, subset.label_indices(), truth_ids)
    profiles = cluster_profiles(clusters, subset, VISUAL_GRID, stats, settings.ranges)
    paths = [write_metrics(report, os.path.join(output_dir, METRICS_FILE)),
             write_profiles(profiles, os.path.join(output_dir, PROFILES_FILE))]
    paths.extend(write_trajectories(profiles, output_dir))
    return report, paths


def default_truth(cohort_path: str, truth_path: Optional[str]) -> Optional[Dict[str, int]]:
    """--truth 未给出时使用队列旁边的 x.truth.csv(存在时)."""
    path = truth_path or truth_path_for(cohort_path)
    if truth_path is None and not os.path.exists(path):
        return None
    return read_truth(path)


""" 三、子命令 """


class Command(Base):
    """子命令基类，run返回要打印到标准输出的行(通常是写入的文件路径)."""

    def run(self, args: argparse.Namespace) -> List[str]:
        raise NotImplementedError


class SynthCommand(Command):
    """生成合成队列."""

    def run(self, args: argparse.Namespace) -> List[str]:
        settings = load_settings(args.config, args.seed)
        imbalance = Tools.parse_float_list(args.imbalance) if args.imbalance else DEFAULT_IMBALANCE
        try:
            config = make_separable_preset(args.preset, args.n, settings.seed, imbalance)
        except ValidationError as e:
            raise UsageError(str(e)) from e
        result = generate(config)
        cohort_path = save_cohort(result.cohort, args.output)
        truth_path = write_truth(args.truth or truth_path_for(args.output), result.cohort.patient_ids,
                                 result.phenotype_ids)
        proportions = np.bincount(result.cohort.label_indices(), minlength=N_OUTCOMES) / len(result.cohort)
        summary = f"n={len(result.cohort)} " + " ".join(
            f"{name}={value:.4f}" for name, value in zip(OUTCOME_NAMES, proportions))
        return [summary, cohort_path, truth_path]


class FitCommand(Command):
    """训练一个模型."""

    def run(self, args: argparse.Namespace) -> List[str]:
        settings = load_settings(args.config, args.seed)
        if args.band is not None:
            settings = replace(settings, tskm=replace(settings.tskm, band=args.band))
        tag = args.model
        if args.unweighted:
            if tag != "actpc":
                raise UsageError("--unweighted 只适用于 --model actpc")
            tag = "actpc-unweighted"
        return fit_run(load_cohort(args.cohort), tag, args.output_dir, settings, args.k)


class AssignCommand(Command):
    """为病人分配最终簇."""

    def run(self, args: argparse.Namespace) -> List[str]:
        output = args.output or os.path.join(args.model_dir, f"assignments_{args.split}.csv")
        return [assign_run(load_cohort(args.cohort), args.model_dir, args.split, output)]


class EvaluateCommand(Command):
    """计算测试集指标."""

    def run(self, args: argparse.Namespace) -> List[str]:
        assignments = read_assignments(args.assignments or os.path.join(args.model_dir, TEST_ASSIGNMENTS))
        cohort = load_cohort(args.cohort)
        truth = default_truth(args.cohort, args.truth)
        _, paths = evaluate_run(cohort, args.model_dir, assignments, args.output_dir or args.model_dir, truth)
        return paths


class ReportCommand(Command):
    """由簇画像生成图表."""

    def run(self, args: argparse.Namespace) -> List[str]:
        channel = resolve_channel(args.channel or load_settings(args.config).run.channel)
        profiles = load_profiles(args.profiles)
        return write_report(profiles, args.output_dir or os.path.dirname(args.profiles) or ".", channel)


class CompareCommand(Command):
    """对多个模型执行完整流程并汇总对比表."""

    def run(self, args: argparse.Namespace) -> List[str]:
        settings = load_settings(args.config, args.seed)
        tags = args.models or list(MODEL_TAGS)
        unknown = [t for t in tags if t not in MODEL_TAGS]
        if unknown:
            raise UsageError(f"未知模型 {unknown}, 可选: {', '.join(MODEL_TAGS)}")
        cohort = load_cohort(args.cohort)
        truth = default_truth(args.cohort, args.truth)
        paths, rows = [], []
        for tag in tags:
            model_dir = os.path.join(args.output_dir, tag)
            paths.extend(fit_run(cohort, tag, model_dir, settings, args.k))
            assign_path = assign_run(cohort, model_dir, "test", os.path.join(model_dir, TEST_ASSIGNMENTS))
            report, written = evaluate_run(cohort, model_dir, read_assignments(assign_path), model_dir, truth, tag)
            paths.append(assign_path)
            paths.extend(written)
            rows.append([tag, report.auroc, report.auprc, report.nmi, report.nmi_truth, report.n_clusters])
        comparison = os.path.join(args.output_dir, COMPARISON_FILE)
        try:
            pd.DataFrame(rows, columns=list(COMPARISON_COLUMNS)).to_csv(comparison, index=False, na_rep="",
                                                                         lineterminator="\n")
        except OSError as e:
            raise PhenoIOError(f"写入对比表失败 {comparison}: {e}") from e
        paths.append(comparison)
        return paths


def cmd_synth(args: argparse.Namespace) -> Response:
    return SynthCommand().run(args)


def cmd_fit(args: argparse.Namespace) -> Response:
    return FitCommand().run(args)


def cmd_assign(args: argparse.Namespace) -> Response:
    return AssignCommand().run(args)


def cmd_evaluate(args: argparse.Namespace) -> Response:
    return EvaluateCommand().run(args)


def cmd_report(args: argparse.Namespace) -> Response:
    return ReportCommand().run(args)


def cmd_compare(args: argparse.Namespace) -> Response:
    return CompareCommand().run(args)


HANDLERS = {"synth": cmd_synth, "fit": cmd_fit, "assign": cmd_assign, "evaluate": cmd_evaluate,
            "report": cmd_report, "compare": cmd_compare}


""" 四、参数解析 """


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value 配置文件")
    common.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS, default=None,
                        help=f"日志级别，默认读取 {LoggerUtils.ENV_LEVEL} 或 INFO")
    common.add_argument("--log-file", help="额外写入的日志文件(按50 MB轮转)")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=None, help=f"随机种子，默认读取 {SEED_ENV}")

    parser = argparse.ArgumentParser(prog=PROG, description="生命体征轨迹的时间聚类与表型评估")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common, seeded], help="生成合成队列")
    p.add_argument("--preset", choices=("easy", "hard"), default="easy")
    p.add_argument("--n", type=int, default=500, help="病人数")
    p.add_argument("--imbalance", help="总体结局比例，如 0.939,0.030,0.011,0.020")
    p.add_argument("--output", required=True, help="队列CSV路径")
    p.add_argument("--truth", help="真实表型CSV路径，默认 <output>.truth.csv")

    p = sub.add_parser("fit", parents=[common, seeded], help="训练模型")
    p.add_argument("--cohort", required=True)
    p.add_argument("--model", choices=MODEL_TAGS, required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--k", type=parse_k, default=None, help="簇数或auto(在K=tskm.k_min..k_max上用肘部法，默认2..8)")
    p.add_argument("--band", type=int, default=None, help="DTW的Sakoe-Chiba带宽(分箱数)")
    p.add_argument("--unweighted", action="store_true", help="AC-TPC使用均匀先验(不加权损失)")

    p = sub.add_parser("assign", parents=[common], help="分配最终簇")
    p.add_argument("--cohort", required=True)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--split", choices=("test", "train", "all"), default="test")
    p.add_argument("--output", help="默认 <model-dir>/assignments_<split>.csv")

    p = sub.add_parser("evaluate", parents=[common], help="计算指标与簇画像")
    p.add_argument("--cohort", required=True)
    p.add_argument("--model-dir", required=True)
    p.add_argument("--assignments", help="默认 <model-dir>/assignments_test.csv")
    p.add_argument("--truth", help="真实表型CSV，默认 <cohort>.truth.csv(存在时)")
    p.add_argument("--output-dir", help="默认 <model-dir>")

    p = sub.add_parser("report", parents=[common], help="生成SVG图与CSV")
    p.add_argument("--profiles", required=True, help="evaluate输出的profiles.csv")
    p.add_argument("--channel", help=f"轨迹图通道，默认 {DEFAULT_CHANNEL}")
    p.add_argument("--output-dir", help="默认与profiles同目录")

    p = sub.add_parser("compare", parents=[common, seeded], help="对比多个模型")
    p.add_argument("--cohort", required=True)
    p.add_argument("--output-dir", required=True)
    p.add_argument("--models", nargs="+", default=None, help=f"默认全部: {' '.join(MODEL_TAGS)}")
    p.add_argument("--k", type=parse_k, default=None)
    p.add_argument("--truth")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """命令行入口，返回进程退出码."""
    args = build_parser().parse_args(argv)
    LoggerUtils.set_log(level=args.log_level, sink=args.log_file)
    response = HANDLERS[args.command](args)
    if response.success:
        for line in response.result:
            print(line)
    return response.exit_code


if __name__ == "__main__":
    sys.exit(main())


__all__ = [
    "MODEL_TAGS",
    "RunConfig",
    "Settings",
    "resolve_seed",
    "load_settings",
    "parse_k",
    "som_shape",
    "split_indices",
    "split_cohort",
    "train_model",
    "load_model",
    "prepare_for_model",
    "assign_clusters",
    "fit_run",
    "assign_run",
    "evaluate_run",
    "Command",
    "HANDLERS",
    "cmd_synth",
    "cmd_fit",
    "cmd_assign",
    "cmd_evaluate",
    "cmd_report",
    "cmd_compare",
    "build_parser",
    "main",
]
