"""Synchronous parameter-server SGD with quantized worker gradients.

Each round, worker k computes the gradient of its static shard, compresses
it (plain index quantization, a private mechanism, or nothing for the
``exact`` baseline), and the server averages the decoded gradients in
worker order before taking a step.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import privacy
from .data_io import load_dataset, load_manifest, parse_libsvm
from .errors import Diverged, ParameterRange
from .pointset import Family, make_pointset
from .quantizer import NORM_BITS, RngState, dequantize, exact_second_moment, index_bits, quantize
from .encoder import encode, pad_to_valid
from .tasks import Task, TaskKind, local_gradient, make_logistic_task, shard_bounds, synth_least_squares

# -- step sizes ----------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    eta: float


@dataclass(frozen=True)
class SmoothConstant:
    """Constant step 1/(L + 1/γ) with γ = (R/σ)√(2/T), for L-smooth objectives."""

    L: float
    R: float
    sigma: float
    T: int


@dataclass(frozen=True)
class InverseT:
    c: float


def step_size(schedule, t):
    if isinstance(schedule, Constant):
        if schedule.eta <= 0:
            raise ParameterRange("eta must be positive")
        return schedule.eta
    if isinstance(schedule, SmoothConstant):
        if schedule.L <= 0 or schedule.R <= 0 or schedule.T <= 0 or schedule.sigma < 0:
            raise ParameterRange("SmoothConstant needs L, R, T > 0 and sigma >= 0")
        return 1.0 / (schedule.L + schedule.sigma * math.sqrt(schedule.T / 2.0) / schedule.R)
    if isinstance(schedule, InverseT):
        if schedule.c <= 0:
            raise ParameterRange("c must be positive")
        return schedule.c / (t + 1)
    raise TypeError(f"unknown schedule {schedule!r}")


def suboptimality_bound(L, R, sigma, T):
    """R√(2σ²/T) + L R²/T: expected loss gap of the averaged iterate."""
    return R * math.sqrt(2.0 * sigma**2 / T) + L * R**2 / T


# -- configuration ---------------------------------------------------------------


@dataclass(frozen=True)
class QuantizerSpec:
    """How workers compress gradients.

    ``family`` is a point-set family or ``"exact"`` for uncompressed f32
    gradients. ``mechanism`` is ``"none"``, ``"rr"`` or ``"rappor"``.
    ``pointset_args`` is forwarded to :func:`make_pointset`.
    """

    family: str = "cp"
    s: int = 1
    mechanism: str = "none"
    epsilon: float | None = None
    pointset_args: dict = field(default_factory=dict)

    @property
    def exact(self):
        return self.family == "exact"


@dataclass(frozen=True, eq=False)
class SimConfig:
    task: Task
    workers: int
    quantizer: QuantizerSpec
    schedule: object
    iterations: int
    seed: int = 0
    eval_every: int = 10
    theta0: np.ndarray | None = None
    test_features: object = None
    test_labels: np.ndarray | None = None
    track_variance: bool = False
    threads: int | None = None


@dataclass
class RunMetrics:
    records: list = field(default_factory=list)
    bits_per_iteration: int = 0
    diverged: bool = False
    theta: np.ndarray | None = None
    theta_avg: np.ndarray | None = None
    avg_loss_gap: float | None = None
    max_quantizer_variance: float | None = None

    CSV_COLUMNS = ("iter", "param_error", "loss", "class_error", "cum_bits", "ms")

    def to_csv(self, timing=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.records:
            w.writerow([
                r["iter"],
                _fmt(r["param_error"]),
                _fmt(r["loss"]),
                _fmt(r["class_error"]),
                r["cum_bits"],
                f"{r['ms']:.3f}" if timing else "0",
            ])
        return buf.getvalue()

    def summary(self):
        last = self.records[-1] if self.records else {}
        return {
            "iterations": last.get("iter", 0),
            "diverged": self.diverged,
            "bits_per_iteration": self.bits_per_iteration,
            "final_param_error": _round(last.get("param_error")),
            "final_loss": _round(last.get("loss")),
            "final_class_error": _round(last.get("class_error")),
            "cum_bits": last.get("cum_bits", 0),
            "avg_loss_gap": _round(self.avg_loss_gap),
            "max_quantizer_variance": _round(self.max_quantizer_variance),
        }


def _fmt(x):
    return "" if x is None else f"{x:.10e}"


def _round(x):
    return None if x is None else float(f"{x:.10e}")


def bits_per_iteration(config_or_spec, d=None, m=None):
    """Per-worker bits for one round: s⌈log2 m⌉ + 32, m + 32 (RAPPOR) or 32d (exact)."""
    spec, d, m = _resolve_bits(config_or_spec, d, m)
    if spec.exact:
        return NORM_BITS * d
    if spec.mechanism == "rappor":
        return m + NORM_BITS
    s = 1 if spec.mechanism == "rr" else spec.s
    return index_bits(m, s) + NORM_BITS


def _resolve_bits(obj, d, m):
    if isinstance(obj, SimConfig):
        spec, d = obj.quantizer, obj.task.d
    else:
        spec = obj
    if not spec.exact and m is None:
        m = make_pointset(spec.family, d, **spec.pointset_args).m
    return spec, d, m


# -- the simulation loop ---------------------------------------------------------


class _Worker:
    def __init__(self, k, shard, rng):
        self.k = k
        self.shard = shard
        self.rng = rng


def _compress(spec, ps, g, rng):
    """The server's decoded copy of one worker gradient."""
    if spec.exact:
        with np.errstate(over="ignore"):  # overflow surfaces as divergence
            return g.astype(np.float32).astype(float)
    if spec.mechanism == "rr":
        return privacy.rr_dequantize(ps, privacy.rr_privatize(ps, g, spec.epsilon, rng))
    if spec.mechanism == "rappor":
        return privacy.rappor_dequantize(ps, privacy.rappor_privatize(ps, g, spec.epsilon, rng))
    return dequantize(ps, quantize(ps, g, spec.s, rng))


def worker_variance(ps, g, s):
    """Exact E||ĝ - g||^2 of s-fold index quantization of g."""
    norm = np.linalg.norm(g)
    if norm == 0:
        return 0.0
    v, _ = pad_to_valid(g / norm, ps.family)
    if len(v) < ps.pad_d:
        v = np.concatenate((v, np.zeros(ps.pad_d - len(v))))
    v = v / max(1.0, np.linalg.norm(v))
    second = exact_second_moment(ps, encode(ps, v))
    return norm**2 * (second - float(v @ v)) / s


def least_squares_smooth_schedule(task, spec, workers, T, theta0=None):
    """SmoothConstant parameters measured on a least-squares task.

    L = 2 λ_max(AᵀA/n), R = ||θ* - θ0|| and σ² is the exact variance of the
    aggregated quantized gradient at θ0.
    """
    if task.kind is not TaskKind.LEAST_SQUARES or task.theta_star is None:
        raise ParameterRange("needs a least-squares task with known θ*")
    theta0 = np.zeros(task.d) if theta0 is None else np.asarray(theta0, dtype=float)
    A = np.asarray(task.features)
    L = 2.0 * float(np.linalg.eigvalsh(A.T @ A / task.n)[-1])
    R = float(np.linalg.norm(task.theta_star - theta0))
    var = 0.0
    if not spec.exact:
        ps = make_pointset(spec.family, task.d, **spec.pointset_args)
        for shard in shard_bounds(task.n, workers):
            var += worker_variance(ps, local_gradient(task, shard, theta0), spec.s)
    return SmoothConstant(L, R, math.sqrt(var) / workers, int(T))


def server_round(config, ps, workers, theta, pool=None):
    """One synchronous round; returns (aggregated gradient, per-worker gradients)."""
    spec = config.quantizer

    def job(w):
        g = local_gradient(config.task, w.shard, theta)
        return g, _compress(spec, ps, g, w.rng)

    results = list(pool.map(job, workers)) if pool is not None else [job(w) for w in workers]
    total = np.zeros(config.task.d)
    for _, est in results:
        total += est
    return total / len(workers), [g for g, _ in results]


def _thread_count(config):
    if config.threads is not None:
        return max(1, int(config.threads))
    return max(1, int(os.environ.get("VQSGD_THREADS", "1")))


def make_workers(config):
    rng = RngState(config.seed)
    bounds = shard_bounds(config.task.n, config.workers)
    return [_Worker(k, b, rng.spawn(k + 1)) for k, b in enumerate(bounds)]


def build_pointset(config):
    spec = config.quantizer
    if spec.exact:
        return None
    return make_pointset(spec.family, config.task.d, **spec.pointset_args)


def run(config, progress=None):
    """Run T synchronous rounds and record metrics every ``eval_every`` rounds."""
    if config.workers < 1 or config.iterations < 1:
        raise ParameterRange("workers and iterations must be positive")
    task = config.task
    ps = build_pointset(config)
    workers = make_workers(config)
    bits = bits_per_iteration(config.quantizer, task.d, None if ps is None else ps.m)
    metrics = RunMetrics(bits_per_iteration=bits)

    theta = np.zeros(task.d) if config.theta0 is None else np.array(config.theta0, dtype=float)
    theta_sum = theta.copy()
    start = time.perf_counter()
    threads = _thread_count(config)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    track = config.track_variance and ps is not None and config.quantizer.mechanism == "none"
    max_var = 0.0 if track else None

    def record(t):
        rec = {
            "iter": t,
            "param_error": (
                None if task.theta_star is None
                else float(np.linalg.norm(task.theta_star - theta))
            ),
            "loss": task.loss(theta),
            "class_error": None,
            "cum_bits": t * config.workers * bits,
            "ms": 1000.0 * (time.perf_counter() - start),
        }
        if task.kind is TaskKind.LOGISTIC:
            if config.test_features is not None:
                rec["class_error"] = task.classification_error(
                    theta, config.test_features, config.test_labels
                )
            else:
                rec["class_error"] = task.classification_error(theta)
        metrics.records.append(rec)
        if progress is not None:
            progress(rec)

    try:
        record(0)
        for t in range(config.iterations):
            g_hat, grads = server_round(config, ps, workers, theta, pool)
            if track:
                var = sum(worker_variance(ps, g, config.quantizer.s) for g in grads)
                max_var = max(max_var, var / config.workers**2)
            theta = theta - step_size(config.schedule, t) * g_hat
            if not np.all(np.isfinite(theta)):
                raise Diverged(f"non-finite parameters at iteration {t + 1}")
            theta_sum += theta
            if (t + 1) % config.eval_every == 0 or t + 1 == config.iterations:
                record(t + 1)
    except Diverged:
        metrics.diverged = True
    finally:
        if pool is not None:
            pool.shutdown()

    metrics.theta = theta
    metrics.max_quantizer_variance = max_var
    if not metrics.diverged:
        metrics.theta_avg = theta_sum / (config.iterations + 1)
        opt = 0.0 if task.kind is TaskKind.LEAST_SQUARES and task.theta_star is not None else None
        if opt is not None:
            metrics.avg_loss_gap = task.loss(metrics.theta_avg) - opt
    return metrics


# -- JSON configuration ------------------------------------------------------------


def schedule_from_dict(spec):
    kind = spec["kind"].lower()
    if kind == "constant":
        return Constant(float(spec["eta"]))
    if kind in ("smooth_constant", "smoothconstant"):
        return SmoothConstant(float(spec["L"]), float(spec["R"]), float(spec["sigma"]), int(spec["T"]))
    if kind in ("inverse_t", "inverset"):
        return InverseT(float(spec["c"]))
    raise ParameterRange(f"unknown schedule kind {spec['kind']!r}")


def task_from_dict(spec, base_dir="."):
    """Build (task, test_features, test_labels) from a config's ``task`` block."""
    kind = spec["kind"].lower()
    if kind == "least_squares":
        return synth_least_squares(int(spec["n"]), int(spec["d"]), int(spec.get("seed", 0))), None, None
    if kind != "logistic":
        raise ParameterRange(f"unknown task kind {spec['kind']!r}")
    base = Path(base_dir)
    if "manifest" in spec:
        entry = load_manifest(base / spec["manifest"])[spec["dataset"]]
        train, test = load_dataset(entry)
    else:
        d = spec.get("d")
        train = parse_libsvm(base / spec["path"], d)
        test = parse_libsvm(base / spec["test_path"], d) if spec.get("test_path") else None
    task = make_logistic_task(train)
    if test is None:
        return task, None, None
    if test.d != task.d:
        raise ParameterRange(f"train has d={task.d} but test has d={test.d}; set d in the manifest")
    return task, test.features, test.labels


def config_from_dict(raw, base_dir="."):
    task, test_X, test_y = task_from_dict(raw["task"], base_dir)
    q = raw.get("quantizer", {})
    spec = QuantizerSpec(
        family=str(q.get("family", "cp")).lower(),
        s=int(q.get("s", 1)),
        mechanism=str(q.get("mechanism", "none")).lower(),
        epsilon=q.get("epsilon"),
        pointset_args=dict(q.get("pointset_args", {})),
    )
    if not spec.exact:
        Family.parse(spec.family)
    if spec.mechanism not in ("none", "rr", "rappor"):
        raise ParameterRange(f"unknown mechanism {spec.mechanism!r}")
    return SimConfig(
        task=task,
        workers=int(raw["workers"]),
        quantizer=spec,
        schedule=schedule_from_dict(raw["schedule"]),
        iterations=int(raw["iterations"]),
        seed=int(raw.get("seed", 0)),
        eval_every=int(raw.get("eval_every", 10)),
        test_features=test_X,
        test_labels=test_y,
        track_variance=bool(raw.get("track_variance", False)),
    )


def load_config(path):
    path = Path(path)
    return config_from_dict(json.loads(path.read_text()), base_dir=path.parent)
