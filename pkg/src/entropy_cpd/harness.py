"""Seeded Monte Carlo experiments: CDF envelopes, threshold quantiles and power.

Only category counts are simulated. Every statistic used here (relative
entropy, AIC, and t/F on the category values 1..k) is a function of the two
count vectors, which keeps 10,000-trial runs cheap even for large ``n``.

Trajectory ``i`` of a run tagged ``tag`` draws from its own Philox stream
keyed by ``(seed, crc32(tag), i)``, so results do not depend on how the
trajectories are split across threads.
"""

from __future__ import annotations

import dataclasses
import io
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._version import __version__
from .bounds import BoundSpec, Family, asymptotic_threshold, be_envelope, bound_quantile, mardia_k_max
from .categorical import CategoricalDistribution, ranked_exponential
from .detect import (
    _fmt,
    delta_aic_counts,
    f_test_counts,
    method_threshold,
    parse_method,
    welch_t_counts,
)
from .divergence import kl_rows
from .exceptions import ConfigError, EntropyCPDError
from .numerics import chi2_cdf, chi2_quantile

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "ResultTable",
    "run_cdf_envelope",
    "run_equal_mean_experiment",
    "run_experiment",
    "run_power_experiment",
    "run_quantile_experiment",
    "simulate_counts",
    "trajectory_stream",
]

EXPERIMENTS = ("cdf_envelope", "quantile_vs_n", "quantile_vs_k", "power_vs_psi", "equal_mean_power")

ONE_SAMPLE_DEFAULT = ("sanov_binom", "sanov_simple", "mardia", "agrawal1", "agrawal2", "agrawal3")
TWO_SAMPLE_DEFAULT = ("twosample1", "twosample2", "twosample3")
POWER_DEFAULT = ("asymptotic2", "twosample3", "aic", "t", "f")
BASELINES = ("t", "f")
TWO_SAMPLE_K_MAX = 8


@dataclass
class ExperimentConfig:
    """Parameters of one simulation study.

    ``x_grid`` (CDF runs) is on the ``2nD`` scale; when empty a grid of
    ``grid_points`` values between the 1% and 99% chi-squared quantiles is used.
    """

    experiment: str
    k: int = 4
    n: int = 100
    phi: float = 0.0
    psi_grid: tuple = tuple(np.round(np.linspace(-0.8, 0.8, 17), 10))
    p1_grid: tuple = (0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4)
    n_grid: tuple = (25, 50, 100, 200, 300, 400, 500)
    k_grid: tuple = (2, 3, 4, 5, 6, 7, 8, 10, 12)
    x_grid: tuple = ()
    grid_points: int = 50
    levels: tuple = (0.75, 0.95)
    trials: int = 10_000
    seed: int = 0
    methods: tuple = ()
    alpha: float = 0.05
    output: str | None = None

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        for name in ("psi_grid", "p1_grid", "n_grid", "k_grid", "x_grid", "levels", "methods"):
            value = getattr(self, name)
            if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
                value = (value,)
            setattr(self, name, tuple(value))
        self.n_grid = tuple(int(v) for v in self.n_grid)
        self.k_grid = tuple(int(v) for v in self.k_grid)
        self.methods = tuple(str(m) for m in self.methods)
        if int(self.trials) != self.trials or self.trials < 1:
            raise ConfigError("trials must be a positive integer")
        self.trials = int(self.trials)
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        self.seed = int(self.seed)
        if self.k < 2 or self.n < 1:
            raise ConfigError("need k >= 2 and n >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.grid_points < 2:
            raise ConfigError("grid_points must be at least 2")
        needed = {
            "quantile_vs_n": ("n_grid", "levels"),
            "quantile_vs_k": ("k_grid", "levels"),
            "power_vs_psi": ("psi_grid",),
            "equal_mean_power": ("p1_grid",),
        }.get(self.experiment, ())
        for name in needed:
            if not getattr(self, name):
                raise ConfigError(f"{name} must be nonempty for {self.experiment}")
        if any(not 0 < lv < 1 for lv in self.levels):
            raise ConfigError("levels must lie in (0, 1)")
        if self.experiment == "equal_mean_power":
            if self.k != 4:
                raise ConfigError("the equal-mean experiment is defined for k = 4")
            if any(not 0 < p < 0.5 for p in self.p1_grid):
                raise ConfigError("p1 values must lie in (0, 0.5)")
        if any(v < 1 for v in self.n_grid) or any(v < 2 for v in self.k_grid):
            raise ConfigError("grid values out of range")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "experiment" not in data:
            raise ConfigError("config needs an 'experiment' key")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, source) -> "ExperimentConfig":
        try:
            data = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {source}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class ResultTable:
    """Column-oriented result with the config that produced it."""

    columns: dict[str, np.ndarray]
    config: ExperimentConfig
    notes: list[str] = field(default_factory=list)

    def __getitem__(self, name):
        return self.columns[name]

    def __len__(self):
        return len(next(iter(self.columns.values())))

    def to_csv(self, target=None) -> str:
        buf = io.StringIO()
        names = list(self.columns)
        buf.write(",".join(names) + "\n")
        for i in range(len(self)):
            buf.write(",".join(_fmt(self.columns[c][i]) for c in names) + "\n")
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    def sidecar(self) -> dict:
        return {"config": self.config.to_dict(), "version": __version__, "notes": self.notes,
                "columns": list(self.columns)}

    def write(self, path) -> tuple[Path, Path]:
        """Write the CSV to ``path`` and the JSON sidecar next to it."""
        path = Path(path)
        side = sidecar_path(path)
        self.to_csv(path)
        side.write_text(json.dumps(self.sidecar(), indent=1))
        return path, side


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_suffix(".json") if path.suffix.lower() == ".csv" else path.with_name(path.name + ".json")


# -- random streams ------------------------------------------------------------

def trajectory_stream(seed: int, tag: str, index: int) -> np.random.Generator:
    """Independent generator for trajectory ``index`` of the run ``tag``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(zlib.crc32(tag.encode()), int(index)))
    return np.random.Generator(np.random.Philox(ss))


def simulate_counts(seed: int, tag: str, trials: int, draws, threads: int = 1) -> np.ndarray:
    """Counts for ``trials`` trajectories; ``draws`` lists ``(dist, n)`` per sample.

    Returns an int array of shape ``(trials, len(draws), k)``. Each trajectory
    draws its samples in order from its own stream.
    """
    draws = [(CategoricalDistribution(np.asarray(getattr(d, "probs", d))), int(n)) for d, n in draws]
    k = draws[0][0].k
    out = np.empty((trials, len(draws), k), dtype=np.int64)

    def fill(lo, hi):
        for i in range(lo, hi):
            rng = trajectory_stream(seed, tag, i)
            for j, (dist, n) in enumerate(draws):
                out[i, j] = rng.multinomial(n, dist.probs)

    threads = max(1, int(threads))
    if threads == 1 or trials < 2 * threads:
        fill(0, trials)
    else:
        edges = np.linspace(0, trials, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, edges[:-1], edges[1:]))
    return out


# -- experiments -----------------------------------------------------------------

def run_cdf_envelope(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Empirical CDF of ``2nD(p_hat || p)`` under uniform ``p`` next to the limit law and envelope."""
    _expect(cfg, "cdf_envelope")
    k, n = cfg.k, cfg.n
    p = CategoricalDistribution.uniform(k)
    counts = simulate_counts(cfg.seed, "cdf_envelope", cfg.trials, [(p, n)], threads)[:, 0]
    stat = 2.0 * n * kl_rows(counts / n, np.broadcast_to(p.probs, counts.shape))
    stat.sort()

    if cfg.x_grid:
        xs = np.asarray(cfg.x_grid, dtype=float)
    else:
        xs = np.linspace(chi2_quantile(0.01, k - 1), chi2_quantile(0.99, k - 1), cfg.grid_points)
    emp = np.searchsorted(stat, xs, side="right") / cfg.trials
    envs = [be_envelope(float(x), n, p) for x in xs]
    return ResultTable({
        "x": xs,
        "empirical_cdf": emp,
        "asymptotic_cdf": np.asarray(chi2_cdf(xs, k - 1)),
        "lower": np.array([e.lower for e in envs]),
        "upper": np.array([e.upper for e in envs]),
        "se": np.sqrt(emp * (1.0 - emp) / cfg.trials),
    }, cfg)


def _safe_quantile(alpha: float, spec: BoundSpec, notes: list[str]) -> float:
    try:
        return bound_quantile(alpha, spec)
    except EntropyCPDError as exc:
        notes.append(f"{spec.label} at n={spec.n}, k={spec.k}, alpha={alpha:g}: {exc}")
        return math.nan


def run_quantile_experiment(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Empirical one- and two-sample quantiles of ``D`` against every threshold approximation."""
    if cfg.experiment not in ("quantile_vs_n", "quantile_vs_k"):
        raise ConfigError(f"expected a quantile experiment, got {cfg.experiment!r}")
    methods = [parse_method(m) for m in (cfg.methods or ONE_SAMPLE_DEFAULT + TWO_SAMPLE_DEFAULT)]
    if any(t.is_aic or t.data_beta for t in methods):
        raise ConfigError("quantile experiments take bound families with fixed beta only")
    vary_n = cfg.experiment == "quantile_vs_n"
    grid = cfg.n_grid if vary_n else cfg.k_grid
    notes: list[str] = []
    if any(t.family.two_sample and t.beta is None for t in methods):
        notes.append("two-sample bounds use beta = 1 (conjectured variants)")
    cols: dict[str, list] = {"n": [], "k": [], "level": [], "empirical_one": [], "empirical_two": [],
                             "asymptotic1": [], "asymptotic2": []}
    for t in methods:
        cols[str(t)] = []

    for g in grid:
        n, k = (g, cfg.k) if vary_n else (cfg.n, g)
        p = CategoricalDistribution.uniform(k)
        tag = f"{cfg.experiment}/{g}"
        one = simulate_counts(cfg.seed, tag + "/one", cfg.trials, [(p, n)], threads)[:, 0]
        d_one = kl_rows(one / n, np.broadcast_to(p.probs, one.shape))
        two_ok = k <= TWO_SAMPLE_K_MAX
        if two_ok:
            two = simulate_counts(cfg.seed, tag + "/two", cfg.trials, [(p, n), (p, n)], threads)
            d_two = kl_rows(two[:, 1] / n, two[:, 0] / n)
            d_two = d_two[np.isfinite(d_two)] if np.any(np.isinf(d_two)) else d_two
        else:
            notes.append(f"k={k}: two-sample runs skipped (k > {TWO_SAMPLE_K_MAX})")
        mardia_ok = 3 <= k <= mardia_k_max(n)
        if not mardia_ok and any(t.family is Family.MARDIA for t in methods):
            notes.append(f"mardia skipped at n={n}, k={k}: outside 3 <= k <= 2 + sqrt(n e^3 / 2 pi)")

        for level in cfg.levels:
            alpha = 1.0 - level
            cols["n"].append(n)
            cols["k"].append(k)
            cols["level"].append(level)
            cols["empirical_one"].append(float(np.quantile(d_one, level)))
            cols["empirical_two"].append(float(np.quantile(d_two, level)) if two_ok else math.nan)
            cols["asymptotic1"].append(asymptotic_threshold(alpha, k, n))
            cols["asymptotic2"].append(asymptotic_threshold(alpha, k, n, n))
            for t in methods:
                fam = t.family
                if (fam is Family.MARDIA and not mardia_ok) or (fam.two_sample and not two_ok):
                    value = math.nan
                else:
                    spec = t.spec(n, k, n if fam.two_sample else None, p)
                    value = _safe_quantile(alpha, spec, notes)
                cols[str(t)].append(value)
    return ResultTable({c: np.asarray(v) for c, v in cols.items()}, cfg, notes)


def _decisions(method: str, first: np.ndarray, second: np.ndarray, n: int, k: int, alpha: float):
    """Boolean rejections of ``method`` for each trajectory (rows of count arrays)."""
    if method in BASELINES:
        values = np.arange(1, k + 1, dtype=float)
        if method == "t":
            stat, thr = welch_t_counts(first, second, values, alpha)
            return stat > thr
        folded, _ = f_test_counts(first, second, values, alpha)
        return folded > 1.0
    tag = parse_method(method)
    if tag.is_aic:
        return delta_aic_counts(first, second) > 0
    stat = kl_rows(second / n, first / n)
    if tag.data_beta:
        q, p = first / n, second / n
        thr = np.full(stat.shape, math.nan)
        full = q.min(axis=1) > 0
        beta = 2.0 / q[full].min(axis=1) - 2.0 * (p[full] / q[full]).min(axis=1)
        thr[full] = [method_threshold(tag, alpha, n, k, m=n, beta=float(b)) for b in beta]
    else:
        thr = method_threshold(tag, alpha, n, k, m=n, p=CategoricalDistribution.uniform(k))
    with np.errstate(invalid="ignore"):
        return np.isinf(stat) | (stat > thr)


def _power_table(cfg: ExperimentConfig, key: str, pairs, threads: int) -> ResultTable:
    methods = cfg.methods or POWER_DEFAULT
    for m in methods:
        if m not in BASELINES:
            parse_method(m)
    n, k = cfg.n, cfg.k
    cols: dict[str, list] = {key: []}
    for m in methods:
        cols[m] = []
        cols[m + "_se"] = []
    for i, (g, q, p) in enumerate(pairs):
        counts = simulate_counts(cfg.seed, f"{cfg.experiment}/{i}", cfg.trials, [(q, n), (p, n)], threads)
        first, second = counts[:, 0].astype(float), counts[:, 1].astype(float)
        cols[key].append(g)
        for m in methods:
            rate = float(np.mean(_decisions(m, first, second, n, k, cfg.alpha)))
            cols[m].append(rate)
            cols[m + "_se"].append(math.sqrt(rate * (1.0 - rate) / cfg.trials))
    notes = [f"{m}: beta = 1 (conjectured variant)" for m in methods
             if m not in BASELINES and not parse_method(m).is_aic
             and parse_method(m).family.needs_beta and not parse_method(m).data_beta
             and parse_method(m).beta is None]
    notes.append("t and F tests use the category values 1..k as reals")
    return ResultTable({c: np.asarray(v) for c, v in cols.items()}, cfg, notes)


def run_power_experiment(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Rejection rates when the first half follows ``pi^{phi}`` and the second ``pi^{phi+psi}``."""
    _expect(cfg, "power_vs_psi")
    q = ranked_exponential(cfg.phi, cfg.k)
    pairs = [(psi, q, ranked_exponential(cfg.phi + psi, cfg.k)) for psi in cfg.psi_grid]
    return _power_table(cfg, "psi", pairs, threads)


def run_equal_mean_experiment(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    """Rejection rates for ``q`` uniform against ``p = (p1, 1/2 - p1, 1/2 - p1, p1)``."""
    _expect(cfg, "equal_mean_power")
    q = CategoricalDistribution.uniform(4)
    pairs = [(p1, q, CategoricalDistribution([p1, 0.5 - p1, 0.5 - p1, p1])) for p1 in cfg.p1_grid]
    return _power_table(cfg, "p1", pairs, threads)


_RUNNERS = {
    "cdf_envelope": run_cdf_envelope,
    "quantile_vs_n": run_quantile_experiment,
    "quantile_vs_k": run_quantile_experiment,
    "power_vs_psi": run_power_experiment,
    "equal_mean_power": run_equal_mean_experiment,
}


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> ResultTable:
    return _RUNNERS[cfg.experiment](cfg, threads=threads)


def _expect(cfg: ExperimentConfig, name: str) -> None:
    if cfg.experiment != name:
        raise ConfigError(f"expected experiment {name!r}, got {cfg.experiment!r}")
