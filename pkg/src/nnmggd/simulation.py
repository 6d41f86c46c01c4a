"""Monte Carlo size and power experiments.

Every trial draws its data from a stream keyed by ``(seed, m, trial)``, so
the same trial sees the same location, standard draws and bootstrap seed in
every experiment and under every scatter model. Results do not depend on the
number of worker processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy

from . import __version__, constants
from .distribution import MggdParams, sample_mggd, sample_multivariate_t
from .estimation import TylerConfig
from .exceptions import DataError, NnMggdError
from .gof import METHODS, TestConfig, run_tests

logger = logging.getLogger(__name__)

KINDS = ("size", "power", "sensitivity", "robustness")
SCATTER_MODELS = ("A", "B", "C")


def scatter_diagonal(model: str, m: int) -> np.ndarray:
    """Diagonal of the scatter matrix: A identity, B linear 1 to 5, C linear 1 to 20."""
    if model == "A":
        return np.ones(m)
    if model == "B":
        return np.linspace(1.0, 5.0, m)
    if model == "C":
        return np.linspace(1.0, 20.0, m)
    raise DataError(f"unknown scatter model {model!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo experiment.

    ``kind`` selects the design:

    size
        data from MGGD(mu, Sigma, beta0) under each model in ``scatter_models``
    power
        data from a multivariate t with ``nu`` degrees of freedom, likewise
    sensitivity
        data from MGGD(mu, Sigma, beta) for each beta in ``beta_grid``,
        tested against the null with the shape pinned at ``beta0``
    robustness
        size and power under each model in ``scatter_models``
    """

    kind: str = "size"
    n: int = 50
    m_list: tuple = (20, 50)
    beta0: float = 0.5
    nu: float = 3.0
    beta_grid: tuple = (0.3, 0.5, 0.7)
    scatter_models: tuple = ("A",)
    alpha: float = 0.05
    bootstrap_B: int = 100
    n_mc: int = 200
    seed: int = 0
    workers: int = 1
    methods: tuple = METHODS
    rho: float | None = None
    beta_bounds: tuple = constants.TEST_BETA_BOUNDS

    def __post_init__(self):
        # normalise lists read from config files
        for name in ("m_list", "beta_grid", "scatter_models", "methods", "beta_bounds"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.kind not in KINDS:
            raise DataError(f"kind must be one of {KINDS}")
        if min(self.n, self.bootstrap_B, self.n_mc, self.workers, *self.m_list) < 1:
            raise DataError("all counts must be >= 1")
        if not 0 < self.alpha <= 1:
            raise DataError("alpha must lie in (0, 1]")
        if self.kind == "sensitivity" and self.beta0 not in self.beta_grid:
            raise DataError("beta_grid must contain beta0")
        for model in self.scatter_models:
            scatter_diagonal(model, 1)
        for meth in self.methods:
            if meth not in METHODS:
                raise DataError(f"unknown method {meth!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; ``workers`` is excluded since it cannot change results."""
        d = self.to_dict()
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class Scenario:
    """Data-generating law for one table row."""

    label: str
    family: str  # "mggd" or "t"
    shape: float  # beta for mggd, nu for t
    scatter: str = "A"
    fixed_beta: float | None = None


@dataclass
class RejectionRow:
    method: str
    m: int
    scenario: str
    n_reject: int
    n_trials: int
    n_failed: int
    pvalues: list = field(default_factory=list, repr=False)

    @property
    def rate(self) -> float:
        return self.n_reject / self.n_trials if self.n_trials else math.nan

    @property
    def pct(self) -> float:
        return 100.0 * self.rate

    @property
    def mc_se(self) -> float:
        """Binomial Monte Carlo standard error in percentage points."""
        p = self.rate
        return 100.0 * math.sqrt(p * (1 - p) / self.n_trials) if self.n_trials else math.nan


CSV_HEADER = ("method", "m", "scenario", "rejection_pct", "mc_se", "n_reject", "n_trials", "n_failed")


@dataclass
class RejectionTable:
    rows: list

    def get(self, method: str, m: int, scenario: str) -> RejectionRow:
        for row in self.rows:
            if (row.method, row.m, row.scenario) == (method, m, scenario):
                return row
        raise KeyError((method, m, scenario))

    def rate(self, method: str, m: int, scenario: str) -> float:
        return self.get(method, m, scenario).rate

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.method, r.m, r.scenario, f"{r.pct:.2f}", f"{r.mc_se:.2f}", r.n_reject, r.n_trials, r.n_failed])
        return buf.getvalue()


def _trial_stream(seed: int, m: int, trial: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(m, trial))


def trial_data(scenario: Scenario, n: int, m: int, seed: int, trial: int):
    """Dataset and bootstrap seed for one trial."""
    ss = _trial_stream(seed, m, trial)
    data_ss, boot_ss = ss.spawn(2)
    rng = np.random.default_rng(data_ss)
    mu = rng.uniform(-1.0, 1.0, m)
    sigma = np.diag(scatter_diagonal(scenario.scatter, m))
    if scenario.family == "mggd":
        x = sample_mggd(MggdParams(mu, sigma, scenario.shape), n, rng)
    elif scenario.family == "t":
        x = sample_multivariate_t(mu, sigma, scenario.shape, n, rng)
    else:
        raise DataError(f"unknown family {scenario.family!r}")
    boot_seed = int(boot_ss.generate_state(1, np.uint64)[0])
    return x, boot_seed


def _run_trial(trial: int, scenario: Scenario, m: int, cfg: ExperimentConfig):
    """p-value per method, or None if the trial failed."""
    x, boot_seed = trial_data(scenario, cfg.n, m, cfg.seed, trial)
    test_cfg = TestConfig(
        alpha=min(cfg.alpha, 0.5),  # the decision is taken from the p-value below
        bootstrap_B=cfg.bootstrap_B,
        tyler=TylerConfig(rho=cfg.rho),
        seed=boot_seed,
        fixed_beta=scenario.fixed_beta,
        beta_bounds=cfg.beta_bounds,
    )
    try:
        reports = run_tests(x, test_cfg, cfg.methods)
    except (NnMggdError, np.linalg.LinAlgError) as exc:
        logger.warning("trial %d (m=%d, %s) failed: %s", trial, m, scenario.label, exc)
        return None
    return tuple(reports[meth].p_value for meth in cfg.methods)


def rejects(p_value: float, alpha: float) -> bool:
    # alpha = 1 means always reject
    return alpha >= 1 or p_value < alpha


def scenarios_for(cfg: ExperimentConfig) -> list:
    def suffix(model, always):
        # size and power rows keep the bare label under the identity scatter
        return f"_{model}" if always or model != "A" else ""

    def null(model, always=False):
        return Scenario(f"null_beta{cfg.beta0:g}" + suffix(model, always), "mggd", cfg.beta0, model)

    def alt(model, always=False):
        return Scenario(f"t{cfg.nu:g}" + suffix(model, always), "t", cfg.nu, model)

    if cfg.kind == "size":
        return [null(model) for model in cfg.scatter_models]
    if cfg.kind == "power":
        return [alt(model) for model in cfg.scatter_models]
    if cfg.kind == "sensitivity":
        return [Scenario(f"beta{b:g}", "mggd", b, "A", fixed_beta=cfg.beta0) for b in cfg.beta_grid]
    return [s for model in cfg.scatter_models for s in (null(model, True), alt(model, True))]


def run_experiment(cfg: ExperimentConfig) -> RejectionTable:
    """Run every (m, scenario) cell of ``cfg`` and tabulate rejection rates."""
    rows = []
    pool = ProcessPoolExecutor(max_workers=cfg.workers) if cfg.workers > 1 else None
    try:
        for m in cfg.m_list:
            for scen in scenarios_for(cfg):
                trials = range(cfg.n_mc)
                if pool is None:
                    results = [_run_trial(t, scen, m, cfg) for t in trials]
                else:
                    results = list(pool.map(_run_trial, trials, [scen] * cfg.n_mc, [m] * cfg.n_mc, [cfg] * cfg.n_mc))
                ok = [r for r in results if r is not None]
                n_failed = len(results) - len(ok)
                for j, meth in enumerate(cfg.methods):
                    pv = [r[j] for r in ok]
                    n_rej = sum(rejects(p, cfg.alpha) for p in pv)
                    rows.append(RejectionRow(meth, m, scen.label, n_rej, len(ok), n_failed, pv))
                logger.info("m=%d %s: %s", m, scen.label, ", ".join(f"{r.method} {r.pct:.1f}%" for r in rows[-len(cfg.methods):]))
    finally:
        if pool is not None:
            pool.shutdown()
    return RejectionTable(rows)


def run_size_experiment(cfg: ExperimentConfig) -> RejectionTable:
    return run_experiment(replace(cfg, kind="size"))


def run_power_experiment(cfg: ExperimentConfig) -> RejectionTable:
    return run_experiment(replace(cfg, kind="power"))


def run_sensitivity(cfg: ExperimentConfig, beta_grid=None) -> RejectionTable:
    grid = cfg.beta_grid if beta_grid is None else tuple(beta_grid)
    return run_experiment(replace(cfg, kind="sensitivity", beta_grid=grid))


def run_scale_robustness(cfg: ExperimentConfig) -> RejectionTable:
    models = cfg.scatter_models if len(cfg.scatter_models) > 1 else SCATTER_MODELS
    return run_experiment(replace(cfg, kind="robustness", scatter_models=models))


def pvalue_ecdf(pvalues):
    """Sorted p-values, their ECDF values and the Kolmogorov distance to the uniform law."""
    p = np.sort(np.asarray(pvalues, dtype=float))
    n = len(p)
    if n == 0:
        raise DataError("no p-values")
    # ECDF at each distinct value, taking the last row of every tie block
    values, counts = np.unique(p, return_counts=True)
    ecdf = np.cumsum(counts) / n
    below = ecdf - counts / n
    ks = float(max(np.max(ecdf - values), np.max(values - below)))
    return values, ecdf, ks


def emit_pvalue_ecdf(pvalues, path) -> float:
    """Write ``p,ecdf`` pairs to ``path`` and return the Kolmogorov distance to uniform."""
    values, ecdf, ks = pvalue_ecdf(pvalues)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("p", "ecdf"))
        for v, e in zip(values, ecdf):
            w.writerow((repr(float(v)), repr(float(e))))
    return ks


def manifest(cfg: ExperimentConfig) -> dict:
    """Reproducibility record.

    Holds no timestamps and omits the worker count, so reruns are
    byte-identical for any degree of parallelism.
    """
    config = cfg.to_dict()
    config.pop("workers")
    return {
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "config": config,
        "versions": {
            "nnmggd": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
