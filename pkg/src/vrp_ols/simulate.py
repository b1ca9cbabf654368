"""Monte Carlo checks of the analytic covariances and random counterexample search.

Random streams
--------------
All randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence``. A Monte Carlo run is cut into fixed blocks of
``BLOCK_REPS`` replications; block ``b`` draws from
``SeedSequence(seed, spawn_key=(b,))``. Blocks can therefore run in any order
or in parallel, and their moments are merged in block order (Chan et al.
pairwise update), so results are bit-identical for a given seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from ._parallel import ordered_map
from .decomposition import NONNEG_RTOL, ols_covariance
from .errors import RankDeficient, ShapeMismatch
from .matrixcore import jacobi_eigh
from .model import DesignMatrix, NoiseModel, line_design, validate_design, validate_noise
from .straightline import is_increasing_nonneg

BLOCK_REPS = 8192
CLIP_TOL = 1e-10

BACKSTEP_PROBE = (np.array([0.7, 1.6, 1.62, 1.45]), np.array([2.0, 1.0, 0.8, 0.2]))


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def noise_factor(noise: NoiseModel) -> np.ndarray:
    """``L`` with ``L L' = Sigma``; tiny negative eigenvalues are clipped to 0."""
    if noise.kind == "diagonal":
        return np.diag(np.sqrt(noise.variances))
    values, vectors = jacobi_eigh(noise.covariance())
    if values[0] < -CLIP_TOL * max(1.0, abs(values[-1])):
        raise ValueError("covariance is not positive semidefinite")
    return vectors * np.sqrt(np.clip(values, 0.0, None))


@dataclass(frozen=True, eq=False)
class SimulationResult:
    reps: int
    seed: int
    empirical_cov: np.ndarray
    analytic_cov: np.ndarray
    max_abs_dev: float
    max_rel_dev: float
    empirical_mean: np.ndarray = field(repr=False)

    @property
    def diag_standard_errors(self) -> np.ndarray:
        """Normal-theory standard error of each empirical variance."""
        return np.diag(self.analytic_cov) * np.sqrt(2.0 / (self.reps - 1))

    @property
    def diag_z(self) -> np.ndarray:
        se = self.diag_standard_errors
        diff = np.diag(self.empirical_cov) - np.diag(self.analytic_cov)
        return np.divide(diff, se, out=np.zeros_like(diff), where=se > 0)


def _block_moments(args):
    hat, factor, beta, seed, block, count = args
    rng = block_rng(seed, block)
    z = rng.standard_normal((count, factor.shape[1]))
    est = beta + (z @ factor.T) @ hat.T
    mean = est.mean(axis=0)
    centred = est - mean
    return count, mean, centred.T @ centred


def monte_carlo(d: DesignMatrix, noise: NoiseModel, beta, reps: int, seed: int) -> SimulationResult:
    """Draw ``Y = A beta + eps`` repeatedly and compare the empirical covariance
    of the OLS estimates with the exact sandwich covariance.

    ``max_rel_dev`` is taken over the diagonal (the variances).
    """
    d = validate_design(d)
    noise = validate_noise(noise, d.n)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    if beta.size != d.k:
        raise ShapeMismatch(f"beta has {beta.size} entries, design has {d.k} columns")
    if reps < 2:
        raise ValueError("need at least two replications")
    hat = d.gram_inverse() @ d.rows.T
    factor = noise_factor(noise)
    jobs = []
    for block, start in enumerate(range(0, reps, BLOCK_REPS)):
        jobs.append((hat, factor, beta, seed, block, min(BLOCK_REPS, reps - start)))
    parts = ordered_map(_block_moments, jobs)

    count, mean, m2 = parts[0]
    for n_b, mean_b, m2_b in parts[1:]:
        total = count + n_b
        delta = mean_b - mean
        mean = mean + delta * (n_b / total)
        m2 = m2 + m2_b + np.outer(delta, delta) * (count * n_b / total)
        count = total
    emp = 0.5 * (m2 + m2.T) / (reps - 1)
    ana = ols_covariance(d, noise)
    dev = np.abs(emp - ana)
    diag = np.abs(np.diag(ana))
    rel = np.divide(np.diag(dev), diag, out=np.zeros_like(diag), where=diag > 0)
    return SimulationResult(reps, seed, emp, ana, float(dev.max()), float(rel.max()), mean)


Mode = Literal["increasing", "unrestricted", "two-point"]


@dataclass
class SearchConfig:
    """Random search settings.

    ``n`` is the number of base observations (drawn uniformly from
    ``[n, n_max]`` when ``n_max`` is set); each trial adds one more point.
    The generators receive ``(rng, n)`` and return ``n + 1`` values (design
    points, or variances in non-increasing order) and override ``mode``.
    """

    n: int = 3
    k: int = 2
    trials: int = 1000
    seed: int = 0
    mode: Mode = "unrestricted"
    n_max: int | None = None
    h_range: tuple[float, float] = (0.0, 3.0)
    inject_probe: bool = False
    h_generator: Callable[[np.random.Generator, int], np.ndarray] | None = None
    sigma_generator: Callable[[np.random.Generator, int], np.ndarray] | None = None


@dataclass(frozen=True, eq=False)
class CounterexampleRecord:
    trial: int
    design: np.ndarray
    variances: np.ndarray
    diag_reduction: np.ndarray
    violating: tuple[int, ...]
    category: Literal["monotone-h-violated", "other"]


def default_sigma(rng: np.random.Generator, n: int) -> np.ndarray:
    return np.sort(rng.uniform(0.05, 3.0, n + 1))[::-1]


def _h_values(cfg: SearchConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    if cfg.h_generator is not None:
        return np.asarray(cfg.h_generator(rng, n), dtype=float)
    lo, hi = cfg.h_range
    if cfg.mode == "increasing":
        h = np.sort(rng.uniform(max(lo, 0.0), hi, n + 1))
        return h
    if cfg.mode == "two-point":
        b, c = rng.uniform(-5.0, 5.0, 2)
        return np.array([b if i % 2 == 1 else c for i in range(1, n + 2)])
    return rng.uniform(lo, hi, n + 1)


def _design_rows(cfg: SearchConfig, rng: np.random.Generator, n: int) -> np.ndarray:
    if cfg.k == 2:
        h = _h_values(cfg, rng, n)
        return np.column_stack([np.ones(n + 1), h])
    if cfg.mode != "unrestricted" or cfg.h_generator is not None:
        raise ValueError("k > 2 supports only the unrestricted mode")
    return np.column_stack([np.ones(n + 1), rng.uniform(*cfg.h_range, (n + 1, cfg.k - 1))])


def variance_reduction(rows: np.ndarray, variances: np.ndarray) -> tuple[np.ndarray, float]:
    """``diag(V00 - V11)`` for the design without and with its last row,
    plus the largest variance involved (the scale for sign decisions)."""
    full = validate_design(rows)
    base = validate_design(rows[:-1])
    v11 = ols_covariance(full, validate_noise(variances))
    v00 = ols_covariance(base, validate_noise(variances[:-1]))
    return np.diag(v00) - np.diag(v11), max(np.abs(np.diag(v00)).max(), np.abs(np.diag(v11)).max())


def _inspect(trial: int, rows: np.ndarray, var: np.ndarray) -> CounterexampleRecord | None:
    diff, scale = variance_reduction(rows, var)
    bad = tuple(int(i) for i in np.nonzero(diff < -NONNEG_RTOL * scale)[0])
    if not bad:
        return None
    line = rows.shape[1] == 2
    category = "monotone-h-violated" if line and not is_increasing_nonneg(rows[:, 1]) else "other"
    return CounterexampleRecord(trial, rows, var, diff, bad, category)


def search_counterexamples(cfg: SearchConfig) -> list[CounterexampleRecord]:
    """Sample designs with non-increasing variances and keep every one whose
    augmentation increases some coefficient variance."""
    if cfg.trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    sigma_gen = cfg.sigma_generator or default_sigma
    records = []
    if cfg.inject_probe:
        h, var = BACKSTEP_PROBE
        rec = _inspect(-1, line_design(h).rows.copy(), var)
        if rec is not None:
            records.append(rec)
    for trial in range(cfg.trials):
        n = cfg.n if cfg.n_max is None else int(rng.integers(cfg.n, cfg.n_max + 1))
        rows = _design_rows(cfg, rng, n)
        var = np.asarray(sigma_gen(rng, n), dtype=float)
        try:
            rec = _inspect(trial, rows, var)
        except RankDeficient:
            continue
        if rec is not None:
            records.append(rec)
    return records
