"""Synthetic observational studies with a known treatment effect.

Continuous covariates are equicorrelated standard normals.  Binary covariates
use a two-step recipe: draw one ``p_i ~ Uniform(0.3, 0.7)`` per unit, then
each binary column is an independent ``Bernoulli(p_i)`` draw.  Treatment is
``Bernoulli(expit(X @ treat_coefs))`` and the outcome is
``TE * T + X @ outcome_coefs + N(0, sigma)``; neither model has an intercept.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from timatch.dataset import CovariateKind, Dataset

logger = logging.getLogger(__name__)

SeedLike = Union[int, Tuple[int, ...]]

_S_GRADED_3 = (0.8, 0.8, 0.5, 0.5, 0.2)
_D_GRADED_3 = (0.8, 0.5, 0.2)
_S_GRADED_10 = (0.8,) * 4 + (0.5,) * 4 + (0.2,) * 2
_D_GRADED_6 = (0.8, 0.8, 0.5, 0.5, 0.2, 0.2)

# scenario number -> (n, k_c, k_d, treatment coefs, outcome coefs)
_PRESETS = {
    1: (500, 5, 3, (0.8,) * 8, (0.8,) * 8),
    2: (500, 5, 3, _S_GRADED_3 + _D_GRADED_3, _S_GRADED_3 + _D_GRADED_3),
    3: (500, 5, 3, (0.8, 0.8, 0.5, 0.5, 0.8) + (0.8, 0.5, 0.8), _S_GRADED_3 + _D_GRADED_3),
    4: (4000, 10, 6, (0.8,) * 16, (0.8,) * 16),
    5: (4000, 10, 6, _S_GRADED_10 + _D_GRADED_6, _S_GRADED_10 + _D_GRADED_6),
    6: (
        4000,
        10,
        6,
        (0.8,) * 4 + (0.5,) * 4 + (0.8, 0.8) + (0.8, 0.8, 0.5, 0.5, 0.8, 0.8),
        _S_GRADED_10 + _D_GRADED_6,
    ),
}
_RHO = {"A": 0.0, "B": 0.5}
SCENARIO_IDS = tuple(f"{s}{v}" for s in sorted(_PRESETS) for v in "AB")


@dataclass(frozen=True)
class ScenarioSpec:
    scenario_id: str
    n: int
    k_c: int
    k_d: int
    rho: float
    treat_coefs: tuple
    outcome_coefs: tuple
    treatment_effect: float = 1.0
    noise_sigma: float = 1.0
    seed: SeedLike = 0

    def __post_init__(self):
        k = self.k_c + self.k_d
        if len(self.treat_coefs) != k or len(self.outcome_coefs) != k:
            raise ValueError(f"coefficient vectors must have length k_c + k_d = {k}")
        if not -1.0 / max(self.k_c - 1, 1) < self.rho < 1.0 and self.k_c > 1:
            raise ValueError(f"rho={self.rho} does not give a valid equicorrelation matrix")

    @property
    def k(self) -> int:
        return self.k_c + self.k_d

    def with_seed(self, seed: SeedLike) -> "ScenarioSpec":
        return dataclasses.replace(self, seed=seed)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["treat_coefs"] = list(self.treat_coefs)
        d["outcome_coefs"] = list(self.outcome_coefs)
        d["seed"] = list(self.seed) if isinstance(self.seed, tuple) else self.seed
        return d


def scenario(scenario_id: str, seed: SeedLike = 0, **overrides) -> ScenarioSpec:
    """Preset for scenarios ``1A`` .. ``6B``; keyword overrides replace fields.

    ``confounding`` scales both coefficient vectors; ``confounding=0`` gives a
    randomized design with no covariate effects.
    """
    m = re.fullmatch(r"([1-6])([AB])", str(scenario_id).strip().upper())
    if not m:
        raise ValueError(f"unknown scenario {scenario_id!r}; expected one of {', '.join(SCENARIO_IDS)}")
    num, variant = int(m.group(1)), m.group(2)
    n, k_c, k_d, tc, oc = _PRESETS[num]
    scale = float(overrides.pop("confounding", 1.0))
    tc = tuple(scale * c for c in tc)
    oc = tuple(scale * c for c in oc)
    spec = ScenarioSpec(
        scenario_id=f"{num}{variant}",
        n=n,
        k_c=k_c,
        k_d=k_d,
        rho=_RHO[variant],
        treat_coefs=tuple(tc),
        outcome_coefs=tuple(oc),
        seed=seed,
    )
    return dataclasses.replace(spec, **overrides) if overrides else spec


def equicorrelated_normal(rng: np.random.Generator, n: int, k: int, rho: float) -> np.ndarray:
    """n draws of a k-variate standard normal with common pairwise correlation."""
    if k == 0:
        return np.empty((n, 0))
    cov = np.full((k, k), rho)
    np.fill_diagonal(cov, 1.0)
    L = np.linalg.cholesky(cov)
    return rng.standard_normal((n, k)) @ L.T


def generate(spec: ScenarioSpec) -> Tuple[Dataset, float]:
    """Draw one dataset; returns it with the true treatment effect."""
    if spec.n < 10:
        raise ValueError(f"n={spec.n} is too small for a simulation (need n >= 10)")
    seed = list(spec.seed) if isinstance(spec.seed, tuple) else spec.seed
    rng = np.random.default_rng(seed)
    n = spec.n
    Xc = equicorrelated_normal(rng, n, spec.k_c, spec.rho)
    p = rng.uniform(0.3, 0.7, size=n)
    Xd = (rng.random((n, spec.k_d)) < p[:, None]).astype(float)
    X = np.hstack([Xc, Xd])
    T = (rng.random(n) < expit(X @ np.asarray(spec.treat_coefs))).astype(np.int8)
    eps = rng.normal(0.0, spec.noise_sigma, size=n)
    Y = spec.treatment_effect * T + X @ np.asarray(spec.outcome_coefs) + eps
    names = [f"Xc{j + 1}" for j in range(spec.k_c)] + [f"Xd{j + 1}" for j in range(spec.k_d)]
    kinds = [CovariateKind.CONTINUOUS] * spec.k_c + [CovariateKind.DISCRETE] * spec.k_d
    ds = Dataset(X, tuple(kinds), T, Y, tuple(names))
    return ds, float(spec.treatment_effect)


# --------------------------------------------------------------------------
# benchmark harness

REPLICATE_FIELDS = (
    "replicate",
    "cate",
    "bias",
    "naive_dim",
    "naive_bias",
    "L1",
    "L1m",
    "Tf",
    "n_treated",
    "n_strata",
    "time_seconds",
    "error",
)
SUMMARY_METRICS = ("cate", "bias", "naive_bias", "L1", "L1m", "Tf", "time_seconds")


def run_replicate(spec: ScenarioSpec, replicate: int, options=None) -> dict:
    """Generate replicate ``replicate`` of ``spec`` and run the full pipeline.

    Failures are returned as a row with ``error`` set instead of raising.
    """
    from timatch.pipeline import run_pipeline

    row = dict.fromkeys(REPLICATE_FIELDS)
    row["replicate"] = replicate
    row["error"] = ""
    t0 = time.perf_counter()
    try:
        ds, te = generate(spec.with_seed((int(spec.seed), int(replicate))))
        rep = run_pipeline(ds, options)
        row.update(
            cate=rep.estimate.overall,
            bias=rep.estimate.overall - te,
            naive_dim=rep.estimate.naive_dim,
            naive_bias=rep.estimate.naive_dim - te,
            L1=rep.imbalance.l1_pre,
            L1m=rep.imbalance.l1_post,
            Tf=rep.match.t_fraction,
            n_treated=ds.n_treated,
            n_strata=len(rep.match.strata),
        )
    except Exception as exc:  # a failed replicate is flagged, the sweep continues
        logger.warning("replicate %d failed: %s", replicate, exc)
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["time_seconds"] = time.perf_counter() - t0
    return row


def _run_replicate_star(args):
    return run_replicate(*args)


def summarize(rows: Sequence[dict]) -> dict:
    """Mean and 95% normal-approximation interval of each metric over good rows."""
    good = [r for r in rows if not r["error"]]
    out = {"replicates": len(rows), "failed": len(rows) - len(good)}
    for m in SUMMARY_METRICS:
        vals = np.array([r[m] for r in good], dtype=float)
        if vals.size == 0:
            out[m] = {"mean": None, "lower_95_ci": None, "upper_95_ci": None}
            continue
        mean = float(vals.mean())
        half = 1.96 * float(vals.std(ddof=1)) / math.sqrt(vals.size) if vals.size > 1 else 0.0
        out[m] = {"mean": mean, "lower_95_ci": mean - half, "upper_95_ci": mean + half}
    return out


def run_benchmark(spec: ScenarioSpec, replicates: int, threads: int = 1, options=None) -> dict:
    """Run ``replicates`` independent replicates of a scenario.

    Replicate r draws from the seed pair ``(spec.seed, r)`` so results do not
    depend on the worker count.

    Returns:
        ``{"rows": [...], "summary": {...}}`` with one row per replicate.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    if isinstance(spec.seed, tuple):
        raise ValueError("benchmark needs an integer master seed")
    jobs = [(spec, r, options) for r in range(replicates)]
    if threads <= 1:
        rows = [_run_replicate_star(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_replicate_star, jobs))
    return {"rows": rows, "summary": summarize(rows)}


# --------------------------------------------------------------------------
# survey-like data at population scale

# name -> levels (None = continuous)
SURVEY_COLUMNS = (
    ("HighBP", 2),
    ("CholCheck", 2),
    ("BMI", None),
    ("Smoker", 2),
    ("Stroke", 2),
    ("HeartDiseaseorAttack", 2),
    ("PhysActivity", 2),
    ("Fruits", 2),
    ("Veggies", 2),
    ("HvyAlcoholConsump", 2),
    ("AnyHealthcare", 2),
    ("NoDocbcCost", 2),
    ("GenHlth", 5),
    ("MentHlth", None),
    ("PhysHlth", None),
    ("DiffWalk", 2),
    ("Sex", 2),
    ("Age", 13),
    ("Education", 6),
    ("Income", 8),
    ("SleepHours", None),
    ("Region", 5),
)


def generate_survey(n: int = 250_000, seed: SeedLike = 0) -> Dataset:
    """Health-survey-shaped data: 22 mixed covariates, binary treatment and outcome.

    A latent frailty score drives most covariates, the treatment (a chronic
    risk factor) and the binary outcome, so the columns are correlated and
    confounded. Nothing here reproduces a real survey.
    """
    if n < 10:
        raise ValueError("n must be >= 10")
    rng = np.random.default_rng(list(seed) if isinstance(seed, tuple) else seed)
    frail = rng.standard_normal(n)
    cols, kinds = [], []
    for name, levels in SURVEY_COLUMNS:
        load = rng.uniform(-0.8, 0.8)
        latent = load * frail + rng.standard_normal(n)
        if levels is None:
            if name == "BMI":
                x = np.clip(28 + 5 * latent, 12, 98).round(0)
            elif name == "SleepHours":
                x = np.clip(7 + 1.2 * latent, 2, 14).round(1)
            else:
                # days out of 30, mostly zero
                days = np.clip(np.round(30 * expit(latent - 1.0)), 1, 30)
                x = np.where(rng.random(n) < expit(latent - 1.0), days, 0.0)
            kinds.append(CovariateKind.CONTINUOUS)
        else:
            cuts = np.quantile(latent, np.sort(rng.uniform(0.05, 0.95, levels - 1)))
            x = np.searchsorted(cuts, latent).astype(float)
            kinds.append(CovariateKind.DISCRETE)
        cols.append(x)
    X = np.column_stack(cols)
    t_index = -0.4 + 0.8 * frail + 0.3 * (X[:, 0] - 0.5) + 0.05 * (X[:, 17] - 6)
    T = (rng.random(n) < expit(t_index)).astype(np.int8)
    y_index = -2.0 + 0.9 * frail + 0.35 * T + 0.04 * (X[:, 2] - 28) + 0.6 * X[:, 0]
    Y = (rng.random(n) < expit(y_index)).astype(float)
    return Dataset(X, tuple(kinds), T, Y, tuple(c for c, _ in SURVEY_COLUMNS))
