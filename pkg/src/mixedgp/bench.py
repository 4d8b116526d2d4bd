"""Benchmark harness: synthetic simulators, design generators, accuracy
metrics, and replicated model comparisons.

Three benchmark suites are provided, selected by id:

* suite 4 - 3 quantitative + 3 qualitative factors, 81-run training
  design (three replicates of the 3^3 factorial plus a random Latin
  hypercube), 1215-run test set; all eight fittable model kinds apply.
* suite 5 - 9 + 9 factors, 243-run training design (a fixed strength-3
  regular 3-level fraction plus a Latin hypercube), 1215-run test set.
* suite 6 - same simulator as suite 5 with the full 19,683-run factorial
  as training data and 100 targets sharing one level combination;
  evaluated with the localized method (``lezgp``).

Every cell derives its own random substream from (seed, suite, rep,
model), so tables reproduce exactly for a fixed seed regardless of
execution order or worker count.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, replace

import numpy as np

from .core import Dataset, MixedInput, ProblemSchema
from .errors import ValidationError
from .inference import FitConfig, fit
from .kernels import MODEL_KINDS
from .lezgp import lezgp_predict_with_plan
from .predict import predict_batch

__all__ = [
    "prod_sum_response",
    "six_term_response",
    "latin_hypercube",
    "factorial_design",
    "three_level_fraction_243",
    "rmse",
    "nse",
    "BenchResult",
    "BENCH_SUITES",
    "BENCH_MODELS",
    "make_benchmark_data",
    "run_benchmark",
    "summarize",
    "results_to_csv",
    "summary_table",
]

BENCH_SUITES = (4, 5, 6)
BENCH_MODELS = MODEL_KINDS + ("lezgp",)
_FACTORIAL_ROW_CAP = 10**6

# localized-method tuning for suite 6: rule-of-thumb value for the
# 19,683-run / (p=q=9, m=3) protocol, giving a 163-row key subset
SUITE6_NS = 7


# ---------------------------------------------------------------------------
# simulators


def prod_sum_response(X, Z) -> np.ndarray:
    """Deterministic test simulator on [0,1]^3 with three 3-level factors.

    The response multiplies a level-selected polynomial by the sum of a
    level-selected cosine and sine wave, so it carries both multiplicative
    and additive structure across the level combinations.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=np.int64))
    if X.shape[1] != 3 or Z.shape[1] != 3:
        raise ValidationError("prod_sum_response needs 3 quantitative and 3 qualitative columns")
    if np.any(Z < 1) or np.any(Z > 3):
        raise ValidationError("levels must lie in 1..3")
    x1, x2, x3 = X[:, 0], X[:, 1], X[:, 2]
    f = np.stack([x1 + x2**2 + x3**3, x1**2 + x2 + x3**3, x1**3 + x2**2 + x3])
    g = np.stack(
        [
            np.cos(x1) + np.cos(2 * x2) + np.cos(3 * x3),
            np.cos(3 * x1) + np.cos(2 * x2) + np.cos(x3),
            np.cos(2 * x1) + np.cos(x2) + np.cos(3 * x3),
        ]
    )
    h = np.stack(
        [
            np.sin(x1) + np.sin(2 * x2) + np.sin(3 * x3),
            np.sin(3 * x1) + np.sin(2 * x2) + np.sin(x3),
            np.sin(2 * x1) + np.sin(x2) + np.sin(3 * x3),
        ]
    )
    rows = np.arange(X.shape[0])
    return f[Z[:, 0] - 1, rows] * (g[Z[:, 1] - 1, rows] + h[Z[:, 2] - 1, rows])


def _powers(s: int, l: int) -> tuple[int, int, int]:
    # frequency/exponent selectors cycling with the level and block index
    return ((s + l + 1) % 3, (s + l + 2) % 3, (s + l) % 3)


def _f_term(a, b, c, s, l):
    r1, r2, r3 = _powers(s, l)
    return a ** (r1 + 1) + b ** (r2 + 1) + c ** (r3 + 1)


def _g_term(a, b, c, s, l):
    r1, r2, r3 = _powers(s, l)
    return np.cos((r2 + 1) * a) + np.cos((r1 + 1) * b) + np.cos((r3 + 1) * c)


def _h_term(a, b, c, s, l):
    r1, r2, r3 = _powers(s, l)
    return np.sin((r3 + 1) * a) + np.sin((r2 + 1) * b) + np.sin((r1 + 1) * c)


def _select(term, abc, levels, l):
    out = np.zeros(levels.shape[0])
    for s in (1, 2, 3):
        mask = levels == s
        if np.any(mask):
            out[mask] = term(abc[0][mask], abc[1][mask], abc[2][mask], s, l)
    return out


def six_term_response(X, Z) -> np.ndarray:
    """Deterministic test simulator on [0,1]^9 with nine 3-level factors.

    Six products of level-selected polynomial, cosine and sine blocks over
    the three coordinate groups (x1..x3, x4..x6, x7..x9); factors 1-3
    select the polynomial blocks, 4-6 the cosine blocks, 7-9 the sine
    blocks.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=np.int64))
    if X.shape[1] != 9 or Z.shape[1] != 9:
        raise ValidationError("six_term_response needs 9 quantitative and 9 qualitative columns")
    if np.any(Z < 1) or np.any(Z > 3):
        raise ValidationError("levels must lie in 1..3")
    grp = [
        (X[:, 0], X[:, 1], X[:, 2]),
        (X[:, 3], X[:, 4], X[:, 5]),
        (X[:, 6], X[:, 7], X[:, 8]),
    ]
    i1, i2, i3 = Z[:, 0], Z[:, 1], Z[:, 2]
    j1, j2, j3 = Z[:, 3], Z[:, 4], Z[:, 5]
    k1, k2, k3 = Z[:, 6], Z[:, 7], Z[:, 8]
    return (
        _select(_f_term, grp[0], i1, 1) * _select(_g_term, grp[0], j1, 1)
        + _select(_f_term, grp[1], i2, 2) * _select(_g_term, grp[1], j2, 2)
        + _select(_f_term, grp[2], i3, 3) * _select(_g_term, grp[2], j3, 3)
        + _select(_f_term, grp[2], i1, 1) * _select(_h_term, grp[2], k1, 1)
        + _select(_f_term, grp[1], i2, 2) * _select(_h_term, grp[1], k2, 2)
        + _select(_f_term, grp[0], i3, 3) * _select(_h_term, grp[0], k3, 3)
    )


# ---------------------------------------------------------------------------
# designs


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def latin_hypercube(n: int, p: int, seed) -> np.ndarray:
    """n points in [0,1]^p with one point per axis stratum per column,
    uniform within each stratum; deterministic for a given seed."""
    if n < 1 or p < 1:
        raise ValidationError("latin_hypercube needs n >= 1 and p >= 1")
    rng = _as_rng(seed)
    u = rng.random((n, p))
    strata = np.column_stack([rng.permutation(n) for _ in range(p)])
    return (strata + u) / n


def factorial_design(m, replicates: int = 1) -> np.ndarray:
    """All level combinations in lexicographic order, repeated
    ``replicates`` times (1-based levels)."""
    m = [int(v) for v in m]
    if any(v < 2 for v in m):
        raise ValidationError("every factor needs at least 2 levels")
    if replicates < 1:
        raise ValidationError("replicates must be >= 1")
    total = replicates * int(np.prod(m))
    if total > _FACTORIAL_ROW_CAP:
        raise ValidationError(f"factorial design would have {total} rows (cap {_FACTORIAL_ROW_CAP})")
    rows = list(itertools.product(*[range(1, v + 1) for v in m]))
    return np.array(rows * replicates, dtype=np.int64)


# Columns over GF(3)^5 defining a 243-run regular fraction of the 3^9
# factorial: the five basic columns plus four generators.  Any three
# columns are linearly independent, so the realized design is an
# orthogonal array of strength 3 (all triples of factors fully balanced).
_FRACTION_COLUMNS = np.array(
    [
        [1, 0, 0, 0, 0],
        [0, 1, 0, 0, 0],
        [0, 0, 1, 0, 0],
        [0, 0, 0, 1, 0],
        [0, 0, 0, 0, 1],
        [1, 1, 1, 1, 1],
        [1, 1, 1, 2, 2],
        [1, 1, 2, 1, 2],
        [1, 1, 2, 2, 1],
    ],
    dtype=np.int64,
).T


def three_level_fraction_243() -> np.ndarray:
    """Fixed 243-run, 9-factor, 3-level regular fractional factorial
    (strength-3 orthogonal array); levels are 1-based."""
    base = np.array(list(itertools.product(range(3), repeat=5)), dtype=np.int64)
    return (base @ _FRACTION_COLUMNS) % 3 + 1


# ---------------------------------------------------------------------------
# metrics


def rmse(pred, actual) -> float:
    """Root mean squared prediction error."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape or pred.ndim != 1:
        raise ValidationError("rmse needs two equal-length vectors")
    if pred.size == 0:
        raise ValidationError("rmse of empty vectors is undefined")
    d = pred - actual
    return float(np.sqrt(np.mean(d * d)))


def nse(pred, actual, center: str = "predicted") -> float:
    """Efficiency score 1 - sum((pred-actual)^2) / sum((pred-ybar)^2).

    ``center`` picks the mean in the denominator: ``predicted``
    (default here) uses the mean of the predictions, ``observed`` the
    conventional mean of the actuals.  Equals 1 exactly when predictions
    match actuals; errors out when the denominator vanishes.
    """
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape or pred.ndim != 1 or pred.size < 2:
        raise ValidationError("nse needs two equal-length vectors of size >= 2")
    if center == "predicted":
        ybar = float(np.mean(pred))
    elif center == "observed":
        ybar = float(np.mean(actual))
    else:
        raise ValidationError("center must be 'predicted' or 'observed'")
    denom = float(np.sum((pred - ybar) ** 2))
    if denom == 0.0:
        raise ValidationError("nse denominator is zero (all predictions identical)")
    return 1.0 - float(np.sum((pred - actual) ** 2)) / denom


# ---------------------------------------------------------------------------
# harness


@dataclass(frozen=True)
class BenchResult:
    example: int
    model: str
    rep: int
    rmse: float
    nse: float
    seconds: float
    error: str = ""


def make_benchmark_data(example: int, rng) -> dict:
    """Training dataset plus test inputs/responses for one replication.

    The random stream is consumed in a fixed order (training quantitative
    design first, then the test design), so replications are reproducible
    from their substream alone.
    """
    rng = _as_rng(rng)
    if example == 4:
        schema = ProblemSchema(3, 3, (3, 3, 3))
        Ztr = factorial_design(schema.m, replicates=3)
        Xtr = latin_hypercube(Ztr.shape[0], 3, rng)
        Zte = factorial_design(schema.m, replicates=45)
        Xte = latin_hypercube(Zte.shape[0], 3, rng)
        sim = prod_sum_response
    elif example == 5:
        schema = ProblemSchema(9, 9, (3,) * 9)
        Ztr = three_level_fraction_243()
        Xtr = latin_hypercube(Ztr.shape[0], 9, rng)
        combos = rng.choice(3**9, size=1215, replace=False)
        Zte = np.column_stack([(combos // 3**k) % 3 for k in range(8, -1, -1)]) + 1
        Xte = latin_hypercube(1215, 9, rng)
        sim = six_term_response
    elif example == 6:
        schema = ProblemSchema(9, 9, (3,) * 9)
        Ztr = factorial_design(schema.m, replicates=1)
        Xtr = latin_hypercube(Ztr.shape[0], 9, rng)
        zstar = rng.integers(1, 4, size=9)
        Zte = np.tile(zstar, (100, 1))
        Xte = latin_hypercube(100, 9, rng)
        sim = six_term_response
    else:
        raise ValidationError(f"unknown benchmark suite {example}; valid suites: 4, 5, 6")
    train = Dataset(schema, Xtr, Ztr, sim(Xtr, Ztr))
    targets = [MixedInput(tuple(x), tuple(z)) for x, z in zip(Xte, Zte)]
    return {"schema": schema, "train": train, "targets": targets, "y_test": sim(Xte, Zte)}


def _cell_seed(seed: int, example: int, rep: int, model: str) -> int:
    idx = BENCH_MODELS.index(model)
    ss = np.random.SeedSequence([int(seed), int(example), int(rep), idx])
    return int(ss.generate_state(1)[0])


def _validate_models(example: int, models) -> list[str]:
    models = list(models)
    if not models:
        raise ValidationError("no models requested")
    for name in models:
        if name not in BENCH_MODELS:
            raise ValidationError(
                f"unknown model {name!r}; valid models: {', '.join(BENCH_MODELS)}"
            )
    if example == 6:
        bad = [m for m in models if m != "lezgp"]
        if bad:
            raise ValidationError(
                "suite 6 trains on 19,683 runs and is evaluated with the localized "
                f"method only; requested {', '.join(bad)} (use model 'lezgp')"
            )
    elif "lezgp" in models:
        raise ValidationError("model 'lezgp' applies to suite 6 only")
    return models


def run_benchmark(
    example: int,
    reps: int,
    models,
    config: FitConfig = FitConfig(),
    nse_center: str = "predicted",
) -> list[BenchResult]:
    """Replicated comparison: per replication, generate the suite's
    train/test designs, fit each requested model, record accuracy and fit
    time.  Fit failures are recorded in the cell and the harness moves
    on.  Deterministic for a fixed ``config.seed``."""
    if example not in BENCH_SUITES:
        raise ValidationError(f"unknown benchmark suite {example}; valid suites: 4, 5, 6")
    if reps < 0:
        raise ValidationError("reps must be >= 0")
    models = _validate_models(example, models)
    out: list[BenchResult] = []
    for rep in range(reps):
        data = make_benchmark_data(
            example, np.random.SeedSequence([int(config.seed), example, rep])
        )
        for model_name in models:
            cfg = replace(config, seed=_cell_seed(config.seed, example, rep, model_name))
            t0 = time.perf_counter()
            try:
                if model_name == "lezgp":
                    results, _, _ = lezgp_predict_with_plan(
                        data["train"], data["targets"], SUITE6_NS, "eezgp", cfg
                    )
                else:
                    fitted = fit(data["train"], model_name, cfg)
                    results = predict_batch(fitted, data["targets"])
                seconds = time.perf_counter() - t0
                pred = np.array([r.mean for r in results])
                out.append(
                    BenchResult(
                        example, model_name, rep,
                        rmse(pred, data["y_test"]),
                        nse(pred, data["y_test"], center=nse_center),
                        seconds,
                    )
                )
            except Exception as e:  # noqa: BLE001 - cell failures must not kill the table
                seconds = time.perf_counter() - t0
                out.append(
                    BenchResult(
                        example, model_name, rep, float("nan"), float("nan"), seconds, str(e)
                    )
                )
    return out


def summarize(results) -> list[dict]:
    """Per-model median/mean/sd of RMSE and efficiency over replications."""
    by_model: dict[str, list[BenchResult]] = {}
    for r in results:
        by_model.setdefault(r.model, []).append(r)
    out = []
    for model_name, cells in by_model.items():
        r = np.array([c.rmse for c in cells])
        s = np.array([c.nse for c in cells])
        t = np.array([c.seconds for c in cells])
        out.append(
            {
                "model": model_name,
                "reps": len(cells),
                "failures": int(sum(1 for c in cells if c.error)),
                "rmse_median": float(np.nanmedian(r)) if np.any(~np.isnan(r)) else float("nan"),
                "rmse_mean": float(np.nanmean(r)) if np.any(~np.isnan(r)) else float("nan"),
                "rmse_sd": float(np.nanstd(r)) if np.any(~np.isnan(r)) else float("nan"),
                "nse_median": float(np.nanmedian(s)) if np.any(~np.isnan(s)) else float("nan"),
                "nse_mean": float(np.nanmean(s)) if np.any(~np.isnan(s)) else float("nan"),
                "nse_sd": float(np.nanstd(s)) if np.any(~np.isnan(s)) else float("nan"),
                "seconds_median": float(np.median(t)) if t.size else float("nan"),
            }
        )
    return out


def results_to_csv(results, include_timing: bool = True) -> str:
    """Canonical results table ``example,model,rep,rmse,nse,seconds``.

    With ``include_timing`` off the seconds column is written as 0.0,
    making the bytes reproducible run to run.
    """
    lines = ["example,model,rep,rmse,nse,seconds"]
    for r in results:
        secs = r.seconds if include_timing else 0.0
        lines.append(
            f"{r.example},{r.model},{r.rep},{repr(float(r.rmse))},"
            f"{repr(float(r.nse))},{repr(float(secs))}"
        )
    return "\n".join(lines) + "\n"


def summary_table(summary) -> str:
    """Fixed-width text table of a :func:`summarize` result."""
    cols = [
        ("model", 7), ("reps", 5), ("failures", 9),
        ("rmse_median", 12), ("rmse_mean", 12), ("rmse_sd", 12),
        ("nse_median", 11), ("nse_mean", 11), ("nse_sd", 11),
        ("seconds_median", 15),
    ]
    def fmt(v, width):
        if isinstance(v, float):
            return f"{v:.4f}".rjust(width)
        return str(v).rjust(width)
    lines = ["".join(name.rjust(width) for name, width in cols)]
    for row in summary:
        lines.append("".join(fmt(row[name], width) for name, width in cols))
    return "\n".join(lines) + "\n"
