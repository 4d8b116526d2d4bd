"""Localized fitting for large training sets.

For a target input, only training rows sharing at least ``n_s``
qualitative levels with it (the key subset) are kept, and a compact model
(isotropic-adjustment by default) is fitted on that subset.  Targets are
grouped by their qualitative level combination so each group costs one
fit.  The tuning parameter trades subset size against locality; the
recommendation rule searches n_s in (q/2, q] for the subset size closest
to 10(p+q) while staying above the model's parameter count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, MixedInput, normalize_quantitative
from .errors import EmptyKeySubsetError, SubsetGuidanceError, ValidationError
from .inference import FitConfig, FittedModel, fit, free_param_count
from .predict import PredictionResult, predict_one

__all__ = [
    "count_matching_levels",
    "select_key_subset",
    "full_factorial_subset_size",
    "recommend_ns",
    "ns_candidates",
    "LezgpGroup",
    "LezgpPlan",
    "plan_groups",
    "lezgp_predict",
    "lezgp_predict_with_plan",
]


def count_matching_levels(z, z_star) -> int:
    """Number of positions where the two level vectors agree."""
    z = tuple(int(v) for v in z)
    z_star = tuple(int(v) for v in z_star)
    if len(z) != len(z_star):
        raise ValidationError(f"level vectors differ in length: {len(z)} vs {len(z_star)}")
    return sum(1 for a, b in zip(z, z_star) if a == b)


def _subset_indices(dataset: Dataset, z_star, n_s: int) -> np.ndarray:
    z_star = dataset.schema.validate_z(z_star, "target")
    if not 0 <= n_s <= dataset.schema.q:
        raise ValidationError(f"n_s must lie in 0..{dataset.schema.q}, got {n_s}")
    matches = np.sum(dataset.Z == np.asarray(z_star, dtype=np.int64), axis=1)
    return np.flatnonzero(matches >= n_s)


def select_key_subset(dataset: Dataset, w_star, n_s: int) -> Dataset:
    """Rows sharing at least ``n_s`` qualitative levels with the target;
    original row order is preserved."""
    z_star = w_star.z if isinstance(w_star, MixedInput) else tuple(w_star)
    idx = _subset_indices(dataset, z_star, n_s)
    if idx.size == 0:
        raise EmptyKeySubsetError(
            f"no training rows share >= {n_s} levels with combination {tuple(z_star)}",
            n_s=n_s,
            levels=tuple(int(v) for v in z_star),
        )
    return dataset.subset(idx)


def full_factorial_subset_size(m: int, q: int, n_s: int) -> int:
    """Key-subset size on a full factorial with q symmetric m-level factors.

    Exact combinatorial count: sum over i >= n_s of C(q, i) (m-1)^(q-i),
    the number of level combinations agreeing with any fixed target in at
    least n_s positions.
    """
    if m < 2 or q < 1:
        raise ValidationError("need m >= 2 and q >= 1")
    if not 0 <= n_s <= q:
        raise ValidationError(f"n_s must lie in 0..{q}, got {n_s}")
    return sum(math.comb(q, i) * (m - 1) ** (q - i) for i in range(n_s, q + 1))


def ns_candidates(dataset: Dataset, z_star) -> list[tuple[int, int]]:
    """(n_s, actual key-subset size) for every integer n_s in (q/2, q]."""
    q = dataset.schema.q
    z_star = dataset.schema.validate_z(z_star, "target")
    matches = np.sum(dataset.Z == np.asarray(z_star, dtype=np.int64), axis=1)
    lo = q // 2 + 1
    return [(n_s, int(np.sum(matches >= n_s))) for n_s in range(lo, q + 1)]


def recommend_ns(dataset: Dataset, w_star, kind: str = "eezgp") -> int:
    """Smallest-subset search over n_s in (q/2, q].

    Returns the admissible n_s whose actual key-subset size is closest to
    10(p+q), ties broken toward the larger (cheaper) n_s.  Admissible
    means the subset exceeds the model's parameter count; if no candidate
    qualifies the search fails with guidance to try a smaller n_s outside
    the recommended interval.
    """
    z_star = w_star.z if isinstance(w_star, MixedInput) else tuple(w_star)
    schema = dataset.schema
    target = 10 * (schema.p + schema.q)
    limit = free_param_count(kind, schema)
    best = None
    for n_s, size in ns_candidates(dataset, z_star):
        if size <= limit:
            continue
        d = abs(size - target)
        if best is None or d < best[0] or (d == best[0] and n_s > best[1]):
            best = (d, n_s)
    if best is None:
        raise SubsetGuidanceError(
            f"no n_s in ({schema.q / 2:g}, {schema.q}] gives a key subset larger than "
            f"the {limit} parameters of kind {kind!r}; consider a smaller n_s "
            "at a higher computational cost"
        )
    return best[1]


@dataclass(frozen=True)
class LezgpGroup:
    """One qualitative level combination with its key subset and targets."""

    levels: tuple[int, ...]
    n_s: int
    subset_indices: tuple[int, ...]
    target_indices: tuple[int, ...]

    @property
    def subset_size(self) -> int:
        return len(self.subset_indices)


@dataclass(frozen=True)
class LezgpPlan:
    """Grouping of targets by level combination; every target belongs to
    exactly one group."""

    n_s: int | None  # uniform tuning value, None when recommended per group
    groups: tuple[LezgpGroup, ...]

    def __post_init__(self):
        seen: set[int] = set()
        for g in self.groups:
            for t in g.target_indices:
                if t in seen:
                    raise ValidationError("a target was assigned to more than one group")
                seen.add(t)


def plan_groups(dataset: Dataset, targets, n_s: int | None, kind: str = "eezgp") -> LezgpPlan:
    """Group targets by identical qualitative part and select one key
    subset per group (recommending n_s per group when it is None)."""
    targets = list(targets)
    order: dict[tuple[int, ...], list[int]] = {}
    for i, w in enumerate(targets):
        z = dataset.schema.validate_z(
            w.z if isinstance(w, MixedInput) else tuple(w), f"target {i + 1}"
        )
        order.setdefault(z, []).append(i)
    groups = []
    for z, idxs in order.items():
        ns_g = recommend_ns(dataset, z, kind) if n_s is None else n_s
        sel = _subset_indices(dataset, z, ns_g)
        if sel.size == 0:
            raise EmptyKeySubsetError(
                f"no training rows share >= {ns_g} levels with combination {z}",
                n_s=ns_g,
                levels=z,
            )
        groups.append(LezgpGroup(z, ns_g, tuple(int(v) for v in sel), tuple(idxs)))
    return LezgpPlan(n_s, tuple(groups))


def lezgp_predict_with_plan(
    dataset: Dataset,
    targets,
    n_s: int | None,
    kind: str = "eezgp",
    config: FitConfig = FitConfig(),
) -> tuple[list[PredictionResult], LezgpPlan, dict[tuple[int, ...], FittedModel]]:
    """Localized prediction returning the plan and per-group models too.

    The training set is normalized once up front (idempotent), so every
    group's subset shares the same quantitative scale and targets are
    interpreted in original units.
    """
    targets = list(targets)
    if n_s is not None and not 0 <= n_s <= dataset.schema.q:
        raise ValidationError(f"n_s must lie in 0..{dataset.schema.q}, got {n_s}")
    dataset = normalize_quantitative(dataset)
    plan = plan_groups(dataset, targets, n_s, kind)
    results: list[PredictionResult | None] = [None] * len(targets)
    models: dict[tuple[int, ...], FittedModel] = {}
    for group in plan.groups:
        subset = dataset.subset(np.asarray(group.subset_indices, dtype=np.int64))
        model = fit(subset, kind, config)
        models[group.levels] = model
        for t in group.target_indices:
            results[t] = predict_one(model, targets[t])
    return list(results), plan, models  # type: ignore[arg-type]


def lezgp_predict(
    dataset: Dataset,
    targets,
    n_s: int | None,
    kind: str = "eezgp",
    config: FitConfig = FitConfig(),
) -> list[PredictionResult]:
    """Localized prediction: per level-combination group, fit the key
    subset and predict; results come back in input order."""
    results, _, _ = lezgp_predict_with_plan(dataset, targets, n_s, kind, config)
    return results
