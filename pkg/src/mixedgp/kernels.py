"""Covariance functions for mixed quantitative/qualitative Gaussian processes.

Two model families live here:

* the additive indicator models (``ezgp``, ``eezgp``), where a base
  Gaussian-correlation process over the quantitative inputs is adjusted by
  one independent process per qualitative factor that is active only when
  two inputs share that factor's level;
* six classical mixed-input baselines (``ec``, ``mc``, ``uc`` and their
  additive counterparts ``ad_ec``, ``ad_mc``, ``ad_uc``) built from
  level-correlation matrices combined with Gaussian correlations either
  multiplicatively or additively.

Full covariance matrices are assembled in a vectorized form; for the
indicator models this is the Schur-product form

    Phi = A0 + sum_h sum_l (B_hl B_hl^T) o A_hl

with ``B_hl`` the 0/1 indicator column of level l in factor h.  The naive
entry-by-entry assembly is also provided as an independent oracle for
tests.  A demonstration covariance ``phi_star`` (indicator functions
placed inside a multiplicative structure) is included only to exhibit its
counter-intuitive correlation ordering; it is not fittable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, MixedInput
from .errors import ValidationError

__all__ = [
    "THETA_MIN",
    "ANGLE_MIN",
    "MODEL_KINDS",
    "BASELINE_KINDS",
    "INDICATOR_KINDS",
    "EzGPParams",
    "EEzGPParams",
    "BaselineParams",
    "CovMatrix",
    "gauss_corr",
    "ezgp_cov",
    "eezgp_cov",
    "phi_star",
    "tau_qual",
    "tau_matrix",
    "hypersphere_factor",
    "hypersphere_corr",
    "baseline_cov",
    "assemble_cov_matrix",
    "assemble_cov_matrix_elementwise",
    "cross_cov_matrix",
    "prior_variance",
    "KernelWorkspace",
]

# positivity guards; strict positivity has no numeric floor in exact arithmetic
THETA_MIN = 1e-6
ANGLE_MIN = 1e-6

INDICATOR_KINDS = ("ezgp", "eezgp")
BASELINE_KINDS = ("ec", "mc", "uc", "ad_ec", "ad_mc", "ad_uc")
MODEL_KINDS = INDICATOR_KINDS + BASELINE_KINDS


def _check_kind(kind: str) -> str:
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}; valid kinds: {', '.join(MODEL_KINDS)}")
    return kind


def _pos_array(a, name, minimum=THETA_MIN):
    a = np.asarray(a, dtype=float)
    if a.size and float(np.min(a)) < minimum:
        raise ValidationError(f"{name} entries must be >= {minimum:g}")
    return a


@dataclass(frozen=True)
class EzGPParams:
    """Hyperparameters of the per-level anisotropic indicator model.

    ``sigma2`` holds the base variance followed by one adjustment variance
    per qualitative factor.  ``theta_adj[h]`` is a (p, m_h) matrix: one
    positive correlation weight per quantitative coordinate and level.
    """

    mu: float
    sigma2: np.ndarray  # (q + 1,)
    theta0: np.ndarray  # (p,)
    theta_adj: tuple[np.ndarray, ...]  # q matrices of shape (p, m_h)

    def __post_init__(self):
        sigma2 = np.asarray(self.sigma2, dtype=float)
        theta0 = _pos_array(self.theta0, "theta0")
        theta_adj = tuple(_pos_array(t, f"theta_adj[{h}]") for h, t in enumerate(self.theta_adj))
        if sigma2.ndim != 1 or theta0.ndim != 1:
            raise ValidationError("sigma2 and theta0 must be 1-D")
        if np.any(sigma2 < 0) or not np.any(sigma2 > 0):
            raise ValidationError("sigma2 entries must be >= 0 with at least one positive")
        q = sigma2.size - 1
        if q < 1 or len(theta_adj) != q:
            raise ValidationError(f"expected {max(q, 1)} adjustment blocks, got {len(theta_adj)}")
        p = theta0.size
        for h, t in enumerate(theta_adj):
            if t.ndim != 2 or t.shape[0] != p or t.shape[1] < 2:
                raise ValidationError(
                    f"theta_adj[{h}] must have shape (p={p}, m_h>=2), got {t.shape}"
                )
        for a in (sigma2, theta0) + theta_adj:
            a.flags.writeable = False
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "theta_adj", theta_adj)

    @property
    def p(self) -> int:
        return self.theta0.size

    @property
    def q(self) -> int:
        return self.sigma2.size - 1

    @property
    def m(self) -> tuple[int, ...]:
        return tuple(t.shape[1] for t in self.theta_adj)

    @property
    def n_params(self) -> int:
        """Covariance parameter count, excluding the mean."""
        return 1 + self.p + self.q + self.p * sum(self.m)

    @property
    def n_free_params(self) -> int:
        """Parameter count including the mean."""
        return self.n_params + 1


@dataclass(frozen=True)
class EEzGPParams:
    """Isotropic-adjustment variant: one correlation weight per level,
    with the first level of every factor anchored at 1."""

    mu: float
    sigma2: np.ndarray  # (q + 1,)
    theta0: np.ndarray  # (p,)
    theta_adj: tuple[np.ndarray, ...]  # q vectors of length m_h, first entry 1

    def __post_init__(self):
        sigma2 = np.asarray(self.sigma2, dtype=float)
        theta0 = _pos_array(self.theta0, "theta0")
        theta_adj = tuple(_pos_array(t, f"theta_adj[{h}]") for h, t in enumerate(self.theta_adj))
        if np.any(sigma2 < 0) or not np.any(sigma2 > 0):
            raise ValidationError("sigma2 entries must be >= 0 with at least one positive")
        q = sigma2.size - 1
        if q < 1 or len(theta_adj) != q:
            raise ValidationError(f"expected {max(q, 1)} adjustment vectors, got {len(theta_adj)}")
        for h, t in enumerate(theta_adj):
            if t.ndim != 1 or t.size < 2:
                raise ValidationError(f"theta_adj[{h}] must be a vector of >= 2 levels")
            if t[0] != 1.0:
                raise ValidationError(f"theta_adj[{h}][0] must equal 1 (anchored first level)")
        for a in (sigma2, theta0) + theta_adj:
            a.flags.writeable = False
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "theta0", theta0)
        object.__setattr__(self, "theta_adj", theta_adj)

    @property
    def p(self) -> int:
        return self.theta0.size

    @property
    def q(self) -> int:
        return self.sigma2.size - 1

    @property
    def m(self) -> tuple[int, ...]:
        return tuple(t.size for t in self.theta_adj)

    @property
    def n_params(self) -> int:
        """Covariance parameter count, excluding the mean (anchors are not free)."""
        return 1 + self.p + self.q + sum(mh - 1 for mh in self.m)

    @property
    def n_free_params(self) -> int:
        return self.n_params + 1

    def expand(self) -> EzGPParams:
        """Equivalent anisotropic parameterization (weights replicated
        across the quantitative coordinates); covariances are identical."""
        blocks = tuple(np.tile(t, (self.p, 1)) for t in self.theta_adj)
        return EzGPParams(self.mu, self.sigma2.copy(), self.theta0.copy(), blocks)


def _angles_len(m: int) -> int:
    return m * (m - 1) // 2


@dataclass(frozen=True)
class BaselineParams:
    """Hyperparameters for the six classical baselines.

    ``sigma2`` and ``theta`` have one row for the multiplicative kinds and
    q rows for the additive kinds.  ``tau`` holds one vector per factor:
    a single value in (0, 1) for ``*ec``; one positive weight per level
    for ``*mc``; a flattened angle table in (0, pi) for ``*uc``, ordered
    row by row ((2,1), (3,1), (3,2), ...).
    """

    kind: str
    mu: float
    sigma2: np.ndarray  # (1,) multiplicative | (q,) additive
    theta: np.ndarray  # (1, p) multiplicative | (q, p) additive
    tau: tuple[np.ndarray, ...]  # q per-factor parameter vectors
    m: tuple[int, ...]

    def __post_init__(self):
        kind = _check_kind(self.kind)
        if kind in INDICATOR_KINDS:
            raise ValidationError(f"{kind!r} is not a baseline kind")
        sigma2 = np.asarray(self.sigma2, dtype=float)
        theta = np.atleast_2d(np.asarray(self.theta, dtype=float))
        tau = tuple(np.asarray(t, dtype=float) for t in self.tau)
        m = tuple(int(v) for v in self.m)
        q = len(m)
        if q < 1 or any(mh < 2 for mh in m):
            raise ValidationError("need q >= 1 factors with at least 2 levels each")
        rows = q if kind.startswith("ad_") else 1
        if sigma2.shape != (rows,):
            raise ValidationError(f"sigma2 must have shape ({rows},) for kind {kind!r}")
        if np.any(sigma2 < 0) or not np.any(sigma2 > 0):
            raise ValidationError("sigma2 entries must be >= 0 with at least one positive")
        if theta.shape[0] != rows:
            raise ValidationError(f"theta must have {rows} row(s) for kind {kind!r}")
        _pos_array(theta, "theta")
        if len(tau) != q:
            raise ValidationError(f"expected {q} per-factor tau vectors, got {len(tau)}")
        comp = kind.removeprefix("ad_")
        for j, t in enumerate(tau):
            if comp == "ec":
                if t.shape != (1,) or not (0.0 < t[0] < 1.0):
                    raise ValidationError(f"tau[{j}] must be a single value in (0,1)")
            elif comp == "mc":
                if t.shape != (m[j],):
                    raise ValidationError(f"tau[{j}] must have one weight per level ({m[j]})")
                _pos_array(t, f"tau[{j}]")
            else:
                want = _angles_len(m[j])
                if t.shape != (want,):
                    raise ValidationError(f"tau[{j}] must hold {want} angles")
                if np.any(t < ANGLE_MIN) or np.any(t > np.pi - ANGLE_MIN):
                    raise ValidationError(
                        f"tau[{j}] angles must lie in [{ANGLE_MIN:g}, pi - {ANGLE_MIN:g}]"
                    )
        for a in (sigma2, theta) + tau:
            a.flags.writeable = False
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma2", sigma2)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "m", m)

    @property
    def p(self) -> int:
        return self.theta.shape[1]

    @property
    def q(self) -> int:
        return len(self.m)

    @property
    def n_params(self) -> int:
        return int(self.sigma2.size + self.theta.size + sum(t.size for t in self.tau))

    @property
    def n_free_params(self) -> int:
        return self.n_params + 1


@dataclass(frozen=True)
class CovMatrix:
    """Symmetric covariance matrix plus the nugget actually on its diagonal."""

    values: np.ndarray
    nugget: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValidationError("covariance matrix must be square")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "nugget", float(self.nugget))

    @property
    def n(self) -> int:
        return self.values.shape[0]


# ---------------------------------------------------------------------------
# pairwise covariances


def gauss_corr(x_i, x_j, theta) -> float:
    """Gaussian correlation exp{-sum_k theta_k (x_ik - x_jk)^2} in (0, 1]."""
    x_i = np.asarray(x_i, dtype=float)
    x_j = np.asarray(x_j, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x_i.shape != x_j.shape or x_i.shape != theta.shape:
        raise ValidationError("gauss_corr: x_i, x_j and theta must have equal lengths")
    if np.any(theta <= 0):
        raise ValidationError("gauss_corr: theta entries must be positive")
    d = x_i - x_j
    return float(np.exp(-np.sum(theta * d * d)))


def _as_input(w) -> MixedInput:
    if isinstance(w, MixedInput):
        return w
    return MixedInput(tuple(w[0]), tuple(w[1]))


def _check_pair(w_i, w_j, p, q, m):
    w_i, w_j = _as_input(w_i), _as_input(w_j)
    for w in (w_i, w_j):
        if len(w.x) != p or len(w.z) != q:
            raise ValidationError(
                f"input has (p={len(w.x)}, q={len(w.z)}), parameters require (p={p}, q={q})"
            )
        for h, (zh, mh) in enumerate(zip(w.z, m)):
            if not 1 <= zh <= mh:
                raise ValidationError(f"level {zh} of factor z{h + 1} outside 1..{mh}")
    return w_i, w_j


def ezgp_cov(w_i, w_j, params: EzGPParams) -> float:
    """Base term plus one adjustment term per factor whose levels match."""
    w_i, w_j = _check_pair(w_i, w_j, params.p, params.q, params.m)
    d = np.asarray(w_i.x) - np.asarray(w_j.x)
    d2 = d * d
    out = params.sigma2[0] * np.exp(-float(params.theta0 @ d2))
    for h in range(params.q):
        if w_i.z[h] == w_j.z[h]:
            l = w_i.z[h] - 1
            out += params.sigma2[1 + h] * np.exp(-float(params.theta_adj[h][:, l] @ d2))
    return float(out)


def eezgp_cov(w_i, w_j, params: EEzGPParams) -> float:
    """As ``ezgp_cov`` with a single adjustment weight per matched level."""
    w_i, w_j = _check_pair(w_i, w_j, params.p, params.q, params.m)
    d = np.asarray(w_i.x) - np.asarray(w_j.x)
    d2sum = float(np.sum(d * d))
    out = params.sigma2[0] * np.exp(-float(params.theta0 @ (d * d)))
    for h in range(params.q):
        if w_i.z[h] == w_j.z[h]:
            l = w_i.z[h] - 1
            out += params.sigma2[1 + h] * np.exp(-params.theta_adj[h][l] * d2sum)
    return float(out)


def phi_star(w_i, w_j, params: EzGPParams) -> float:
    """Indicator adjustments placed multiplicatively (demonstration only).

    Uses ``params.sigma2[0]`` as the single process variance; matched
    levels multiply extra correlation decay in, so sharing levels can only
    lower the correlation.  Exists to exhibit that reversed ordering; it
    is deliberately not fittable.
    """
    w_i, w_j = _check_pair(w_i, w_j, params.p, params.q, params.m)
    d = np.asarray(w_i.x) - np.asarray(w_j.x)
    d2 = d * d
    expo = float(params.theta0 @ d2)
    for h in range(params.q):
        if w_i.z[h] == w_j.z[h]:
            l = w_i.z[h] - 1
            expo += float(params.theta_adj[h][:, l] @ d2)
    return float(params.sigma2[0] * np.exp(-expo))


# ---------------------------------------------------------------------------
# level-correlation matrices for the baselines


def hypersphere_factor(angles, m: int) -> np.ndarray:
    """Lower-triangular factor L with unit rows from spherical coordinates.

    ``angles`` is the flattened table ((2,1), (3,1), (3,2), ...); row 1 of
    L is (1, 0, ..., 0) and row r lies on the unit sphere, so T = L L^T
    has unit diagonal.
    """
    angles = np.asarray(angles, dtype=float)
    if angles.shape != (_angles_len(m),):
        raise ValidationError(f"expected {_angles_len(m)} angles for {m} levels")
    L = np.zeros((m, m))
    L[0, 0] = 1.0
    idx = 0
    for r in range(1, m):
        sin_run = 1.0
        for s in range(r):
            L[r, s] = sin_run * np.cos(angles[idx + s])
            sin_run *= np.sin(angles[idx + s])
        L[r, r] = sin_run
        idx += r
    return L


def hypersphere_corr(angles, m: int) -> np.ndarray:
    L = hypersphere_factor(angles, m)
    return L @ L.T


def hypersphere_corr_grad(angles, m: int) -> np.ndarray:
    """Stack of dT/d(angle) matrices, one per flattened angle."""
    angles = np.asarray(angles, dtype=float)
    L = hypersphere_factor(angles, m)
    out = np.zeros((angles.size, m, m))
    idx = 0
    for r in range(1, m):
        row = angles[idx : idx + r]
        for a in range(r):
            drow = np.zeros(m)
            # entries (r, s) for s >= a depend on angle a of this row
            for s in range(a, r):
                prod = 1.0
                for t in range(s):
                    prod *= np.cos(row[t]) if t == a else np.sin(row[t])
                drow[s] = prod * (-np.sin(row[s]) if s == a else np.cos(row[s]))
            prod = 1.0
            for t in range(r):
                prod *= np.cos(row[t]) if t == a else np.sin(row[t])
            drow[r] = prod
            dL = np.zeros((m, m))
            dL[r, :] = drow
            dT = dL @ L.T
            out[idx + a] = dT + dT.T
        idx += r
    return out


def tau_matrix(component: str, tau_j, m_j: int) -> np.ndarray:
    """Level-correlation matrix T_j for one factor.

    ``component`` is ``ec`` (single common off-diagonal value), ``mc``
    (exp{-(w_l1 + w_l2)} off the diagonal) or ``uc`` (hypersphere
    factorization).  The diagonal is 1 in every case.
    """
    tau_j = np.asarray(tau_j, dtype=float)
    if component == "ec":
        c = float(tau_j[0])
        T = np.full((m_j, m_j), c)
        np.fill_diagonal(T, 1.0)
        return T
    if component == "mc":
        T = np.exp(-(tau_j[:, None] + tau_j[None, :]))
        np.fill_diagonal(T, 1.0)
        return T
    if component == "uc":
        return hypersphere_corr(tau_j, m_j)
    raise ValidationError(f"unknown level-correlation component {component!r}")


def tau_qual(j: int, l1: int, l2: int, params: BaselineParams) -> float:
    """Level correlation between levels l1 and l2 of factor j (1-based)."""
    if not 0 <= j < params.q:
        raise ValidationError(f"factor index {j} outside 0..{params.q - 1}")
    m_j = params.m[j]
    for l in (l1, l2):
        if not 1 <= l <= m_j:
            raise ValidationError(f"level {l} of factor z{j + 1} outside 1..{m_j}")
    comp = params.kind.removeprefix("ad_")
    T = tau_matrix(comp, params.tau[j], m_j)
    return float(T[l1 - 1, l2 - 1])


def baseline_cov(w_i, w_j, kind: str, params: BaselineParams) -> float:
    """Pairwise covariance for a baseline kind.

    Multiplicative kinds: sigma^2 * prod_j tau_j * R(x_i, x_j | theta).
    Additive kinds: sum_j sigma_j^2 * tau_j * R(x_i, x_j | theta_j).
    """
    _check_kind(kind)
    if kind != params.kind:
        raise ValidationError(f"kind {kind!r} does not match parameters for {params.kind!r}")
    w_i, w_j = _check_pair(w_i, w_j, params.p, params.q, params.m)
    comp = kind.removeprefix("ad_")
    taus = [
        tau_matrix(comp, params.tau[j], params.m[j])[w_i.z[j] - 1, w_j.z[j] - 1]
        for j in range(params.q)
    ]
    if kind.startswith("ad_"):
        out = 0.0
        for j in range(params.q):
            out += params.sigma2[j] * taus[j] * gauss_corr(w_i.x, w_j.x, params.theta[j])
        return float(out)
    return float(params.sigma2[0] * np.prod(taus) * gauss_corr(w_i.x, w_j.x, params.theta[0]))


# ---------------------------------------------------------------------------
# full-matrix assembly


class KernelWorkspace:
    """Precomputed pairwise distances and level indicators for one design.

    Reused across repeated covariance evaluations during fitting; also
    produces the ingredient matrices that parameter gradients contract
    against.
    """

    def __init__(self, X, Z, m):
        X = np.asarray(X, dtype=float)
        Z = np.asarray(Z, dtype=np.int64)
        self.n = X.shape[0]
        self.p = X.shape[1]
        self.m = tuple(int(v) for v in m)
        self.q = len(self.m)
        diff = X[:, None, :] - X[None, :, :]
        self.D = np.ascontiguousarray(np.moveaxis(diff * diff, -1, 0))  # (p, n, n)
        self.Dsum = self.D.sum(axis=0)
        self.Z = Z
        # per (factor, level): boolean indicator column and its outer product
        self.level_cols = []
        self.level_outer = []
        for h in range(self.q):
            cols, outers = [], []
            for l in range(1, self.m[h] + 1):
                b = Z[:, h] == l
                cols.append(b)
                outers.append(np.outer(b, b) if b.any() else None)
            self.level_cols.append(cols)
            self.level_outer.append(outers)

    @classmethod
    def for_dataset(cls, dataset: Dataset) -> "KernelWorkspace":
        return cls(dataset.X, dataset.Z, dataset.schema.m)

    def corr(self, theta) -> np.ndarray:
        return np.exp(-np.tensordot(np.asarray(theta, dtype=float), self.D, axes=1))

    def phi(self, params, kind: str | None = None):
        """Covariance matrix and its reusable parts for the given parameters."""
        if isinstance(params, EzGPParams):
            return self._phi_ezgp(params)
        if isinstance(params, EEzGPParams):
            return self._phi_eezgp(params)
        if isinstance(params, BaselineParams):
            return self._phi_baseline(params)
        raise ValidationError(f"unsupported parameter object {type(params).__name__}")

    def _phi_ezgp(self, params: EzGPParams):
        self._check_dims(params.p, params.q, params.m)
        R0 = self.corr(params.theta0)
        Phi = params.sigma2[0] * R0
        E = {}
        for h in range(self.q):
            for l in range(self.m[h]):
                O = self.level_outer[h][l]
                if O is None:
                    continue
                Ehl = self.corr(params.theta_adj[h][:, l])
                E[(h, l)] = Ehl
                Phi = Phi + params.sigma2[1 + h] * (O * Ehl)
        return Phi, {"R0": R0, "E": E}

    def _phi_eezgp(self, params: EEzGPParams):
        self._check_dims(params.p, params.q, params.m)
        R0 = self.corr(params.theta0)
        Phi = params.sigma2[0] * R0
        E = {}
        for h in range(self.q):
            for l in range(self.m[h]):
                O = self.level_outer[h][l]
                if O is None:
                    continue
                Ehl = np.exp(-params.theta_adj[h][l] * self.Dsum)
                E[(h, l)] = Ehl
                Phi = Phi + params.sigma2[1 + h] * (O * Ehl)
        return Phi, {"R0": R0, "E": E}

    def _phi_baseline(self, params: BaselineParams):
        self._check_dims(params.p, params.q, params.m)
        comp = params.kind.removeprefix("ad_")
        T = [tau_matrix(comp, params.tau[j], self.m[j]) for j in range(self.q)]
        tau_pair = [T[j][self.Z[:, j][:, None] - 1, self.Z[:, j][None, :] - 1] for j in range(self.q)]
        if params.kind.startswith("ad_"):
            R = [self.corr(params.theta[j]) for j in range(self.q)]
            Phi = np.zeros((self.n, self.n))
            for j in range(self.q):
                Phi += params.sigma2[j] * tau_pair[j] * R[j]
            return Phi, {"T": T, "tau_pair": tau_pair, "R": R}
        R = self.corr(params.theta[0])
        P = np.ones((self.n, self.n))
        for j in range(self.q):
            P *= tau_pair[j]
        Phi = params.sigma2[0] * P * R
        return Phi, {"T": T, "tau_pair": tau_pair, "R": R, "tau_prod": P}

    def _check_dims(self, p, q, m):
        if p != self.p or q != self.q or tuple(m) != self.m:
            raise ValidationError(
                f"parameters for (p={p}, q={q}, m={tuple(m)}) do not match design "
                f"(p={self.p}, q={self.q}, m={self.m})"
            )


def params_kind(params) -> str:
    if isinstance(params, EzGPParams):
        return "ezgp"
    if isinstance(params, EEzGPParams):
        return "eezgp"
    if isinstance(params, BaselineParams):
        return params.kind
    raise ValidationError(f"unsupported parameter object {type(params).__name__}")


def assemble_cov_matrix(dataset: Dataset, params, kind: str | None = None) -> CovMatrix:
    """Production covariance assembly (Schur-product form for the
    indicator models, vectorized level-correlation lookups for the
    baselines); nugget starts at 0."""
    actual = params_kind(params)
    if kind is not None and _check_kind(kind) != actual:
        raise ValidationError(f"kind {kind!r} does not match parameters for {actual!r}")
    ws = KernelWorkspace.for_dataset(dataset)
    Phi, _ = ws.phi(params)
    return CovMatrix(Phi, nugget=0.0)


def assemble_cov_matrix_elementwise(dataset: Dataset, params, kind: str | None = None) -> CovMatrix:
    """Entry-by-entry assembly through the pairwise covariance operations;
    independent oracle for the vectorized path."""
    actual = params_kind(params)
    if kind is not None and _check_kind(kind) != actual:
        raise ValidationError(f"kind {kind!r} does not match parameters for {actual!r}")
    n = dataset.n
    inputs = dataset.inputs()
    Phi = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            if actual == "ezgp":
                v = ezgp_cov(inputs[i], inputs[j], params)
            elif actual == "eezgp":
                v = eezgp_cov(inputs[i], inputs[j], params)
            else:
                v = baseline_cov(inputs[i], inputs[j], actual, params)
            Phi[i, j] = Phi[j, i] = v
    return CovMatrix(Phi, nugget=0.0)


def cross_cov_matrix(dataset: Dataset, X_star, Z_star, params) -> np.ndarray:
    """Covariances between target inputs (rows) and training inputs (columns)."""
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    Z_star = np.atleast_2d(np.asarray(Z_star, dtype=np.int64))
    diff = X_star[:, None, :] - dataset.X[None, :, :]
    D = np.moveaxis(diff * diff, -1, 0)  # (p, n_star, n)
    kind = params_kind(params)
    if kind in INDICATOR_KINDS:
        G = params.sigma2[0] * np.exp(-np.tensordot(params.theta0, D, axes=1))
        Dsum = D.sum(axis=0)
        for h in range(params.q):
            for l in range(params.m[h]):
                a = Z_star[:, h] == l + 1
                b = dataset.Z[:, h] == l + 1
                if not (a.any() and b.any()):
                    continue
                O = np.outer(a, b)
                if kind == "ezgp":
                    E = np.exp(-np.tensordot(params.theta_adj[h][:, l], D, axes=1))
                else:
                    E = np.exp(-params.theta_adj[h][l] * Dsum)
                G += params.sigma2[1 + h] * (O * E)
        return G
    comp = kind.removeprefix("ad_")
    T = [tau_matrix(comp, params.tau[j], params.m[j]) for j in range(params.q)]
    tau_pair = [
        T[j][Z_star[:, j][:, None] - 1, dataset.Z[:, j][None, :] - 1] for j in range(params.q)
    ]
    if kind.startswith("ad_"):
        G = np.zeros((X_star.shape[0], dataset.n))
        for j in range(params.q):
            G += params.sigma2[j] * tau_pair[j] * np.exp(
                -np.tensordot(params.theta[j], D, axes=1)
            )
        return G
    P = np.ones((X_star.shape[0], dataset.n))
    for j in range(params.q):
        P *= tau_pair[j]
    return params.sigma2[0] * P * np.exp(-np.tensordot(params.theta[0], D, axes=1))


def prior_variance(params) -> float:
    """Covariance of an input with itself (constant over the input space):
    the sum of the process variance components."""
    params_kind(params)
    return float(np.sum(params.sigma2))
