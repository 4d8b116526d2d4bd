"""Profile likelihood, analytical gradients, and the multi-start fit driver.

The constant mean has a closed-form maximizer, so optimization runs over
the covariance parameters only, minimizing

    log|Phi| + y^T Phi^{-1} y - (1^T Phi^{-1} 1)^{-1} (1^T Phi^{-1} y)^2.

For every covariance parameter the gradient is

    tr(Phi^{-1} dPhi) - (y - mu 1)^T Phi^{-1} dPhi Phi^{-1} (y - mu 1)

evaluated with the mean held at its profile value.  Positive parameters
are optimized in log space and interval parameters (level-correlation
values, hypersphere angles) through scaled logit maps, with box bounds;
each start runs a bounded limited-memory quasi-Newton descent and the
best terminal point wins.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .core import Dataset, ProblemSchema
from .errors import FitError, NotPositiveDefiniteError, ValidationError
from .kernels import (
    ANGLE_MIN,
    BaselineParams,
    EEzGPParams,
    EzGPParams,
    INDICATOR_KINDS,
    KernelWorkspace,
    MODEL_KINDS,
    hypersphere_corr_grad,
    params_kind,
)
from .linalg import CholeskyFactor, cholesky_with_nugget, log_det, solve

__all__ = [
    "FitConfig",
    "StartSummary",
    "FittedModel",
    "ParamCodec",
    "mu_hat",
    "neg_profile_loglik",
    "grad_neg_profile_loglik",
    "fit",
    "free_param_count",
    "GradCheckReport",
    "gradient_check",
    "FORMAT_VERSION",
]

FORMAT_VERSION = 1

THETA_BOUNDS = (1e-3, 1e3)
SIGMA2_REL_BOUNDS = (1e-6, 10.0)  # multiples of var(y)
EC_RANGE = (1e-6, 1.0 - 1e-6)
FD_STEP = 3e-3  # Richardson base step in transformed space


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings; all randomness flows from ``seed``."""

    starts: int = 8
    max_iters: int = 200
    tol: float = 1e-8
    grad_tol: float = 1e-6
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.starts < 1:
            raise ValidationError("starts must be >= 1")
        if self.max_iters < 1:
            raise ValidationError("max_iters must be >= 1")
        if not (self.tol > 0 and self.grad_tol > 0):
            raise ValidationError("tolerances must be positive")
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")


# ---------------------------------------------------------------------------
# parameter vector codec


def _sigmoid(v):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(v, dtype=float)))


def _logit(x):
    x = np.asarray(x, dtype=float)
    return np.log(x) - np.log1p(-x)


@dataclass(frozen=True)
class _Coord:
    name: str
    family: str
    transform: str  # "log" | "logit1" | "logitpi"
    lo: float  # native-space bound
    hi: float
    canonical: float  # native-space canonical start
    rand_lo: float  # native-space random-start range
    rand_hi: float


class ParamCodec:
    """Maps model parameters (mean excluded) onto the transformed free
    vector the optimizer sees, and back.

    Coordinate order is fixed and documented per kind: variance components
    first, then base correlation weights, then the per-factor blocks in
    factor order (level-major, coordinate-minor for the anisotropic
    adjustments).
    """

    def __init__(self, kind: str, schema: ProblemSchema, var_y: float = 1.0):
        if kind not in MODEL_KINDS:
            raise ValidationError(
                f"unknown model kind {kind!r}; valid kinds: {', '.join(MODEL_KINDS)}"
            )
        self.kind = kind
        self.schema = schema
        self.var_y = float(var_y) if var_y > 0 else 1.0
        self.coords: list[_Coord] = []
        p, q, m = schema.p, schema.q, schema.m
        s_lo = SIGMA2_REL_BOUNDS[0] * self.var_y
        s_hi = SIGMA2_REL_BOUNDS[1] * self.var_y
        t_lo, t_hi = THETA_BOUNDS

        def sig(name, family, n_components):
            self.coords.append(
                _Coord(name, family, "log", s_lo, s_hi, self.var_y / n_components,
                       max(1e-3 * self.var_y, s_lo), min(3.0 * self.var_y, s_hi))
            )

        def theta(name, family):
            self.coords.append(_Coord(name, family, "log", t_lo, t_hi, 1.0, 1e-2, 1e2))

        def tau_block(j, comp):
            if comp == "ec":
                self.coords.append(
                    _Coord(f"c[{j + 1}]", "tau", "logit1", EC_RANGE[0], EC_RANGE[1], 0.5, 0.05, 0.95)
                )
            elif comp == "mc":
                for l in range(m[j]):
                    theta(f"tau_w[{j + 1}][{l + 1}]", "tau")
            else:
                for r in range(2, m[j] + 1):
                    for s in range(1, r):
                        self.coords.append(
                            _Coord(
                                f"angle[{j + 1}][{r},{s}]", "tau", "logitpi",
                                ANGLE_MIN, math.pi - ANGLE_MIN, math.pi / 2,
                                0.05 * math.pi, 0.95 * math.pi,
                            )
                        )

        if kind in INDICATOR_KINDS:
            sig("sigma2[0]", "sigma2_base", q + 1)
            for h in range(q):
                sig(f"sigma2[{h + 1}]", "sigma2_adj", q + 1)
            for k in range(p):
                theta(f"theta0[{k + 1}]", "theta_base")
            if kind == "ezgp":
                for h in range(q):
                    for l in range(m[h]):
                        for k in range(p):
                            theta(f"theta_adj[{h + 1}][{k + 1},{l + 1}]", "theta_adj")
            else:
                for h in range(q):
                    for l in range(1, m[h]):  # level 1 anchored at 1
                        theta(f"theta_adj[{h + 1}][{l + 1}]", "theta_adj")
        else:
            comp = kind.removeprefix("ad_")
            if kind.startswith("ad_"):
                for j in range(q):
                    sig(f"sigma2[{j + 1}]", "sigma2", q)
                for j in range(q):
                    for k in range(p):
                        theta(f"theta[{j + 1}][{k + 1}]", "theta")
            else:
                sig("sigma2", "sigma2", 1)
                for k in range(p):
                    theta(f"theta[{k + 1}]", "theta")
            for j in range(q):
                tau_block(j, comp)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.coords]

    @property
    def families(self) -> list[str]:
        return [c.family for c in self.coords]

    # -- transforms per coordinate ------------------------------------------

    def _to_native(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for i, c in enumerate(self.coords):
            if c.transform == "log":
                out[i] = math.exp(v[i])
            elif c.transform == "logit1":
                out[i] = float(_sigmoid(v[i]))
            else:
                out[i] = math.pi * float(_sigmoid(v[i]))
        return out

    def _to_transformed(self, x: np.ndarray) -> np.ndarray:
        out = np.empty_like(x)
        for i, c in enumerate(self.coords):
            if c.transform == "log":
                out[i] = math.log(x[i])
            elif c.transform == "logit1":
                out[i] = float(_logit(x[i]))
            else:
                out[i] = float(_logit(x[i] / math.pi))
        return out

    def chain(self, native: np.ndarray) -> np.ndarray:
        """d(native)/d(transformed) evaluated at the given native values."""
        out = np.empty_like(native)
        for i, c in enumerate(self.coords):
            if c.transform == "log":
                out[i] = native[i]
            elif c.transform == "logit1":
                out[i] = native[i] * (1.0 - native[i])
            else:
                out[i] = native[i] * (math.pi - native[i]) / math.pi
        return out

    def bounds(self) -> list[tuple[float, float]]:
        lo = self._to_transformed(np.array([c.lo for c in self.coords]))
        hi = self._to_transformed(np.array([c.hi for c in self.coords]))
        return list(zip(lo, hi))

    def start_canonical(self) -> np.ndarray:
        return self._to_transformed(np.array([c.canonical for c in self.coords]))

    def start_random(self, rng: np.random.Generator) -> np.ndarray:
        native = np.empty(self.dim)
        for i, c in enumerate(self.coords):
            if c.transform == "log":
                native[i] = math.exp(rng.uniform(math.log(c.rand_lo), math.log(c.rand_hi)))
            else:
                native[i] = rng.uniform(c.rand_lo, c.rand_hi)
        v = self._to_transformed(native)
        b = self.bounds()
        return np.clip(v, [x[0] for x in b], [x[1] for x in b])

    # -- params object <-> native vector -------------------------------------

    def decode(self, v: np.ndarray, mu: float = 0.0):
        """Transformed vector -> parameter object (with the given mean)."""
        x = self._to_native(np.asarray(v, dtype=float))
        return self.decode_native(x, mu)

    def decode_native(self, x: np.ndarray, mu: float = 0.0):
        p, q, m = self.schema.p, self.schema.q, self.schema.m
        k = self.kind
        i = 0
        if k in INDICATOR_KINDS:
            sigma2 = x[i : i + q + 1]
            i += q + 1
            theta0 = x[i : i + p]
            i += p
            blocks = []
            if k == "ezgp":
                for h in range(q):
                    blocks.append(x[i : i + p * m[h]].reshape(m[h], p).T.copy())
                    i += p * m[h]
                return EzGPParams(mu, sigma2.copy(), theta0.copy(), tuple(blocks))
            for h in range(q):
                blocks.append(np.concatenate([[1.0], x[i : i + m[h] - 1]]))
                i += m[h] - 1
            return EEzGPParams(mu, sigma2.copy(), theta0.copy(), tuple(blocks))
        comp = k.removeprefix("ad_")
        rows = q if k.startswith("ad_") else 1
        sigma2 = x[i : i + rows]
        i += rows
        theta = x[i : i + rows * p].reshape(rows, p).copy()
        i += rows * p
        tau = []
        for j in range(q):
            size = 1 if comp == "ec" else (m[j] if comp == "mc" else m[j] * (m[j] - 1) // 2)
            tau.append(x[i : i + size].copy())
            i += size
        return BaselineParams(k, mu, sigma2.copy(), theta, tuple(tau), m)

    def encode(self, params) -> np.ndarray:
        """Parameter object -> transformed vector (mean dropped)."""
        if params_kind(params) != self.kind:
            raise ValidationError(
                f"parameters are for kind {params_kind(params)!r}, codec is {self.kind!r}"
            )
        p, q, m = self.schema.p, self.schema.q, self.schema.m
        parts = []
        if self.kind in INDICATOR_KINDS:
            parts.append(np.asarray(params.sigma2))
            parts.append(np.asarray(params.theta0))
            for h in range(q):
                if self.kind == "ezgp":
                    parts.append(params.theta_adj[h].T.ravel())
                else:
                    parts.append(params.theta_adj[h][1:])
        else:
            parts.append(np.asarray(params.sigma2))
            parts.append(np.asarray(params.theta).ravel())
            for j in range(q):
                parts.append(np.asarray(params.tau[j]))
        native = np.concatenate(parts)
        if native.size != self.dim:
            raise ValidationError("parameter shapes do not match the schema")
        return self._to_transformed(native)


# ---------------------------------------------------------------------------
# profile likelihood


@dataclass
class _ProfileState:
    objective: float
    factor: CholeskyFactor
    mu: float
    u: np.ndarray  # Phi^{-1}(y - mu 1)
    phi_inv_one: np.ndarray
    one_phi_one: float


def mu_hat(factor: CholeskyFactor, y) -> float:
    """Closed-form mean estimate (1^T Phi^{-1} 1)^{-1} 1^T Phi^{-1} y."""
    y = np.asarray(y, dtype=float)
    ones = np.ones_like(y)
    b = solve(factor, ones)
    return float(y @ b) / float(ones @ b)


def _profile_state(Phi: np.ndarray, y: np.ndarray) -> _ProfileState:
    factor = cholesky_with_nugget(Phi)
    ones = np.ones_like(y)
    a = solve(factor, y)
    b = solve(factor, ones)
    s1 = float(ones @ b)
    sy = float(y @ b)
    mu = sy / s1
    objective = log_det(factor) + float(y @ a) - sy * sy / s1
    return _ProfileState(objective, factor, mu, a - mu * b, b, s1)


def neg_profile_loglik(params, dataset: Dataset) -> float:
    """Profile objective at the given covariance parameters (mean profiled
    out); any nugget required for factorization is included in Phi."""
    ws = KernelWorkspace.for_dataset(dataset)
    Phi, _ = ws.phi(params)
    return _profile_state(Phi, dataset.y).objective


def _native_gradient(ws: KernelWorkspace, params, parts, W: np.ndarray) -> np.ndarray:
    """Gradient in native parameter space, ordered like the codec layout.

    W = Phi^{-1} - u u^T, so each coordinate is sum(W o dPhi/dparam):
    the trace term minus the quadratic-form term.
    """
    kind = params_kind(params)
    q = ws.q
    g = []
    if kind in INDICATOR_KINDS:
        R0 = parts["R0"]
        WR0 = W * R0
        g.append(np.sum(WR0))  # d/d sigma2_0: base correlation matrix
        for h in range(q):
            acc = 0.0
            for l in range(ws.m[h]):
                E = parts["E"].get((h, l))
                if E is not None:
                    acc += np.sum(W * ws.level_outer[h][l] * E)
            g.append(acc)  # d/d sigma2_h: matched-level correlation sum
        for k in range(ws.p):
            g.append(-params.sigma2[0] * np.sum(WR0 * ws.D[k]))
        for h in range(q):
            levels = range(ws.m[h]) if kind == "ezgp" else range(1, ws.m[h])
            for l in levels:
                E = parts["E"].get((h, l))
                if E is None:
                    zeros = ws.p if kind == "ezgp" else 1
                    g.extend([0.0] * zeros)
                    continue
                WOE = W * ws.level_outer[h][l] * E
                if kind == "ezgp":
                    for k in range(ws.p):
                        g.append(-params.sigma2[1 + h] * np.sum(WOE * ws.D[k]))
                else:
                    g.append(-params.sigma2[1 + h] * np.sum(WOE * ws.Dsum))
        return np.array(g)

    comp = kind.removeprefix("ad_")
    tau_pair = parts["tau_pair"]
    if kind.startswith("ad_"):
        R = parts["R"]
        for j in range(q):
            g.append(np.sum(W * tau_pair[j] * R[j]))
        for j in range(q):
            WTR = W * tau_pair[j] * R[j]
            for k in range(ws.p):
                g.append(-params.sigma2[j] * np.sum(WTR * ws.D[k]))
        for j in range(q):
            base = params.sigma2[j] * W * R[j]
            g.extend(_tau_gradient(ws, params, comp, j, base))
        return np.array(g)

    R = parts["R"]
    P = parts["tau_prod"]
    WPR = W * P * R
    g.append(np.sum(WPR))
    for k in range(ws.p):
        g.append(-params.sigma2[0] * np.sum(WPR * ws.D[k]))
    # product of all level correlations except factor j, via prefix/suffix
    prefix = [np.ones((ws.n, ws.n))]
    for j in range(q):
        prefix.append(prefix[-1] * tau_pair[j])
    suffix = [np.ones((ws.n, ws.n))]
    for j in range(q - 1, -1, -1):
        suffix.insert(0, suffix[0] * tau_pair[j])
    for j in range(q):
        others = prefix[j] * suffix[j + 1]
        base = params.sigma2[0] * W * R * others
        g.extend(_tau_gradient(ws, params, comp, j, base))
    return np.array(g)


def _tau_gradient(ws: KernelWorkspace, params, comp: str, j: int, base: np.ndarray) -> list[float]:
    """Contributions of factor j's level-correlation parameters; ``base``
    already carries everything except dtau_pair/dparam."""
    zj = ws.Z[:, j]
    if comp == "ec":
        neq = zj[:, None] != zj[None, :]
        return [float(np.sum(base * neq))]
    if comp == "mc":
        out = []
        neq = zj[:, None] != zj[None, :]
        w = params.tau[j]
        T = np.exp(-(w[:, None] + w[None, :]))
        pairwise = T[zj[:, None] - 1, zj[None, :] - 1]
        for l in range(ws.m[j]):
            a = ws.level_cols[j][l].astype(float)
            hits = a[:, None] + a[None, :]
            out.append(float(np.sum(base * (-hits * pairwise * neq))))
        return out
    dT = hypersphere_corr_grad(params.tau[j], ws.m[j])
    out = []
    for a in range(params.tau[j].size):
        d_pair = dT[a][zj[:, None] - 1, zj[None, :] - 1]
        out.append(float(np.sum(base * d_pair)))
    return out


def grad_neg_profile_loglik(params, dataset: Dataset) -> np.ndarray:
    """Analytical gradient of the profile objective with respect to the
    free covariance parameters, in native space and codec order."""
    ws = KernelWorkspace.for_dataset(dataset)
    Phi, parts = ws.phi(params)
    state = _profile_state(Phi, dataset.y)
    Phi_inv = solve(state.factor, np.eye(dataset.n))
    W = Phi_inv - np.outer(state.u, state.u)
    return _native_gradient(ws, params, parts, W)


# ---------------------------------------------------------------------------
# fitting


@dataclass(frozen=True)
class StartSummary:
    index: int
    initial_objective: float
    objective: float
    nugget: float
    iterations: int
    status: str
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "initial_objective": self.initial_objective,
            "objective": self.objective,
            "nugget": self.nugget,
            "iterations": self.iterations,
            "status": self.status,
            "message": self.message,
        }


@dataclass
class FittedModel:
    """A fitted emulator: optimized parameters plus the cached pieces
    prediction needs (Cholesky factor and weight vector)."""

    schema: ProblemSchema
    kind: str
    params: object
    train: Dataset
    factor: CholeskyFactor
    weights: np.ndarray  # Phi^{-1}(y - mu 1)
    phi_inv_one: np.ndarray
    one_phi_one: float
    objective: float
    nugget: float
    seed: int
    starts: list[StartSummary] = field(default_factory=list)

    @property
    def mu(self) -> float:
        return self.params.mu

    @property
    def n_free_params(self) -> int:
        return self.params.n_free_params

    @property
    def optimizer_dim(self) -> int:
        # the mean is profiled out of the optimization
        return self.params.n_free_params - 1

    def to_dict(self) -> dict:
        if self.kind in INDICATOR_KINDS:
            pd = {
                "mu": self.params.mu,
                "sigma2": self.params.sigma2.tolist(),
                "theta0": self.params.theta0.tolist(),
                "theta_adj": [t.tolist() for t in self.params.theta_adj],
            }
        else:
            pd = {
                "mu": self.params.mu,
                "sigma2": self.params.sigma2.tolist(),
                "theta": self.params.theta.tolist(),
                "tau": [t.tolist() for t in self.params.tau],
            }
        train = {
            "x": self.train.X.tolist(),
            "z": self.train.Z.tolist(),
            "y": self.train.y.tolist(),
            "scaling": None
            if self.train.scaling is None
            else [[s.lo, s.hi] for s in self.train.scaling],
            "y_offset": self.train.y_offset,
            "y_scale": self.train.y_scale,
        }
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "schema": {"p": self.schema.p, "q": self.schema.q, "m": list(self.schema.m)},
            "params": pd,
            "nugget": self.nugget,
            "seed": self.seed,
            "objective": self.objective,
            "starts": [s.to_dict() for s in self.starts],
            "train": train,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FittedModel":
        from .core import AffineScale  # local import to avoid cycle noise

        if doc.get("format_version") != FORMAT_VERSION:
            raise ValidationError(
                f"unsupported model format_version {doc.get('format_version')!r}"
            )
        kind = doc["kind"]
        if kind not in MODEL_KINDS:
            raise ValidationError(f"unknown model kind {kind!r} in model file")
        schema = ProblemSchema(doc["schema"]["p"], doc["schema"]["q"], tuple(doc["schema"]["m"]))
        pd = doc["params"]
        if kind == "ezgp":
            params = EzGPParams(
                pd["mu"], np.array(pd["sigma2"]), np.array(pd["theta0"]),
                tuple(np.array(t) for t in pd["theta_adj"]),
            )
        elif kind == "eezgp":
            params = EEzGPParams(
                pd["mu"], np.array(pd["sigma2"]), np.array(pd["theta0"]),
                tuple(np.array(t) for t in pd["theta_adj"]),
            )
        else:
            params = BaselineParams(
                kind, pd["mu"], np.array(pd["sigma2"]), np.array(pd["theta"]),
                tuple(np.array(t) for t in pd["tau"]), schema.m,
            )
        tr = doc["train"]
        scaling = None
        if tr.get("scaling") is not None:
            scaling = tuple(AffineScale(lo, hi) for lo, hi in tr["scaling"])
        train = Dataset(
            schema, np.array(tr["x"]), np.array(tr["z"]), np.array(tr["y"]),
            scaling=scaling, y_offset=tr.get("y_offset", 0.0), y_scale=tr.get("y_scale", 1.0),
        )
        ws = KernelWorkspace.for_dataset(train)
        Phi, _ = ws.phi(params)
        nugget = float(doc["nugget"])
        try:
            L = scipy.linalg.cholesky(Phi + nugget * np.eye(train.n) if nugget else Phi, lower=True)
            factor = CholeskyFactor(L, nugget)
        except scipy.linalg.LinAlgError:
            # stored nugget no longer suffices on this platform; climb the ladder
            factor = cholesky_with_nugget(Phi)
        ones = np.ones(train.n)
        b = solve(factor, ones)
        weights = solve(factor, train.y) - params.mu * b
        starts = [StartSummary(**s) for s in doc.get("starts", [])]
        return cls(
            schema, kind, params, train, factor, weights, b, float(ones @ b),
            float(doc["objective"]), factor.nugget, int(doc["seed"]), starts,
        )

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "FittedModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def free_param_count(kind: str, schema: ProblemSchema) -> int:
    """Number of model parameters including the mean."""
    p, q, m = schema.p, schema.q, schema.m
    if kind == "ezgp":
        return 2 + p + q + p * sum(m)
    if kind == "eezgp":
        return 2 + p + sum(m)
    return ParamCodec(kind, schema).dim + 1


def _check_normalized(dataset: Dataset) -> None:
    if dataset.X.size and (dataset.X.min() < -1e-9 or dataset.X.max() > 1 + 1e-9):
        raise ValidationError(
            "quantitative inputs must lie in [0, 1]; call normalize_quantitative first"
        )


def _run_start(index, v0, ws, y, codec, config):
    evaluations = {"nugget": 0.0}

    def objective(v):
        params = codec.decode(v)
        Phi, parts = ws.phi(params)
        state = _profile_state(Phi, y)
        evaluations["nugget"] = state.factor.nugget
        Phi_inv = solve(state.factor, np.eye(y.size))
        W = Phi_inv - np.outer(state.u, state.u)
        native = _native_gradient(ws, params, parts, W)
        chain = codec.chain(codec._to_native(v))
        return state.objective, native * chain

    f0, _ = objective(v0)
    res = scipy.optimize.minimize(
        objective,
        v0,
        method="L-BFGS-B",
        jac=True,
        bounds=codec.bounds(),
        options={"maxiter": config.max_iters, "ftol": config.tol, "gtol": config.grad_tol},
    )
    status = "converged" if res.success else "stopped"
    summary = StartSummary(
        index, float(f0), float(res.fun), float(evaluations["nugget"]),
        int(res.nit), status, str(res.message),
    )
    return res.x, float(res.fun), summary


def fit(dataset: Dataset, kind: str, config: FitConfig = FitConfig()) -> FittedModel:
    """Multi-start bounded quasi-Newton maximum likelihood fit.

    Start 1 is the canonical point (unit correlation weights, response
    variance split across the variance components); the remaining starts
    draw log-uniform initials from per-coordinate ranges.  The lowest
    terminal objective wins, ties broken by start index.  Deterministic
    given ``config.seed`` and ``config.starts``, independent of
    ``config.threads``.
    """
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}; valid kinds: {', '.join(MODEL_KINDS)}")
    if dataset.n < 2:
        raise ValidationError("fitting requires at least two observations")
    _check_normalized(dataset)
    y = dataset.y
    var_y = float(np.var(y))
    codec = ParamCodec(kind, dataset.schema, var_y if var_y > 0 else 1.0)
    ws = KernelWorkspace.for_dataset(dataset)

    children = np.random.SeedSequence(config.seed).spawn(config.starts)
    v0s = []
    for s in range(config.starts):
        if s == 0:
            v0s.append(codec.start_canonical())
        else:
            v0s.append(codec.start_random(np.random.default_rng(children[s])))

    def task(s):
        try:
            return _run_start(s, v0s[s], ws, y, codec, config)
        except NotPositiveDefiniteError as e:
            return None, math.inf, StartSummary(s, math.nan, math.inf, math.nan, 0, "failed", str(e))

    if config.threads > 1 and config.starts > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(pool.map(task, range(config.starts)))
    else:
        outcomes = [task(s) for s in range(config.starts)]

    summaries = [o[2] for o in outcomes]
    best = None
    for s, (xv, fun, _) in enumerate(outcomes):
        if xv is None:
            continue
        if best is None or fun < outcomes[best][1]:
            best = s
    if best is None:
        raise FitError(
            "every optimization start failed to factorize the covariance",
            diagnostics=[s.to_dict() for s in summaries],
        )

    v_best = outcomes[best][0]
    params0 = codec.decode(v_best)
    Phi, _ = ws.phi(params0)
    state = _profile_state(Phi, y)
    params = codec.decode(v_best, mu=state.mu)
    return FittedModel(
        schema=dataset.schema,
        kind=kind,
        params=params,
        train=dataset,
        factor=state.factor,
        weights=state.u,
        phi_inv_one=state.phi_inv_one,
        one_phi_one=state.one_phi_one,
        objective=float(state.objective),
        nugget=float(state.factor.nugget),
        seed=config.seed,
        starts=summaries,
    )


# ---------------------------------------------------------------------------
# gradient verification


@dataclass
class GradCheckReport:
    kind: str
    p: int
    q: int
    m: tuple[int, ...]
    n: int
    seed: int
    step: float
    family_max: dict
    worst_name: str
    worst_family: str
    worst_analytic: float
    worst_fd: float
    max_rel: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "p": self.p, "q": self.q, "m": list(self.m), "n": self.n,
            "seed": self.seed, "step": self.step, "family_max": self.family_max,
            "worst_name": self.worst_name, "worst_family": self.worst_family,
            "worst_analytic": self.worst_analytic, "worst_fd": self.worst_fd,
            "max_rel": self.max_rel, "passed": self.passed,
        }


def _random_instance(kind, p, q, m, n, rng):
    """Simulate a well-conditioned instance from the model itself.

    X is a small Latin hypercube, y a draw from the GP at randomly drawn
    parameters, and the evaluation point a mild perturbation of those
    parameters.  Instances whose covariance is numerically near-singular
    (rcond < 1e-7) are redrawn: the finite-difference oracle loses all
    accuracy there regardless of the analytic gradient.
    """
    schema = ProblemSchema(p, q, tuple(m))
    codec = ParamCodec(kind, schema, 1.0)
    for _ in range(64):
        u = rng.random((n, p))
        pi = np.column_stack([rng.permutation(n) for _ in range(p)])
        X = (pi + u) / n
        Z = np.column_stack([rng.integers(1, m[h] + 1, size=n) for h in range(q)])
        v_sim = np.array([
            rng.uniform(math.log(0.5), math.log(2.0)) if c.transform == "log"
            else float(_logit(rng.uniform(0.35, 0.65)))
            for c in codec.coords
        ])
        v_eval = v_sim + rng.uniform(-0.3, 0.3, size=codec.dim)
        ws = KernelWorkspace(X, Z, m)
        ok = True
        for v in (v_sim, v_eval):
            Phi, _ = ws.phi(codec.decode(v))
            ev = np.linalg.eigvalsh(Phi)
            if ev[0] <= 0 or ev[0] / ev[-1] < 1e-7:
                ok = False
                break
        if not ok:
            continue
        Phi, _ = ws.phi(codec.decode(v_sim))
        L = scipy.linalg.cholesky(Phi, lower=True)
        y = L @ rng.standard_normal(n)
        dataset = Dataset(schema, X, Z, y)
        return dataset, codec, v_eval
    raise FitError("could not draw a well-conditioned gradient-check instance")


def gradient_check(
    kind: str,
    p: int,
    q: int,
    m,
    n: int,
    seed: int,
    step: float = FD_STEP,
    perturb_gradient: float = 0.0,
) -> GradCheckReport:
    """Compare the analytical gradient against a Richardson-extrapolated
    central-difference oracle, coordinate by coordinate in transformed
    space.  Passes when every coordinate agrees within 1e-5 relative
    (1e-8 absolute floor).  ``perturb_gradient`` offsets the first
    analytic coordinate and exists as a negative-control hook.
    """
    if kind not in MODEL_KINDS:
        raise ValidationError(f"unknown model kind {kind!r}; valid kinds: {', '.join(MODEL_KINDS)}")
    m = tuple(int(v) for v in m)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC0FFEE]))
    dataset, codec, v = _random_instance(kind, p, q, m, n, rng)
    ws = KernelWorkspace.for_dataset(dataset)

    def f(vv):
        Phi, _ = ws.phi(codec.decode(vv))
        return _profile_state(Phi, dataset.y).objective

    params = codec.decode(v)
    Phi, parts = ws.phi(params)
    state = _profile_state(Phi, dataset.y)
    Phi_inv = solve(state.factor, np.eye(dataset.n))
    W = Phi_inv - np.outer(state.u, state.u)
    native = _native_gradient(ws, params, parts, W)
    analytic = native * codec.chain(codec._to_native(v))
    if perturb_gradient:
        analytic = analytic.copy()
        analytic[0] += perturb_gradient

    def central(i, h):
        vp = v.copy()
        vp[i] += h
        vm = v.copy()
        vm[i] -= h
        return (f(vp) - f(vm)) / (2 * h)

    family_max: dict = {}
    worst = (0.0, "", "", 0.0, 0.0)
    for i, coord in enumerate(codec.coords):
        fd = (4.0 * central(i, step / 2) - central(i, step)) / 3.0
        err = abs(fd - analytic[i])
        rel = 0.0 if err <= 1e-8 else err / max(abs(fd), abs(analytic[i]))
        family_max[coord.family] = max(family_max.get(coord.family, 0.0), rel)
        if rel > worst[0]:
            worst = (rel, coord.name, coord.family, float(analytic[i]), float(fd))
    max_rel = max(family_max.values()) if family_max else 0.0
    return GradCheckReport(
        kind, p, q, m, n, seed, step, family_max,
        worst[1], worst[2], worst[3], worst[4], max_rel, max_rel <= 1e-5,
    )
