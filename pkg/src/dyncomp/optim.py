"""Fitting DCA projections.

The objective is ``-I_T(V^T x) + lam * ||V^T V - I||_F^2``, minimized with
L-BFGS from several random orthonormal starts. The penalty vanishes at any
stationary point because the information term is invariant to invertible
right-multiplication of ``V``.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from . import _kernels
from .baselines import inv_sqrt
from .core import Projection, TimeSeries, as_series, mean_center
from .covariance import CrossCovSet, estimate_crosscov, regularize_crosscov
from .errors import DegenerateCovarianceError, FitFailureError, InvalidArgumentError
from .predinfo import (_pi_from_lags, cholesky_logdet, cholesky_logdet_inv,
                       freq_pi_autocov_grad)

logger = logging.getLogger(__name__)

METHODS = ("joint_time_domain", "deflation_time_domain", "deflation_freq_domain")


@dataclass(frozen=True)
class FitOptions:
    T: int
    d: int
    n_restarts: int = 5
    penalty_lambda: float = 10.0
    max_iter: int = 500
    grad_tol: float = 1e-6
    seed: int = 0
    method: str = "joint_time_domain"
    whiten: bool = False

    def __post_init__(self):
        if self.T < 1:
            raise InvalidArgumentError(f"T must be >= 1, got {self.T}")
        if self.d < 1:
            raise InvalidArgumentError(f"d must be >= 1, got {self.d}")
        if self.n_restarts < 1 or self.max_iter < 1:
            raise InvalidArgumentError("n_restarts and max_iter must be positive")
        if not self.penalty_lambda > 0 or not self.grad_tol > 0:
            raise InvalidArgumentError("penalty_lambda and grad_tol must be positive")
        if self.seed < 0:
            raise InvalidArgumentError(f"seed must be unsigned, got {self.seed}")
        if self.method not in METHODS:
            raise InvalidArgumentError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.whiten and self.method != "joint_time_domain":
            raise InvalidArgumentError("whiten is only supported for joint_time_domain")


@dataclass
class RestartRecord:
    seed: int
    initial_loss: float
    final_loss: float
    penalty_residual: float
    grad_norm: float
    iterations: int
    converged: bool
    component: int = 0
    error: Optional[str] = None
    status: str = "grad_tol"
    loss_trace: List[float] = field(default_factory=list)
    pi_trace: List[float] = field(default_factory=list)


@dataclass
class FitReport:
    """Outcome of a fit.

    For deflation fits ``restarts`` holds the runs of every component
    (see ``RestartRecord.component``) and ``chosen_restart`` is a tuple with
    one index into ``restarts`` per component.
    """

    projection: Projection
    pi_nats: float
    restarts: List[RestartRecord]
    chosen_restart: Union[int, Tuple[int, ...]]
    T: int = 1
    method: str = "joint_time_domain"
    shift_applied: float = 0.0

    def to_dict(self, include_traces=True):
        restarts = []
        for r in self.restarts:
            rd = asdict(r)
            if not include_traces:
                rd.pop("loss_trace")
                rd.pop("pi_trace")
            restarts.append(rd)
        chosen = self.chosen_restart
        return {
            "method": self.method,
            "T": self.T,
            "n": self.projection.n,
            "d": self.projection.d,
            "pi_nats": self.pi_nats,
            "shift_applied": self.shift_applied,
            "chosen_restart": list(chosen) if isinstance(chosen, tuple) else chosen,
            "restarts": restarts,
            "projection": self.projection.matrix.tolist(),
        }


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------

def _penalty(V):
    E = V.T @ V - np.eye(V.shape[1])
    return float(np.sum(E * E)), E


def _logdet_grad(CV, CtV, G, T, d):
    A = _kernels.block_diag_sums(G, T, d)
    g = CV[0] @ A[0]
    for k in range(1, T):
        g = g + CV[k] @ A[k] + CtV[k] @ A[k].T
    return 2.0 * g


def _time_loss_grad(lags, V, T, lam, need_grad=True):
    """Loss, gradient and information term for the time-domain objective."""
    d = V.shape[1]
    CV = lags @ V
    P = V.T @ CV
    big = _kernels.toeplitz(P, 2 * T)
    big = 0.5 * (big + big.T)
    m = T * d
    pen, E = _penalty(V)
    if not need_grad:
        pi = cholesky_logdet(big[:m, :m]) - 0.5 * cholesky_logdet(big)
        return -pi + lam * pen, None, pi
    ld1, G1 = cholesky_logdet_inv(big[:m, :m])
    ld2, G2 = cholesky_logdet_inv(big)
    pi = ld1 - 0.5 * ld2
    CtV = np.swapaxes(lags, 1, 2) @ V
    g_pi = _logdet_grad(CV, CtV, G1, T, d) - 0.5 * _logdet_grad(CV, CtV, G2, 2 * T, d)
    grad = -g_pi + 4.0 * lam * V @ E
    return -pi + lam * pen, grad, pi


def _freq_loss_grad(lags, v, T, lam, need_grad=True):
    """1-D frequency-domain objective; ``v`` has shape (n, 1)."""
    L = 2 * T
    Cv = lags[:L] @ v
    f = (v.T @ Cv)[:, 0, 0]
    pi, df = freq_pi_autocov_grad(f, T)
    pen, E = _penalty(v)
    loss = -pi + lam * pen
    if not need_grad:
        return loss, None, pi
    Ctv = np.swapaxes(lags[:L], 1, 2) @ v
    g_pi = np.tensordot(df, Cv + Ctv, axes=(0, 0))
    return loss, -g_pi + 4.0 * lam * v @ E, pi


def _as_matrix(V):
    if isinstance(V, Projection):
        return np.array(V.matrix)
    V = np.asarray(V, dtype=np.float64)
    return V[:, None] if V.ndim == 1 else V


def _check(covs, V, T):
    if covs.two_t < 2 * T:
        raise InvalidArgumentError(f"need {2 * T} lags, have {covs.two_t}")
    if V.shape[0] != covs.n:
        raise InvalidArgumentError(f"V has {V.shape[0]} rows, covariances are n={covs.n}")


def dca_loss(covs: CrossCovSet, V, T: int, lam: float) -> float:
    """``-I_T(V^T x) + lam * ||V^T V - I||_F^2``."""
    V = _as_matrix(V)
    _check(covs, V, T)
    return _time_loss_grad(covs.lags[: 2 * T], V, T, lam, need_grad=False)[0]


def dca_grad(covs: CrossCovSet, V, T: int, lam: float) -> np.ndarray:
    """Exact gradient of :func:`dca_loss` with respect to ``V`` (shape n x d)."""
    V = _as_matrix(V)
    _check(covs, V, T)
    return _time_loss_grad(covs.lags[: 2 * T], V, T, lam)[1]


# ---------------------------------------------------------------------------
# L-BFGS with strong-Wolfe line search
# ---------------------------------------------------------------------------

def _cubic_min(a, fa, da, b, fb, db):
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - da * db
    if not np.isfinite(rad) or rad < 0:
        return None
    d2 = np.sign(b - a) * np.sqrt(rad)
    den = db - da + 2.0 * d2
    if den == 0:
        return None
    return b - (b - a) * (db + d2 - d1) / den


def strong_wolfe(phi, f0, d0, alpha1, c1=1e-4, c2=0.9, max_iter=30, alpha_max=1e10):
    """Step length satisfying the strong Wolfe conditions.

    ``phi(alpha)`` returns ``(f, dphi, payload)``; ``f = inf`` marks an
    infeasible trial. Returns ``(alpha, payload)`` or ``None``.
    """
    evals = [0]

    def zoom(lo, hi, f_lo, f_hi, d_lo, d_hi, pay_lo):
        while evals[0] < max_iter:
            width = abs(hi - lo)
            if width <= 1e-14 * max(1.0, abs(lo)):
                break
            alpha = None
            if np.isfinite(f_hi) and np.isfinite(d_hi):
                alpha = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            left, right = min(lo, hi), max(lo, hi)
            if alpha is None or not (left + 0.1 * width <= alpha <= right - 0.1 * width):
                alpha = 0.5 * (lo + hi)
            f, d, pay = phi(alpha)
            evals[0] += 1
            if f > f0 + c1 * alpha * d0 or f >= f_lo:
                hi, f_hi, d_hi = alpha, f, d
            else:
                if abs(d) <= -c2 * d0:
                    return alpha, pay
                if d * (hi - lo) >= 0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo, pay_lo = alpha, f, d, pay
        # sufficient decrease without curvature: still a safe descent step
        if lo > 0:
            return lo, pay_lo
        return None

    a_prev, f_prev, d_prev, pay_prev = 0.0, f0, d0, None
    alpha = alpha1
    while evals[0] < max_iter:
        f, d, pay = phi(alpha)
        evals[0] += 1
        if f > f0 + c1 * alpha * d0 or (a_prev > 0 and f >= f_prev):
            return zoom(a_prev, alpha, f_prev, f, d_prev, d, pay_prev)
        if abs(d) <= -c2 * d0:
            return alpha, pay
        if d >= 0:
            return zoom(alpha, a_prev, f, f_prev, d, d_prev, pay)
        a_prev, f_prev, d_prev, pay_prev = alpha, f, d, pay
        alpha = min(2.0 * alpha, alpha_max)
    return (a_prev, pay_prev) if a_prev > 0 else None


@dataclass
class _LbfgsResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    converged: bool
    f_trace: list
    aux_trace: list
    status: str = "grad_tol"


def lbfgs(fun, x0, memory=10, max_iter=500, grad_tol=1e-6):
    """Minimize ``fun`` with limited-memory BFGS.

    ``fun(x)`` returns ``(f, grad, aux)``; it may raise
    :class:`DegenerateCovarianceError`, which the line search treats as an
    infeasible step. Convergence is declared when ``max|grad| < grad_tol``.
    ``status`` of the result is ``"grad_tol"``, ``"max_iter"`` or
    ``"line_search"`` (no acceptable step along steepest descent, which in
    practice means the loss is flat to rounding error).
    """
    x = np.array(x0, dtype=np.float64)
    f, g, aux = fun(x)
    S, Y = deque(maxlen=memory), deque(maxlen=memory)
    f_trace, aux_trace = [f], [aux]
    it = 0
    converged = False
    status = "line_search"
    while True:
        if np.abs(g).max() < grad_tol:
            converged = True
            status = "grad_tol"
            break
        if it >= max_iter:
            status = "max_iter"
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y in zip(reversed(S), reversed(Y)):
            rho = 1.0 / (y @ s)
            a = rho * (s @ q)
            q -= a * y
            alphas.append((rho, a))
        if S:
            q *= (S[-1] @ Y[-1]) / (Y[-1] @ Y[-1])
        for (s, y), (rho, a) in zip(zip(S, Y), reversed(alphas)):
            q += (a - rho * (y @ q)) * s
        p = -q
        d0 = g @ p
        if not d0 < 0:
            S.clear()
            Y.clear()
            p = -g
            d0 = -(g @ g)
        alpha1 = 1.0 if S else min(1.0, 1.0 / np.sqrt(g @ g))

        def phi(alpha):
            xt = x + alpha * p
            try:
                ft, gt, at = fun(xt)
            except DegenerateCovarianceError:
                return np.inf, np.nan, None
            if not np.isfinite(ft):
                return np.inf, np.nan, None
            return ft, gt @ p, (xt, ft, gt, at)

        res = strong_wolfe(phi, f, d0, alpha1)
        if res is None:
            if S:
                S.clear()
                Y.clear()
                continue
            break
        _, (x_new, f_new, g_new, aux) = res
        s = x_new - x
        y = g_new - g
        if s @ y > 1e-12 * np.sqrt((s @ s) * (y @ y)):
            S.append(s)
            Y.append(y)
        x, f, g = x_new, f_new, g_new
        f_trace.append(f)
        aux_trace.append(aux)
        it += 1
    return _LbfgsResult(x, f, g, it, converged, f_trace, aux_trace, status)


# ---------------------------------------------------------------------------
# Fitting
# ---------------------------------------------------------------------------

def _orthonormal(M):
    return Projection.orthonormalized(M).matrix


def _restart_seeds(seed, n_restarts, component=0):
    entropy = seed if component == 0 else [seed, component]
    return [int(s) for s in np.random.SeedSequence(entropy).generate_state(n_restarts)]


def _run_restarts(objective, lags, n, d, T, opts, component=0):
    """Run ``opts.n_restarts`` optimizations; return (records, best_V, best_index)."""
    records, results = [], []
    for s in _restart_seeds(opts.seed, opts.n_restarts, component):
        rng = np.random.default_rng(s)
        V0 = _orthonormal(rng.standard_normal((n, d)))

        def fun(x):
            f, g, pi = objective(lags, x.reshape(n, d), T, opts.penalty_lambda)
            return f, g.ravel(), pi

        try:
            res = lbfgs(fun, V0.ravel(), max_iter=opts.max_iter, grad_tol=opts.grad_tol)
        except DegenerateCovarianceError as exc:
            records.append(RestartRecord(s, np.nan, np.nan, np.nan, np.nan, 0, False,
                                         component, error=str(exc), status="error"))
            results.append(None)
            continue
        V = res.x.reshape(n, d)
        records.append(RestartRecord(
            seed=s, initial_loss=float(res.f_trace[0]), final_loss=float(res.f),
            penalty_residual=opts.penalty_lambda * _penalty(V)[0],
            grad_norm=float(np.abs(res.g).max()), iterations=res.iterations,
            converged=res.converged, component=component, status=res.status,
            loss_trace=[float(v) for v in res.f_trace],
            pi_trace=[float(v) for v in res.aux_trace]))
        results.append(V)
    ok = [i for i, V in enumerate(results) if V is not None]
    if not ok:
        raise FitFailureError("all restarts failed", [asdict(r) for r in records])
    pool = [i for i in ok if records[i].converged] or ok
    # min() keeps the first of equal losses, so ties go to the lowest index
    best = min(pool, key=lambda i: records[i].final_loss)
    return records, results[best], best


def _prepare(covs, opts):
    if opts.d > covs.n:
        raise InvalidArgumentError(f"d={opts.d} exceeds n={covs.n}")
    if covs.two_t < 2 * opts.T:
        raise InvalidArgumentError(f"need {2 * opts.T} lags, have {covs.two_t}")
    return regularize_crosscov(covs.truncate(2 * opts.T), 2 * opts.T)


def _trivial_report(covs, opts, shift):
    V = np.eye(covs.n)
    pi = float(_pi_from_lags(covs.lags, opts.T))
    rec = RestartRecord(opts.seed, -pi, -pi, 0.0, 0.0, 0, True, pi_trace=[pi], loss_trace=[-pi])
    chosen = 0 if opts.method == "joint_time_domain" else tuple([0] * covs.n)
    return FitReport(Projection(V, True), pi, [rec], chosen, opts.T, opts.method, shift)


def fit_dca(covs: CrossCovSet, opts: FitOptions) -> FitReport:
    """Jointly fit a ``d``-dimensional projection maximizing time-domain PI.

    With ``opts.whiten`` the search runs on covariances whitened by
    ``C0^{-1/2}``; restart records (losses, penalty residuals) then refer to
    the whitened coordinates. The returned projection and ``pi_nats`` are
    always in the original coordinates.
    """
    if opts.method != "joint_time_domain":
        return fit_dca_deflation(covs, opts)
    covs, shift = _prepare(covs, opts)
    n, d, T = covs.n, opts.d, opts.T
    if d == n:
        return _trivial_report(covs, opts, shift)
    if opts.whiten:
        # PI depends on span(V) only, so optimizing over C0^{-1/2} V reaches
        # the same optima while removing the scale spread of C0.
        M = inv_sqrt(covs[0])
        records, V, best = _run_restarts(_time_loss_grad, M @ covs.lags @ M, n, d, T, opts)
        V = M @ V
    else:
        records, V, best = _run_restarts(_time_loss_grad, covs.lags, n, d, T, opts)
    proj = Projection.orthonormalized(V)
    pi = float(_pi_from_lags(np.array(proj.matrix.T @ covs.lags @ proj.matrix), T))
    return FitReport(proj, pi, records, best, T, opts.method, shift)


def fit_dca_deflation(covs: CrossCovSet, opts: FitOptions) -> FitReport:
    """Greedy fit: one direction at a time, each projected out before the next."""
    if opts.method == "joint_time_domain":
        raise InvalidArgumentError("deflation needs a deflation_* method")
    covs, shift = _prepare(covs, opts)
    n, d, T = covs.n, opts.d, opts.T
    if d == n:
        return _trivial_report(covs, opts, shift)
    objective = _freq_loss_grad if opts.method == "deflation_freq_domain" else _time_loss_grad
    basis = np.eye(n)
    lags = np.array(covs.lags)
    directions, records, chosen = [], [], []
    for c in range(d):
        m = basis.shape[1]
        recs, v, best = _run_restarts(objective, lags, m, 1, T, opts, component=c)
        chosen.append(len(records) + best)
        records.extend(recs)
        v = v[:, 0] / np.linalg.norm(v)
        directions.append(basis @ v)
        Q = np.linalg.qr(v[:, None], mode="complete")[0][:, 1:]
        basis = basis @ Q
        lags = Q.T @ lags @ Q
    proj = Projection.orthonormalized(np.column_stack(directions))
    pi = float(_pi_from_lags(np.array(proj.matrix.T @ covs.lags @ proj.matrix), T))
    return FitReport(proj, pi, records, tuple(chosen), T, opts.method, shift)


class DCA:
    """Estimator-style wrapper: center, estimate covariances, fit, project.

    Parameters
    ----------
    d : int
        Number of components.
    T : int
        Past/future window length in steps.
    **fit_kwargs
        Remaining :class:`FitOptions` fields.
    """

    def __init__(self, d, T, **fit_kwargs):
        self.options = FitOptions(T=T, d=d, **fit_kwargs)
        self.report_ = None
        self.mean_ = None

    def fit(self, X, chunk=None):
        series = as_series(X)
        self.mean_ = series.data.mean(axis=0)
        covs = estimate_crosscov(mean_center(series), 2 * self.options.T, chunk=chunk)
        self.report_ = fit_dca(covs, self.options)
        return self

    @property
    def coef_(self):
        return self.report_.projection.matrix

    def transform(self, X):
        data = X.data if isinstance(X, TimeSeries) else np.asarray(X, dtype=np.float64)
        return (data - self.mean_) @ self.coef_

    def fit_transform(self, X, chunk=None):
        return self.fit(X, chunk).transform(X)
