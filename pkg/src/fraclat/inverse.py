"""Recovering f supported in W from its half-Laplacian sampled on Omega.

The forward map restricted to index sets W, Omega of the discrete torus is
a small dense matrix of (negatives of) periodized kernel values.  The
problem is severely ill-posed as the sets separate; recovery uses Tikhonov
regularization with an H^1 Gram penalty on W, the regularization strength
chosen by the discrepancy principle.  A seeded noise sweep produces a
stability curve whose error-versus-|log(data ratio)| slope is fitted in
log-log coordinates.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .kernel import torus_kernel_table
from .lattice import TorusFunction, _sobolev_multiplier, apply_frac_torus_spectral


@dataclass(frozen=True)
class InverseSetup:
    """Torus size, support set W, measurement set Omega, and knobs.

    The fractional order is pinned to 1/2 (the harmonic-extension regime
    the stability theory covers).
    """

    N: int
    W: tuple
    Omega: tuple
    s: float = 0.5
    reg_lambda: float = 1e-10
    noise_level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.s != 0.5:
            raise ValueError("the inverse problem is posed for s = 1/2")
        W = tuple(int(w) for w in self.W)
        Om = tuple(int(o) for o in self.Omega)
        if not W or not Om:
            raise ValueError("W and Omega must be nonempty")
        if set(W) & set(Om):
            raise ValueError("W and Omega must be disjoint")
        n = 2 * self.N + 1
        if any(not -self.N <= x <= self.N for x in W + Om):
            raise ValueError("W and Omega must lie in {-N..N}")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "Omega", Om)

    @property
    def h(self):
        return 2.0 * math.pi / (2 * self.N + 1)


@dataclass(frozen=True)
class StabilityCurve:
    """Noise sweep record: (eps, recovery error, data ratio) triples plus the
    fitted log-modulus exponent and constant."""

    points: list
    fitted_nu: float
    fitted_C: float
    r_squared: float
    extras: dict = field(default_factory=dict)

    def to_json(self, setup=None):
        obj = {
            "points": [list(p) for p in self.points],
            "fitted_nu": self.fitted_nu,
            "fitted_C": self.fitted_C,
            "r_squared": self.r_squared,
        }
        if setup is not None:
            obj.update({"N": setup.N, "W": list(setup.W),
                        "Omega": list(setup.Omega), "seed": setup.seed})
        return json.dumps(obj, sort_keys=True)


def h1_gram(N, W):
    """H^1(W) Gram matrix of the delta basis on W, from the torus multiplier."""
    n = 2 * N + 1
    h = 2.0 * math.pi / n
    W = [int(w) for w in W]
    m = np.arange(-N, N + 1)
    mult = _sobolev_multiplier(N, 1, h)
    P = np.empty((len(W), len(W)))
    for a, wa in enumerate(W):
        for b, wb in enumerate(W):
            P[a, b] = (h / n) * float(np.sum(mult * np.cos(2.0 * math.pi * m * (wa - wb) / n)))
    return P


def forward_matrix(setup, check_columns=5, rng=None):
    """|Omega| x |W| map: column w holds the operator of delta_w on Omega.

    Entries are -K^A(omega - w) (the sets are disjoint, so the diagonal
    never appears); a random subset of columns is verified against the
    spectral application.
    """
    table = torus_kernel_table(setup.s, setup.N, 1, tol=1e-13)
    A = np.empty((len(setup.Omega), len(setup.W)))
    for j, w in enumerate(setup.W):
        for i, om in enumerate(setup.Omega):
            A[i, j] = -table.value(om - w)
    if check_columns:
        rng = np.random.default_rng(setup.seed) if rng is None else rng
        n = 2 * setup.N + 1
        cols = rng.choice(len(setup.W), size=min(check_columns, len(setup.W)),
                          replace=False)
        for j in cols:
            delta = np.zeros(n)
            delta[(setup.W[j] + setup.N) % n] = 1.0
            out = apply_frac_torus_spectral(TorusFunction(setup.N, 1, delta), setup.s)
            ref = np.array([out.value(om) for om in setup.Omega])
            if np.abs(A[:, j] - ref).max() > 1e-10:
                raise AssertionError(
                    "forward matrix column disagrees with the spectral route")
    return A


def recover_tikhonov(A, g, lam, P, method="augmented"):
    """Minimizer of ||A f - g||^2 + lam * f' P f.

    method='augmented' stacks A over sqrt(lam) chol(P) and solves one least
    squares problem (conditioning kappa, not kappa^2; required for the
    noiseless regime where lam must sit below sigma_min^2 ~ 1e-13);
    method='normal' uses the normal equations with a Cholesky factorization.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    if method == "normal":
        M = A.T @ A + lam * P
        c, low = scipy.linalg.cho_factor(M)
        return scipy.linalg.cho_solve((c, low), A.T @ g)
    L = np.linalg.cholesky(P).T
    aug = np.vstack([A, math.sqrt(lam) * L])
    rhs = np.concatenate([g, np.zeros(A.shape[1])])
    return np.linalg.lstsq(aug, rhs, rcond=None)[0]


class LambdaRangeError(RuntimeError):
    """The discrepancy target is not bracketed by the lambda search range."""


def discrepancy_lambda(A, g, P, target, lam_lo=1e-16, lam_hi=1e8, iters=120):
    """Bisection on log(lambda) for ||A f_lambda - g|| = target (monotone)."""

    def resid(lam):
        f = recover_tikhonov(A, g, lam, P)
        return float(np.linalg.norm(A @ f - g))

    r_lo, r_hi = resid(lam_lo), resid(lam_hi)
    if not r_lo <= target <= r_hi:
        raise LambdaRangeError(
            f"target residual {target:.3e} outside [{r_lo:.3e}, {r_hi:.3e}]")
    lo, hi = math.log(lam_lo), math.log(lam_hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if resid(math.exp(mid)) < target:
            lo = mid
        else:
            hi = mid
    return math.exp(0.5 * (lo + hi))


def _draw_f(rng, P):
    f = rng.standard_normal(P.shape[0])
    return f / math.sqrt(float(f @ P @ f))


def noiseless_recovery_error(setup, trials=5):
    """Mean L2(W) recovery error for exact data at vanishing regularization.

    The floor lam = 1e-16 ||A||^2 keeps every singular direction of this
    finite-dimensional (hence well-posed) section alive.
    """
    A = forward_matrix(setup)
    P = h1_gram(setup.N, setup.W)
    lam = 1e-16 * np.linalg.norm(A, 2) ** 2
    errs = []
    for t in range(trials):
        rng = np.random.default_rng(setup.seed ^ (t + 1))
        f_true = _draw_f(rng, P)
        f_hat = recover_tikhonov(A, A @ f_true, lam, P)
        errs.append(math.sqrt(setup.h) * float(np.linalg.norm(f_hat - f_true)))
    return float(np.mean(errs))


def stability_sweep(setup, eps_list, trials=10):
    """Noise sweep: seeded H^1-normalized truths, relative Gaussian noise,
    discrepancy-principle regularization, and a log-log stability fit.

    Each trial owns the generator seeded by ``seed XOR trial``, so results
    do not depend on evaluation order.  Returns a StabilityCurve with
    points (eps, mean L2(W) recovery error, mean data ratio).
    """
    eps = [float(e) for e in eps_list]
    if any(not 0.0 < e < 1.0 for e in eps):
        raise ValueError("eps values must lie in (0,1)")
    if any(eps[i] <= eps[i + 1] for i in range(len(eps) - 1)):
        raise ValueError("eps_list must be strictly decreasing")
    A = forward_matrix(setup)
    P = h1_gram(setup.N, setup.W)
    h = setup.h
    errors = np.zeros((len(eps), trials))
    ratios = np.zeros((len(eps), trials))
    lambdas = np.zeros((len(eps), trials))
    for t in range(trials):
        rng = np.random.default_rng(setup.seed ^ (t + 1))
        f_true = _draw_f(rng, P)
        g0 = A @ f_true
        eta = rng.standard_normal(g0.size)
        eta *= float(np.linalg.norm(g0)) / float(np.linalg.norm(eta))
        for i, e in enumerate(eps):
            g = g0 + e * eta
            lam = discrepancy_lambda(A, g, P, e * float(np.linalg.norm(g)))
            f_hat = recover_tikhonov(A, g, lam, P)
            errors[i, t] = math.sqrt(h) * float(np.linalg.norm(f_hat - f_true))
            ratios[i, t] = e * float(np.linalg.norm(g0))
            lambdas[i, t] = lam
    err_mean = errors.mean(axis=1)
    err_std = errors.std(axis=1)
    ratio_mean = ratios.mean(axis=1)
    if len(eps) >= 2:
        x = np.log(np.abs(np.log(ratio_mean)))
        y = np.log(err_mean)
        slope, intercept = np.polyfit(x, y, 1)
        pred = slope * x + intercept
        ss_res = float(np.sum((y - pred) ** 2))
        ss_tot = float(np.sum((y - y.mean()) ** 2))
        r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    else:
        slope, intercept, r2 = 0.0, math.log(float(err_mean[0])), 1.0
    points = [(eps[i], float(err_mean[i]), float(ratio_mean[i]))
              for i in range(len(eps))]
    return StabilityCurve(
        points=points,
        fitted_nu=float(-slope),
        fitted_C=float(math.exp(intercept)),
        r_squared=r2,
        extras={"err_std": err_std.tolist(),
                "lambda_geomean": np.exp(np.log(lambdas).mean(axis=1)).tolist()},
    )


def stability_bound(eps, h, nu, C, f_h1):
    """Two-term logarithmic stability bound:
    C |log eps|^{-nu} f_h1 + C exp(-(C h)^{-1} |log eps|^{-1+nu}) f_h1."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0,1)")
    if h <= 0.0:
        raise ValueError("h must be positive")
    le = abs(math.log(eps))
    return C * f_h1 * le ** (-nu) + C * f_h1 * math.exp(-(le ** (nu - 1.0)) / (C * h))


def continuum_regime(h0, eps, nu, C):
    """Whether h0 <= 10^{-1} |log eps|^{-1+nu} |log(-C log eps)|^{-1}."""
    if not 0.0 < eps < 1.0:
        raise ValueError("eps must lie in (0,1)")
    y = -C * math.log(eps)
    if y <= 1.0:
        raise ValueError("-C log(eps) must exceed 1 for the nested logarithm")
    rhs = 0.1 * abs(math.log(eps)) ** (nu - 1.0) / abs(math.log(y))
    return h0 <= rhs
