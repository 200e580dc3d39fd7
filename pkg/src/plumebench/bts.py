"""Background-target separation.

Jointly fits a shared background spectrum, per-contaminated-pixel signal
strength vectors, and a bounded target shape to a clean pixel set and a
contaminated pixel set:

    min  (1/n) sum ||L_i - L_off||^2  +  (1/m) sum ||Lbar_i - (L_off + psi_i*t)||^2
    s.t. psi_ij >= 0 (emission) or <= 0 (absorption),  0 <= t_j <= 1

with elementwise products throughout. The problem is bilinear in (psi, t),
so the solver accepts local minima; acceptance is defined against the
initialization and independent oracles. Solved with L-BFGS-B.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import NumericalError

SIGN_MODES = ("emission", "absorption")


@dataclass(frozen=True)
class BtsProblem:
    clean: np.ndarray         # (n, B) pixels modeled as L_off
    contaminated: np.ndarray  # (m, B) pixels modeled as L_off + psi_i * t
    sign_mode: str = "emission"

    def __post_init__(self):
        clean = np.atleast_2d(np.asarray(self.clean, dtype=np.float64))
        contaminated = np.asarray(self.contaminated, dtype=np.float64)
        if contaminated.size == 0:
            contaminated = np.empty((0, clean.shape[1]))
        contaminated = np.atleast_2d(contaminated)
        if clean.shape[0] == 0:
            raise ValueError("clean set must be nonempty")
        if contaminated.shape[0] and contaminated.shape[1] != clean.shape[1]:
            raise ValueError("band counts of clean and contaminated sets disagree")
        if self.sign_mode not in SIGN_MODES:
            raise ValueError(f"sign_mode must be one of {SIGN_MODES}")
        object.__setattr__(self, "clean", clean)
        object.__setattr__(self, "contaminated", contaminated)

    @property
    def band_count(self) -> int:
        return self.clean.shape[1]

    @property
    def n_contaminated(self) -> int:
        return self.contaminated.shape[0]


@dataclass(frozen=True)
class BtsSolution:
    l_off: np.ndarray   # (B,)
    psi: np.ndarray     # (m, B), sign-constrained
    t: np.ndarray       # (B,) in [0, 1]
    objective: float
    converged: bool
    iterations: int
    trace: tuple = ()   # objective value at each accepted iterate, when recorded

    def write_trace_csv(self, path):
        """Dump the per-iteration objective trace (needs record_trace=True)."""
        with open(path, "w") as fh:
            fh.write("iteration,objective\n")
            for i, value in enumerate(self.trace):
                fh.write(f"{i},{value!r}\n")


def bts_objective(l_off, psi, t, problem: BtsProblem):
    """Objective value and analytic gradients (d_l_off, d_psi, d_t)."""
    l_off = np.asarray(l_off, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    m = problem.n_contaminated
    psi = np.asarray(psi, dtype=np.float64).reshape(m, problem.band_count)

    clean_resid = problem.clean - l_off
    n = problem.clean.shape[0]
    value = (clean_resid ** 2).sum() / n
    d_l_off = -2.0 * clean_resid.sum(axis=0) / n

    if m > 0:
        cont_resid = problem.contaminated - l_off - psi * t
        value += (cont_resid ** 2).sum() / m
        d_l_off += -2.0 * cont_resid.sum(axis=0) / m
        d_psi = -2.0 * cont_resid * t / m
        d_t = -2.0 * (cont_resid * psi).sum(axis=0) / m
    else:
        d_psi = np.zeros_like(psi)
        d_t = np.zeros_like(t)
    return float(value), (d_l_off, d_psi, d_t)


def _initialize(problem: BtsProblem, seed):
    l_off0 = problem.clean.mean(axis=0)
    b = problem.band_count
    m = problem.n_contaminated
    if m == 0:
        return l_off0, np.zeros((0, b)), np.zeros(b)

    resid = problem.contaminated - l_off0
    mean_resid = resid.mean(axis=0)
    if problem.sign_mode == "emission":
        t0 = np.maximum(mean_resid, 0.0)
    else:
        t0 = np.maximum(-mean_resid, 0.0)
    peak = t0.max()
    if peak > 0:
        t0 = np.clip(t0 / peak, 0.0, 1.0)
    else:
        # no residual mass on the feasible side: fall back to a small random shape
        rng = np.random.default_rng(seed)
        t0 = rng.uniform(0.05, 0.15, size=b)

    denom = float(t0 @ t0)
    coeff = resid @ t0 / denom if denom > 0 else np.zeros(m)
    if problem.sign_mode == "emission":
        coeff = np.maximum(coeff, 0.0)
    else:
        coeff = np.minimum(coeff, 0.0)
    psi0 = np.repeat(coeff[:, None], b, axis=1)
    return l_off0, psi0, t0


def solve_bts(problem: BtsProblem, max_iter=500, tol=1e-8, seed=0,
              record_trace=False) -> BtsSolution:
    """Bound-constrained L-BFGS-B minimization of the BTS objective.

    Raises NumericalError (carrying the last feasible iterate) if the
    objective turns non-finite during iteration.
    """
    b = problem.band_count
    m = problem.n_contaminated
    l_off0, psi0, t0 = _initialize(problem, seed)
    x0 = np.concatenate([l_off0, psi0.ravel(), t0])

    if problem.sign_mode == "emission":
        psi_bounds = [(0.0, None)] * (m * b)
    else:
        psi_bounds = [(None, 0.0)] * (m * b)
    bounds = [(None, None)] * b + psi_bounds + [(0.0, 1.0)] * b

    def split(x):
        return x[:b], x[b: b + m * b].reshape(m, b), x[b + m * b:]

    last_feasible = {"x": x0.copy()}

    def fun(x):
        l_off, psi, t = split(x)
        value, (d_l, d_p, d_t) = bts_objective(l_off, psi, t, problem)
        grad = np.concatenate([d_l, d_p.ravel(), d_t])
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NumericalError("BTS objective became non-finite",
                                 last_iterate=last_feasible["x"].copy())
        last_feasible["x"] = x.copy()
        return value, grad

    trace = []
    callback = None
    if record_trace:
        def callback(xk):
            l_off, psi, t = split(xk)
            trace.append(bts_objective(l_off, psi, t, problem)[0])

    result = minimize(fun, x0, jac=True, method="L-BFGS-B", bounds=bounds,
                      callback=callback,
                      options={"maxiter": max_iter, "ftol": tol, "gtol": 1e-12})

    x = result.x
    l_off, psi, t = split(x)
    # L-BFGS-B keeps iterates inside the box; clip to make feasibility exact
    if m > 0:
        psi = np.maximum(psi, 0.0) if problem.sign_mode == "emission" else np.minimum(psi, 0.0)
    t = np.clip(t, 0.0, 1.0)
    value = bts_objective(l_off, psi, t, problem)[0]
    return BtsSolution(l_off=l_off, psi=psi, t=t, objective=value,
                       converged=bool(result.success), iterations=int(result.nit),
                       trace=tuple(trace))
