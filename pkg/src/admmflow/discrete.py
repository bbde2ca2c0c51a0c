"""Penalty-scaled ADMM and its momentum-accelerated variant.

Both methods solve ``min f(x) + g(z)  s.t.  z = A x`` by alternating two
subproblem minimizations with a scaled dual update:

    x+ = argmin_x f(x) + (rho/2) ||A x - z + u||^2
    z+ = argmin_z g(z) + (rho/2) ||A x+ - z + u||^2
    u+ = u + A x+ - z+

The accelerated variant runs the same sweep against extrapolated copies
(z_hat, u_hat) and then re-extrapolates them with the momentum weight
``gamma = k / (k + r)``, ``r >= 3``.

Steps are pure functions of ``(problem, state)``; for quadratic ``f, g``
they use cached Cholesky solves, otherwise they delegate to a user-supplied
inner minimizer. The ``run_*`` drivers record trajectories.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .exceptions import NumericalError, UnsupportedFunctionError
from .problem import _as_vector, eval_V, resolve_v_star
from .trajectory import Trajectory

__all__ = [
    "AdmmState",
    "AccAdmmState",
    "SubproblemCache",
    "initial_admm_state",
    "initial_aadmm_state",
    "momentum_coefficient",
    "admm_step",
    "aadmm_step",
    "run_admm",
    "run_aadmm",
    "run_solver",
]

# Relative tolerance on the linear-system residual of each subproblem solve
SUBPROBLEM_RTOL = 1e-10


@dataclass
class AdmmState:
    """Iterate (x, z, u) with counter k and penalty rho > 0 (u is the scaled dual)."""

    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    k: int
    rho: float


@dataclass
class AccAdmmState:
    """Accelerated iterate: adds the extrapolated copies (z_hat, u_hat), the
    previous (z, u), and the damping parameter r >= 3."""

    x: np.ndarray
    z: np.ndarray
    u: np.ndarray
    z_prev: np.ndarray
    u_prev: np.ndarray
    z_hat: np.ndarray
    u_hat: np.ndarray
    k: int
    rho: float
    r: float


def momentum_coefficient(k, r):
    """Momentum weight ``k / (k + r)`` used by the accelerated step leaving counter k."""
    return k / (k + r)


def initial_admm_state(problem, x0, rho):
    """Start state with z0 = A x0 and u0 = 0."""
    x0 = np.array(_as_vector(x0, problem.n, "x0"))
    if rho <= 0:
        raise ValueError("penalty parameter rho must be positive")
    return AdmmState(x=x0, z=problem.A @ x0, u=np.zeros(problem.m), k=0, rho=float(rho))


def initial_aadmm_state(problem, x0, rho, r):
    """Start state with z0 = A x0, u0 = 0 and the extrapolated copies equal to them."""
    if r < 3:
        raise ValueError(f"damping parameter r must be >= 3, got {r}")
    base = initial_admm_state(problem, x0, rho)
    return AccAdmmState(
        x=base.x,
        z=base.z,
        u=base.u,
        z_prev=base.z.copy(),
        u_prev=base.u.copy(),
        z_hat=base.z.copy(),
        u_hat=base.u.copy(),
        k=0,
        rho=base.rho,
        r=float(r),
    )


class SubproblemCache:
    """Cholesky factors of the two quadratic subproblem systems for a fixed rho.

    The x-step solves ``(M_f + rho A^T A) x = rho A^T v - q_f`` and the
    z-step solves ``(M_g + rho I) z = rho w - q_g``. Both matrices are
    positive definite under full column rank of A with rho > 0, and are
    factored once per (problem, rho). Every solve is residual-checked to
    ``SUBPROBLEM_RTOL * (1 + ||rhs||)`` with one iterative-refinement retry.
    """

    def __init__(self, problem, rho):
        if not problem.is_quadratic:
            raise UnsupportedFunctionError(
                "closed-form subproblem solves require quadratic f and g; "
                "pass inner_solver for callback functions"
            )
        if rho <= 0:
            raise ValueError("penalty parameter rho must be positive")
        self.problem = problem
        self.rho = float(rho)
        self._hx = problem.f.M + rho * problem.ata
        self._hz = problem.g.M + rho * np.eye(problem.m)
        try:
            self._hx_factor = cho_factor(self._hx)
            self._hz_factor = cho_factor(self._hz)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular subproblem system: {exc}") from exc

    def solve_x(self, v):
        rhs = self.rho * (self.problem.A.T @ v) - self.problem.f.q
        return self._solve(self._hx, self._hx_factor, rhs, "x")

    def solve_z(self, w):
        rhs = self.rho * w - self.problem.g.q
        return self._solve(self._hz, self._hz_factor, rhs, "z")

    def _solve(self, H, factor, rhs, which):
        sol = cho_solve(factor, rhs)
        tol = SUBPROBLEM_RTOL * (1.0 + np.linalg.norm(rhs))
        resid = rhs - H @ sol
        if np.linalg.norm(resid) > tol:
            sol = sol + cho_solve(factor, resid)
            resid = rhs - H @ sol
            if np.linalg.norm(resid) > tol:
                raise NumericalError(
                    f"{which}-subproblem residual {np.linalg.norm(resid):.3e} "
                    f"exceeds tolerance {tol:.3e}"
                )
        return sol


def _check_cache(problem, rho, cache):
    if cache is None:
        return SubproblemCache(problem, rho)
    if cache.problem is not problem or cache.rho != rho:
        raise ValueError("subproblem cache was built for a different (problem, rho)")
    return cache


def _solve_x_generic(problem, rho, v, start, inner_solver):
    A, f = problem.A, problem.f

    def fun(x):
        resid = A @ x - v
        return f.value(x) + 0.5 * rho * float(resid @ resid)

    def grad(x):
        return f.grad(x) + rho * (A.T @ (A @ x - v))

    return np.asarray(inner_solver(fun, grad, start), dtype=float)


def _solve_z_generic(problem, rho, w, start, inner_solver):
    g = problem.g

    def fun(z):
        resid = w - z
        return g.value(z) + 0.5 * rho * float(resid @ resid)

    def grad(z):
        return g.grad(z) - rho * (w - z)

    return np.asarray(inner_solver(fun, grad, start), dtype=float)


def _check_state_dims(problem, state):
    if state.x.shape != (problem.n,) or state.z.shape != (problem.m,) or state.u.shape != (problem.m,):
        raise ValueError("state dimensions do not match the problem")
    if state.rho <= 0:
        raise ValueError("penalty parameter rho must be positive")


def admm_step(problem, state, cache=None, inner_solver=None):
    """One ADMM sweep: x-minimization, z-minimization, scaled dual ascent.

    With quadratic f, g the two subproblems are solved exactly through
    cached Cholesky factors (built on the fly when ``cache`` is None;
    drivers build it once per run). Otherwise ``inner_solver(fun, grad, x0)``
    must minimize a smooth convex function to gradient-norm tolerance 1e-10.
    """
    _check_state_dims(problem, state)
    if inner_solver is not None:
        x_new = _solve_x_generic(problem, state.rho, state.z - state.u, state.x, inner_solver)
        z_new = _solve_z_generic(problem, state.rho, problem.A @ x_new + state.u, state.z, inner_solver)
    else:
        cache = _check_cache(problem, state.rho, cache)
        x_new = cache.solve_x(state.z - state.u)
        z_new = cache.solve_z(problem.A @ x_new + state.u)
    u_new = state.u + problem.A @ x_new - z_new
    return AdmmState(x=x_new, z=z_new, u=u_new, k=state.k + 1, rho=state.rho)


def aadmm_step(problem, state, cache=None, inner_solver=None, gamma=None):
    """One accelerated sweep against the extrapolated copies (z_hat, u_hat).

    The sweep mirrors :func:`admm_step` with (z_hat, u_hat) in place of
    (z, u); afterwards the copies are re-extrapolated with weight
    ``gamma = k / (k + r)`` evaluated at the pre-step counter, so the very
    first step (k = 0, gamma = 0) coincides with plain ADMM. ``gamma`` may
    be overridden, e.g. forced to zero to recover plain ADMM iterates.
    """
    _check_state_dims(problem, state)
    if state.r < 3:
        raise ValueError(f"damping parameter r must be >= 3, got {state.r}")
    if inner_solver is not None:
        x_new = _solve_x_generic(
            problem, state.rho, state.z_hat - state.u_hat, state.x, inner_solver
        )
        z_new = _solve_z_generic(
            problem, state.rho, problem.A @ x_new + state.u_hat, state.z, inner_solver
        )
    else:
        cache = _check_cache(problem, state.rho, cache)
        x_new = cache.solve_x(state.z_hat - state.u_hat)
        z_new = cache.solve_z(problem.A @ x_new + state.u_hat)
    u_new = state.u_hat + problem.A @ x_new - z_new
    g = momentum_coefficient(state.k, state.r) if gamma is None else float(gamma)
    return AccAdmmState(
        x=x_new,
        z=z_new,
        u=u_new,
        z_prev=state.z,
        u_prev=state.u,
        z_hat=z_new + g * (z_new - state.z),
        u_hat=u_new + g * (u_new - state.u),
        k=state.k + 1,
        rho=state.rho,
        r=state.r,
    )


def _run(problem, x0, rho, r, max_iter, stop_tol, v_star, inner_solver):
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    v_star = resolve_v_star(problem, v_star)
    accelerated = r is not None
    state = (
        initial_aadmm_state(problem, x0, rho, r)
        if accelerated
        else initial_admm_state(problem, x0, rho)
    )
    cache = None
    if inner_solver is None:
        cache = SubproblemCache(problem, rho)
    delta = 1.0 / rho if not accelerated else 1.0 / math.sqrt(rho)

    n_max = max_iter + 1
    ks = np.arange(n_max)
    xs = np.empty((n_max, problem.n))
    vals = np.empty(n_max)
    primal = np.empty(n_max)
    wall = np.empty(n_max)
    t_start = time.perf_counter()

    def record(i, st):
        xs[i] = st.x
        vals[i] = eval_V(problem, st.x)
        primal[i] = np.linalg.norm(problem.A @ st.x - st.z)
        wall[i] = time.perf_counter() - t_start

    record(0, state)
    n_samples = 1
    stopped_early = False
    while state.k < max_iter:
        z_prev = state.z
        if accelerated:
            state = aadmm_step(problem, state, cache=cache, inner_solver=inner_solver)
        else:
            state = admm_step(problem, state, cache=cache, inner_solver=inner_solver)
        record(state.k, state)
        n_samples += 1
        if primal[state.k] + np.linalg.norm(state.z - z_prev) <= stop_tol:
            stopped_early = True
            break

    sl = slice(0, n_samples)
    meta = {
        "method": "aadmm" if accelerated else "admm",
        "rho": float(rho),
        "max_iter": int(max_iter),
        "stop_tol": float(stop_tol),
        "stopped_early": stopped_early,
        "wall_time": wall[sl].copy(),
    }
    if accelerated:
        meta["r"] = float(r)
    return Trajectory(
        t=ks[sl] * delta,
        V=vals[sl].copy(),
        v_gap=vals[sl] - v_star,
        X=xs[sl].copy(),
        k=ks[sl].copy(),
        primal_residual=primal[sl].copy(),
        v_star=v_star,
        meta=meta,
    )


def run_admm(problem, x0, rho, max_iter, stop_tol=0.0, v_star=None, inner_solver=None):
    """Drive ADMM from ``x0`` (z0 = A x0, u0 = 0), recording a trajectory.

    Iterates until ``k = max_iter`` or
    ``||A x_k - z_k|| + ||z_k - z_{k-1}|| <= stop_tol`` (default 0, i.e. a
    fixed budget). The time column is ``t = k / rho``. Records per iterate:
    x, objective gap, primal residual and elapsed wall time (in ``meta``).
    """
    return _run(problem, x0, rho, None, max_iter, stop_tol, v_star, inner_solver)


def run_aadmm(problem, x0, rho, r, max_iter, stop_tol=0.0, v_star=None, inner_solver=None):
    """Drive accelerated ADMM; same recording as :func:`run_admm`, with the
    time column ``t = k / sqrt(rho)``."""
    if r is None or r < 3:
        raise ValueError(f"damping parameter r must be >= 3, got {r}")
    return _run(problem, x0, rho, float(r), max_iter, stop_tol, v_star, inner_solver)


def run_solver(problem, x0, rho, r=None, max_iter=300, stop_tol=0.0, v_star=None, inner_solver=None):
    """Run ADMM (``r`` is None) or accelerated ADMM (``r`` given)."""
    if r is None:
        return run_admm(problem, x0, rho, max_iter, stop_tol, v_star, inner_solver)
    return run_aadmm(problem, x0, rho, r, max_iter, stop_tol, v_star, inner_solver)
