"""Equilibria of ``F(z, u, alpha) = grad K(z) - u = 0`` and internal-node elimination."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NoConvergence, SingularInternalBlock, SingularJacobian
from .graph_core import kron_reduce
from .network import NetworkModel, laplacian_at, nodal_currents

TOL_NEWTON = 1e-10
MAX_ITER = 50
MAX_HALVINGS = 30
SINGULAR_CUT = 1e-13


def newton(fun: Callable, jac: Callable, x0, *, tol=TOL_NEWTON, max_iter=MAX_ITER,
           singular=SingularJacobian, polish=True):
    """Damped Newton on a square system; returns ``(x, residual_inf, iterations)``.

    Steps are halved (at most ``MAX_HALVINGS`` times) until the residual
    2-norm decreases. Once the tolerance is met one extra full step is taken
    if it lowers the residual further.
    """
    x = np.array(x0, dtype=float)
    r = np.asarray(fun(x), dtype=float)
    if r.size == 0:
        return x, 0.0, 0
    norm = np.linalg.norm(r)
    for it in range(max_iter + 1):
        if np.max(np.abs(r)) <= tol:
            if polish:
                x, r = _polish(fun, jac, x, r)
            return x, float(np.max(np.abs(r))), it
        if it == max_iter:
            break
        J = np.asarray(jac(x), dtype=float)
        s = np.linalg.svd(J, compute_uv=False)
        if s[-1] <= SINGULAR_CUT * max(1.0, s[0]):
            raise singular(f"Jacobian singular at iteration {it} "
                           f"(sigma_min={s[-1]:.3e})")
        dx = np.linalg.solve(J, -r)
        t = 1.0
        for _ in range(MAX_HALVINGS + 1):
            x_new = x + t * dx
            r_new = np.asarray(fun(x_new), dtype=float)
            norm_new = np.linalg.norm(r_new)
            if np.isfinite(norm_new) and norm_new < norm:
                break
            t *= 0.5
        else:
            raise NoConvergence(f"line search failed at iteration {it} "
                                f"(residual {np.max(np.abs(r)):.3e})")
        x, r, norm = x_new, r_new, norm_new
    raise NoConvergence(f"no convergence after {max_iter} iterations "
                        f"(residual {np.max(np.abs(r)):.3e})")


def _polish(fun, jac, x, r):
    try:
        dx = np.linalg.solve(np.asarray(jac(x), dtype=float), -r)
    except np.linalg.LinAlgError:
        return x, r
    x_new = x + dx
    r_new = np.asarray(fun(x_new), dtype=float)
    if np.linalg.norm(r_new) < np.linalg.norm(r):
        return x_new, r_new
    return x, r


def _assemble(net: NetworkModel, z_B, z_C) -> np.ndarray:
    z = np.empty(net.n_nodes)
    z[net.boundary] = z_B
    z[net.central] = z_C
    return z


def solve_internal(net: NetworkModel, z_B, guess=None, *, tol=TOL_NEWTON,
                   max_iter=MAX_ITER) -> np.ndarray:
    """Internal potentials ``z_C`` with zero nodal current at every central node.

    Newton starts from ``guess`` (zeros by default) and follows the local
    branch connected to it.
    """
    c = net.central
    z_B = np.asarray(z_B, dtype=float)
    if not c:
        return np.zeros(0)
    x0 = np.zeros(len(c)) if guess is None else np.asarray(guess, dtype=float)

    def fun(z_C):
        return nodal_currents(net, _assemble(net, z_B, z_C))[c]

    def jac(z_C):
        L = laplacian_at(net, _assemble(net, z_B, z_C))
        return L[np.ix_(c, c)]

    z_C, _, _ = newton(fun, jac, x0, tol=tol, max_iter=max_iter,
                       singular=SingularInternalBlock)
    return z_C


def internal_state(net: NetworkModel, z_B, guess=None, **kw) -> np.ndarray:
    """Full potential vector ``(z_B, zbar_C(z_B))`` in node order."""
    return _assemble(net, z_B, solve_internal(net, z_B, guess, **kw))


def terminal_currents(net: NetworkModel, z_B, guess=None, **kw) -> np.ndarray:
    """Reduced terminal map ``z_B -> dK/dz_B(z_B, zbar_C(z_B))``."""
    z = internal_state(net, z_B, guess, **kw)
    return nodal_currents(net, z)[net.boundary]


def reduced_laplacian(net: NetworkModel, z_B, guess=None, **kw) -> np.ndarray:
    """Hessian of the reduced potential: Kron reduction of ``L(z)`` at the consistent state."""
    z = internal_state(net, z_B, guess, **kw)
    return kron_reduce(laplacian_at(net, z), net.partition)


@dataclass(frozen=True)
class EquilibriumProblem:
    net: NetworkModel
    boundary_currents: Sequence[float]
    parameter_overrides: Mapping[str, float] = field(default_factory=dict)
    initial_guess: Sequence[float] | None = None

    def __post_init__(self):
        u_B = np.asarray(self.boundary_currents, dtype=float)
        if u_B.shape != (self.net.n_boundary,):
            raise ValueError(f"expected {self.net.n_boundary} boundary currents")
        if abs(u_B.sum()) > 1e-10:
            raise ValueError("boundary currents must sum to zero")


@dataclass(frozen=True)
class EquilibriumSolution:
    z: np.ndarray
    residual_norm: float
    newton_iters: int
    internal_jacobian_condition: float


def solve_full(problem: EquilibriumProblem, *, ground: int | None = None,
               tol=TOL_NEWTON, max_iter=MAX_ITER) -> EquilibriumSolution:
    """Solve ``grad K(z) = u`` with one node grounded, then re-center to mean zero.

    Raises SingularJacobian when the grounded Jacobian is singular, which
    happens exactly at network singularities.
    """
    net = problem.net
    if problem.parameter_overrides:
        net = net.with_parameters(problem.parameter_overrides)
    n = net.n_nodes
    g = n - 1 if ground is None else int(ground)
    free = [i for i in range(n) if i != g]
    u = net.pad_currents(problem.boundary_currents)
    z0 = np.zeros(n) if problem.initial_guess is None else np.asarray(problem.initial_guess, float)
    z0 = z0 - z0[g]

    def full(x):
        z = np.zeros(n)
        z[free] = x
        return z

    def fun(x):
        return (nodal_currents(net, full(x)) - u)[free]

    def jac(x):
        return laplacian_at(net, full(x))[np.ix_(free, free)]

    x, res, iters = newton(fun, jac, z0[free], tol=tol, max_iter=max_iter)
    z = full(x)
    z -= z.mean()
    res = float(np.max(np.abs(nodal_currents(net, z) - u)))
    c = net.central
    if c:
        L_CC = laplacian_at(net, z)[np.ix_(c, c)]
        cond = float(np.linalg.cond(L_CC))
    else:
        cond = 1.0
    return EquilibriumSolution(z=z, residual_norm=res, newton_iters=iters,
                               internal_jacobian_condition=cond)
