"""Network singularities and the Lyapunov-Schmidt reduction of terminal behavior.

At a singular equilibrium ``z*`` the Laplacian ``L(z*)`` has a kernel
spanned by the ones vector and one critical direction ``v``. Splitting
``z = z* + x v + w`` with ``w`` orthogonal to both, the range equations
are solved for ``w`` and what is left is the scalar function
``f(x) = v^T F(z* + x v + w(x))``.  The same construction applied to the
Kron-reduced terminal map (with the boundary critical vector ``v_hat``)
gives ``f_hat``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from . import graph_core
from .conductance import Linear
from .equilibrium import internal_state, newton
from .errors import (AmbiguousKernel, DisconnectedGraph, HypothesesViolated, IllConditionedStencil,
                     InconsistentCertificate)
from .graph_core import (RANK_TOL, assemble_laplacian, effective_resistance, kron_reduce,
                         pseudoinverse, shift_basis, sign_normalize, unit_pair)
from .network import NetworkModel, laplacian_at, nodal_currents

# inner solves of the reduction run tighter than plain equilibrium solves so
# that finite-difference stencils see clean function values
TOL_LS = 1e-13
TOL_CLASS = 1e-4
TOL_SINGULAR_CHECK = 1e-6

# A path maps lambda to (u_B, network); lambda = 0 is the singular point.
Path = Callable[[float], "tuple[np.ndarray, NetworkModel]"]


@dataclass(frozen=True)
class SingularityReport:
    z_star: np.ndarray
    u_star: np.ndarray
    alpha_star: Mapping[str, float]
    v: np.ndarray
    v_hat: np.ndarray
    a: float
    a_B: float
    kernel_eigenvalue: float = 0.0
    terminals: tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "z_star": self.z_star.tolist(), "u_star": self.u_star.tolist(),
            "alpha_star": dict(self.alpha_star), "v": self.v.tolist(),
            "v_hat": self.v_hat.tolist(), "a": self.a, "a_B": self.a_B,
            "kernel_eigenvalue": self.kernel_eigenvalue,
        }


class Source(enum.Enum):
    FullEquations = "full"
    KronReducedEquations = "kron_reduced"
    ClosedForm = "closed_form"


@dataclass(frozen=True)
class LSCoefficients:
    f_x: float
    f_lambda: float
    f_xx: float
    f_lambdax: float
    f_xxx: float
    source: Source
    f: float = 0.0
    errors: Mapping[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("f", "f_x", "f_lambda", "f_xx", "f_lambdax", "f_xxx")}
        out["source"] = self.source.value
        if self.errors:
            out["error_estimates"] = dict(self.errors)
        return out


class BifurcationKind(enum.Enum):
    Transcritical = "transcritical"
    PitchforkSupercritical = "pitchfork (supercritical)"
    PitchforkSubcritical = "pitchfork (subcritical)"
    HighCodimension = "codimension > 2"


@dataclass(frozen=True)
class BifurcationClass:
    kind: BifurcationKind
    certificate: LSCoefficients


def _boundary_split(v: np.ndarray, terminals) -> tuple[float, float, np.ndarray]:
    v_B = v[list(terminals)]
    a = float(v_B.mean())
    tilde = v_B - a
    a_B = float(np.linalg.norm(tilde))
    return a, a_B, tilde


def detect_singularity(net: NetworkModel, z, tol: float = RANK_TOL) -> SingularityReport | None:
    """Report the critical eigenvector if ``L(z)`` loses rank on 1-perp, else None.

    Raises AmbiguousKernel for corank three or more.
    """
    z = np.asarray(z, dtype=float)
    L = laplacian_at(net, z)
    Q = shift_basis(net.n_nodes)
    mu, U = np.linalg.eigh(Q.T @ L @ Q)
    cut = tol * max(1.0, np.max(np.abs(mu)))
    small = np.flatnonzero(np.abs(mu) < cut)
    if small.size == 0:
        return None
    if small.size > 1:
        raise AmbiguousKernel(f"{small.size + 1} near-zero eigenvalues (corank >= 3)")
    idx = small[0]
    v = sign_normalize(Q @ U[:, idx])
    a, a_B, tilde = _boundary_split(v, net.terminals)
    if a_B <= tol:
        # cannot happen with an invertible internal block
        raise InconsistentCertificate("boundary part of the critical vector is constant")
    return SingularityReport(
        z_star=z - z.mean(), u_star=nodal_currents(net, z), alpha_star=dict(net.parameters),
        v=v, v_hat=tilde / a_B, a=a, a_B=a_B, kernel_eigenvalue=float(mu[idx]),
        terminals=tuple(net.terminals))


def _complement(vectors, n):
    """Orthonormal basis of the orthogonal complement of span(vectors) in R^n."""
    A = np.column_stack(vectors)
    Q, _ = np.linalg.qr(A, mode="complete")
    return Q[:, A.shape[1]:]


def ls_function_full(net: NetworkModel, report: SingularityReport, x: float,
                     u_B=None, alpha: Mapping[str, float] | None = None, *,
                     scale: float = 1.0, tol: float = TOL_LS) -> float:
    """Reduced scalar function ``f(x, u_B, alpha)`` from the full network equations.

    ``scale`` multiplies the critical vector, which rescales ``x`` and ``f``.
    """
    if alpha:
        net = net.with_parameters(alpha)
    n = net.n_nodes
    v = scale * report.v
    u = net.pad_currents(np.zeros(net.n_boundary) if u_B is None else u_B)
    base = report.z_star + x * v
    P = _complement([np.ones(n), report.v], n)

    def fun(c):
        return P.T @ (nodal_currents(net, base + P @ c) - u)

    def jac(c):
        return P.T @ laplacian_at(net, base + P @ c) @ P

    c, _, _ = newton(fun, jac, np.zeros(P.shape[1]), tol=tol)
    z = base + P @ c
    return float(v @ (nodal_currents(net, z) - u))


def ls_function_reduced(net: NetworkModel, report: SingularityReport, x: float,
                        u_B=None, alpha: Mapping[str, float] | None = None, *,
                        scale: float = 1.0, tol: float = TOL_LS) -> float:
    """Reduced scalar function ``f_hat`` from the Kron-reduced terminal equations.

    The terminal map is evaluated numerically by eliminating the internal
    nodes with Newton, warm-started from the singular state.
    """
    if alpha:
        net = net.with_parameters(alpha)
    b, c_idx = net.boundary, net.central
    n_B = net.n_boundary
    v_hat = scale * report.v_hat
    u_B = np.zeros(n_B) if u_B is None else np.asarray(u_B, dtype=float)
    base = report.z_star[b] + x * v_hat
    P = _complement([np.ones(n_B), report.v_hat], n_B)
    guess = report.z_star[c_idx]

    def state(cvec):
        return internal_state(net, base + P @ cvec, guess, tol=tol)

    def fun(cvec):
        z = state(cvec)
        return P.T @ (nodal_currents(net, z)[b] - u_B)

    def jac(cvec):
        z = state(cvec)
        return P.T @ kron_reduce(laplacian_at(net, z), net.partition) @ P

    cvec, _, _ = newton(fun, jac, np.zeros(P.shape[1]), tol=tol)
    z = state(cvec)
    return float(v_hat @ (nodal_currents(net, z)[b] - u_B))


# --- parameter paths -------------------------------------------------------

def gain_path(net: NetworkModel, edge: int | None = None, u_B=None) -> Path:
    """Path ``lambda -> gain* + lambda`` on a negative edge, terminal currents fixed."""
    neg = net.negative_edges()
    if edge is None:
        if len(neg) != 1:
            raise HypothesesViolated(f"gain path needs one negative edge, found {len(neg)}")
        edge = neg[0]
    model = net.models[edge]
    u_B = np.zeros(net.n_boundary) if u_B is None else np.asarray(u_B, dtype=float)
    if isinstance(model.gain, str):
        return parameter_path(net, model.gain, u_B=u_B)
    k0 = float(model.gain)

    def path(lam):
        return u_B, net.with_edge_model(edge, replace(model, gain=k0 + lam))

    return path


def parameter_path(net: NetworkModel, name: str, u_B=None, u_direction=None) -> Path:
    """Path ``lambda -> (u_B + lambda u_direction, parameters[name] + lambda)``.

    Pass ``name=None`` to move only the terminal currents.
    """
    u_B = np.zeros(net.n_boundary) if u_B is None else np.asarray(u_B, dtype=float)
    du = np.zeros(net.n_boundary) if u_direction is None else np.asarray(u_direction, float)
    p0 = net.parameters[name] if name is not None else None

    def path(lam):
        moved = net if name is None else net.with_parameters({name: p0 + lam})
        return u_B + lam * du, moved

    return path


def resistance_scale(net: NetworkModel, report: SingularityReport) -> float:
    """Factor mapping the unit critical vector to ``L+^dagger e_ij``.

    Only defined for a single negative edge ``(i, j)``; with this scaling the
    reduction's coefficients take the closed forms in terms of ``r_ij``.
    """
    neg = net.negative_edges()
    if len(neg) != 1:
        raise HypothesesViolated("critical-vector scaling needs exactly one negative edge")
    i, j = net.edges[neg[0]]
    r = effective_resistance(assemble_laplacian(_positive_graph(net, neg[0])), i, j)
    return r / float(report.v[i] - report.v[j])


def _positive_graph(net, neg_edge):
    edges = []
    for e, ((t, h), m) in enumerate(zip(net.edges, net.bound_models)):
        if e == neg_edge:
            continue
        if not isinstance(m, Linear):
            raise HypothesesViolated("all positive edges must be linear resistors")
        edges.append((t, h, 1.0 / m.resistance))
    g = graph_core.SignedGraph(net.n_nodes, tuple(edges))
    if not g.is_connected():
        raise DisconnectedGraph("positive subnetwork is not connected")
    return g


# --- coefficients ----------------------------------------------------------

def _richardson(d_h, d_h2, order):
    """Extrapolate a stencil with error O(h^order) from steps h and h/2."""
    w = 2.0 ** order
    return (w * d_h2 - d_h) / (w - 1.0), abs(d_h2 - d_h)


def ls_coefficients_fd(net: NetworkModel, report: SingularityReport,
                       path: Path | None = None, *, scale: float | str = "auto",
                       h: float | None = None, h_lambda: float | None = None,
                       source: Source = Source.FullEquations,
                       fd_tol: float = 1e-3) -> LSCoefficients:
    """Taylor coefficients of the reduced function by central finite differences.

    ``path`` defaults to the gain of the single negative edge. ``scale="auto"``
    uses the ``L+^dagger e_ij`` normalization when the network has exactly one
    negative edge and the unit vector otherwise. Each derivative is computed
    at steps ``h`` and ``h/2`` and Richardson-extrapolated; the spread between
    the two is reported in ``errors``.
    """
    if path is None:
        path = gain_path(net)
    if scale == "auto":
        try:
            scale = resistance_scale(net, report)
        except (HypothesesViolated, graph_core.DegenerateKernel, DisconnectedGraph):
            scale = 1.0
        if source is Source.KronReducedEquations:
            # boundary part of scale * v is scale * a_B * v_hat (plus a constant)
            scale *= report.a_B
    h = 1e-3 * max(1.0, float(np.linalg.norm(report.z_star))) if h is None else h
    h_lambda = h if h_lambda is None else h_lambda
    ls = ls_function_full if source is Source.FullEquations else ls_function_reduced
    cache: dict = {}

    def f(x, lam):
        key = (x, lam)
        if key not in cache:
            u_B, net_l = path(lam)
            cache[key] = ls(net_l, report, x, u_B, scale=scale)
        return cache[key]

    def stencils(hx, hl):
        f0 = f(0.0, 0.0)
        fx = (f(hx, 0.0) - f(-hx, 0.0)) / (2 * hx)
        fxx = (f(hx, 0.0) - 2 * f0 + f(-hx, 0.0)) / hx ** 2
        fxxx = (f(2 * hx, 0.0) - 2 * f(hx, 0.0) + 2 * f(-hx, 0.0) - f(-2 * hx, 0.0)) / (2 * hx ** 3)
        fl = (f(0.0, hl) - f(0.0, -hl)) / (2 * hl)
        flx = (f(hx, hl) - f(hx, -hl) - f(-hx, hl) + f(-hx, -hl)) / (4 * hx * hl)
        return dict(f_x=fx, f_xx=fxx, f_xxx=fxxx, f_lambda=fl, f_lambdax=flx)

    coarse = stencils(h, h_lambda)
    fine = stencils(h / 2, h_lambda / 2)
    values, errs = {}, {}
    for name in coarse:
        values[name], errs[name] = _richardson(coarse[name], fine[name], 2)
    scale_ref = max(1.0, *(abs(values[k]) for k in ("f_xx", "f_lambdax", "f_xxx")))
    for name, err in errs.items():
        if err > 10 * fd_tol * max(scale_ref, abs(values[name])):
            raise IllConditionedStencil(f"{name}: step-halving estimates differ by {err:.3e}")
    return LSCoefficients(f=f(0.0, 0.0), source=source, errors=errs, **values)


def ls_coefficients_closed_form(net: NetworkModel, tol: float = RANK_TOL) -> LSCoefficients:
    """Closed-form coefficients for a single negative edge with linear resistors elsewhere.

    ``f_xx = -g''(0) r^2``, ``f_kx = -r^2`` and ``f_xxx = -g'''(0) r^3`` where
    ``g`` is the unit-slope normalized negative conductance and ``r`` the
    effective resistance of the positive subnetwork across the edge.
    """
    neg = net.negative_edges()
    if len(neg) != 1:
        raise HypothesesViolated(f"expected exactly one negative edge, found {len(neg)}")
    e = neg[0]
    i, j = net.edges[e]
    g_plus = _positive_graph(net, e)
    L_plus = assemble_laplacian(g_plus)
    r = effective_resistance(L_plus, i, j, tol)
    L = L_plus - (1.0 / r) * np.outer(unit_pair(net.n_nodes, i, j), unit_pair(net.n_nodes, i, j))
    c = net.central
    if c:
        L_CC = L[np.ix_(c, c)]
        s = np.linalg.svd(L_CC, compute_uv=False)
        if s[-1] < tol * max(1.0, s[0]):
            raise HypothesesViolated("internal block is singular at the critical gain")
    model = net.bound_models[e]
    # the closed forms hold at the critical gain, where g'' and g''' are evaluated
    crit = replace(model, gain=1.0 / r)
    g2 = float(crit.normalized(0.0, 2))
    g3 = float(crit.normalized(0.0, 3))
    return LSCoefficients(f=0.0, f_x=0.0, f_lambda=0.0, f_xx=-g2 * r ** 2,
                          f_lambdax=-r ** 2, f_xxx=-g3 * r ** 3, source=Source.ClosedForm)


def classify_bifurcation(coeffs: LSCoefficients, tol_class: float = TOL_CLASS,
                         tol_singular: float = TOL_SINGULAR_CHECK) -> BifurcationClass:
    """Recognize transcritical / pitchfork from the reduced function's derivatives."""
    if abs(coeffs.f_x) > tol_singular or abs(coeffs.f) > tol_singular:
        raise InconsistentCertificate(
            f"not a singular point: f={coeffs.f:.3e}, f_x={coeffs.f_x:.3e}")
    fxx, flx, fxxx = coeffs.f_xx, coeffs.f_lambdax, coeffs.f_xxx
    if abs(flx) > tol_class and abs(fxx) > tol_class:
        kind = BifurcationKind.Transcritical
    elif abs(flx) > tol_class and abs(fxx) <= tol_class and abs(fxxx) > tol_class:
        # supercritical when the cubic term opposes the lambda-linear term
        if fxxx * flx < 0:
            kind = BifurcationKind.PitchforkSupercritical
        else:
            kind = BifurcationKind.PitchforkSubcritical
    else:
        kind = BifurcationKind.HighCodimension
    return BifurcationClass(kind=kind, certificate=coeffs)


def ultrasensitivity_gain(net: NetworkModel, z, u_dir, tol: float = RANK_TOL) -> float:
    """``|| L(z)^dagger u_dir ||``: potential response per unit current along ``u_dir``.

    ``u_dir`` may be a full nodal vector or a terminal vector (padded with zeros).
    """
    u = np.asarray(u_dir, dtype=float)
    if u.shape[0] == net.n_boundary and net.n_boundary != net.n_nodes:
        u = net.pad_currents(u)
    return float(np.linalg.norm(pseudoinverse(laplacian_at(net, z), tol) @ u))
