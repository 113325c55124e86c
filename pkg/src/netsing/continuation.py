"""Pseudo-arclength continuation of network equilibria with stability flags.

The system ``F(z, u(lambda), alpha(lambda)) = 0`` is continued on the
grounded chart (last node fixed at zero potential), so the unknown is
``y = (z_1..z_{n-1}, lambda)``. Special points are located where the number
of negative Laplacian eigenvalues on 1-perp changes between samples, refined
by bisection along the chord joining them, and labelled BranchPoint when the
determinant of the bordered Jacobian changes sign and Fold otherwise.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .equilibrium import TOL_NEWTON, EquilibriumProblem, solve_full
from .errors import NetsingError, RefinementFailure, SeedDivergence, StepUnderflow
from .graph_core import restricted_eigvals
from .network import NetworkModel, laplacian_at, nodal_currents

log = logging.getLogger(__name__)

TOL_STAB = 1e-9
BRANCH_SWITCH_DELTA = 1e-4
Z_BOUND = 1e2


@dataclass(frozen=True)
class ContinuationPath:
    """What to continue and how.

    ``parameter_map`` sends lambda to ``(u_B, network)``; ``projection`` is
    the terminal vector used for the diagram ordinate ``x = projection^T z_B``.
    Seeds are ``(lambda0, z_guess)`` pairs; a ``None`` guess means zeros.
    """

    lambda_range: tuple[float, float]
    parameter_map: Callable[[float], tuple[np.ndarray, NetworkModel]]
    initial_points: Sequence[tuple[float, np.ndarray | None]]
    projection: np.ndarray
    step: float = 1e-2
    max_step: float = 5e-2
    min_step: float = 1e-6
    max_points: int = 4000
    tol: float = TOL_NEWTON
    switch_branches: bool = True

    def __post_init__(self):
        lo, hi = self.lambda_range
        if not lo < hi:
            raise ValueError(f"invalid lambda range {self.lambda_range}")
        if not 0 < self.min_step <= self.step <= self.max_step:
            raise ValueError("need 0 < min_step <= step <= max_step")
        for lam in (lo, 0.5 * (lo + hi), hi):
            u_B, _ = self.parameter_map(lam)
            if abs(np.sum(u_B)) > 1e-10:
                raise ValueError("boundary currents must sum to zero")


@dataclass(frozen=True)
class Sample:
    lam: float
    z: np.ndarray
    x: float
    stable: bool | None


@dataclass
class Branch:
    id: int
    samples: list[Sample]
    endpoints: tuple[str, str] = ("", "")

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s.lam for s in self.samples])

    @property
    def xs(self) -> np.ndarray:
        return np.array([s.x for s in self.samples])


@dataclass(frozen=True)
class SpecialPoint:
    lam: float
    z: np.ndarray
    kind: str  # "BranchPoint" or "Fold"
    x: float = 0.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lambda": self.lam, "x": self.x, "z": self.z.tolist()}


@dataclass
class BifurcationDiagram:
    branches: list[Branch] = field(default_factory=list)
    special_points: list[SpecialPoint] = field(default_factory=list)

    def of_kind(self, kind: str) -> list[SpecialPoint]:
        return [p for p in self.special_points if p.kind == kind]


def stability_of(net: NetworkModel, z, tol_stab: float = TOL_STAB) -> bool | None:
    """Linear stability of the gradient flow with equal node capacitances.

    True when L(z) is positive definite on 1-perp, False when it has a
    negative eigenvalue there, None when the smallest one is within tolerance.
    """
    lam_min = restricted_eigvals(laplacian_at(net, z))[0]
    if lam_min > tol_stab:
        return True
    if lam_min < -tol_stab:
        return False
    return None


def _n_negative(net, z, tol=TOL_STAB):
    return int(np.sum(restricted_eigvals(laplacian_at(net, z)) < -tol))


class _System:
    """Grounded equations ``G(y) = 0`` with ``y = (z_free, lambda)``."""

    def __init__(self, net: NetworkModel, path: ContinuationPath):
        self.path = path
        self.n = net.n_nodes
        self.free = list(range(self.n - 1))
        self.terminals = list(net.terminals)
        self._cache: dict = {}

    def at(self, lam):
        key = float(lam)
        if key not in self._cache:
            if len(self._cache) > 256:
                self._cache.clear()
            u_B, net = self.path.parameter_map(key)
            self._cache[key] = (net.pad_currents(u_B), net)
        return self._cache[key]

    def z_of(self, y):
        z = np.zeros(self.n)
        z[self.free] = y[:-1]
        return z

    def G(self, y):
        u, net = self.at(y[-1])
        return (nodal_currents(net, self.z_of(y)) - u)[self.free]

    def J(self, y):
        u, net = self.at(y[-1])
        z = self.z_of(y)
        Jz = laplacian_at(net, z)[np.ix_(self.free, self.free)]
        h = 1e-6 * max(1.0, abs(y[-1]))
        yp, ym = y.copy(), y.copy()
        yp[-1] += h
        ym[-1] -= h
        Jl = (self.G(yp) - self.G(ym)) / (2 * h)
        return np.column_stack([Jz, Jl])

    def tangent(self, y, t_prev):
        Jy = self.J(y)
        A = np.vstack([Jy, t_prev])
        rhs = np.zeros(len(y))
        rhs[-1] = 1.0
        try:
            t = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            t = np.linalg.lstsq(A, rhs, rcond=None)[0]
        return t / np.linalg.norm(t)

    def null_vectors(self, y, k=1):
        _, _, Vt = np.linalg.svd(self.J(y))
        return Vt[-k:][::-1]

    def correct(self, y_pred, t, tol, max_iter=12):
        """Newton on ``[G(y); t^T (y - y_pred)] = 0``; returns (y, iterations) or None."""
        y = y_pred.copy()
        for it in range(max_iter):
            try:
                g = self.G(y)
            except ValueError:  # parameter left its admissible set
                return None
            res = np.append(g, t @ (y - y_pred))
            if np.max(np.abs(g)) <= tol and it > 0:
                return y, it
            A = np.vstack([self.J(y), t])
            try:
                dy = np.linalg.solve(A, -res)
            except np.linalg.LinAlgError:
                dy = np.linalg.lstsq(A, -res, rcond=None)[0]
            y = y + dy
            if not np.all(np.isfinite(y)):
                return None
            try:
                g_new = np.max(np.abs(self.G(y)))
            except ValueError:
                return None
            if np.max(np.abs(dy)) < 1e-15 * (1 + np.max(np.abs(y))) and g_new <= tol:
                return y, it + 1
        if g_new <= tol:
            return y, max_iter
        return None

    def bordered_det_sign(self, y, t):
        return np.sign(np.linalg.det(np.vstack([self.J(y), t])))

    def solve_at(self, lam, z_guess, tol):
        u, net = self.at(lam)
        sol = solve_full(EquilibriumProblem(net, u[self.terminals], initial_guess=z_guess),
                         tol=tol)
        z = sol.z - sol.z[-1]
        return np.append(z[self.free], lam)


@dataclass
class _Point:
    y: np.ndarray
    t: np.ndarray


def _march(sys: _System, y0, t0, path: ContinuationPath, direction_label=""):
    """Continue from ``y0`` along ``t0`` until leaving the range; returns points and reason."""
    lo, hi = path.lambda_range
    pts = [_Point(y0, t0)]
    ds = path.step
    reason = "max_points"
    while len(pts) < path.max_points:
        cur = pts[-1]
        y_pred = cur.y + ds * cur.t
        out = sys.correct(y_pred, cur.t, path.tol)
        ok = out is not None
        if ok:
            y_new, iters = out
            t_new = sys.tangent(y_new, cur.t)
            dist = np.linalg.norm(y_new - y_pred)
            if dist > 0.5 * ds + 1e-12 or t_new @ cur.t < 0.8:
                ok = ds <= path.min_step
        if not ok:
            ds *= 0.5
            if ds < path.min_step:
                reason = "step_underflow"
                break
            continue
        lam_new = y_new[-1]
        if lam_new < lo or lam_new > hi:
            edge = lo if lam_new < lo else hi
            try:
                y_edge = sys.solve_at(edge, _interp_z(sys, cur.y, y_new, edge), path.tol)
                gap = np.linalg.norm(y_edge - cur.y)
                if 1e-12 < gap <= 2 * ds:
                    pts.append(_Point(y_edge, sys.tangent(y_edge, cur.t)))
            except NetsingError:
                pass
            reason = "range"
            break
        pts.append(_Point(y_new, t_new))
        if np.max(np.abs(y_new[:-1])) > Z_BOUND:
            reason = "unbounded"
            break
        if len(pts) > 20 and np.linalg.norm(y_new - y0) < 0.5 * ds:
            reason = "closed_loop"
            break
        if iters <= 3:
            ds = min(2 * ds, path.max_step)
    return pts, reason


def _interp_z(sys, ya, yb, lam):
    s = (lam - ya[-1]) / (yb[-1] - ya[-1])
    y = ya + s * (yb - ya)
    return sys.z_of(y)


def _refine(sys: _System, net_at, p0: _Point, p1: _Point, tol):
    """Bisect along the chord between two samples where the inertia changes."""
    chord = p1.y - p0.y
    normal = chord / np.linalg.norm(chord)
    n0 = _n_negative(net_at(p0.y[-1]), sys.z_of(p0.y))
    a, b = 0.0, 1.0
    y_best = p1.y
    for _ in range(80):
        if (b - a) * np.linalg.norm(chord) < 1e-12:
            break
        m = 0.5 * (a + b)
        out = sys.correct(p0.y + m * chord, normal, tol, max_iter=20)
        if out is None:
            raise RefinementFailure("corrector failed during special point bisection")
        y_m = out[0]
        if _n_negative(net_at(y_m[-1]), sys.z_of(y_m)) == n0:
            a = m
        else:
            b = m
            y_best = y_m
    return y_best


def _special_points(sys: _System, pts: list[_Point], tol) -> list[tuple[np.ndarray, str, int]]:
    net_at = lambda lam: sys.at(lam)[1]  # noqa: E731
    inertia = [_n_negative(net_at(p.y[-1]), sys.z_of(p.y)) for p in pts]
    found = []
    for i in range(len(pts) - 1):
        if inertia[i] == inertia[i + 1]:
            continue
        y_sp = _refine(sys, net_at, pts[i], pts[i + 1], tol)
        turned = np.sign(pts[i].t[-1]) != np.sign(pts[i + 1].t[-1])
        det_flip = sys.bordered_det_sign(pts[i].y, pts[i].t) != \
            sys.bordered_det_sign(pts[i + 1].y, pts[i + 1].t)
        kind = "BranchPoint" if det_flip and not turned else "Fold"
        found.append((y_sp, kind, i))
    return found


def detect_special_points(branch: Branch, net_or_path, tol: float = TOL_NEWTON) -> list[SpecialPoint]:
    """Locate inertia changes along an already traced branch.

    ``net_or_path`` is the ContinuationPath used for tracing (needed to
    re-solve intermediate points during refinement).
    """
    path = net_or_path
    sys = _System(path.parameter_map(branch.samples[0].lam)[1], path)
    ys = [np.append((s.z - s.z[-1])[:-1], s.lam) for s in branch.samples]
    pts = []
    t_prev = None
    for k, y in enumerate(ys):
        if t_prev is None:
            nxt = ys[1] if len(ys) > 1 else y
            t_prev = (nxt - y) / max(np.linalg.norm(nxt - y), 1e-300)
        t = sys.tangent(y, t_prev)
        pts.append(_Point(y, t))
        t_prev = t
    out = []
    for y_sp, kind, _ in _special_points(sys, pts, tol):
        z = sys.z_of(y_sp)
        z = z - z.mean()
        out.append(SpecialPoint(lam=float(y_sp[-1]), z=z, kind=kind,
                                x=float(path.projection @ z[sys.terminals])))
    return out


def _to_samples(sys, path, pts):
    out = []
    for p in pts:
        z = sys.z_of(p.y)
        z = z - z.mean()
        net = sys.at(p.y[-1])[1]
        out.append(Sample(lam=float(p.y[-1]), z=z,
                          x=float(path.projection @ z[sys.terminals]),
                          stable=stability_of(net, z)))
    return out


def _split_monotone(samples: list[Sample], reasons: tuple[str, str]):
    """Cut a curve at lambda turning points; each piece is returned lambda-ascending."""
    if len(samples) < 2:
        return [(samples, reasons)]
    lams = np.array([s.lam for s in samples])
    d = np.sign(np.diff(lams))
    cuts = [i + 1 for i in range(len(d) - 1) if d[i] != 0 and d[i + 1] != 0 and d[i] != d[i + 1]]
    pieces = []
    bounds = [0] + cuts + [len(samples) - 1]
    for k in range(len(bounds) - 1):
        seg = samples[bounds[k]:bounds[k + 1] + 1]
        left = reasons[0] if k == 0 else "fold"
        right = reasons[1] if k == len(bounds) - 2 else "fold"
        if seg[-1].lam < seg[0].lam:
            seg = seg[::-1]
            left, right = right, left
        pieces.append((seg, (left, right)))
    return pieces


def _on_existing(curves, lam, z, atol=1e-3):
    for pts_z, pts_l in curves:
        for i in range(len(pts_l) - 1):
            l0, l1 = pts_l[i], pts_l[i + 1]
            if min(l0, l1) - 1e-12 <= lam <= max(l0, l1) + 1e-12:
                s = 0.0 if l1 == l0 else (lam - l0) / (l1 - l0)
                zi = pts_z[i] + s * (pts_z[i + 1] - pts_z[i])
                if np.max(np.abs(zi - z)) < atol:
                    return True
    return False


def trace(net: NetworkModel, path: ContinuationPath) -> BifurcationDiagram:
    """Trace every branch reachable from the seeds, switching at branch points."""
    sys = _System(net, path)
    curves = []       # (list of _Point) per traced curve, with end reasons
    seen_z = []       # (z array list, lambda list) for seed de-duplication
    specials: list[tuple[np.ndarray, str]] = []
    handled_bps: list[np.ndarray] = []
    queue = []
    for lam0, z0 in path.initial_points:
        try:
            y0 = sys.solve_at(lam0, z0, path.tol)
        except NetsingError as exc:
            raise SeedDivergence(f"seed at lambda={lam0} failed: {exc}") from exc
        queue.append((y0, None))

    while queue:
        y0, t_hint = queue.pop(0)
        z0 = sys.z_of(y0)
        # switch seeds sit within delta of the parent branch by construction
        if t_hint is None and _on_existing(seen_z, y0[-1], z0):
            continue
        if t_hint is None:
            t0 = sys.null_vectors(y0)[0]
            if t0[-1] < 0:
                t0 = -t0
        else:
            t0 = sys.tangent(y0, t_hint)
        fwd, r_fwd = _march(sys, y0, t0, path)
        bwd, r_bwd = _march(sys, y0, -t0, path)
        if len(fwd) == 1 and len(bwd) == 1:
            raise StepUnderflow(f"no progress from seed at lambda={y0[-1]:.6g}")
        bwd_pts = [_Point(p.y, -p.t) for p in reversed(bwd[1:])]
        pts = bwd_pts + fwd
        curves.append((pts, (r_bwd, r_fwd)))
        seen_z.append(([sys.z_of(p.y) for p in pts], [p.y[-1] for p in pts]))
        for y_sp, kind, i in _special_points(sys, pts, path.tol):
            if any(np.linalg.norm(y_sp - y) < 1e-4 for y, _ in specials):
                continue
            specials.append((y_sp, kind))
            if kind != "BranchPoint" or not path.switch_branches:
                continue
            if any(np.linalg.norm(y_sp - y) < 1e-4 for y in handled_bps):
                continue
            handled_bps.append(y_sp)
            queue.extend(_switch_seeds(sys, y_sp, pts[i].t, path))

    diagram = BifurcationDiagram()
    bid = 0
    for pts, reasons in curves:
        samples = _to_samples(sys, path, pts)
        for seg, ends in _split_monotone(samples, reasons):
            diagram.branches.append(Branch(id=bid, samples=seg, endpoints=ends))
            bid += 1
    for y_sp, kind in sorted(specials, key=lambda s: s[0][-1]):
        z = sys.z_of(y_sp)
        z = z - z.mean()
        diagram.special_points.append(SpecialPoint(
            lam=float(y_sp[-1]), z=z, kind=kind,
            x=float(path.projection @ z[sys.terminals])))
    return diagram


def _switch_seeds(sys: _System, y_bp, t_branch, path):
    """Seed the crossing branch at ``y_bp + delta * t2`` with t2 the other kernel direction.

    The seed is traced both ways, so the part of the crossing branch on the
    far side of the branch point is reached by continuing through it.
    """
    N = sys.null_vectors(y_bp, k=2)
    t1 = t_branch / np.linalg.norm(t_branch)
    cand = [n - (n @ t1) * t1 for n in N]
    t2 = max(cand, key=np.linalg.norm)
    t2 /= np.linalg.norm(t2)
    y_seed = y_bp + BRANCH_SWITCH_DELTA * t2
    out = sys.correct(y_seed, t2, path.tol, max_iter=30)
    if out is None:
        log.warning("branch switching failed at lambda=%.6g", y_bp[-1])
        return []
    return [(out[0], t2)]
