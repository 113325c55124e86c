"""Signed graphs and their Laplacians.

Node indices are 0-based throughout the Python API; the JSON format and the
CLI use 1-based indices and convert at the boundary.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateKernel, DisconnectedGraph, SingularInternalBlock

RANK_TOL = 1e-8


@dataclass(frozen=True)
class SignedGraph:
    """Undirected multigraph with signed edge weights.

    ``edges`` holds ``(tail, head, weight)`` triples; the orientation only
    fixes the sign convention of the incidence matrix.
    """

    n_nodes: int
    edges: tuple[tuple[int, int, float], ...]

    def __post_init__(self):
        edges = tuple((int(t), int(h), float(w)) for t, h, w in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n_nodes < 1:
            raise ValueError("graph needs at least one node")
        if not edges:
            raise ValueError("edge list is empty")
        for t, h, _ in edges:
            if not (0 <= t < self.n_nodes and 0 <= h < self.n_nodes):
                raise ValueError(f"edge ({t}, {h}) references a missing node")
            if t == h:
                raise ValueError(f"self-loop at node {t}")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, _, w in self.edges])

    def incidence(self) -> np.ndarray:
        """Node-by-edge matrix with +1 at the tail and -1 at the head."""
        return incidence_matrix(self.n_nodes, [(t, h) for t, h, _ in self.edges])

    def n_components(self) -> int:
        return count_components(self.n_nodes, [(t, h) for t, h, _ in self.edges])

    def is_connected(self) -> bool:
        return self.n_components() == 1

    def without_edge(self, index: int) -> "SignedGraph":
        return SignedGraph(self.n_nodes, self.edges[:index] + self.edges[index + 1:])


def incidence_matrix(n_nodes: int, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    D = np.zeros((n_nodes, len(pairs)))
    for e, (t, h) in enumerate(pairs):
        D[t, e] = 1.0
        D[h, e] = -1.0
    return D


def count_components(n_nodes: int, pairs: Sequence[tuple[int, int]]) -> int:
    if not pairs:
        return n_nodes
    rows = [t for t, _ in pairs]
    cols = [h for _, h in pairs]
    adj = coo_matrix((np.ones(len(pairs)), (rows, cols)), shape=(n_nodes, n_nodes))
    n, _ = connected_components(adj, directed=False)
    return int(n)


@dataclass(frozen=True)
class NodePartition:
    """Split of the nodes into boundary (terminal) and central (internal) sets."""

    boundary: tuple[int, ...]
    central: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "boundary", tuple(int(i) for i in self.boundary))
        object.__setattr__(self, "central", tuple(int(i) for i in self.central))
        if not self.boundary:
            raise ValueError("partition needs at least one boundary node")
        both = self.boundary + self.central
        if len(set(both)) != len(both):
            raise ValueError("boundary and central sets overlap or repeat nodes")
        if sorted(both) != list(range(len(both))):
            raise ValueError("partition does not cover nodes 0..n-1")

    @classmethod
    def from_boundary(cls, n_nodes: int, boundary: Sequence[int]) -> "NodePartition":
        b = tuple(boundary)
        return cls(b, tuple(i for i in range(n_nodes) if i not in set(b)))

    @property
    def n(self) -> int:
        return len(self.boundary) + len(self.central)


class Definiteness(enum.Enum):
    PositiveSemidefCorank1 = "PSD corank 1"
    SingularCorank2 = "singular corank 2"
    IndefiniteCorank1 = "indefinite corank 1"


@dataclass(frozen=True)
class SingularGainCertificate:
    edge: tuple[int, int]
    critical_gain: float
    kernel_vector: np.ndarray
    effective_resistance: float


def assemble_laplacian(graph: SignedGraph) -> np.ndarray:
    """Return ``D W D^T`` for the signed graph."""
    n = graph.n_nodes
    L = np.zeros((n, n))
    for t, h, w in graph.edges:
        L[t, t] += w
        L[h, h] += w
        L[t, h] -= w
        L[h, t] -= w
    return L


def _cutoff(eigvals: np.ndarray, tol: float) -> float:
    scale = np.max(np.abs(eigvals)) if eigvals.size else 0.0
    return tol * max(1.0, scale)


def pseudoinverse(L: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Moore-Penrose inverse of a symmetric matrix via its eigendecomposition.

    Eigenvalues below ``tol * max(1, |lambda|_max)`` are treated as zero.
    """
    L = np.asarray(L, dtype=float)
    if L.size == 0:
        return L.copy()
    lam, U = np.linalg.eigh(0.5 * (L + L.T))
    keep = np.abs(lam) >= _cutoff(lam, tol)
    inv = np.zeros_like(lam)
    inv[keep] = 1.0 / lam[keep]
    return (U * inv) @ U.T


def corank(L: np.ndarray, tol: float = RANK_TOL) -> int:
    L = np.asarray(L, dtype=float)
    if L.size == 0:
        return 0
    lam = np.linalg.eigvalsh(0.5 * (L + L.T))
    return int(np.sum(np.abs(lam) < _cutoff(lam, tol)))


def kron_reduce(L: np.ndarray, partition: NodePartition,
                tol: float = RANK_TOL) -> np.ndarray:
    """Schur complement ``L_BB - L_BC L_CC^{-1} L_CB`` eliminating central nodes.

    Raises SingularInternalBlock if ``L_CC`` is numerically singular.
    """
    L = np.asarray(L, dtype=float)
    b = list(partition.boundary)
    c = list(partition.central)
    L_BB = L[np.ix_(b, b)]
    if not c:
        return L_BB.copy()
    L_CC = L[np.ix_(c, c)]
    s = np.linalg.svd(L_CC, compute_uv=False)
    if s[-1] < tol * max(1.0, s[0]):
        raise SingularInternalBlock(
            f"internal block is singular (smallest singular value {s[-1]:.3e})")
    L_BC = L[np.ix_(b, c)]
    red = L_BB - L_BC @ np.linalg.solve(L_CC, L_BC.T)
    return 0.5 * (red + red.T)


def effective_resistance(L: np.ndarray, i: int, j: int,
                         tol: float = RANK_TOL) -> float:
    """``L+_ii + L+_jj - 2 L+_ij``; requires ``corank(L) == 1``.

    Works for signed Laplacians too (the result can then be negative).
    """
    if i == j:
        raise ValueError("effective resistance needs two distinct nodes")
    k = corank(L, tol)
    if k != 1:
        raise DegenerateKernel(f"corank {k} != 1; resistance not unique")
    P = pseudoinverse(L, tol)
    return float(P[i, i] + P[j, j] - 2.0 * P[i, j])


def unit_pair(n: int, i: int, j: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    e[j] = -1.0
    return e


def sign_normalize(v: np.ndarray, atol: float = 1e-12) -> np.ndarray:
    """Scale to unit norm and flip so the first non-negligible entry is positive."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    big = np.flatnonzero(np.abs(v) > max(atol, 1e-8 * np.max(np.abs(v))))
    if big.size and v[big[0]] < 0:
        v = -v
    return v


def _check_positive_connected(graph_plus: SignedGraph) -> None:
    if np.any(graph_plus.weights <= 0):
        raise ValueError("graph_plus must have strictly positive weights")
    if not graph_plus.is_connected():
        raise DisconnectedGraph("positive subgraph is not connected")


def singular_gain(graph_plus: SignedGraph, i: int, j: int,
                  tol: float = RANK_TOL) -> SingularGainCertificate:
    """Gain of a negative edge (i, j) that makes ``L+ - k e_ij e_ij^T`` singular."""
    _check_positive_connected(graph_plus)
    L_plus = assemble_laplacian(graph_plus)
    r = effective_resistance(L_plus, i, j, tol)
    v = pseudoinverse(L_plus, tol) @ unit_pair(graph_plus.n_nodes, i, j)
    v = sign_normalize(v - v.mean())
    return SingularGainCertificate(edge=(i, j), critical_gain=1.0 / r,
                                   kernel_vector=v, effective_resistance=r)


def classify_definiteness(graph_plus: SignedGraph, i: int, j: int, k: float,
                          tol: float = RANK_TOL) -> Definiteness:
    """Sign pattern of ``L+ - k e_ij e_ij^T`` from the critical gain ``1/r_ij``."""
    if k <= 0:
        raise ValueError("gain must be positive")
    _check_positive_connected(graph_plus)
    r = effective_resistance(assemble_laplacian(graph_plus), i, j, tol)
    k_star = 1.0 / r
    if abs(k - k_star) <= tol * max(1.0, k_star):
        return Definiteness.SingularCorank2
    if k < k_star:
        return Definiteness.PositiveSemidefCorank1
    return Definiteness.IndefiniteCorank1


def definiteness_of(L: np.ndarray, tol: float = RANK_TOL) -> Definiteness | None:
    """Eigenvalue-based classification of a Laplacian; None if it fits no class."""
    lam = np.linalg.eigvalsh(0.5 * (L + L.T))
    cut = _cutoff(lam, tol)
    n_zero = int(np.sum(np.abs(lam) < cut))
    n_neg = int(np.sum(lam <= -cut))
    if n_zero == 2 and n_neg == 0:
        return Definiteness.SingularCorank2
    if n_zero == 1 and n_neg == 0:
        return Definiteness.PositiveSemidefCorank1
    if n_zero == 1 and n_neg == 1:
        return Definiteness.IndefiniteCorank1
    return None


def shift_basis(n: int) -> np.ndarray:
    """Orthonormal basis (n x n-1) of the subspace orthogonal to the ones vector."""
    Q, _ = np.linalg.qr(np.ones((n, 1)), mode="complete")
    return Q[:, 1:]


def restricted_eigvals(L: np.ndarray) -> np.ndarray:
    """Eigenvalues of L on the complement of the ones vector, ascending."""
    Q = shift_basis(L.shape[0])
    return np.linalg.eigvalsh(Q.T @ L @ Q)
