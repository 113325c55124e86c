"""Global nonlinear network: potential K(z), nodal currents and L(z)."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .conductance import ConductanceModel, Linear
from .errors import DisconnectedGraph
from .graph_core import NodePartition, SignedGraph, count_components, incidence_matrix


@dataclass(frozen=True)
class NetworkModel:
    """Connected network of conductance edges with a terminal/internal split.

    ``edges`` are 0-based ``(tail, head)`` pairs, ``models`` the matching
    constitutive laws (possibly referring to entries of ``parameters`` by
    name), and ``terminals`` the boundary nodes in their declared order.
    """

    n_nodes: int
    edges: tuple[tuple[int, int], ...]
    models: tuple[ConductanceModel, ...]
    terminals: tuple[int, ...]
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(t), int(h)) for t, h in self.edges))
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "terminals", tuple(int(i) for i in self.terminals))
        object.__setattr__(self, "parameters",
                           {str(k): float(v) for k, v in dict(self.parameters).items()})
        if len(self.edges) != len(self.models):
            raise ValueError("every edge needs exactly one model")
        if not self.edges:
            raise ValueError("network has no edges")
        for t, h in self.edges:
            if not (0 <= t < self.n_nodes and 0 <= h < self.n_nodes) or t == h:
                raise ValueError(f"invalid edge ({t}, {h})")
        if count_components(self.n_nodes, self.edges) != 1:
            raise DisconnectedGraph("network graph is not connected")
        missing = set().union(*(m.parameter_names() for m in self.models)) - set(self.parameters)
        if missing:
            raise KeyError(f"undefined parameters: {sorted(missing)}")
        NodePartition.from_boundary(self.n_nodes, self.terminals)
        D = incidence_matrix(self.n_nodes, self.edges)
        D.setflags(write=False)
        object.__setattr__(self, "_D", D)
        object.__setattr__(self, "_bound", tuple(m.bind(self.parameters) for m in self.models))

    def __eq__(self, other):
        if not isinstance(other, NetworkModel):
            return NotImplemented
        return (self.n_nodes, self.edges, self.models, self.terminals, self.parameters) == \
            (other.n_nodes, other.edges, other.models, other.terminals, other.parameters)

    __hash__ = None

    @property
    def incidence(self) -> np.ndarray:
        return self._D

    @property
    def bound_models(self) -> tuple[ConductanceModel, ...]:
        """Models with every parameter reference replaced by its value."""
        return self._bound

    @property
    def partition(self) -> NodePartition:
        return NodePartition.from_boundary(self.n_nodes, self.terminals)

    @property
    def boundary(self) -> list[int]:
        return list(self.terminals)

    @property
    def central(self) -> list[int]:
        return list(self.partition.central)

    @property
    def n_boundary(self) -> int:
        return len(self.terminals)

    def with_parameters(self, overrides: Mapping[str, float] | None = None, **kw) -> "NetworkModel":
        params = dict(self.parameters)
        for key, val in {**(overrides or {}), **kw}.items():
            if key not in params:
                raise KeyError(f"unknown parameter {key!r}")
            params[key] = float(val)
        return replace(self, parameters=params)

    def with_edge_model(self, index: int, model: ConductanceModel) -> "NetworkModel":
        models = list(self.models)
        models[index] = model
        return replace(self, models=tuple(models))

    def negative_edges(self) -> list[int]:
        return [e for e, m in enumerate(self.models) if m.negative]

    def edge_voltages(self, z) -> np.ndarray:
        return self._D.T @ np.asarray(z, dtype=float)

    def graph_at(self, z) -> SignedGraph:
        """Signed graph weighted by the differential conductances at ``z``."""
        w = self._edge_values(self.edge_voltages(z), 1)
        return SignedGraph(self.n_nodes, tuple((t, h, wi) for (t, h), wi in zip(self.edges, w)))

    def positive_subgraph(self) -> SignedGraph:
        """Linear edges only, weighted by conductance; requires all others negative."""
        out = []
        for (t, h), m in zip(self.edges, self._bound):
            if isinstance(m, Linear):
                out.append((t, h, 1.0 / m.resistance))
        return SignedGraph(self.n_nodes, tuple(out))

    def _edge_values(self, y, order):
        vals = np.empty(len(self.edges))
        for e, m in enumerate(self._bound):
            if order == -1:
                vals[e] = m.potential(y[e])
            elif order == 0:
                vals[e] = m.current(y[e])
            else:
                vals[e] = m.derivative(y[e], order)
        return vals

    def pad_currents(self, u_B) -> np.ndarray:
        """Full nodal current vector with ``u_B`` at terminals and zero elsewhere."""
        u = np.zeros(self.n_nodes)
        u[list(self.terminals)] = np.asarray(u_B, dtype=float)
        return u


def potential_K(net: NetworkModel, z) -> float:
    y = net.edge_voltages(z)
    return float(np.sum(net._edge_values(y, -1)))


def nodal_currents(net: NetworkModel, z) -> np.ndarray:
    """Gradient of ``potential_K``: net current leaving each node into the edges."""
    y = net.edge_voltages(z)
    return net.incidence @ net._edge_values(y, 0)


def laplacian_at(net: NetworkModel, z) -> np.ndarray:
    """Hessian of ``potential_K``: ``D diag(g'(D^T z)) D^T``."""
    D = net.incidence
    w = net._edge_values(net.edge_voltages(z), 1)
    L = (D * w) @ D.T
    return 0.5 * (L + L.T)


def project_shift(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x - x.mean()


def residual(net: NetworkModel, z, u) -> np.ndarray:
    """``F(z, u) = grad K(z) - u``."""
    return nodal_currents(net, z) - np.asarray(u, dtype=float)


def block(M: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    return M[np.ix_(list(rows), list(cols))]
