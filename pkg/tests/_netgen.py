"""Random network generators shared by the test modules."""

from __future__ import annotations

import numpy as np

from netsing import (CubicNegative, Linear, NetworkModel, SignedGraph, TanhNegative, detect_singularity,
                     laplacian_at)
from netsing.graph_core import assemble_laplacian, effective_resistance


def random_tree_plus(rng: np.random.Generator, n: int, extra: float = 0.3):
    """Edge list of a random spanning tree plus a few random chords (0-based)."""
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        a, b = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(a, b), max(a, b)))
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < extra:
                edges.add((a, b))
    return sorted(edges)


def random_pair(rng, n, avoid=()):
    pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in avoid]
    if not pairs:
        pairs = [(a, b) for a in range(n) for b in range(a + 1, n)]
    return pairs[rng.integers(len(pairs))]


def unit_graph(n, pairs) -> SignedGraph:
    return SignedGraph(n, tuple((a, b, 1.0) for a, b in pairs))


def random_signed_laplacian(rng, n):
    """Laplacian with random signed weights on a random connected topology."""
    pairs = random_tree_plus(rng, n, 0.35)
    w = rng.uniform(0.2, 2.0, len(pairs)) * np.where(rng.random(len(pairs)) < 0.25, -1, 1)
    return assemble_laplacian(SignedGraph(n, tuple((a, b, float(x)) for (a, b), x in zip(pairs, w))))


def random_single_negative_network(rng, n_min=4, n_max=8, beta=None, max_tries=200):
    """Unit-resistor network with one tanh edge at its critical gain.

    Terminals are drawn so that the internal block is invertible at the
    singular point and the boundary critical component is not constant.
    """
    for _ in range(max_tries):
        n = int(rng.integers(n_min, n_max + 1))
        pos = random_tree_plus(rng, n, 0.25)
        i, j = random_pair(rng, n, set(pos))
        r = effective_resistance(assemble_laplacian(unit_graph(n, pos)), i, j)
        k_star = 1.0 / r
        n_B = int(rng.integers(2, n))
        terminals = tuple(sorted(int(t) for t in rng.choice(n, n_B, replace=False)))
        b = float(rng.uniform(-1, 1)) if beta is None else float(beta)
        net = NetworkModel(
            n_nodes=n,
            edges=tuple(pos) + ((i, j),),
            models=tuple(Linear(1.0) for _ in pos) + (TanhNegative(gain="k", beta="beta"),),
            terminals=terminals,
            parameters={"k": k_star, "beta": b},
        )
        L = laplacian_at(net, np.zeros(n))
        c = list(net.central)
        if c and np.linalg.svd(L[np.ix_(c, c)], compute_uv=False)[-1] < 1e-3:
            continue
        rep = detect_singularity(net, np.zeros(n))
        if rep is None or rep.a_B < 1e-2:
            continue
        return net
    raise RuntimeError("no admissible random network found")


def random_mixed_network(rng, n_min=3, n_max=9):
    """Connected network with linear, tanh and cubic edges and random terminals."""
    n = int(rng.integers(n_min, n_max + 1))
    pairs = random_tree_plus(rng, n, 0.3)
    models = []
    for _ in pairs:
        kind = rng.integers(3)
        if kind == 0:
            models.append(Linear(float(rng.uniform(0.3, 3.0))))
        elif kind == 1:
            models.append(TanhNegative(gain=float(rng.uniform(0.1, 2.0)),
                                       beta=float(rng.uniform(-1.5, 1.5))))
        else:
            models.append(CubicNegative(gain=float(rng.uniform(0.1, 2.0)),
                                        cubic=float(rng.uniform(-1, 1))))
    n_B = int(rng.integers(1, n + 1))
    terminals = tuple(sorted(int(t) for t in rng.choice(n, n_B, replace=False)))
    return NetworkModel(n_nodes=n, edges=tuple(pairs), models=tuple(models),
                        terminals=terminals, parameters={})
