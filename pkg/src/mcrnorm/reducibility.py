"""Irreducibility of square matrices via strong connectivity of the digraph
of nonzero entries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matcore import as_matrix


@dataclass(frozen=True)
class NonzeroDigraph:
    n: int
    edges: tuple  # (i, j) pairs, i -> j when |M[i, j]| > threshold

    def successors(self) -> list[list[int]]:
        adj = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
        return adj


def _square(M) -> np.ndarray:
    M = as_matrix(M)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"matrix must be square, got {M.shape[0]} x {M.shape[1]}")
    return M


def adjacency_from_nonzeros(M, threshold: float = 0.0) -> NonzeroDigraph:
    """Edge ``i -> j`` for every entry with ``|M[i, j]| > threshold``.

    Self-loops are kept; they do not affect strong connectivity.
    """
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    M = _square(M)
    ii, jj = np.nonzero(np.abs(M) > threshold)
    return NonzeroDigraph(M.shape[0], tuple(zip(ii.tolist(), jj.tolist())))


def strongly_connected_components(g: NonzeroDigraph) -> list[list[int]]:
    """Tarjan's algorithm, iterative. Components are returned with sorted
    members, ordered by their smallest node."""
    adj = g.successors()
    index = [-1] * g.n
    low = [0] * g.n
    on_stack = [False] * g.n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for root in range(g.n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, pos = work[-1]
            if pos < len(adj[v]):
                work[-1] = (v, pos + 1)
                w = adj[v][pos]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w]:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return sorted(comps, key=lambda c: c[0])


@dataclass(frozen=True)
class ReducibilityResult:
    irreducible: bool
    components: list

    def to_dict(self) -> dict:
        return {
            "verdict": "irreducible" if self.irreducible else "reducible",
            "irreducible": self.irreducible,
            "components": self.components,
        }


def is_irreducible(M, threshold: float = 0.0) -> ReducibilityResult:
    """True when the nonzero pattern's digraph is strongly connected."""
    g = adjacency_from_nonzeros(M, threshold)
    comps = strongly_connected_components(g)
    return ReducibilityResult(len(comps) == 1, comps)
