"""Weighted directed interaction graphs and the spectral facts the controllers use.

Convention: ``weights[i, j] = a_ij > 0`` means agent ``i`` reads the position of
agent ``j`` (information flows ``j -> i``).  Node indices are 0-based in the
Python API and 1-based in the JSON format.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NoSpanningTree,
    NotStronglyConnected,
    NumericalRankFailure,
)

RESIDUAL_TOL = 1e-10
POSITIVITY_TOL = 1e-12

ROOT_BLOCK = "root SCC"
M_MATRIX_BLOCK = "nonsingular M-matrix block"


@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """Directed graph over ``n`` nodes with adjacency matrix ``weights``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, copy=True)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] < 1:
            raise DimensionMismatch(f"adjacency must be a nonempty square matrix, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("adjacency weights must be finite")
        if np.any(w < 0):
            raise ValueError("adjacency weights must be nonnegative")
        if np.any(np.diag(w) != 0):
            raise ValueError("self-loops are not allowed (a_ii must be 0)")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges) -> "DirectedGraph":
        """Build from ``(source, target, weight)`` triples with 0-based nodes."""
        w = np.zeros((n, n))
        for src, dst, weight in edges:
            if not (0 <= src < n and 0 <= dst < n):
                raise ValueError(f"edge ({src}, {dst}) out of range for n={n}")
            w[dst, src] = weight
        return cls(w)

    @classmethod
    def from_json(cls, data: dict) -> "DirectedGraph":
        n = data["n"]
        if not isinstance(n, int) or isinstance(n, bool) or n < 1:
            raise ValueError(f"graph 'n' must be a positive integer, got {n!r}")
        edges = []
        for e in data.get("edges", []):
            edges.append((int(e["from"]) - 1, int(e["to"]) - 1, float(e.get("weight", 1.0))))
        return cls.from_edges(n, edges)

    def to_json(self) -> dict:
        edges = []
        for j in range(self.n):
            for i in range(self.n):
                if self.weights[i, j] > 0:
                    edges.append({"from": j + 1, "to": i + 1, "weight": float(self.weights[i, j])})
        return {"n": self.n, "edges": edges}

    def in_neighbors(self, i: int) -> list[tuple[float, int]]:
        """``(a_ij, j)`` pairs for every neighbor agent ``i`` listens to."""
        row = self.weights[i]
        return [(float(row[j]), j) for j in np.flatnonzero(row > 0)]

    def successors(self, j: int) -> np.ndarray:
        """Nodes that receive information from ``j``."""
        return np.flatnonzero(self.weights[:, j] > 0)


@dataclass(frozen=True)
class GraphDecomposition:
    """Block lower-triangular reordering of the Laplacian.

    ``permutation[p]`` is the original node placed at position ``p``.
    """

    permutation: tuple[int, ...]
    blocks: tuple[tuple[int, ...], ...]
    block_kinds: tuple[str, ...] = field(default=())

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(b) for b in self.blocks)


def in_degrees(g: DirectedGraph) -> np.ndarray:
    return g.weights.sum(axis=1)


def laplacian(g: DirectedGraph) -> np.ndarray:
    lap = -g.weights.copy()
    np.fill_diagonal(lap, in_degrees(g))
    return lap


def _reachable_from(g: DirectedGraph, root: int) -> np.ndarray:
    seen = np.zeros(g.n, dtype=bool)
    seen[root] = True
    queue = deque([root])
    while queue:
        j = queue.popleft()
        for i in g.successors(j):
            if not seen[i]:
                seen[i] = True
                queue.append(i)
    return seen


def strongly_connected_components(g: DirectedGraph) -> list[list[int]]:
    """Tarjan's algorithm (iterative); components come out sinks-first."""
    n = g.n
    succ = [g.successors(j).tolist() for j in range(n)]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for start in range(n):
        if index[start] != -1:
            continue
        work = [(start, 0)]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack[start] = True
        while work:
            v, pos = work[-1]
            if pos < len(succ[v]):
                work[-1] = (v, pos + 1)
                w = succ[v][pos]
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
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def is_strongly_connected(g: DirectedGraph) -> bool:
    return len(strongly_connected_components(g)) == 1


def _root_components(g: DirectedGraph, comps: list[list[int]]) -> list[int]:
    """Indices into ``comps`` of components with no incoming edge from outside."""
    owner = np.empty(g.n, dtype=int)
    for c, comp in enumerate(comps):
        owner[comp] = c
    has_input = [False] * len(comps)
    rows, cols = np.nonzero(g.weights)
    for i, j in zip(rows, cols):
        if owner[i] != owner[j]:
            has_input[owner[i]] = True
    return [c for c in range(len(comps)) if not has_input[c]]


def has_spanning_tree(g: DirectedGraph) -> bool:
    comps = strongly_connected_components(g)
    return len(_root_components(g, comps)) == 1


def left_eigenvector(g: DirectedGraph) -> np.ndarray:
    """Positive ``omega`` with ``omega @ L = 0`` and ``sum(omega) = 1``.

    Raises:
        NotStronglyConnected: the graph is not strongly connected.
        NumericalRankFailure: the null space of L^T is not one-dimensional
            numerically, or the normalized vector is not strictly positive.
    """
    if not is_strongly_connected(g):
        raise NotStronglyConnected("left eigenvector requires a strongly connected graph")
    n = g.n
    if n == 1:
        return np.ones(1)
    lap = laplacian(g)
    ns = scipy.linalg.null_space(lap.T)
    if ns.shape[1] != 1:
        raise NumericalRankFailure(f"null space of L^T has dimension {ns.shape[1]}, expected 1")
    # Refine with the normalization row appended; lstsq on the stacked system
    # is better conditioned than rescaling the SVD vector.
    aug = np.vstack([lap.T, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    omega = np.linalg.lstsq(aug, rhs, rcond=None)[0]
    if np.max(np.abs(omega @ lap)) >= RESIDUAL_TOL or np.min(omega) <= POSITIVITY_TOL:
        raise NumericalRankFailure("left eigenvector failed residual/positivity check")
    return omega


def lhat(g: DirectedGraph, omega) -> np.ndarray:
    """``W L + L^T W`` with ``W = diag(omega)``; symmetric PSD for valid omega."""
    omega = np.asarray(omega, dtype=float)
    if omega.shape != (g.n,):
        raise DimensionMismatch(f"omega has shape {omega.shape}, expected ({g.n},)")
    wl = omega[:, None] * laplacian(g)
    return wl + wl.T


def is_nonsingular_m_matrix(mat) -> bool:
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch("is_nonsingular_m_matrix expects a square matrix")
    off = mat - np.diag(np.diag(mat))
    if np.any(off > 0):
        return False
    return bool(np.all(np.linalg.eigvals(mat).real > POSITIVITY_TOL))


def perron_frobenius_form(g: DirectedGraph) -> GraphDecomposition:
    """Reorder nodes so the Laplacian becomes block lower triangular.

    The first block is the unique root strongly connected component; each
    later block only receives information from itself and earlier blocks.

    Raises:
        NoSpanningTree: zero or several root components exist.
    """
    comps = strongly_connected_components(g)
    roots = _root_components(g, comps)
    if len(roots) != 1:
        raise NoSpanningTree(f"graph has {len(roots)} root strongly connected components; need exactly 1")
    # Tarjan emits sinks first, so reversing gives a topological order of the
    # condensation along the information flow.
    ordered = comps[::-1]
    assert ordered[0] == comps[roots[0]]
    perm = tuple(int(i) for comp in ordered for i in comp)
    kinds = (ROOT_BLOCK,) + (M_MATRIX_BLOCK,) * (len(ordered) - 1)
    return GraphDecomposition(
        permutation=perm,
        blocks=tuple(tuple(int(i) for i in comp) for comp in ordered),
        block_kinds=kinds,
    )


def permuted_laplacian(g: DirectedGraph, decomposition: GraphDecomposition) -> np.ndarray:
    p = np.asarray(decomposition.permutation)
    return laplacian(g)[np.ix_(p, p)]


def diagonal_blocks(g: DirectedGraph, decomposition: GraphDecomposition) -> list[np.ndarray]:
    lap = laplacian(g)
    return [lap[np.ix_(b, b)] for b in decomposition.blocks]


def augmented_laplacian(g: DirectedGraph, k, m: float) -> np.ndarray:
    """Laplacian of the 2n-node graph formed by agents and their filter states.

    Diagnostic for the filter-based reference: stacking ``(x, x_hat)`` the
    closed loop after tracking reads ``d/dt [x; x_hat] = -m tanh(Lbar [x; x_hat])``.
    """
    n = g.n
    gains = np.broadcast_to(np.asarray(k, dtype=float) / m, (n,))
    kmat = np.diag(gains)
    return np.block([[kmat, -kmat], [-g.weights, np.diag(in_degrees(g))]])
