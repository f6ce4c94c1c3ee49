"""Lattice geometry and model parameters shared by every module."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from itertools import product

HARD_CORE = math.inf


@dataclass(frozen=True)
class LatticeSpec:
    """Hypercubic box of side ``L`` in ``d`` dimensions.

    Sites are numbered in row-major order of their coordinates. Neighbour
    lists are simple-graph neighbours: on a periodic ring of length 2 the
    two sites are joined by one bond, not two, and ``L == 1`` has no bonds.
    """

    d: int
    L: int
    boundary: str = "periodic"

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.L < 1:
            raise ValueError(f"extent must be >= 1, got {self.L}")
        if self.boundary not in ("periodic", "open"):
            raise ValueError(f"boundary must be 'periodic' or 'open', got {self.boundary!r}")

    @property
    def n_sites(self) -> int:
        return self.L**self.d

    def coords(self, i: int) -> tuple[int, ...]:
        out = []
        for _ in range(self.d):
            out.append(i % self.L)
            i //= self.L
        return tuple(reversed(out))

    def index(self, coord) -> int:
        i = 0
        for c in coord:
            i = i * self.L + c
        return i

    @cached_property
    def _neighbors(self) -> tuple[tuple[int, ...], ...]:
        table = []
        for i in range(self.n_sites):
            c = self.coords(i)
            nbrs = []
            for axis in range(self.d):
                for step in (-1, 1):
                    cc = list(c)
                    cc[axis] += step
                    if self.boundary == "periodic":
                        cc[axis] %= self.L
                    elif not 0 <= cc[axis] < self.L:
                        continue
                    j = self.index(cc)
                    if j != i and j not in nbrs:
                        nbrs.append(j)
            table.append(tuple(sorted(nbrs)))
        return tuple(table)

    def neighbors(self, i: int) -> tuple[int, ...]:
        return self._neighbors[i]

    def bonds(self) -> list[tuple[int, int]]:
        """Unordered nearest-neighbour bonds ``(i, j)`` with ``i < j``."""
        return [(i, j) for i in range(self.n_sites) for j in self.neighbors(i) if i < j]

    def adjacency(self):
        import numpy as np

        A = np.zeros((self.n_sites, self.n_sites))
        for i, j in self.bonds():
            A[i, j] = A[j, i] = 1.0
        return A

    def distances_from(self, x: int) -> list[int]:
        """Graph distance from ``x`` to every site (BFS on the bond graph)."""
        dist = [-1] * self.n_sites
        dist[x] = 0
        queue = deque([x])
        while queue:
            u = queue.popleft()
            for v in self.neighbors(u):
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def translate(self, i: int, shift) -> int:
        """Site ``i`` moved by the coordinate vector ``shift`` (periodic only)."""
        if self.boundary != "periodic":
            raise ValueError("translations need periodic boundaries")
        return self.index([(c + s) % self.L for c, s in zip(self.coords(i), shift)])

    def all_coords(self):
        return list(product(range(self.L), repeat=self.d))


@dataclass(frozen=True)
class ModelParams:
    """Bose-Hubbard parameters ``(t, U, mu, beta)`` with an occupation cap.

    ``U = HARD_CORE`` (infinity) is only legal together with ``n_max = 1``;
    the cap is what makes the hard-core model exact. ``t = 0`` is accepted as
    the atomic limit.
    """

    lattice: LatticeSpec
    t: float
    U: float
    mu: float
    beta: float
    n_max: int = 2

    def __post_init__(self):
        if not self.t >= 0 or math.isinf(self.t):
            raise ValueError(f"hopping t must be finite and >= 0, got {self.t}")
        if not self.beta > 0 or math.isinf(self.beta):
            raise ValueError(f"beta must be finite and > 0, got {self.beta}")
        if not self.U >= 0:
            raise ValueError(f"U must be >= 0 or HARD_CORE, got {self.U}")
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be a positive integer, got {self.n_max}")
        if math.isinf(self.U) and self.n_max != 1:
            raise ValueError("hard-core U requires n_max = 1")

    @property
    def d(self) -> int:
        return self.lattice.d

    @property
    def hard_core(self) -> bool:
        return self.n_max == 1

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace

        return replace(self, **changes)
