"""Abstract polymer gas and its cluster expansion on finite polymer sets.

A ``PolymerSystem`` is a finite list of polymers with (possibly complex)
weights, a symmetric interaction ``zeta`` with ``|1 - zeta| <= 1`` and a
Kotecky-Preiss weight ``a``. The partition function is

    Z = sum_n 1/n! sum_{A_1..A_n} prod_i w(A_i) prod_{i<j} (1 - zeta(A_i, A_j))

and the cluster expansion writes ``log Z`` as a sum of ``phi(A_1..A_n)
prod w(A_i)`` over clusters, with ``phi`` the connected-graph sum.

Sums over ordered sequences are done over multisets instead: a multiset with
multiplicities ``c`` stands for ``n! / prod c!`` sequences, all with the same
``phi``. Since ``n! phi`` is exactly the connected-graph sum ``C``, a multiset
contributes ``C(c) / prod c! * prod w^c`` and the factorials never appear.
"""

from __future__ import annotations

import cmath
import json
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb, factorial

import mpmath
import numpy as np
import scipy.sparse as sp

from .reports import BoundReport

N_LIMIT = 8
GRAPH_SUM_MAX = 4  # phi via explicit graph enumeration up to this size, recursion above


class KPViolation(ValueError):
    """The Kotecky-Preiss criterion fails and the caller did not override."""


class ClusterDivergence(ArithmeticError):
    """Per-order cluster magnitudes grew for three consecutive orders."""


class ClusterBoundViolation(AssertionError):
    """The cluster bound failed although the KP criterion holds."""


# ---------------------------------------------------------------- arithmetic


def _exact(values):
    """Pick an exact number type for a collection of zeta values.

    Integers stay integers, other reals become exact ``Fraction`` (every float
    is a dyadic rational), anything complex goes to 40-digit ``mpmath``.
    """
    vals = list(values)
    if all(isinstance(v, int) or (isinstance(v, float) and v.is_integer()) for v in vals):
        return int
    if all(isinstance(v, (int, float, Fraction)) for v in vals):
        return Fraction
    return mpmath.mpc


def _convert(v, kind):
    if kind is int:
        return int(v)
    if kind is Fraction:
        return Fraction(v)
    if kind is float:
        return float(v)
    return mpmath.mpc(complex(v))


def _to_builtin(x):
    if isinstance(x, (int, Fraction)):
        return x
    if isinstance(x, mpmath.mpc):
        c = complex(x)
        return c.real if c.imag == 0 else c
    return x


# ------------------------------------------------------------------- graphs


def _is_connected(n: int, edges) -> bool:
    parent = list(range(n))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    comps = n
    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            comps -= 1
    return comps == 1


def connected_graphs(n: int, n_limit: int = N_LIMIT):
    """Yield every connected labeled graph on ``n`` vertices as an edge tuple."""
    if not 1 <= n <= n_limit:
        raise ValueError(f"n={n} outside [1, {n_limit}]")
    pairs = list(combinations(range(n), 2))
    for mask in range(1 << len(pairs)):
        edges = tuple(p for k, p in enumerate(pairs) if mask >> k & 1)
        if _is_connected(n, edges):
            yield edges


@lru_cache(maxsize=None)
def _cached_graphs(n: int):
    return tuple(connected_graphs(n))


def _graph_sum(f):
    """``sum_{G connected} prod_{(i,j) in G} f[i][j]`` by explicit enumeration."""
    n = len(f)
    total = 0
    for edges in _cached_graphs(n):
        term = 1
        for i, j in edges:
            term = term * f[i][j]
            if term == 0:
                break
        total = total + term
    return total


def _subset_recursion(f):
    """Same connected sum by the subtract-disconnected recursion over subsets.

    ``F(S) = prod_{i<j in S} (1 + f_ij)`` sums all graphs on ``S``; peeling off
    the component of the lowest vertex gives
    ``C(S) = F(S) - sum_{T ni min S, T != S} C(T) F(S \\ T)``.
    """
    n = len(f)
    full = (1 << n) - 1
    F = [1] * (full + 1)
    for S in range(1, full + 1):
        v = S.bit_length() - 1
        rest = S & ~(1 << v)
        prod = F[rest]
        u = rest
        while u:
            low = u & -u
            prod = prod * (1 + f[low.bit_length() - 1][v])
            u ^= low
        F[S] = prod
    C = [0] * (full + 1)
    for S in range(1, full + 1):
        low = S & -S
        rest = S ^ low
        total = F[S]
        sub = rest
        while sub:
            sub = (sub - 1) & rest  # proper subsets of rest, down to the empty set
            T = low | sub
            total = total - C[T] * F[S ^ T]
        C[S] = total
    return C[full]


def connected_sum(f):
    """Connected-graph sum for an ``n x n`` edge-weight table ``f``."""
    n = len(f)
    if n == 1:
        return 1
    if n <= GRAPH_SUM_MAX:
        return _graph_sum(f)
    return _subset_recursion(f)


def phi(members, zeta):
    """Ursell function ``phi(A_1, ..., A_n)``.

    ``zeta`` is a ``PolymerSystem`` or a callable ``(A, A') -> value``. Returns
    an exact ``Fraction`` (or ``int``) for real interactions and a complex
    number, accumulated at 40 digits, otherwise. Disconnected sequences give
    exactly zero.
    """
    members = list(members)
    n = len(members)
    if n == 0:
        raise ValueError("phi needs at least one argument")
    if n == 1:
        return 1
    z = zeta.zeta if isinstance(zeta, PolymerSystem) else zeta
    raw = [[z(members[i], members[j]) if i != j else 0 for j in range(n)] for i in range(n)]
    edges = [(i, j) for i, j in combinations(range(n), 2) if raw[i][j] != 0]
    if not _is_connected(n, edges):
        return 0
    kind = _exact(raw[i][j] for i, j in combinations(range(n), 2))
    with mpmath.workdps(40):
        f = [[-_convert(raw[i][j], kind) for j in range(n)] for i in range(n)]
        total = connected_sum(f)
        return _to_builtin(Fraction(total, factorial(n)) if kind is not mpmath.mpc else total / factorial(n))


# ------------------------------------------------------------ polymer system


@dataclass
class PolymerSystem:
    """Finite polymer gas.

    ``zeta_table`` maps index pairs ``(i, j)`` with ``i <= j`` to the
    interaction; missing pairs mean ``zeta = 0``.
    """

    weights: list
    zeta_table: dict
    kp_weight: list
    ids: list = field(default=None)

    def __post_init__(self):
        n = len(self.weights)
        if self.ids is None:
            self.ids = list(range(n))
        if len(self.kp_weight) != n or len(self.ids) != n:
            raise ValueError("weights, kp_weight and ids must have equal length")
        table = {}
        for (i, j), v in self.zeta_table.items():
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"zeta pair {(i, j)} out of range")
            key = (min(i, j), max(i, j))
            if key in table and table[key] != v:
                raise ValueError(f"zeta not symmetric at {key}")
            if abs(1 - complex(v)) > 1 + 1e-12:
                raise ValueError(f"|1 - zeta| > 1 at {key}")
            if v != 0:
                table[key] = v
        self.zeta_table = table
        if any(a < 0 for a in self.kp_weight):
            raise ValueError("KP weights must be nonnegative")
        self._nbrs = [set() for _ in range(n)]
        for i, j in table:
            self._nbrs[i].add(j)
            self._nbrs[j].add(i)

    def __len__(self):
        return len(self.weights)

    def zeta(self, i: int, j: int):
        return self.zeta_table.get((i, j) if i <= j else (j, i), 0)

    def neighbours(self, i: int) -> set:
        return self._nbrs[i]

    # JSON: {polymers: [{id, weight, a}], zeta: [[i, j, value]]}
    def to_json(self) -> str:
        def enc(w):
            return [w.real, w.imag] if isinstance(w, complex) else w

        polys = [{"id": pid, "weight": enc(w), "a": a} for pid, w, a in zip(self.ids, self.weights, self.kp_weight)]
        zeta = [[self.ids[i], self.ids[j], enc(v)] for (i, j), v in sorted(self.zeta_table.items())]
        return json.dumps({"polymers": polys, "zeta": zeta}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PolymerSystem":
        data = json.loads(text)

        def dec(w):
            return complex(w[0], w[1]) if isinstance(w, list) else w

        polys = data["polymers"]
        ids = [p["id"] for p in polys]
        pos = {pid: k for k, pid in enumerate(ids)}
        table = {(pos[i], pos[j]): dec(v) for i, j, v in data.get("zeta", [])}
        return cls([dec(p["weight"]) for p in polys], table, [p.get("a", 0.0) for p in polys], ids)


# ------------------------------------------------------- typed connected sum


class _TypedConnectedSum:
    """Connected-graph sums for multisets of polymers, memoized by counts.

    For a multiset with count vector ``c`` over polymer types, the subsets
    ``T`` of the labeled vertex set that contain the root vertex and have
    count vector ``b`` number ``binom(c_0 - 1, b_0 - 1) prod binom(c_i, b_i)``,
    so the subset recursion runs over count vectors instead of bitmasks.
    """

    def __init__(self, system: PolymerSystem, exact: bool = True):
        self.system = system
        self.kind = _exact(system.zeta_table.values()) if system.zeta_table else int
        if not exact and self.kind is not mpmath.mpc:
            self.kind = float
        self._memo = {}
        self._F = {}
        self._f = {}
        self._one = _convert(1, self.kind)

    def f(self, i, j):
        """Exact edge weight ``-zeta(i, j)``, converted once per pair."""
        key = (i, j) if i <= j else (j, i)
        v = self._f.get(key)
        if v is None:
            with mpmath.workdps(40):
                v = -_convert(self.system.zeta(*key), self.kind)
            self._f[key] = v
        return v

    def F(self, key):
        if key in self._F:
            return self._F[key]
        types = [k for k, _ in key]
        counts = [c for _, c in key]
        prod = self._one
        for a in range(len(types)):
            ca = counts[a]
            if ca > 1:
                prod = prod * (1 + self.f(types[a], types[a])) ** (ca * (ca - 1) // 2)
            for b in range(a + 1, len(types)):
                prod = prod * (1 + self.f(types[a], types[b])) ** (ca * counts[b])
        self._F[key] = prod
        return prod

    def C(self, key):
        """Connected sum for the multiset ``key = ((type, count), ...)``."""
        if key in self._memo:
            return self._memo[key]
        with mpmath.workdps(40):
            total = self._compute(key)
        self._memo[key] = total
        return total

    def _compute(self, key):
        types = [k for k, _ in key]
        counts = [c for _, c in key]
        n = sum(counts)
        if n == 1:
            return self._one
        if n <= GRAPH_SUM_MAX:
            verts = [t for t, c in key for _ in range(c)]
            table = [[self.f(a, b) if x != y else 0 for y, b in enumerate(verts)] for x, a in enumerate(verts)]
            return _graph_sum(table)
        total = self.F(key)
        ranges = [range(1, counts[0] + 1)] + [range(0, c + 1) for c in counts[1:]]
        for b in _product(ranges):
            if list(b) == counts:
                continue
            mult = comb(counts[0] - 1, b[0] - 1)
            for bi, ci in zip(b[1:], counts[1:]):
                mult *= comb(ci, bi)
            sub = tuple((t, x) for t, x in zip(types, b) if x)
            rest = tuple((t, c - x) for t, c, x in zip(types, counts, b) if c - x)
            total = total - mult * self.C(sub) * self.F(rest)
        return total


def _product(ranges):
    if not ranges:
        yield ()
        return
    for head in ranges[0]:
        for tail in _product(ranges[1:]):
            yield (head,) + tail


def _multiset_key(seq):
    counts = {}
    for i in seq:
        counts[i] = counts.get(i, 0) + 1
    return tuple(sorted(counts.items()))


def _copy_components(seq, nbrs) -> int:
    """Components of the intersection graph on the copies in ``seq``.

    Copies of one polymer are mutually adjacent iff it self-interacts; a
    polymer with no neighbour among the other distinct members and no
    self-interaction therefore leaves each copy isolated.
    """
    counts = {}
    for i in seq:
        counts[i] = counts.get(i, 0) + 1
    distinct = sorted(counts)
    parent = {i: i for i in distinct}

    def find(u):
        while parent[u] != u:
            u = parent[u]
        return u

    comps = len(distinct)
    for a, b in combinations(distinct, 2):
        if b in nbrs[a]:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[ra] = rb
                comps -= 1
    for i in distinct:
        lonely = not any(j in nbrs[i] for j in distinct if j != i)
        if lonely and i not in nbrs[i]:
            comps += counts[i] - 1
    return comps


def _connected_multisets(system: PolymerSystem, n: int, must_contain=None, allowed=None):
    """Sorted index tuples of size ``n`` whose intersection graph is connected.

    Nondecreasing sequences are grown one index at a time and pruned once
    the components of the prefix outnumber the remaining slots plus one.
    ``allowed`` restricts the indices that may appear.
    """
    P = len(system)
    candidates = list(range(P)) if allowed is None else sorted(allowed)
    nbrs = [system.neighbours(i) for i in range(P)]

    def rec(seq, start):
        remaining = n - len(seq)
        if seq and _copy_components(seq, nbrs) - 1 > remaining:
            return
        if remaining == 0:
            if must_contain is None or must_contain in seq:
                yield tuple(seq)
            return
        for pos in range(start, len(candidates)):
            seq.append(candidates[pos])
            yield from rec(seq, pos)
            seq.pop()

    yield from rec([], 0)


# --------------------------------------------------------------- operations


@dataclass
class SeriesResult:
    value: complex | float
    orders: list  # per-order contributions, index n-1 for order n
    converged: bool = True

    @property
    def magnitudes(self):
        return [abs(x) for x in self.orders]


def _weight_power(system, key, absolute=False):
    w = 1
    for i, c in key:
        wi = abs(system.weights[i]) if absolute else system.weights[i]
        w = w * wi**c
    return w


def _real_if_possible(x):
    if isinstance(x, complex) and x.imag == 0:
        return x.real
    return x


def partition_function(system: PolymerSystem, n_poly_max: int = 12, tol: float = 1e-12) -> SeriesResult:
    """Polymer partition function truncated at ``n_poly_max`` polymers.

    Exact once every multiset larger than the cutoff carries a vanishing
    factor (hard-core self-exclusion and finite supports); otherwise
    ``converged`` reports whether the last included order fell below
    ``tol * |Z|``.
    """
    P = len(system)
    orders = [0.0] * n_poly_max

    def rec(start, counts, size, w, pair_factor):
        for i in range(start, P):
            # interaction of one more copy of i with everything already present
            f = 1
            for j, cj in counts.items():
                f *= (1 - complex(system.zeta(i, j))) ** cj
            if f == 0:
                continue
            counts[i] = counts.get(i, 0) + 1
            new_w = w * system.weights[i] / counts[i]
            new_pf = pair_factor * f
            orders[size] += new_w * new_pf
            if size + 1 < n_poly_max:
                rec(i, counts, size + 1, new_w, new_pf)
            counts[i] -= 1
            if not counts[i]:
                del counts[i]

    rec(0, {}, 0, 1.0, 1.0)
    orders = [_real_if_possible(complex(o)) for o in orders]
    Z = 1 + sum(orders)
    converged = n_poly_max == 0 or abs(orders[-1]) <= tol * abs(Z)
    return SeriesResult(_real_if_possible(complex(Z)), orders, converged)


def kp_check(system: PolymerSystem):
    """Kotecky-Preiss: ``sum_{A'} |w(A')| |zeta(A, A')| e^{a(A')} <= a(A)`` for all ``A``."""
    P = len(system)
    lhs = []
    for i in range(P):
        s = 0.0
        for j in system.neighbours(i):
            s += abs(system.weights[j]) * abs(complex(system.zeta(i, j))) * math.exp(system.kp_weight[j])
        lhs.append(s)
    slacks = [system.kp_weight[i] - lhs[i] for i in range(P)]
    if not P:
        return KPReport(True, None, math.inf, [])
    worst = min(range(P), key=lambda i: slacks[i])
    return KPReport(slacks[worst] >= 0, system.ids[worst], slacks[worst], lhs)


def kp_best_linear(system: PolymerSystem, sizes, alphas=None):
    """Best ``a(A) = alpha |A|`` over a grid of ``alpha``.

    Returns ``(alpha, KPReport)`` for the ``alpha`` with the largest worst
    slack; ``sizes`` are the polymer sizes ``|A|``.
    """
    if alphas is None:
        alphas = np.logspace(-5, 1, 121)
    P = len(system)
    if not P:
        return float(alphas[0]), KPReport(True, None, math.inf, [])
    rows, cols, vals = [], [], []
    for (i, j), z in system.zeta_table.items():
        rows.append(i), cols.append(j), vals.append(abs(complex(z)))
        if i != j:
            rows.append(j), cols.append(i), vals.append(abs(complex(z)))
    M = sp.csr_matrix((vals, (rows, cols)), shape=(P, P))
    absw = np.array([abs(complex(w)) for w in system.weights])
    s = np.asarray(sizes, dtype=float)
    best = None
    for alpha in alphas:
        lhs = M @ (absw * np.exp(alpha * s))
        slack = alpha * s - lhs
        k = int(np.argmin(slack))
        if best is None or slack[k] > best[1].slack:
            best = (float(alpha), KPReport(bool(slack[k] >= 0), system.ids[k], float(slack[k]), lhs.tolist()))
    return best


@dataclass(frozen=True)
class KPReport:
    satisfied: bool
    worst: object
    slack: float
    lhs: list


def cluster_series(system: PolymerSystem, K: int, *, observable=None, roots=None, exact=True, heavy=None):
    """Per-order sums ``sum_{|m| = n} C(m) / prod c! * prod w^c * observable(m)``.

    ``observable`` maps a multiset key ``((index, count), ...)`` to a factor
    (default 1); a list of observables returns one ``SeriesResult`` each from
    a single enumeration. ``roots`` restricts the sum to multisets containing
    at least one listed polymer, which together with a suitable observable
    turns a translation-invariant total into a per-site quantity.
    ``exact=False`` trades rational arithmetic for floats on real systems.
    ``heavy`` (a set of indices) limits clusters of three or more members to
    those polymers; the caller accounts for what that leaves out.
    """
    many = isinstance(observable, (list, tuple))
    observables = list(observable) if many else [observable]
    typed = _TypedConnectedSum(system, exact)
    roots = None if roots is None else set(roots)
    orders = [[] for _ in observables]
    for n in range(1, K + 1):
        totals = [0] * len(observables)
        for seq in _connected_multisets(system, n, allowed=heavy if n >= 3 else None):
            if roots is not None and roots.isdisjoint(seq):
                continue
            key = _multiset_key(seq)
            obs = [1 if o is None else o(key) for o in observables]
            if not any(obs):
                continue
            c = typed.C(key)
            denom = 1
            for _, cnt in key:
                denom *= factorial(cnt)
            if typed.kind is mpmath.mpc:
                coeff = complex(c) / denom
            elif typed.kind is float:
                coeff = c / denom
            else:
                coeff = float(Fraction(c) / denom)
            term = coeff * _weight_power(system, key)
            for k, o in enumerate(obs):
                totals[k] += term * o
        for k in range(len(observables)):
            orders[k].append(_real_if_possible(complex(totals[k])))
        m = [abs(o) for o in orders[0]]
        if len(m) >= 4 and m[-1] > m[-2] > m[-3] > m[-4] and m[-4] > 0:
            raise ClusterDivergence(f"cluster magnitudes increasing through order {n}: {m[-4:]}")
    results = [SeriesResult(_real_if_possible(complex(sum(o))), o, True) for o in orders]
    return results if many else results[0]


def log_partition_clusters(system: PolymerSystem, K: int, *, force: bool = False) -> SeriesResult:
    """``sum_{n <= K} sum_{A_1..A_n} phi(A_1..A_n) prod w(A_i)``.

    Requires the KP criterion unless ``force`` is set, in which case a
    warning is emitted. Raises ``ClusterDivergence`` when the per-order
    magnitudes increase three times in a row.
    """
    if not kp_check(system).satisfied:
        if not force:
            raise KPViolation("Kotecky-Preiss criterion fails; pass force=True to expand anyway")
        warnings.warn("cluster expansion run without the Kotecky-Preiss criterion", stacklevel=2)
    return cluster_series(system, K)


def cluster_bound_check(system: PolymerSystem, root: int, K: int) -> BoundReport:
    """``1 + sum_{n=2}^K n sum_{A_2..A_n} |phi(A_1..A_n)| prod_{i>=2} |w(A_i)| <= e^{a(A_1)}``.

    With the root fixed, a multiset ``m`` of the other ``n - 1`` polymers
    stands for ``(n-1)! / prod c!`` sequences and ``phi = C / n!``, so its
    contribution is ``|C(root + m)| / prod c(m)! * prod |w|``.
    """
    kp = kp_check(system)
    if not kp.satisfied:
        raise KPViolation("cluster bound requires the Kotecky-Preiss criterion")
    typed = _TypedConnectedSum(system)
    lhs = 1.0
    for n in range(2, K + 1):
        for seq in _connected_multisets(system, n, must_contain=root):
            rest = list(seq)
            rest.remove(root)
            key = _multiset_key(seq)
            rest_key = _multiset_key(rest)
            denom = 1
            for _, cnt in rest_key:
                denom *= factorial(cnt)
            c = typed.C(key)
            mag = abs(complex(c)) if typed.kind is mpmath.mpc else abs(float(Fraction(c)))
            lhs += mag / denom * _weight_power(system, rest_key, absolute=True)
    report = BoundReport(f"cluster_bound[{system.ids[root]}]", lhs, math.exp(system.kp_weight[root]), True)
    if not report.satisfied:
        raise ClusterBoundViolation(f"cluster bound violated with KP satisfied: {report}")
    return report


def log_partition_exact(system: PolymerSystem, n_poly_max: int = 12) -> complex | float:
    z = partition_function(system, n_poly_max).value
    return math.log(z) if isinstance(z, float) and z > 0 else cmath.log(z)
