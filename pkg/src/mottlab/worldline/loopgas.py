"""Loop-gas expansion around the unit-density Mott state (generalized hard core).

A loop class is a cyclic sequence of segments ``(site, up)`` with a winding
``z``; consecutive sites are neighbours and the jump from segment ``k`` to
``k + 1`` moves a boson from ``s_k`` to ``s_{k+1}``. Its sqrt factors
multiply to ``2^u`` (each of the ``u`` up segments meets two jumps with a
``sqrt 2`` each). With ``A``/``D`` the total up/down lengths, the time
integral over the first jump time and the segment lengths is

    beta * int f_u(A) f_v(D) delta(A - D - z beta) e^{-(U-mu) A - mu D},

``f_n(x) = x^{n-1}/(n-1)!``, in closed form below. A labeled sequence with
``p`` distinct rotations describes each loop ``j/p`` times, hence the factor
``p/j``. The formula drops two constraints (segments shorter than ``beta``,
no time overlap of segments sharing a site); it is exact for two-jump loops
(handled explicitly) and for one-directional loops with ``|z| = 1``, and an
upper bound otherwise, which the report accounts for.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import scipy.integrate

from ..bounds import P12, P14, lemma32_bounds, theorem2_condition
from ..lattice import LatticeSpec, ModelParams
from ..polymer import PolymerSystem, cluster_series


@dataclass(frozen=True)
class LoopClass:
    """Cyclic segment sequence ``((site, up), ...)``; ``j = 0`` means a jump-free column."""

    sequence: tuple
    winding: int

    @property
    def j(self) -> int:
        return 0 if len(self.sequence) == 1 else len(self.sequence)

    @property
    def n_up(self) -> int:
        return sum(1 for _, up in self.sequence if up)

    @property
    def n_down(self) -> int:
        return len(self.sequence) - self.n_up

    @cached_property
    def sites(self) -> frozenset:
        return frozenset(s for s, _ in self.sequence)

    def share(self, x: int) -> float:
        """Fraction of the segments sitting at ``x`` (a translation-covariant root)."""
        return sum(1 for s, _ in self.sequence if s == x) / len(self.sequence)

    @property
    def revisits(self) -> bool:
        return len(self.sites) < len(self.sequence)

    @property
    def exact(self) -> bool:
        """Whether the unconstrained time integral is the true one."""
        if self.j <= 2:
            return True
        one_way = self.n_up == 0 or self.n_down == 0
        return one_way and abs(self.winding) == 1


def _rotations(seq):
    return [seq[k:] + seq[:k] for k in range(len(seq))]


def canonical(seq):
    return min(_rotations(seq))


def distinct_rotations(seq) -> int:
    return len(set(_rotations(seq)))


def enumerate_loop_classes(lattice: LatticeSpec, max_jumps: int = 4, max_winding: int = 1, radius: int = 2):
    """All loop classes on the box with ``j <= max_jumps`` and ``|z| <= max_winding``.

    Closed walks are grown from every site and kept if they stay within
    ``radius`` of their start; each class appears once (canonical rotation).
    """
    classes = []
    for x in range(lattice.n_sites):
        classes.append(LoopClass(((x, True),), 1))
        classes.append(LoopClass(((x, False),), -1))
    seen = set()
    for x in range(lattice.n_sites):
        dist = lattice.distances_from(x)

        def walks(path, left):
            if left == 0:
                if x in lattice.neighbors(path[-1]):
                    yield tuple(path)
                return
            for y in lattice.neighbors(path[-1]):
                if 0 <= dist[y] <= radius and dist[y] <= left:
                    path.append(y)
                    yield from walks(path, left - 1)
                    path.pop()

        for j in range(2, max_jumps + 1, 2):
            for sites in walks([x], j - 1):
                for mask in range(1 << j):
                    seq = canonical(tuple((s, bool(mask >> k & 1)) for k, s in enumerate(sites)))
                    if seq in seen:
                        continue
                    seen.add(seq)
                    u = sum(1 for _, up in seq if up)
                    v = j - u
                    for z in range(-max_winding, max_winding + 1):
                        if (z > 0 and u == 0) or (z < 0 and v == 0) or (z == 0 and (u == 0 or v == 0)):
                            continue
                        if j == 2 and u == 1 and z != 0:
                            continue  # A - D = z beta with both lengths below beta is impossible
                        if (u == 0 or v == 0) and j <= abs(z):
                            continue  # |z| beta split into j pieces each shorter than beta
                        classes.append(LoopClass(seq, z))
    return classes


def _exp(x: float) -> float:
    # inf instead of OverflowError; callers compare against finite bounds
    return math.inf if x > 700 else math.exp(x)


def winding_integral(u: int, v: int, z: int, E_up: float, E_down: float, beta: float) -> float:
    """``int f_u(A) f_v(D) delta(A - D - z beta) e^{-E_up A - E_down D}`` (unconstrained)."""
    if u == 0 and v == 0:
        raise ValueError("jump-free loops have no length integral")
    if z < 0:
        return winding_integral(v, u, -z, E_down, E_up, beta)
    zb = z * beta
    if v == 0:
        return zb ** (u - 1) / math.factorial(u - 1) * _exp(-E_up * zb) if z > 0 else 0.0
    if u == 0:
        return 0.0
    E = E_up + E_down
    if E <= 0:
        return math.inf
    total = 0.0
    for k in range(u):
        total += math.comb(u - 1, k) * zb ** (u - 1 - k) * math.factorial(k + v - 1) / E ** (k + v)
    return _exp(-E_up * zb) * total / (math.factorial(u - 1) * math.factorial(v - 1))


def class_weight(cls: LoopClass, params: ModelParams, length_shift: float = 0.0, jump_shift: float = 0.0) -> float:
    """Time-integrated class weight, optionally times ``e^{jump_shift j + length_shift ell}``."""
    t, U, mu, beta = params.t, params.U, params.mu, params.beta
    E_up, E_down = U - mu - length_shift, mu - length_shift
    if cls.j == 0:
        return math.exp(-beta * (E_up if cls.winding > 0 else E_down))
    pref = distinct_rotations(cls.sequence) / cls.j * beta * t**cls.j * 2**cls.n_up * math.exp(jump_shift * cls.j)
    if pref == 0.0:
        return 0.0
    if cls.j == 2 and cls.winding == 0:
        # both segments share one length L in (0, beta)
        E = E_up + E_down
        return pref * (beta if E == 0 else -math.expm1(-E * beta) / E)
    return pref * winding_integral(cls.n_up, cls.n_down, cls.winding, E_up, E_down, beta)


@lru_cache(maxsize=256)
def _pair_overlap_zeta(U: float, beta: float) -> float:
    """``zeta_eff`` for two two-jump, zero-winding loops sharing a site.

    Each loop occupies its sites on one interval of length ``L < beta``; they
    meet iff the intervals overlap, which for a uniform relative shift has
    measure ``min(beta, L + L')``. With ``lam = L + L'`` (density ``lam`` below
    ``beta`` and ``2 beta - lam`` above) the ratio to ``beta g^2`` is the
    probability of meeting.
    """
    g = beta if U == 0 else -math.expm1(-U * beta) / U

    def integrand(lam):
        dens = lam if lam <= beta else 2 * beta - lam
        return math.exp(-U * lam) * min(beta, lam) * dens

    pts = [beta]
    val, _ = scipy.integrate.quad(integrand, 0, 2 * beta, points=pts, epsabs=0, epsrel=1e-12, limit=200)
    return min(1.0, val / (beta * g * g))


@dataclass
class LoopGas:
    params: ModelParams
    classes: list
    system: PolymerSystem
    roots: list
    conservative_pairs: list = field(default_factory=list)


def loop_gas(params: ModelParams, max_jumps: int = 4, max_winding: int = 1, radius: int = 2) -> LoopGas:
    """Loop classes as a polymer system.

    ``zeta`` is 1 for any pair sharing a site, except two zero-winding
    two-jump loops, whose meeting probability is computed exactly; pairs left
    at the conservative value are recorded.
    """
    if params.n_max != 2 or not math.isfinite(params.U):
        raise ValueError("the loop gas needs the generalized hard core (n_max = 2, finite U)")
    if params.lattice.boundary != "periodic":
        raise ValueError("the per-site loop expansion assumes a periodic box")
    classes = enumerate_loop_classes(params.lattice, max_jumps, max_winding, radius)
    weights = [class_weight(c, params) for c in classes]
    z_pair = _pair_overlap_zeta(float(params.U), float(params.beta))
    zeta = {}
    conservative = []
    at_site: dict = {}
    for k, c in enumerate(classes):
        for x in c.sites:
            at_site.setdefault(x, []).append(k)
    pair_like = [c.j == 2 and c.winding == 0 for c in classes]
    for i, a in enumerate(classes):
        partners = sorted({k for x in a.sites for k in at_site[x] if k >= i})
        for k in partners:
            b = classes[k]
            if pair_like[i] and pair_like[k]:
                zeta[i, k] = z_pair
            else:
                zeta[i, k] = 1
                if a.j and b.j:
                    conservative.append((i, k))
    system = PolymerSystem(weights, zeta, [0.0] * len(classes), list(range(len(classes))))
    roots = [k for k, c in enumerate(classes) if c.share(0) > 0]
    return LoopGas(params, classes, system, roots, conservative)


@dataclass
class LoopExpansionResult:
    pressure: float  # (1/beta) log Z / |Lambda|
    density_deviation: float  # rho - 1
    density_bound: float
    orders: list
    report: dict


def _per_site(classes, weights, select=lambda c: True, factor=lambda c: 1.0):
    return sum(c.share(0) * w * factor(c) for c, w in zip(classes, weights) if select(c))


def _neighbourhood_mass(gas: LoopGas) -> float:
    """``max_a sum_{b touching a} |w_b|``."""
    w = gas.system.weights
    return max(sum(abs(w[b]) for b in gas.system.neighbours(a)) for a in range(len(w)))


def _loop_expansion(params, max_jumps, max_winding, radius, K, light_ratio):
    if not theorem2_condition(params.t, params.mu, params.U, params.d):
        warnings.warn("Mott-phase hypotheses do not hold; the loop series is not guaranteed to converge", stacklevel=3)
    gas = loop_gas(params, max_jumps, max_winding, radius)
    classes = gas.classes

    def root_share(key):
        n = sum(c for _, c in key)
        return sum(c * classes[i].share(0) for i, c in key) / n

    def winding_share(key):
        return root_share(key) * sum(c * classes[i].winding for i, c in key)

    w = gas.system.weights
    floor = light_ratio * max(abs(x) for x in w)
    heavy = {k for k, x in enumerate(w) if abs(x) >= floor}
    p, rho = cluster_series(
        gas.system, K, observable=[root_share, winding_share], roots=gas.roots, exact=False, heavy=heavy
    )
    beta = params.beta
    # clusters of three or more members containing a light polymer were skipped;
    # tree-graph estimate with neighbourhood mass nb: (3/2) light * nb^2 / (1 - nb)
    light = [k for k in range(len(w)) if k not in heavy]
    light_mass = sum(classes[k].share(0) * abs(w[k]) for k in light)
    light_z = sum(classes[k].share(0) * abs(w[k]) * abs(classes[k].winding) for k in light)
    nb = _neighbourhood_mass(gas)
    if K < 3 or not light:
        light_tail = light_tail_z = 0.0
    elif nb < 1:
        light_tail = 1.5 * light_mass * nb * nb / (1 - nb)
        light_tail_z = 1.5 * (light_z + light_mass) * nb * nb / (1 - nb)
    else:
        light_tail = light_tail_z = math.inf

    # next omitted jump order, as an estimate of the jump truncation
    extra = [c for c in enumerate_loop_classes(params.lattice, max_jumps + 2, max_winding, radius) if c.j == max_jumps + 2]
    jump_tail = _per_site(extra, [class_weight(c, params) for c in extra])
    jump_tail_z = _per_site(extra, [class_weight(c, params) for c in extra], factor=lambda c: abs(c.winding))
    # loops winding more than max_winding times: geometric estimate in the lemma's exponents
    c12 = P12 * params.d**2 * params.t**2 / params.U
    rates = [params.mu - 2 * params.d * params.t - c12, params.U - params.mu - 2 * params.d * params.t - c12]
    winding_tail = 0.0
    winding_tail_z = 0.0
    for r in rates:
        if r <= 0:
            winding_tail = winding_tail_z = math.inf
            break
        for k in range(max_winding + 1, max_winding + 200):
            winding_tail += math.exp(-k * beta * r)
            winding_tail_z += k * math.exp(-k * beta * r)
    overcount = _per_site(classes, w, select=lambda c: not c.exact)
    overcount_z = _per_site(classes, w, select=lambda c: not c.exact, factor=lambda c: abs(c.winding))
    conservative = sum(
        0.5 * w[i] * w[k] * (classes[i].share(0) + classes[k].share(0)) for i, k in gas.conservative_pairs
    )
    cluster_tail = abs(p.orders[-1]) if K > 1 else math.nan
    cluster_tail_z = abs(rho.orders[-1]) if K > 1 else math.nan
    # first-order bound |rho - 1| <= sum |z| w e^{a}, valid when the KP criterion holds
    alpha = P14 * params.d * params.t**2 / params.U**2
    c_len = P12 * params.d * params.t**2 / params.U
    weighted = [class_weight(c, params, c_len, alpha) for c in classes]
    first_order = _per_site(classes, weighted, factor=lambda c: abs(c.winding))
    lemma = lemma32_bounds(params)
    series_total = jump_tail + winding_tail + overcount + conservative + cluster_tail + light_tail
    report = {
        "cutoffs": {"max_jumps": max_jumps, "max_winding": max_winding, "radius": radius, "K": K},
        "orders": [{"order": n + 1, "magnitude": abs(v), "bound_used": "computed"} for n, v in enumerate(p.orders)],
        "density_orders": [{"order": n + 1, "magnitude": abs(v), "bound_used": "computed"} for n, v in enumerate(rho.orders)],
        "jump_tail": jump_tail,
        "winding_tail": winding_tail,
        "constraint_overcount": overcount,
        "conservative_zeta_excess": conservative,
        "cluster_tail": cluster_tail,
        "light_cluster_tail": light_tail,
        "heavy_classes": len(heavy),
        "pressure_error": series_total / beta,
        "density_error": jump_tail_z + winding_tail_z + overcount_z + cluster_tail_z + light_tail_z,
        "density_first_order_bound": first_order,
        "density_lemma_bound": lemma[1].rhs + lemma[3].rhs,
        "theorem2_condition": theorem2_condition(params.t, params.mu, params.U, params.d),
        "n_classes": len(classes),
    }
    bound = first_order + jump_tail_z + winding_tail_z
    return LoopExpansionResult(params.mu + float(p.value) / beta, float(rho.value), bound, p.orders, report)


def truncated_pressure_loops(
    params: ModelParams, max_jumps: int = 4, max_winding: int = 1, radius: int = 2, K: int = 3, light_ratio: float = 1e-3
):
    """``mu + (1/(beta |Lambda|)) sum_clusters phi prod w`` with its error report.

    Classes lighter than ``light_ratio`` times the heaviest enter clusters of
    up to two members only.
    """
    return _loop_expansion(params, max_jumps, max_winding, radius, K, light_ratio)


def density_deviation_loops(
    params: ModelParams, max_jumps: int = 4, max_winding: int = 1, radius: int = 2, K: int = 3, light_ratio: float = 1e-3
):
    """``rho - 1 = (1/|Lambda|) sum_clusters (sum z) phi prod w``.

    ``density_bound`` is the first-order cluster bound ``sum |z| w e^{a}``
    over the enumerated classes plus the estimated jump and winding tails.
    """
    return _loop_expansion(params, max_jumps, max_winding, radius, K, light_ratio)


# ---------------------------------------------------------------- hopping matrix


def _open_walks(lattice: LatticeSpec, x: int, n_jumps: int, radius: int):
    dist = lattice.distances_from(x)

    def rec(path):
        if len(path) == n_jumps + 1:
            yield tuple(path)
            return
        for y in lattice.neighbors(path[-1]):
            if 0 <= dist[y] <= radius:
                path.append(y)
                yield from rec(path)
                path.pop()

    yield from rec([x])


def hopping_matrix_sigma(x: int, y: int, params: ModelParams, max_jumps: int = 6, radius: int = 3, max_winding: int = 1):
    """Truncated ``sigma_xy = int_{x -> y} w e^{a}`` over open excursions.

    An excursion starts with a jump out of ``x`` at time 0, has ``j - 1``
    interior segments and ends with a jump into ``y`` at time ``z beta``,
    ``0 <= z <= max_winding``. The outer segments are holes, which fixes the
    sqrt factors to ``2^u``. Lengths are integrated without the
    ``< beta`` constraint, so the value is an upper estimate.
    """
    t, U, mu, beta, d = params.t, params.U, params.mu, params.beta, params.d
    alpha = P14 * d * t * t / (U * U)
    c_len = P12 * d * t * t / U
    E_up, E_down = U - mu - c_len, mu - c_len
    lat = params.lattice
    total = 0.0
    for j in range(1, max_jumps + 1, 2):
        amp = (t * _exp(alpha)) ** j
        for walk in _open_walks(lat, x, j, radius):
            if walk[-1] != y:
                continue
            inner = j - 1
            if inner == 0:
                total += amp
                continue
            for mask in range(1 << inner):
                u = bin(mask).count("1")
                v = inner - u
                for z in range(0, max_winding + 1):
                    val = winding_integral(u, v, z, E_up, E_down, beta) if (u or v) else 0.0
                    total += amp * 2**u * val
    return total


def sigma_rowsum(params: ModelParams, max_jumps: int = 6, radius: int = 3) -> float:
    """``sum_{y != x} sigma_xy`` from site 0."""
    return sum(hopping_matrix_sigma(0, y, params, max_jumps, radius) for y in range(params.lattice.n_sites) if y != 0)
