"""Space-time quantum configurations and their excitation loops.

A quantum configuration is an initial occupation plus a time-ordered list of
jumps ``(tau, x, y)``, each moving one boson from ``y`` to ``x``. Relative to
the background with one boson per site, the points where ``n_x(tau) != 1``
form vertical segments (up where ``n = 2``, down where ``n = 0``); jumps glue
segment ends together and the connected pieces are loops. Times may be
``Fraction`` for exact bookkeeping or floats.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..lattice import LatticeSpec, ModelParams


class LoopError(ValueError):
    """Configuration not representable over the one-boson background."""


@dataclass(frozen=True)
class QuantumConfig:
    initial: tuple
    events: tuple  # (tau, x, y): a boson hops y -> x at time tau
    beta: object

    def __post_init__(self):
        object.__setattr__(self, "initial", tuple(int(v) for v in self.initial))
        object.__setattr__(self, "events", tuple((e[0], int(e[1]), int(e[2])) for e in self.events))
        times = [e[0] for e in self.events]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("event times must be strictly increasing")
        if times and not (0 < times[0] and times[-1] < self.beta):
            raise ValueError("event times must lie in (0, beta)")
        if any(x == y for _, x, y in self.events):
            raise ValueError("a jump needs two distinct sites")
        n = list(self.initial)
        for _, x, y in self.events:
            n[x] += 1
            n[y] -= 1
            if n[y] < 0:
                raise ValueError("jump from an empty site")
        if tuple(n) != self.initial:
            raise ValueError("configuration is not periodic in time")

    @property
    def n_sites(self) -> int:
        return len(self.initial)

    def check_lattice(self, lattice: LatticeSpec):
        if lattice.n_sites != self.n_sites:
            raise ValueError("site count mismatch")
        for _, x, y in self.events:
            if x not in lattice.neighbors(y):
                raise ValueError(f"jump {y}->{x} is not nearest-neighbour")

    def pieces(self):
        """``(duration, occupation)`` for each constant stretch of ``[0, beta)``."""
        n = list(self.initial)
        prev = 0
        for tau, x, y in self.events:
            yield tau - prev, tuple(n)
            n[x] += 1
            n[y] -= 1
            prev = tau
        yield self.beta - prev, tuple(n)


@dataclass(frozen=True)
class Segment:
    """``[start, start + length)`` on the time circle at ``site``.

    ``first``/``last`` index the loop jumps that open/close the segment in
    forward time (``None`` for a jump-free full circle).
    """

    site: int
    start: object
    length: object
    up: bool
    first: int | None
    last: int | None

    def covers_zero(self, beta) -> bool:
        return self.first is None or self.start + self.length > beta


@dataclass(frozen=True)
class Loop:
    segments: tuple
    jumps: tuple  # (tau, x, y) sorted by time
    beta: object

    @property
    def j(self) -> int:
        return len(self.jumps)

    @property
    def l0(self):
        return sum((s.length for s in self.segments if not s.up), 0)

    @property
    def l2(self):
        return sum((s.length for s in self.segments if s.up), 0)

    @property
    def winding(self) -> int:
        return round((self.l2 - self.l0) / self.beta)

    @property
    def sites(self) -> frozenset:
        return frozenset(s.site for s in self.segments)

    def key(self):
        return (tuple(sorted(self.jumps)), tuple(sorted((s.site, s.start, s.length, s.up) for s in self.segments)))

    def __hash__(self):
        return hash(self.key())

    def __eq__(self, other):
        return isinstance(other, Loop) and self.key() == other.key() and self.beta == other.beta


def _site_segments(cfg: QuantumConfig, x: int, touching):
    """Maximal stretches with ``n_x != 1`` as ``(start, end, up, first_event, last_event)``."""
    n = cfg.initial[x]
    if n not in (0, 1, 2):
        raise LoopError(f"occupation {n} at site {x} is outside {{0, 1, 2}}")
    open_seg = (0, n == 2, None) if n != 1 else None
    out = []
    for k in touching:
        tau, a, b = cfg.events[k]
        n += 1 if a == x else -1
        if n not in (0, 1, 2):
            raise LoopError(f"occupation {n} at site {x} is outside {{0, 1, 2}}")
        if open_seg is not None:
            out.append((open_seg[0], tau, open_seg[1], open_seg[2], k))
            open_seg = None
        if n != 1:
            open_seg = (tau, n == 2, k)
    if open_seg is not None:
        if not touching:
            return [(0, cfg.beta, open_seg[1], None, None)]
        if out and out[0][0] == 0 and out[0][3] is None:
            # the stretch through tau = beta continues the one starting at 0
            first = out.pop(0)
            out.append((open_seg[0], first[1] + cfg.beta, open_seg[1], open_seg[2], first[4]))
        else:
            raise LoopError("inconsistent periodic occupation")
    return out


def decompose_config_to_loops(cfg: QuantumConfig) -> list:
    """Loops of ``cfg`` relative to the one-boson background, sorted by ``key``."""
    touching = {x: [] for x in range(cfg.n_sites)}
    for k, (_, x, y) in enumerate(cfg.events):
        touching[x].append(k)
        touching[y].append(k)
    raw = []
    for x in range(cfg.n_sites):
        for start, end, up, first, last in _site_segments(cfg, x, touching[x]):
            raw.append((x, start, end - start, up, first, last))
    # every event touches exactly one segment at each of its two sites
    parent = list(range(len(raw)))

    def find(u):
        while parent[u] != u:
            parent[u] = parent[parent[u]]
            u = parent[u]
        return u

    by_event = {}
    for idx, seg in enumerate(raw):
        for ev in (seg[4], seg[5]):
            if ev is not None:
                by_event.setdefault(ev, []).append(idx)
    for ev, idxs in by_event.items():
        if len(idxs) != 2:
            raise LoopError(f"event {ev} does not join two segments")
        parent[find(idxs[0])] = find(idxs[1])
    groups = {}
    for idx in range(len(raw)):
        groups.setdefault(find(idx), []).append(idx)
    loops = []
    for members in groups.values():
        events = sorted({ev for i in members for ev in raw[i][4:6] if ev is not None})
        local = {ev: k for k, ev in enumerate(events)}
        segs = []
        for i in members:
            x, start, length, up, first, last = raw[i]
            segs.append(
                Segment(x, start, length, up, None if first is None else local[first], None if last is None else local[last])
            )
        segs.sort(key=lambda s: (s.site, s.start))
        loops.append(Loop(tuple(segs), tuple(cfg.events[ev] for ev in events), cfg.beta))
    loops.sort(key=Loop.key)
    return loops


def compose_loops(loops, n_sites: int, beta) -> QuantumConfig:
    """Inverse of ``decompose_config_to_loops`` for a family of disjoint loops."""
    n = [1] * n_sites
    events = []
    for loop in loops:
        for s in loop.segments:
            if s.covers_zero(beta):
                n[s.site] += 1 if s.up else -1
        events.extend(loop.jumps)
    events.sort()
    return QuantumConfig(tuple(n), tuple(events), beta)


def _jump_factors(loop: Loop):
    """``sqrt(n_y(tau-) n_x(tau+))`` for each jump of the loop's own configuration."""
    opens_up = {s.first for s in loop.segments if s.up and s.first is not None}
    closes_up = {s.last for s in loop.segments if s.up and s.last is not None}
    return [math.sqrt((2 if k in closes_up else 1) * (2 if k in opens_up else 1)) for k in range(loop.j)]


def loop_weight(loop: Loop, params: ModelParams) -> float:
    """``t^j prod sqrt(n n) exp(-l0 mu - l2 (U - mu))``."""
    w = params.t**loop.j * math.prod(_jump_factors(loop))
    return w * math.exp(-float(loop.l0) * params.mu - float(loop.l2) * (params.U - params.mu))


def config_weight(cfg: QuantumConfig, params: ModelParams) -> float:
    """``exp(-int V) prod t sqrt(n_x(tau+) n_y(tau-))`` for a configuration."""
    U, mu = params.U, params.mu
    log_w = 0.0
    for duration, n in cfg.pieces():
        V = -mu * sum(n) + (0.5 * U * sum(v * (v - 1) for v in n) if any(v > 1 for v in n) else 0.0)
        log_w -= float(duration) * V
    amp = 1.0
    n = list(cfg.initial)
    for _, x, y in cfg.events:
        before_y = n[y]
        n[x] += 1
        n[y] -= 1
        amp *= params.t * math.sqrt(n[x] * before_y)
    return amp * math.exp(log_w)


def _return_path(lattice: LatticeSpec, start, goal, n_max: int):
    """Shortest list of valid jumps ``(x, y)`` leading from ``start`` to ``goal``."""
    prev = {start: None}
    queue = deque([start])
    while queue:
        n = queue.popleft()
        if n == goal:
            break
        for y in range(lattice.n_sites):
            if n[y] == 0:
                continue
            for x in lattice.neighbors(y):
                if n[x] < n_max:
                    m = list(n)
                    m[x] += 1
                    m[y] -= 1
                    m = tuple(m)
                    if m not in prev:
                        prev[m] = (n, (x, y))
                        queue.append(m)
    path = []
    n = goal
    while prev[n] is not None:
        n, hop = prev[n]
        path.append(hop)
    return path[::-1]


def random_config(lattice: LatticeSpec, beta, rng, n_random: int = 4, denominator: int = 997) -> QuantumConfig:
    """Random valid configuration with occupations in ``{0, 1, 2}``.

    ``n_random`` random valid jumps are followed by a shortest way back to the
    initial occupation. Times are distinct multiples of ``beta / denominator``
    as exact fractions when ``beta`` is a ``Fraction``.
    """
    initial = tuple(int(v) for v in rng.choice([0, 1, 1, 1, 2], size=lattice.n_sites))
    n = list(initial)
    hops = []
    for _ in range(n_random):
        options = [(x, y) for y in range(lattice.n_sites) if n[y] > 0 for x in lattice.neighbors(y) if n[x] < 2]
        if not options:
            break
        x, y = options[rng.integers(len(options))]
        n[x] += 1
        n[y] -= 1
        hops.append((x, y))
    hops += _return_path(lattice, tuple(n), initial, 2)
    if len(hops) >= denominator:
        raise ValueError("too many jumps for the time grid")
    ticks = sorted(rng.choice(np.arange(1, denominator), size=len(hops), replace=False).tolist())
    scale = Fraction(beta) / denominator if isinstance(beta, Fraction) else beta / denominator
    events = tuple((k * scale, x, y) for k, (x, y) in zip(ticks, hops))
    return QuantumConfig(initial, events, beta)
