"""Critical lines and proven-region classification of the (mu, t) plane.

Finite ``U`` means the generalized hard core (at most two bosons per site),
``U = inf`` the hard-core gas. Each theorem is applied as a predicate:

* ``theorem1``: ``mu < -2dt`` gives the empty lobe, ``rho = 0``;
* ``theorem1_mirror`` (hard core only): ``mu > 2dt`` gives ``rho = 1`` by
  particle-hole symmetry;
* ``theorem2`` (finite ``U``): the Mott condition around ``rho = 1``;
* ``theorem3a``: ``t > -mu/2d``, density bounded below, so not ``rho = 0``;
* ``theorem3b``: ``t > mu/2d + C t (t/U)^{2/(d+2)}`` (``t > mu/2d`` for the
  hard core), density bounded away from 1, so not ``rho >= 1``.

A point is non-Mott proven when the lobe it borders (``rho = 0`` for
``mu < 0``, ``rho = 1`` for ``0 <= mu < U``, ``rho = 2`` beyond) is
excluded. The label says which density bound did it: ``Lower`` for the
lower bound of ``theorem3a``, ``Upper`` for the upper bound of
``theorem3b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

from .bounds import theorem2_condition, theorem3b_constant

MOTT = "MottProven"
LOWER = "NonMottProvenLower"
UPPER = "NonMottProvenUpper"
UNRESOLVED = "Unresolved"

# lobe each Mott predicate proves, and lobes each non-Mott predicate excludes
_PROVES = {"theorem1": 0, "theorem1_mirror": 1, "theorem2": 1}
_EXCLUDES = {"theorem3a": {0}, "theorem3b": {1, 2}}


@dataclass(frozen=True)
class PhasePoint:
    t: float
    mu: float
    U: float
    d: int

    def __post_init__(self):
        if not (self.t > 0 and math.isfinite(self.t)):
            raise ValueError(f"t must be finite and > 0, got {self.t}")
        if not self.U > 0:
            raise ValueError(f"U must be > 0 or inf, got {self.U}")
        if not math.isfinite(self.mu):
            raise ValueError("mu must be finite")
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("d must be a positive integer")

    @property
    def hard_core(self) -> bool:
        return math.isinf(self.U)


@dataclass(frozen=True)
class PhaseVerdict:
    label: str
    k: int | None = None  # density of the proven Mott lobe
    witnesses: tuple = field(default_factory=tuple)

    def __str__(self):
        return f"{MOTT}({self.k})" if self.label == MOTT else self.label

    @property
    def contradictory(self) -> bool:
        """A Mott witness and a non-Mott witness fired for the same lobe."""
        proved = {_PROVES[w] for w in self.witnesses if w in _PROVES}
        excluded = set().union(*(_EXCLUDES[w] for w in self.witnesses if w in _EXCLUDES))
        return bool(proved & excluded)


# ------------------------------------------------------------ critical lines


def tc_hardcore(mu: float, d: int) -> float:
    """``|mu| / 2d``."""
    return abs(mu) / (2 * d)


def tc_approx(mu: float, U: float, d: int) -> float:
    """Piecewise-linear approximate critical hopping.

    ``|mu|/2d`` below ``U/2`` and ``|mu - kU| / (2d(k+1))`` on
    ``((k - 1/2)U, (k + 1/2)U)``. On a branch edge the smaller neighbour wins.
    """
    if math.isinf(U):
        return tc_hardcore(mu, d)
    if mu < U / 2:
        return abs(mu) / (2 * d)
    x = mu / U
    k = math.floor(x + 0.5)
    if x + 0.5 == k:
        # edge between branch k - 1 and branch k
        left = abs(mu) / (2 * d) if k == 1 else abs(mu - (k - 1) * U) / (2 * d * k)
        return min(left, abs(mu - k * U) / (2 * d * (k + 1)))
    return abs(mu - k * U) / (2 * d * (k + 1))


# ------------------------------------------------------------ classification


def _candidate_lobe(p: PhasePoint) -> int:
    if p.mu < 0:
        return 0
    if p.hard_core or p.mu < p.U:
        return 1
    return 2


def _witnesses(p: PhasePoint) -> list:
    t, mu, U, d = p.t, p.mu, p.U, p.d
    out = []
    if mu < -2 * d * t:
        out.append("theorem1")
    if p.hard_core:
        if mu > 2 * d * t:
            out.append("theorem1_mirror")
    elif theorem2_condition(t, mu, U, d):
        out.append("theorem2")
    if t > -mu / (2 * d):
        out.append("theorem3a")
    if p.hard_core:
        if t > mu / (2 * d):
            out.append("theorem3b")
    elif t > mu / (2 * d) + theorem3b_constant(d) * t * (t / U) ** (2 / (d + 2)):
        out.append("theorem3b")
    return out


def classify(point: PhasePoint) -> PhaseVerdict:
    w = _witnesses(point)
    mott = [name for name in w if name in _PROVES]
    if mott:
        return PhaseVerdict(MOTT, _PROVES[mott[0]], tuple(w))
    k = _candidate_lobe(point)
    for name, label in (("theorem3a", LOWER), ("theorem3b", UPPER)):
        if name in w and k in _EXCLUDES[name]:
            return PhaseVerdict(label, None, tuple(w))
    return PhaseVerdict(UNRESOLVED, None, tuple(w))


# ------------------------------------------------------------------ scanning


@dataclass
class PhaseScan:
    mu: np.ndarray
    t: np.ndarray
    U: float
    d: int
    rows: list  # (PhasePoint, PhaseVerdict), mu-major then t
    boundaries: dict  # (left label, right label) -> [(mu, t), ...]

    def labels(self) -> np.ndarray:
        """``labels[i, j]`` for ``mu[i]``, ``t[j]``."""
        out = np.empty((len(self.mu), len(self.t)), dtype=object)
        for n, (_, v) in enumerate(self.rows):
            out[n // len(self.t), n % len(self.t)] = str(v)
        return out

    def to_csv(self) -> str:
        lines = ["mu,t,U,d,label,witnesses"]
        for p, v in self.rows:
            lines.append(f"{p.mu!r},{p.t!r},{p.U!r},{p.d},{v},{';'.join(v.witnesses)}")
        return "\n".join(lines) + "\n"


def _axis(lo: float, hi: float, n: int, open_at_zero: bool = False) -> np.ndarray:
    if n <= 0 or hi < lo:
        return np.array([])
    if open_at_zero and lo <= 0:
        return np.linspace(0.0, hi, n + 1)[1:]
    return np.linspace(lo, hi, n)


def scan_grid(mu_range, t_range, resolution, U: float = math.inf, d: int = 1) -> PhaseScan:
    """Classify every point of a ``mu x t`` grid.

    ``resolution`` is ``n`` or ``(n_mu, n_t)``. A ``t`` range starting at 0
    is open there (the grid starts one step above 0). Boundary points are
    the midpoints between ``mu`` neighbours whose labels differ.
    """
    n_mu, n_t = (resolution, resolution) if isinstance(resolution, int) else resolution
    mus = _axis(mu_range[0], mu_range[1], n_mu)
    ts = _axis(t_range[0], t_range[1], n_t, open_at_zero=True)
    rows = []
    for mu in mus:
        for t in ts:
            p = PhasePoint(float(t), float(mu), U, d)
            rows.append((p, classify(p)))
    boundaries: dict = {}
    for j, t in enumerate(ts):
        for i in range(len(mus) - 1):
            a, b = str(rows[i * len(ts) + j][1]), str(rows[(i + 1) * len(ts) + j][1])
            if a != b:
                boundaries.setdefault((a, b), []).append((0.5 * (mus[i] + mus[i + 1]), float(t)))
    return PhaseScan(mus, ts, U, d, rows, boundaries)


# ----------------------------------------------------------------------- SVG

_COLOURS = {
    "MottProven(0)": "#9ecae1",
    "MottProven(1)": "#3182bd",
    LOWER: "#fdae6b",
    UPPER: "#e6550d",
    UNRESOLVED: "#d9d9d9",
}


def scan_to_svg(scan: PhaseScan, width: int = 640, height: int = 420) -> str:
    """Self-contained SVG: verdict regions, boundaries and the approximate critical line."""
    ml, mr, mt, mb = 60, 170, 20, 50
    pw, ph = width - ml - mr, height - mt - mb
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if len(scan.mu) and len(scan.t):
        mu0, mu1 = float(scan.mu[0]), float(scan.mu[-1])
        t1 = float(scan.t[-1])
        dmu = (mu1 - mu0) / max(len(scan.mu) - 1, 1) or 1.0
        dt = t1 / len(scan.t)
        span = (mu1 - mu0 + dmu) or 1.0

        def X(mu):
            return ml + (mu - mu0 + dmu / 2) / span * pw

        def Y(t):
            return mt + ph - t / (t1 or 1.0) * ph

        labels = scan.labels()
        for j, t in enumerate(scan.t):
            i = 0
            while i < len(scan.mu):
                k = i
                while k + 1 < len(scan.mu) and labels[k + 1, j] == labels[i, j]:
                    k += 1
                x0, x1 = X(scan.mu[i] - dmu / 2), X(scan.mu[k] + dmu / 2)
                parts.append(
                    f'<rect x="{x0:.2f}" y="{Y(t):.2f}" width="{x1 - x0:.2f}" height="{Y(t - dt) - Y(t):.2f}" '
                    f'fill="{_COLOURS.get(labels[i, j], "#999999")}" stroke="none"/>'
                )
                i = k + 1
        for pts in scan.boundaries.values():
            path = " ".join(f"{X(m):.2f},{Y(t):.2f}" for m, t in sorted(pts, key=lambda q: q[1]))
            parts.append(f'<polyline points="{path}" fill="none" stroke="black" stroke-width="1"/>')
        approx = " ".join(
            f"{X(m):.2f},{Y(min(tc_approx(float(m), scan.U, scan.d), t1)):.2f}" for m in np.linspace(mu0, mu1, 400)
        )
        parts.append(f'<polyline points="{approx}" fill="none" stroke="#444" stroke-width="0.7" stroke-dasharray="3,2"/>')
        for m in np.linspace(mu0, mu1, 5):
            parts.append(f'<text x="{X(m):.1f}" y="{mt + ph + 16}" text-anchor="middle">{m:.3g}</text>')
        for t in np.linspace(0, t1, 5):
            parts.append(f'<text x="{ml - 6}" y="{Y(t) + 4:.1f}" text-anchor="end">{t:.3g}</text>')
    parts.append(f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    parts.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">μ</text>')
    parts.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle">t</text>')
    model = "hard core" if math.isinf(scan.U) else f"U = {scan.U:g}"
    parts.append(f'<text x="{ml + pw + 12}" y="{mt + 12}">{escape(f"d = {scan.d}, {model}")}</text>')
    for n, (name, colour) in enumerate(_COLOURS.items()):
        y = mt + 32 + 20 * n
        parts.append(f'<rect x="{ml + pw + 12}" y="{y - 10}" width="12" height="12" fill="{colour}"/>')
        parts.append(f'<text x="{ml + pw + 30}" y="{y}">{escape(name)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
