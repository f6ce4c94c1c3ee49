"""Closed-form bounds: loop and trajectory KP functionals, the loop lemma, the
hopping-matrix row sum, and the variational density bounds.

Powers of two are exact integers and enter floating point only in the final
products, so every constant is the published one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import LatticeSpec, ModelParams
from .reports import BoundReport

P9, P10, P11, P12, P13, P14 = (2**k for k in range(9, 15))


def _exp(x: float) -> float:
    return math.exp(x) if x < 700 else math.inf


def _require_finite_U(U):
    if not (U > 0 and math.isfinite(U)):
        raise ValueError(f"needs finite U > 0, got {U}")


def kp_loop_functional(j, ell, params: ModelParams) -> float:
    """``a(gamma) = 2^14 d t^2/U^2 j + 2^12 d t^2/U ell``."""
    _require_finite_U(params.U)
    t, U, d = params.t, params.U, params.d
    return P14 * d * t * t / (U * U) * j + P12 * d * t * t / U * ell


def theorem2_condition(t: float, mu: float, U: float, d: int, const: float | None = None) -> bool:
    """``0 < mu < U/4`` and ``t < mu/(2d) - const t^2/U`` with ``const = 2^11 d`` by default."""
    if const is None:
        const = P11 * d
    if not (0 < mu < U / 4):
        return False
    return t < mu / (2 * d) - const * t * t / U


def _hyp(params: ModelParams) -> bool:
    return theorem2_condition(params.t, params.mu, params.U, params.d)


def hopping_series_closed_form(t: float, U: float, d: int) -> float:
    """``2^10 d t^2/U / (1 - (2^6 d t/U)^2)``; refuses a ratio ``>= 1``."""
    r = 2**6 * d * t / U
    if r >= 1:
        raise ValueError(f"geometric ratio 2^6 d t/U = {r} is not below 1")
    return P10 * d * t * t / U / (1 - r * r)


def hopping_series_partial_sums(t: float, U: float, d: int, n_terms: int) -> list[float]:
    """Partial sums of ``sum_n 2 * 2^{2n} (2d)^{2n-1} (4t)^{2n} (4/U)^{2n-1}``."""
    # consecutive terms differ by (2^6 d t/U)^2; separate powers would under/overflow
    r2 = (2**6 * d * t / U) ** 2
    term = 2 * 4 * (2 * d) * (4 * t) ** 2 * (4 / U)
    out, total = [], 0.0
    for _ in range(n_terms):
        total += term
        out.append(total)
        term *= r2
    return out


def small_hopping_check(params: ModelParams) -> BoundReport:
    t, U, d = params.t, params.U, params.d
    return BoundReport("small_hopping_factor", math.exp(P14 * d * t * t / (U * U)), 2.0, True)


def hopping_series_check(params: ModelParams, tol: float = 1e-10) -> BoundReport:
    """Closed form against its own partial sums, reported as ``|difference| <= tol``."""
    t, U, d = params.t, params.U, params.d
    try:
        closed = hopping_series_closed_form(t, U, d)
    except ValueError:
        return BoundReport("hopping_series", math.inf, tol, False)
    r2 = (2**6 * d * t / U) ** 2
    n = 1
    if r2 > 0:
        # enough terms for the geometric remainder to drop below tol / 10
        n = max(1, math.ceil(math.log(tol / 10 * (1 - r2) / max(closed, 1e-300)) / math.log(r2)) + 1)
    partial = hopping_series_partial_sums(t, U, d, min(n, 100000))[-1]
    return BoundReport("hopping_series", abs(partial - closed), tol, True)


def lemma32_bounds(params: ModelParams) -> list[BoundReport]:
    """The four loop-lemma estimates.

    Each right side is the lemma's formula. Each left side is the value of the
    chain of estimates used to prove it (the geometric series, or the
    hopping-matrix exponential), so ``satisfied`` says whether that chain
    really closes at these parameters.
    """
    _require_finite_U(params.U)
    t, U, mu, beta, d = params.t, params.U, params.mu, params.beta, params.d
    hyp = _hyp(params)
    r = 2**6 * d * t / U
    series_a = hopping_series_closed_form(t, U, d) if r < 1 else math.inf
    jump_free_b = _exp(-beta * (U - mu - P12 * d * t * t / U))
    series_b = series_a * 4 / U
    rhs_b = jump_free_b + P13 * d * t * t / (U * U)
    sigma = sigma_rowsum_rhs(t, U, d)
    chain_d = _exp(-beta * (mu - P12 * d * t * t / U) + beta * sigma)
    rhs_d = _exp(-beta * (mu - 2 * d * t - P12 * d * d * t * t / U))
    one_jump = 2 * d * t * math.exp(P14 * d * t * t / (U * U))
    return [
        BoundReport("lemma32a", series_a, P11 * d * t * t / U, hyp),
        BoundReport("lemma32b", jump_free_b + series_b, rhs_b, hyp),
        BoundReport("lemma32c", one_jump * chain_d, 4 * d * t * rhs_d, hyp),
        BoundReport("lemma32d", chain_d, rhs_d, hyp),
    ]


def sigma_rowsum_rhs(t: float, U: float, d: int) -> float:
    """``2dt e^{2^14 d t^2/U^2} + 2^9 d^2 t^2/U``."""
    return 2 * d * t * math.exp(P14 * d * t * t / (U * U)) + P9 * d * d * t * t / U


def sigma_rowsum_bound(params: ModelParams, lhs: float | None = None, max_jumps: int = 6, radius: int = 3) -> BoundReport:
    """Row sum of the truncated hopping matrix against its closed-form bound."""
    _require_finite_U(params.U)
    if lhs is None:
        from .worldline.loopgas import sigma_rowsum

        lhs = sigma_rowsum(params, max_jumps=max_jumps, radius=radius)
    return BoundReport("sigma_rowsum", lhs, sigma_rowsum_rhs(params.t, params.U, params.d), _hyp(params))


def kp_loop_report(params: ModelParams, j: int, ell: float) -> BoundReport:
    """KP sum for one loop, bounded by ``ell sup nu_z + j sup L_z``, against ``a(gamma)``."""
    a_c, b_rep, c_rep, d_rep = lemma32_bounds(params)
    lhs = ell * (a_c.rhs + c_rep.rhs) + j * (b_rep.rhs + d_rep.rhs)
    return BoundReport("loop_kp", lhs, kp_loop_functional(j, ell, params), _hyp(params))


# ------------------------------------------------------------- trajectories


def prop21_inequality_check(t, mu, d, a, b, beta, j, ell) -> BoundReport:
    """``(j + 2dt e^a beta ell) sum_{l'} e^{beta l' (mu + 2dt e^a + b)} <= a j + beta b ell``."""
    rate = mu + 2 * d * t * math.exp(a) + b
    hyp = rate < 0
    if hyp:
        q = math.exp(beta * rate)
        series = q / (1 - q) if q < 1 else math.inf
    else:
        series = math.inf
    prefactor = j + 2 * d * t * math.exp(a) * beta * ell
    lhs = 0.0 if prefactor == 0 else prefactor * series
    return BoundReport("prop21", lhs, a * j + beta * b * ell, hyp)


def walk_sum_check(t: float, a: float, d: int, time: float, max_jumps: int, x_shift=None) -> BoundReport:
    """Truncated ``sum_m (t e^a time)^m / m! * #walks(x -> y, m)`` against ``e^{2d t e^a time}``.

    Walks live on an open box large enough never to feel the boundary.
    """
    side = 2 * max_jumps + 1
    lat = LatticeSpec(d, side, "open")
    centre = lat.index([max_jumps] * d)
    target = centre if x_shift is None else lat.index([max_jumps + s for s in x_shift])
    A = lat.adjacency()
    v = np.zeros(lat.n_sites)
    v[centre] = 1.0
    h = t * math.exp(a) * time
    total = 0.0
    for m in range(max_jumps + 1):
        total += h**m / math.factorial(m) * v[target]
        v = A @ v
    return BoundReport("walk_sum", total, math.exp(2 * d * h), True)


# -------------------------------------------------------- density bounds


@dataclass(frozen=True)
class ParticleDensityBound:
    t: float
    mu: float
    d: int
    a: float
    c: float
    rho_star: float
    hypotheses_ok: bool

    def b(self, rho):
        """``(-mu - 2dt) rho + pi^2 d t rho^{1 + 2/d}``."""
        rho = np.asarray(rho, dtype=float)
        return (-self.mu - 2 * self.d * self.t) * rho + math.pi**2 * self.d * self.t * rho ** (1 + 2 / self.d)


def density_bounds_rho0(t: float, mu: float, d: int) -> ParticleDensityBound:
    """Variational bound ``b(rho)``, its minimum ``c`` and the density floor ``a``."""
    slack = mu + 2 * d * t
    if not (t > 0 and slack > 0):
        return ParticleDensityBound(t, mu, d, 0.0, 0.0, 0.0, False)
    rho_star = (slack / (math.pi**2 * t * (d + 2))) ** (d / 2)
    a = 2 / (d + 2) * rho_star
    c = -2 / (math.pi**2 * t) ** (d / 2) * (slack / (d + 2)) ** (1 + d / 2)
    return ParticleDensityBound(t, mu, d, a, c, rho_star, True)


def theorem3b_constant(d: int) -> float:
    """``C = (d+2)/(2d) (2^10 d pi^d)^{2/(d+2)}``."""
    return (d + 2) / (2 * d) * (P10 * d * math.pi**d) ** (2 / (d + 2))


@dataclass(frozen=True)
class HoleDensityBound:
    t: float
    mu: float
    U: float
    d: int
    b_tilde_min: float
    numerator: float
    denominator: float
    hole_bound: float  # 1 - rho >= hole_bound
    numerator_positive: bool
    text_condition: bool  # t > mu/2d + C t (t/U)^{2/(d+2)}
    hypotheses_ok: bool

    def b_tilde(self, rho):
        """``-mu + (mu - 2dt)(1 - rho) + pi^2 d t (1 - rho)^{1 + 2/d}``."""
        h = 1 - np.asarray(rho, dtype=float)
        return -self.mu + (self.mu - 2 * self.d * self.t) * h + math.pi**2 * self.d * self.t * h ** (1 + 2 / self.d)

    def lower_line(self, rho):
        """``-mu - (2dt - mu + 2^10 d^2 t^2/U)(1 - rho) - 2^11 d t^2/U``."""
        h = 1 - np.asarray(rho, dtype=float)
        return -self.mu - self.denominator * h - P11 * self.d * self.t**2 / self.U


def density_bounds_rho1(t: float, mu: float, U: float, d: int) -> HoleDensityBound:
    """Hole-side bounds around the unit-density phase."""
    _require_finite_U(U)
    slack = 2 * d * t - mu
    hyp = t > 0 and slack > 0
    gain = 2 / (math.pi**2 * t) ** (d / 2) * (slack / (d + 2)) ** (1 + d / 2) if hyp else 0.0
    numerator = gain - P11 * d * t * t / U
    denominator = slack + P10 * d * d * t * t / U
    hole = numerator / denominator if hyp and denominator > 0 else 0.0
    text = t > mu / (2 * d) + theorem3b_constant(d) * t * (t / U) ** (2 / (d + 2))
    return HoleDensityBound(t, mu, U, d, -mu - gain, numerator, denominator, hole, hyp and numerator > 0, text, hyp)


def variational_check(params: ModelParams, N: int) -> BoundReport:
    """Open-box ground energy per site against ``b(N/|Lambda|)``."""
    from .fock import ground_energy_density

    rho = N / params.lattice.n_sites
    e0 = ground_energy_density(params, N)
    bound = density_bounds_rho0(params.t, params.mu, params.d)
    b = float(bound.b(rho)) if params.t > 0 else -params.mu * rho
    return BoundReport(f"variational_b_rho={rho:.6g}", e0, b, True)
