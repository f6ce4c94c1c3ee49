"""Time-discretized transfer-matrix oracle for the configuration expansion.

Allowing jumps only at the grid times ``k * beta / M`` turns the sum over
quantum configurations of their weights into

    Tr[(exp(-dtau V) (1 + dtau t A))^M],

with ``A`` the hopping matrix carrying the ``sqrt(n n)`` factors. As
``dtau -> 0`` this tends to the grand trace with error ``O(dtau)``.
"""

from __future__ import annotations

from itertools import product

import numpy as np

from ..fock import build_basis, build_hamiltonian, log_grand_partition
from ..lattice import ModelParams
from .loops import QuantumConfig, config_weight


def _step(params: ModelParams, M: int):
    basis = build_basis(params)
    H = build_hamiltonian(params, basis)
    dtau = params.beta / M
    step = np.eye(basis.dim)
    np.add.at(step, (H.rows, H.cols), -dtau * H.amplitudes)
    return np.exp(-dtau * H.diagonal)[:, None] * step, basis


def transfer_log_trace(params: ModelParams, M: int) -> float:
    """``log Tr[(e^{-dtau V}(1 + dtau t A))^M]``, renormalized per step to avoid overflow."""
    if M < 1:
        raise ValueError("need at least one time slice")
    S, _ = _step(params, M)
    # repeated squaring with scale tracking
    log_scale = 0.0
    result = None
    base = S.copy()
    base_scale = 0.0
    m = M
    while m:
        if m & 1:
            result = base.copy() if result is None else result @ base
            log_scale += base_scale
            norm = np.abs(result).max()
            result /= norm
            log_scale += np.log(norm)
        m >>= 1
        if m:
            base = base @ base
            base_scale *= 2
            norm = np.abs(base).max()
            base /= norm
            base_scale += np.log(norm)
    return float(np.log(np.trace(result)) + log_scale)


def transfer_convergence(params: ModelParams, slices=(50, 100, 200, 400, 800)):
    """Errors ``|log trace_M - log Z|`` and the fitted order in ``dtau``."""
    exact = log_grand_partition(params)
    errs = [abs(transfer_log_trace(params, M) - exact) for M in slices]
    dt = [params.beta / M for M in slices]
    order = float(np.polyfit(np.log(dt), np.log(errs), 1)[0])
    return errs, order


def grid_config_sum(params: ModelParams, M: int) -> float:
    """Sum of ``config_weight`` over every configuration with jumps on the grid.

    Brute force, for tiny boxes and ``M``: each slice holds at most one jump,
    at time ``(k + 1/2) dtau`` and weighted by ``dtau``. Conjugating each slice
    by ``e^{-dtau V / 2}`` shows this equals the transfer trace exactly.
    """
    lat = params.lattice
    dtau = params.beta / M
    hops = [(x, y) for y in range(lat.n_sites) for x in lat.neighbors(y)]
    total = 0.0
    for initial in product(range(params.n_max + 1), repeat=lat.n_sites):
        for choice in product([None] + hops, repeat=M):
            n = list(initial)
            events = []
            ok = True
            for k, hop in enumerate(choice):
                if hop is None:
                    continue
                x, y = hop
                if n[y] == 0 or n[x] == params.n_max:
                    ok = False
                    break
                n[x] += 1
                n[y] -= 1
                events.append(((k + 0.5) * dtau, x, y))
            if not ok or tuple(n) != initial:
                continue
            cfg = QuantumConfig(initial, tuple(events), params.beta)
            total += config_weight(cfg, params) * dtau ** len(events)
    return total
