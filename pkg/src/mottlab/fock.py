"""Exact diagonalization of the capped Bose-Hubbard model on small boxes.

This is the brute-force oracle that the expansions and bounds are checked
against. States are occupation vectors enumerated lexicographically; the
Hamiltonian ``H - mu N`` conserves particle number, so spectra are computed
sector by sector and combined with a max-shifted log-sum-exp.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .lattice import LatticeSpec, ModelParams

DENSE_THRESHOLD = 4096
RESIDUAL_TOL = 1e-10


class SolverError(RuntimeError):
    """Eigen-solver failed to reach the residual tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class FockBasis:
    states: np.ndarray  # (dim, n_sites) occupation vectors, lexicographic
    n_max: int
    N: int | None  # None for the grand-canonical basis

    def __len__(self):
        return len(self.states)

    @property
    def dim(self) -> int:
        return len(self.states)

    def index(self) -> dict[tuple[int, ...], int]:
        return {tuple(int(v) for v in s): k for k, s in enumerate(self.states)}


@dataclass
class SparseHamiltonian:
    basis: FockBasis
    diagonal: np.ndarray
    rows: np.ndarray
    cols: np.ndarray
    amplitudes: np.ndarray

    def offdiag(self):
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.amplitudes.tolist()))

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        n = self.basis.dim
        H = scipy.sparse.coo_matrix((self.amplitudes, (self.rows, self.cols)), shape=(n, n))
        return (H + scipy.sparse.diags(self.diagonal)).tocsr()

    def to_dense(self) -> np.ndarray:
        H = np.diag(self.diagonal).astype(float)
        np.add.at(H, (self.rows, self.cols), self.amplitudes)
        return H


@lru_cache(maxsize=64)
def _enumerate(n_sites: int, n_max: int, N: int | None) -> np.ndarray:
    if N is None:
        states = list(product(range(n_max + 1), repeat=n_sites))
    else:
        states = [s for s in product(range(n_max + 1), repeat=n_sites) if sum(s) == N]
    return np.array(states, dtype=np.int64).reshape(len(states), n_sites)


def build_basis(params: ModelParams, N: int | None = None) -> FockBasis:
    """Occupation basis of the grand Fock space (``N=None``) or of one sector."""
    n_sites = params.lattice.n_sites
    if N is not None and not 0 <= N <= params.n_max * n_sites:
        raise ValueError(f"sector N={N} outside [0, {params.n_max * n_sites}]")
    return FockBasis(_enumerate(n_sites, params.n_max, N), params.n_max, N)


def diagonal_energy(params: ModelParams, n) -> float:
    """``V(n) = U/2 sum n(n-1) - mu sum n`` for one occupation vector."""
    n = np.asarray(n)
    e = -params.mu * float(n.sum())
    if params.n_max >= 2 and params.U:
        e += 0.5 * params.U * float((n * (n - 1)).sum())
    return e


def build_hamiltonian(params: ModelParams, basis: FockBasis) -> SparseHamiltonian:
    """Matrix of ``H - mu N`` on ``basis``.

    A hop from ``y`` to ``x`` has amplitude ``-t sqrt(n_x + 1) sqrt(n_y)``
    evaluated on the source configuration; both directions of every bond are
    generated, which makes the stored off-diagonal part symmetric.
    """
    states = basis.states
    lookup = basis.index()
    lat = params.lattice
    n = states
    diag = -params.mu * n.sum(axis=1).astype(float)
    if params.n_max >= 2 and params.U:
        diag = diag + 0.5 * params.U * (n * (n - 1)).sum(axis=1)

    rows, cols, amps = [], [], []
    if params.t:
        for col, s in enumerate(states):
            for y in range(lat.n_sites):
                if s[y] == 0:
                    continue
                for x in lat.neighbors(y):
                    if s[x] >= params.n_max:
                        continue
                    target = list(int(v) for v in s)
                    target[x] += 1
                    target[y] -= 1
                    row = lookup[tuple(target)]
                    rows.append(row)
                    cols.append(col)
                    amps.append(-params.t * math.sqrt((s[x] + 1) * s[y]))
    return SparseHamiltonian(
        basis,
        np.asarray(diag, dtype=float),
        np.asarray(rows, dtype=np.int64),
        np.asarray(cols, dtype=np.int64),
        np.asarray(amps, dtype=float),
    )


@dataclass(frozen=True)
class SectorSpectrum:
    N: int
    energies: np.ndarray
    residual: float


def sector_spectrum(params: ModelParams, N: int) -> SectorSpectrum:
    """Full spectrum of the fixed-``N`` block by dense diagonalization."""
    H = build_hamiltonian(params, build_basis(params, N)).to_dense()
    w, v = scipy.linalg.eigh(H)
    residual = float(np.max(np.abs(H @ v - v * w))) if len(w) else 0.0
    if residual > RESIDUAL_TOL * max(1.0, float(np.max(np.abs(w)))):
        raise SolverError(f"dense eigh inaccurate in sector N={N}", residual)
    return SectorSpectrum(N, w, residual)


def _spectra(params: ModelParams) -> list[SectorSpectrum]:
    n_sites = params.lattice.n_sites
    return [sector_spectrum(params, N) for N in range(params.n_max * n_sites + 1)]


@dataclass(frozen=True)
class Thermo:
    log_Z: float
    mean_N: float
    residual: float


def thermodynamics(params: ModelParams) -> Thermo:
    """``log Z`` and ``<N>`` from the exact spectrum, sector by sector.

    ``<N>`` is the Boltzmann average of the number operator over eigenvectors;
    since every eigenvector of a fixed-``N`` block is a number eigenstate, this
    is a weighted sum of sector labels, with no differentiation involved.
    """
    spectra = _spectra(params)
    exps = np.concatenate([-params.beta * s.energies for s in spectra])
    Ns = np.concatenate([np.full(len(s.energies), s.N, dtype=float) for s in spectra])
    shift = exps.max()
    boltz = np.exp(exps - shift)
    # sorted accumulation keeps the reduction order fixed
    order = np.argsort(boltz, kind="stable")
    total = math.fsum(boltz[order])
    mean_N = math.fsum((boltz * Ns)[order]) / total
    return Thermo(shift + math.log(total), mean_N, max(s.residual for s in spectra))


def log_grand_partition(params: ModelParams) -> float:
    return thermodynamics(params).log_Z


def grand_partition(params: ModelParams) -> float:
    """``Tr exp(-beta (H - mu N))`` over the capped Fock space."""
    return math.exp(log_grand_partition(params))


def pressure_ed(params: ModelParams) -> float:
    """Finite-volume pressure ``log Z / |Lambda|``."""
    return log_grand_partition(params) / params.lattice.n_sites


def density_ed(params: ModelParams) -> float:
    """``<N> / |Lambda|`` at finite volume."""
    return thermodynamics(params).mean_N / params.lattice.n_sites


def ground_energy(params: ModelParams, N: int) -> tuple[float, float]:
    """Lowest eigenvalue of ``H - mu N`` in sector ``N`` and its residual.

    Dense below ``DENSE_THRESHOLD``, Lanczos (``eigsh``) above it.
    """
    basis = build_basis(params, N)
    if basis.dim == 0:
        raise ValueError(f"sector N={N} is empty")
    ham = build_hamiltonian(params, basis)
    if basis.dim <= DENSE_THRESHOLD:
        H = ham.to_dense()
        w, v = scipy.linalg.eigh(H, subset_by_index=[0, 0])
        residual = float(np.linalg.norm(H @ v[:, 0] - w[0] * v[:, 0]))
        return float(w[0]), residual
    H = ham.to_sparse()
    w, v = scipy.sparse.linalg.eigsh(H, k=1, which="SA", tol=RESIDUAL_TOL)
    residual = float(np.linalg.norm(H @ v[:, 0] - w[0] * v[:, 0]))
    if residual > 10 * RESIDUAL_TOL * max(1.0, abs(w[0])):
        raise SolverError(f"eigsh did not converge in sector N={N}", residual)
    return float(w[0]), residual


def ground_energy_density(params: ModelParams, N: int) -> float:
    """``e_0(N/|Lambda|)``: ground energy of ``H - mu N`` per site in sector ``N``."""
    return ground_energy(params, N)[0] / params.lattice.n_sites


def dirichlet_kinetic_min(ell: int, d: int, t: float) -> float:
    """Lowest one-particle hopping energy in an ``ell^d`` box with open walls."""
    if ell < 1:
        raise ValueError("box side must be >= 1")
    return -2 * d * t * math.cos(math.pi / (ell + 1))


def dirichlet_kinetic_min_numeric(ell: int, d: int, t: float) -> float:
    """Same quantity from diagonalizing the open-boundary hopping matrix."""
    A = LatticeSpec(d, ell, "open").adjacency()
    return float(np.linalg.eigvalsh(-t * A)[0])


def cap_sensitivity(params: ModelParams, caps=(1, 2, 3)) -> dict[int, float]:
    """Density for several occupation caps at otherwise fixed parameters."""
    out = {}
    for cap in caps:
        if cap == 1 or math.isfinite(params.U):
            out[cap] = density_ed(params.replace(n_max=cap))
    return out


def ed_record(params: ModelParams, quantity: str, value: float, residual: float) -> dict:
    """JSON-ready record ``{params, quantity, value, solver_residual}``."""
    lat = params.lattice
    return {
        "params": {
            "d": lat.d,
            "L": lat.L,
            "boundary": lat.boundary,
            "t": params.t,
            "U": "inf" if math.isinf(params.U) else params.U,
            "mu": params.mu,
            "beta": params.beta,
            "n_max": params.n_max,
        },
        "quantity": quantity,
        "value": value,
        "solver_residual": residual,
    }
