import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mottlab import HARD_CORE, LatticeSpec, ModelParams
from mottlab import fock
from conftest import chain


def test_basis_sizes():
    assert fock.build_basis(chain(1)).dim == 3
    assert fock.build_basis(chain(2, n_max=1, U=HARD_CORE)).dim == 4
    # compositions of 4 into 4 parts each <= 2, counted by brute force
    brute = sum(1 for c in product(range(5), repeat=4) if sum(c) == 4 and max(c) <= 2)
    assert brute == 19
    assert fock.build_basis(chain(4), N=4).dim == brute


def test_basis_lexicographic_and_unique():
    b = fock.build_basis(chain(3))
    rows = [tuple(s) for s in b.states]
    assert rows == sorted(rows)
    assert len(set(rows)) == len(rows)


def test_sector_out_of_range():
    with pytest.raises(ValueError):
        fock.build_basis(chain(2), N=5)


def test_invalid_params():
    with pytest.raises(ValueError):
        chain(2, t=-1.0)
    with pytest.raises(ValueError):
        chain(2, beta=0.0)
    with pytest.raises(ValueError):
        chain(2, U=HARD_CORE, n_max=2)


def test_single_site_diagonal():
    p = chain(1, mu=0.3, U=1.7)
    H = fock.build_hamiltonian(p, fock.build_basis(p)).to_dense()
    assert np.allclose(np.sort(np.linalg.eigvalsh(H)), np.sort([0, -0.3, 1.7 - 0.6]))


def test_two_site_open_hard_core_spectrum():
    p = chain(2, "open", n_max=1, U=HARD_CORE, t=0.4, mu=0.25)
    H = fock.build_hamiltonian(p, fock.build_basis(p)).to_dense()
    expected = [0, -0.25 - 0.4, -0.25 + 0.4, -0.5]
    assert np.allclose(np.linalg.eigvalsh(H), np.sort(expected), atol=1e-13)


def test_zero_hopping_is_diagonal():
    p = chain(3, t=0.0)
    ham = fock.build_hamiltonian(p, fock.build_basis(p))
    assert len(ham.amplitudes) == 0


def test_hopping_amplitude_and_hermiticity():
    p = chain(3, t=0.3)
    basis = fock.build_basis(p)
    ham = fock.build_hamiltonian(p, basis)
    entries = {(r, c): a for r, c, a in ham.offdiag()}
    for (r, c), a in entries.items():
        assert entries[(c, r)] == pytest.approx(a, abs=0)
        src, dst = basis.states[c], basis.states[r]
        diff = dst - src
        x, y = int(np.argmax(diff)), int(np.argmin(diff))
        assert a == pytest.approx(-0.3 * math.sqrt((src[x] + 1) * src[y]))
        # number conservation: every hop moves exactly one boson
        assert dst.sum() == src.sum()


def test_single_site_partition_and_density(rng):
    for _ in range(10):
        mu, U, beta = rng.uniform(-1, 1), rng.uniform(0, 2), rng.uniform(0.1, 10)
        p = chain(1, mu=mu, U=U, beta=beta)
        Z = 1 + math.exp(beta * mu) + math.exp(beta * (2 * mu - U))
        assert fock.grand_partition(p) == pytest.approx(Z, rel=1e-12)
        rho = (math.exp(beta * mu) + 2 * math.exp(beta * (2 * mu - U))) / Z
        assert fock.density_ed(p) == pytest.approx(rho, rel=1e-12)


def test_two_site_partition():
    p = chain(2, "open", n_max=1, U=HARD_CORE, t=0.3, mu=-0.2, beta=3.0)
    b = 3.0
    Z = 1 + 2 * math.exp(b * -0.2) * math.cosh(b * 0.3) + math.exp(2 * b * -0.2)
    assert fock.grand_partition(p) == pytest.approx(Z, rel=1e-12)


def test_infinite_temperature_limit():
    p = chain(3, beta=1e-9)
    assert fock.grand_partition(p) == pytest.approx(27, rel=1e-6)


def test_empty_state_dominates():
    assert fock.density_ed(chain(3, mu=-30.0, beta=5.0)) < 1e-30


def test_density_matches_pressure_derivative():
    p = chain(3, t=0.2, mu=0.15, beta=2.0)
    h = 1e-4
    dp = (fock.pressure_ed(p.replace(mu=p.mu + h)) - fock.pressure_ed(p.replace(mu=p.mu - h))) / (2 * h)
    assert dp / p.beta == pytest.approx(fock.density_ed(p), abs=1e-7)


def test_partition_at_least_one():
    assert fock.grand_partition(chain(3, mu=-2.0, beta=20)) >= 1.0


def test_large_beta_no_overflow():
    p = chain(3, mu=0.5, beta=2000.0)
    assert math.isfinite(fock.pressure_ed(p))


def test_ground_energy_examples():
    p = chain(2, "open", n_max=1, U=HARD_CORE, t=0.3, mu=0.1)
    assert fock.ground_energy_density(p, 0) == 0.0
    assert fock.ground_energy_density(p, 1) == pytest.approx((-0.1 - 0.3) / 2)
    with pytest.raises(ValueError):
        fock.ground_energy_density(p, 3)


@given(
    t=st.floats(0.01, 1.0),
    U=st.floats(0.0, 3.0),
    mu=st.floats(-1.0, 1.0),
    N=st.integers(0, 6),
    boundary=st.sampled_from(["open", "periodic"]),
)
def test_ground_energy_above_free_line(t, U, mu, N, boundary):
    p = ModelParams(LatticeSpec(1, 4, boundary), t=t, U=U, mu=mu, beta=1.0, n_max=2)
    e0 = fock.ground_energy_density(p, N)
    assert e0 >= (-mu - 2 * t) * N / 4 - 1e-10


def test_dirichlet_examples():
    assert fock.dirichlet_kinetic_min(1, 1, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert fock.dirichlet_kinetic_min(2, 1, 1.0) == pytest.approx(-1.0)
    assert fock.dirichlet_kinetic_min(3, 1, 1.0) == pytest.approx(-math.sqrt(2))


@pytest.mark.parametrize("d", [1, 2, 3])
def test_dirichlet_matches_numeric(d):
    for ell in range(1, 13 if d < 3 else 9):
        exact = fock.dirichlet_kinetic_min(ell, d, 0.7)
        assert fock.dirichlet_kinetic_min_numeric(ell, d, 0.7) == pytest.approx(exact, abs=1e-10)


@given(mu=st.floats(-2, 2), beta=st.floats(0.1, 20), t=st.floats(0.01, 1))
def test_hard_core_particle_hole_symmetry(mu, beta, t):
    lat = LatticeSpec(1, 4)
    p = ModelParams(lat, t=t, U=HARD_CORE, mu=mu, beta=beta, n_max=1)
    q = p.replace(mu=-mu)
    assert fock.density_ed(p) + fock.density_ed(q) == pytest.approx(1.0, abs=1e-10)
    # Z(mu) = exp(beta mu |Lambda|) Z(-mu)
    assert fock.log_grand_partition(p) == pytest.approx(
        beta * mu * 4 + fock.log_grand_partition(q), abs=1e-9
    )


def test_density_monotone_in_mu():
    mus = np.linspace(-1.5, 2.5, 41)
    rhos = [fock.density_ed(chain(3, mu=m, t=0.15, beta=4.0)) for m in mus]
    assert np.all(np.diff(rhos) >= -1e-12)
    assert all(0 <= r <= 2 for r in rhos)


def test_ed_record_shape():
    p = chain(2)
    rec = fock.ed_record(p, "density", 0.5, 1e-15)
    assert set(rec) == {"params", "quantity", "value", "solver_residual"}
    assert rec["params"]["n_max"] == 2


def test_cap_sensitivity_reports_each_cap():
    out = fock.cap_sensitivity(chain(2, mu=0.9, U=1.0, beta=3.0), caps=(1, 2, 3))
    assert set(out) == {1, 2, 3}
    assert out[3] >= out[2] - 1e-12
