import math

import numpy as np
import pytest

from lindforge import (
    FiniteBath,
    SecularPolicy,
    apply_rhs,
    build_rate_tensors,
    build_spectrum,
    coarse_graining_f,
    derive_generator,
    flat_thermal_bath,
    generator_superoperator_matrix,
    kappa,
    kernel_superoperator_matrix,
    pauli_equations,
    secular_filter,
    table_bath,
)

from _support import random_density, random_hermitian, sigma_ops

EXACT_TOL = 1e-13
RHS_TOL = 1e-12
COMMUTE_TOL = 1e-10

GAMMA_DOWN = 0.3
GAMMA_UP = 0.1
OMEGA0 = 1.4


def two_level_table_bath(delta_down=0.0, delta_up=0.0):
    one = np.array([[1.0]], dtype=complex)
    return table_bath(
        [
            (OMEGA0, GAMMA_DOWN * one, delta_down * one),
            (-OMEGA0, GAMMA_UP * one, delta_up * one),
            (0.0, 0.0 * one, None),
        ]
    )


def dissipator(l_op, rho):
    anti = l_op.conj().T @ l_op
    return l_op @ rho @ l_op.conj().T - 0.5 * (anti @ rho + rho @ anti)


def test_two_level_standard_form_matches_hand_built_lindblad():
    rng = np.random.default_rng(41)
    sx, _, _, sm = sigma_ops()
    h = np.diag([0.0, OMEGA0]).astype(complex)
    res = derive_generator(h, two_level_table_bath(), [sx])
    gen = res.generator
    assert gen.mode == "secular"
    assert np.abs(gen.h_ls).max() < EXACT_TOL
    assert np.abs(gen.h_eff - h).max() < EXACT_TOL
    for _ in range(5):
        rho = random_density(rng, 2)
        got = apply_rhs(gen, rho)
        expected = (
            -1j * (h @ rho - rho @ h)
            + GAMMA_DOWN * dissipator(sm, rho)
            + GAMMA_UP * dissipator(sm.conj().T, rho)
        )
        assert np.abs(got - expected).max() < EXACT_TOL


def test_scalar_delta_gives_scalar_lamb_shift():
    sx, _, _, _ = sigma_ops()
    h = np.diag([0.0, OMEGA0]).astype(complex)
    delta = 0.07
    res = derive_generator(h, two_level_table_bath(delta, delta), [sx])
    # delta * (sigma_+ sigma_- + sigma_- sigma_+) = delta * identity
    assert np.abs(res.generator.h_ls - delta * np.eye(2)).max() < EXACT_TOL
    h_ls = res.generator.h_ls
    assert np.abs(h @ h_ls - h_ls @ h).max() < COMMUTE_TOL


def test_zero_coupling_reduces_to_pure_commutator():
    rng = np.random.default_rng(42)
    h = random_hermitian(rng, 3)
    bath = flat_thermal_bath(0.2, 1.0)
    res = derive_generator(h, bath, [np.zeros((3, 3))])
    assert res.generator.dissipator_terms == ()
    rho = random_density(rng, 3)
    got = apply_rhs(res.generator, rho)
    expected = -1j * (res.generator.h_eff @ rho - rho @ res.generator.h_eff)
    assert np.abs(got - expected).max() < EXACT_TOL
    assert np.abs(res.generator.h_eff - h).max() < 1e-11


def test_channel_count_mismatch_is_rejected():
    sx, _, sz, _ = sigma_ops()
    h = np.diag([0.0, 1.0]).astype(complex)
    with pytest.raises(ValueError, match="channels"):
        derive_generator(h, flat_thermal_bath(0.1, 1.0), [sx, sz])


def test_rate_tensor_two_level_values():
    sx, _, _, _ = sigma_ops()
    h = np.diag([0.0, OMEGA0]).astype(complex)
    res = derive_generator(h, two_level_table_bath(), [2.0 * sx])
    k_map = res.rate_tensors.K
    # gain into g from e: Gamma(+omega) |<g|A|e>|^2 with |<g|A|e>| = 2
    assert abs(k_map[(0, 1, 0, 1)] - 4.0 * GAMMA_DOWN) < EXACT_TOL
    assert abs(k_map[(1, 0, 1, 0)] - 4.0 * GAMMA_UP) < EXACT_TOL
    kap = res.rate_tensors.kappa
    assert abs(kap[(1, 1)] - 4.0 * GAMMA_DOWN) < EXACT_TOL
    assert abs(kap[(0, 0)] - 4.0 * GAMMA_UP) < EXACT_TOL
    assert abs(res.pauli.gain[0, 1] - 4.0 * GAMMA_DOWN) < EXACT_TOL
    assert abs(res.pauli.escape[1] - 4.0 * GAMMA_DOWN) < EXACT_TOL
    # coherence between g and e decays at half the total escape
    decay = res.pauli.coherence_decay[0, 1]
    assert abs(decay - 2.0 * (GAMMA_DOWN + GAMMA_UP)) < EXACT_TOL


def test_pure_dephasing_coherence_rate():
    _, _, sz, _ = sigma_ops()
    gamma_d = 0.11
    h = np.diag([0.0, OMEGA0]).astype(complex)
    one = np.array([[1.0]], dtype=complex)
    bath = table_bath(
        [(0.0, gamma_d * one, None), (OMEGA0, 0.0 * one, None), (-OMEGA0, 0.0 * one, None)]
    )
    res = derive_generator(h, bath, [sz])
    # D[sqrt(gamma_d) sigma_z] damps rho_ge at 2 gamma_d
    assert abs(res.pauli.coherence_decay[0, 1] - 2.0 * gamma_d) < EXACT_TOL
    assert abs(res.pauli.escape[0] - gamma_d) < EXACT_TOL
    assert np.abs(res.pauli.gain - np.diag([gamma_d, gamma_d])).max() < EXACT_TOL


def random_rate_scenario(rng, levels, bath_dim=5, n_channels=2):
    h = np.diag(np.array(levels, dtype=complex))
    ops = [random_hermitian(rng, len(levels)) for _ in range(n_channels)]
    h_b = random_hermitian(rng, bath_dim)
    xs = [random_hermitian(rng, bath_dim) for _ in range(n_channels)]
    bath = FiniteBath(h_b, 1.3, xs, broadening=0.8)
    return h, ops, bath


def random_table_scenario(rng, levels, n_channels=2, scale=0.3):
    """Diagonal hamiltonian plus a rate table covering every Bohr frequency.

    Table baths skip the coupling-centering step, so the energy eigenbasis
    stays exactly the user basis and eigenbasis expressions can be compared
    entry by entry.
    """
    from lindforge import bohr_frequencies

    h = np.diag(np.array(levels, dtype=complex))
    ops = [random_hermitian(rng, len(levels)) for _ in range(n_channels)]
    spec = build_spectrum(h)
    entries = []
    for omega in bohr_frequencies(spec).values:
        m = rng.standard_normal((n_channels, n_channels)) + 1j * rng.standard_normal(
            (n_channels, n_channels)
        )
        gamma = scale * (m @ m.conj().T) / n_channels
        delta = scale * random_hermitian(rng, n_channels)
        entries.append((float(omega), gamma, delta))
    return h, ops, table_bath(entries)


def test_rate_tensor_symmetries_random_scenario():
    rng = np.random.default_rng(43)
    h, ops, bath = random_rate_scenario(rng, [0.0, 0.9, 2.1, 3.8])
    res = derive_generator(h, bath, ops)
    k_map = res.rate_tensors.K
    scale = max(abs(v) for v in k_map.values())
    for (a, m, b, n), val in k_map.items():
        assert abs(val - np.conj(k_map[(b, n, a, m)])) < 1e-13 * scale
        if (a, m) == (b, n):
            assert abs(val.imag) < 1e-13 * scale
            assert val.real > -1e-13 * scale
    kap = res.rate_tensors.kappa
    for (i, j), val in kap.items():
        assert abs(val - np.conj(kap[(j, i)])) < 1e-13 * scale
    # population conservation: total gain out of column m equals its escape
    gain, escape = res.pauli.gain, res.pauli.escape
    assert np.abs(gain.sum(axis=0) - escape).max() < 1e-13 * max(scale, 1.0)


def test_kernel_matches_standard_form_dissipator_degenerate():
    rng = np.random.default_rng(44)
    levels = [0.0, 0.0, 1.1, 2.6]  # degenerate ground multiplet
    h, ops, bath = random_table_scenario(rng, levels)
    res = derive_generator(h, bath, ops)
    spec = res.spectrum
    # diagonal ascending hamiltonian: eigenbasis is the user basis
    assert np.abs(spec.basis - np.eye(len(levels))).max() < 1e-12
    dim = spec.dim
    eye = np.eye(dim)
    l_full = generator_superoperator_matrix(res.generator)
    h_eff = res.generator.h_eff
    l_comm = -1j * (np.kron(eye, h_eff) - np.kron(h_eff.T, eye))
    l_diss = l_full - l_comm
    l_kernel = kernel_superoperator_matrix(res.rate_tensors)
    scale = max(1.0, np.abs(l_diss).max())
    assert np.abs(l_diss - l_kernel).max() < RHS_TOL * scale
    assert res.pauli.degenerate
    assert "degenerate-multiplets" in res.pauli.flags
    assert res.pauli.block_gain[(0, 1)].shape == (2, 2, 1, 1)
    assert res.pauli.block_escape[0].shape == (2, 2)


def test_kernel_matches_standard_form_dissipator_nondegenerate():
    rng = np.random.default_rng(45)
    h, ops, bath = random_table_scenario(rng, [0.0, 0.9, 2.1, 3.8])
    res = derive_generator(h, bath, ops)
    assert np.abs(res.spectrum.basis - np.eye(4)).max() < 1e-12
    dim = res.spectrum.dim
    eye = np.eye(dim)
    l_full = generator_superoperator_matrix(res.generator)
    h_eff = res.generator.h_eff
    l_comm = -1j * (np.kron(eye, h_eff) - np.kron(h_eff.T, eye))
    l_kernel = kernel_superoperator_matrix(res.rate_tensors)
    scale = max(1.0, np.abs(l_kernel).max())
    assert np.abs((l_full - l_comm) - l_kernel).max() < RHS_TOL * scale


def test_population_sector_follows_pauli_equations():
    rng = np.random.default_rng(46)
    h, ops, bath = random_table_scenario(rng, [0.0, 0.9, 2.1, 3.8])
    res = derive_generator(h, bath, ops)
    gen = res.generator
    dim = 4
    pops = rng.uniform(0.2, 1.0, dim)
    pops /= pops.sum()
    rho = np.diag(pops).astype(complex)
    ddt = apply_rhs(gen, rho)
    expected = res.pauli.gain @ pops - res.pauli.escape * pops
    assert np.abs(np.diag(ddt).real - expected).max() < RHS_TOL
    # diagonal initial data stays diagonal when all gaps are distinct
    off = ddt - np.diag(np.diag(ddt))
    assert np.abs(off).max() < RHS_TOL


def test_coherence_decay_matches_generator():
    rng = np.random.default_rng(47)
    h, ops, bath = random_table_scenario(rng, [0.0, 0.9, 2.1, 3.8])
    res = derive_generator(h, bath, ops)
    assert res.pauli.all_gaps_distinct
    gen = res.generator
    for a, b in ((0, 1), (1, 3), (2, 0)):
        rho = np.zeros((4, 4), dtype=complex)
        rho[a, b] = 1.0
        ddt = apply_rhs(gen, rho)
        # distinct gaps: the coherence only feeds itself
        mask = np.ones((4, 4), dtype=bool)
        mask[a, b] = False
        assert np.abs(ddt[mask]).max() < RHS_TOL
        assert abs(ddt[a, b].real + res.pauli.coherence_decay[a, b]) < RHS_TOL


def test_shared_gap_spectrum_is_flagged():
    rng = np.random.default_rng(48)
    h, ops, bath = random_table_scenario(rng, [0.0, 1.0, 2.0])
    res = derive_generator(h, bath, ops)
    assert not res.pauli.degenerate
    assert not res.pauli.all_gaps_distinct
    assert "shared-transition-frequency" in res.pauli.flags
    assert res.pauli.coherence_decay is None
    assert res.pauli.gain is not None


def test_filter_values():
    dt = 3.7
    assert coarse_graining_f(0.0, dt) == 1.0
    for n in range(1, 6):
        assert abs(coarse_graining_f(2.0 * math.pi * n / dt, dt)) < 1e-12
    # half-period point: |F| = 2/pi with phase i
    f = coarse_graining_f(math.pi / dt, dt)
    assert abs(f - 1j * 2.0 / math.pi) < 1e-12
    exact = SecularPolicy(dt=None, filter="exact-match")
    assert secular_filter(1.0, 1.0, exact) == 1.0
    assert secular_filter(1.0 + 5.0 / dt, 1.0, exact) == 0.0
    weighted = SecularPolicy(dt=dt, filter="F-weighted")
    x = 0.75
    assert secular_filter(1.0 + x, 1.0, weighted) == coarse_graining_f(x, dt)
    with pytest.raises(ValueError):
        SecularPolicy(dt=None, filter="F-weighted")
    with pytest.raises(ValueError):
        SecularPolicy(filter="nonsense")


def test_presecular_exact_match_equals_secular():
    rng = np.random.default_rng(49)
    h, ops, bath = random_rate_scenario(rng, [0.0, 0.9, 2.1, 3.8])
    sec = derive_generator(h, bath, ops, mode="secular")
    policy = SecularPolicy(dt=5.0, filter="exact-match")
    pre = derive_generator(h, bath, ops, mode="presecular", policy=policy)
    l_sec = generator_superoperator_matrix(sec.generator)
    l_pre = generator_superoperator_matrix(pre.generator)
    scale = max(1.0, np.abs(l_sec).max())
    assert np.abs(l_sec - l_pre).max() < 1e-12 * scale


def test_presecular_converges_to_secular_with_growing_window():
    rng = np.random.default_rng(50)
    h, ops, bath = random_table_scenario(rng, [0.0, 0.9, 2.1, 3.8])
    sec = derive_generator(h, bath, ops, mode="secular")
    l_sec = generator_superoperator_matrix(sec.generator)
    gaps = np.array([0.9, 2.1, 3.8])
    all_gaps = np.abs(np.subtract.outer(np.r_[0.0, gaps], np.r_[0.0, gaps]))
    min_gap = all_gaps[all_gaps > 1e-9].min()
    defects = []
    for dt in (10.0 / min_gap, 40.0 / min_gap, 160.0 / min_gap, 2560.0 / min_gap):
        policy = SecularPolicy(dt=dt, filter="F-weighted")
        pre = derive_generator(h, bath, ops, mode="presecular", policy=policy)
        l_pre = generator_superoperator_matrix(pre.generator)
        defects.append(np.abs(l_pre - l_sec).max())
    for k in range(len(defects) - 1):
        assert defects[k + 1] < defects[k]
    assert defects[-1] < 1e-2 * defects[0]


def test_generator_preserves_trace_and_hermiticity():
    rng = np.random.default_rng(51)
    h, ops, bath = random_rate_scenario(rng, [0.0, 0.9, 2.1, 3.8])
    policy = SecularPolicy(dt=25.0, filter="F-weighted")
    for mode, pol in (("secular", None), ("presecular", policy)):
        res = derive_generator(h, bath, ops, mode=mode, policy=pol)
        gen = res.generator
        assert np.abs(gen.h_eff - gen.h_eff.conj().T).max() == 0.0
        if gen.h_ls is not None:
            h_bare = gen.h_eff - gen.h_ls
            comm = h_bare @ gen.h_ls - gen.h_ls @ h_bare
            assert np.abs(comm).max() < COMMUTE_TOL * max(1.0, np.abs(gen.h_ls).max())
        for _ in range(10):
            rho = random_density(rng, 4)
            ddt = apply_rhs(gen, rho)
            scale = max(1.0, np.abs(ddt).max())
            assert abs(np.trace(ddt)) < RHS_TOL * scale
            assert np.abs(ddt - ddt.conj().T).max() < RHS_TOL * scale


def test_kappa_requires_spectrum():
    from lindforge import RateTensors

    rt = RateTensors(K={}, kappa={}, pauli_gain=None, coherence_decay=None)
    with pytest.raises(ValueError):
        kappa(rt)
