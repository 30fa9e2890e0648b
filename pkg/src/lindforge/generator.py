"""Master-equation generators in standard form, plus rate tensors and Pauli reduction.

The secular generator is

    d rho / dt = -i [h_eff, rho]
                 + sum_W sum_ab gamma_ab(W) (A_b(W) rho A_a(W)^+
                                             - 1/2 {A_a(W)^+ A_b(W), rho})

with h_eff = h_a + h_ls and the frequency shift
h_ls = sum_W sum_ab delta_ab(W) A_a(W)^+ A_b(W).

The presecular generator keeps cross terms between different transition
frequencies, weighted by the coarse-graining filter F; with an exact-match
filter it collapses back to the secular form (Lamb shift included).
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field, replace

import numpy as np

from .bath import delta_matrix, gamma_matrix
from .linalg import Superoperator, as_operator, hermiticity_defect
from .spectral import (
    EigenOperatorSet,
    Spectrum,
    bohr_frequencies,
    eigenoperator_decomposition,
)

# filter weights below this magnitude contribute nothing detectable at the
# generator tolerances and are skipped when assembling presecular terms
NEGLIGIBLE_WEIGHT = 1e-16


def coarse_graining_f(x: float, dt: float) -> complex:
    """Coarse-graining filter F(x) = exp(i x dt / 2) sin(x dt / 2) / (x dt / 2).

    F(0) = 1 and F vanishes at x = 2 pi n / dt for integer n != 0.
    """
    u = 0.5 * float(x) * float(dt)
    if u == 0.0:
        return 1.0 + 0.0j
    return cmath.exp(1j * u) * (cmath.sin(u) / u)


@dataclass(frozen=True)
class SecularPolicy:
    """How transition-frequency pairs (W', W) are weighted.

    filter 'exact-match' keeps only |W' - W| <= matching_tol with weight 1.
    filter 'F-weighted' weights every pair by coarse_graining_f(W' - W, dt)
    and requires dt > 0.
    """

    dt: float | None = None
    filter: str = "exact-match"
    matching_tol: float = 0.0

    def __post_init__(self):
        if self.filter not in ("exact-match", "F-weighted"):
            raise ValueError(
                f"unknown secular filter {self.filter!r}; "
                "expected 'exact-match' or 'F-weighted'"
            )
        if self.filter == "F-weighted":
            if self.dt is None or not self.dt > 0:
                raise ValueError("F-weighted policy requires dt > 0")
        if self.matching_tol < 0:
            raise ValueError("matching_tol must be >= 0")


def secular_filter(omega_prime: float, omega: float, policy: SecularPolicy) -> complex:
    """Weight attached to the frequency pair (omega_prime, omega)."""
    if policy.filter == "exact-match":
        if abs(omega_prime - omega) <= policy.matching_tol:
            return 1.0 + 0.0j
        return 0.0 + 0.0j
    return coarse_graining_f(omega_prime - omega, policy.dt)


@dataclass(frozen=True)
class DissipatorTerm:
    """One transition frequency's worth of dissipator data.

    ops[a] is the eigenoperator A_a(omega) for channel a (zero matrix when the
    channel has no weight at this frequency). gamma is the k x k rate matrix
    Gamma(omega), delta the matching frequency-shift matrix Delta(omega).
    """

    omega: float
    gamma: np.ndarray
    ops: tuple[np.ndarray, ...]
    delta: np.ndarray | None = None

    @property
    def channel_count(self) -> int:
        return len(self.ops)

    def w_matrix(self) -> np.ndarray:
        """Half-Fourier coefficient matrix W = Gamma/2 + i Delta."""
        if self.delta is None:
            return 0.5 * self.gamma.astype(complex)
        return 0.5 * self.gamma + 1j * self.delta


@dataclass(frozen=True)
class Generator:
    """Right-hand side of the master equation d rho / dt = rhs(rho)."""

    h_eff: np.ndarray
    dissipator_terms: tuple[DissipatorTerm, ...]
    mode: str
    presecular_dt: float | None = None
    h_ls: np.ndarray | None = None
    policy: SecularPolicy | None = None

    @property
    def dim(self) -> int:
        return self.h_eff.shape[0]


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _reconstruct_hamiltonian(spectrum: Spectrum) -> np.ndarray:
    v = spectrum.basis
    h = (v * spectrum.frequencies) @ v.conj().T
    return _hermitize(h)


def _collect_terms(spectrum, eigenops, bath):
    """Shared preamble of the two builders: channel-aligned eigenoperators
    grouped by transition frequency, with rate matrices from the bath."""
    if not eigenops:
        raise ValueError("need at least one coupling channel")
    n_ch = len(eigenops)
    if bath.channel_count != n_ch:
        raise ValueError(
            f"bath provides {bath.channel_count} coupling channels, "
            f"got {n_ch} eigenoperator sets"
        )
    dim = spectrum.dim
    for ch, eset in enumerate(eigenops):
        for op in eset.terms.values():
            if op.shape != (dim, dim):
                raise ValueError(
                    f"channel {ch} eigenoperator has shape {op.shape}, "
                    f"expected {(dim, dim)}"
                )

    omegas = sorted({w for eset in eigenops for w in eset.terms})
    zero = np.zeros((dim, dim), dtype=complex)
    terms = []
    for w in omegas:
        ops = tuple(
            np.asarray(eset.terms.get(w, zero), dtype=complex) for eset in eigenops
        )
        gamma = gamma_matrix(bath, w)
        delta = delta_matrix(bath, w)
        terms.append(DissipatorTerm(omega=w, gamma=gamma, ops=ops, delta=delta))
    return terms


def build_standard_form(spectrum, eigenops, bath) -> Generator:
    """Assemble the secular generator: Lindblad dissipator plus frequency shift."""
    terms = _collect_terms(spectrum, eigenops, bath)
    dim = spectrum.dim
    h_a = _reconstruct_hamiltonian(spectrum)

    h_ls = np.zeros((dim, dim), dtype=complex)
    for t in terms:
        if t.delta is None:
            continue
        for a in range(t.channel_count):
            for b in range(t.channel_count):
                if t.delta[a, b] == 0:
                    continue
                h_ls += t.delta[a, b] * (t.ops[a].conj().T @ t.ops[b])
    h_ls = _hermitize(h_ls)
    h_eff = _hermitize(h_a + h_ls)

    return Generator(
        h_eff=h_eff,
        dissipator_terms=tuple(terms),
        mode="secular",
        presecular_dt=None,
        h_ls=h_ls,
        policy=None,
    )


def build_presecular(spectrum, eigenops, bath, policy: SecularPolicy) -> Generator:
    """Assemble the coarse-grained generator with cross-frequency terms.

    The frequency shift is not split out: each (W', W) pair enters through the
    half-Fourier matrix W(W) = Gamma(W)/2 + i Delta(W), and the free part of
    h_eff is the bare system hamiltonian.
    """
    if policy.dt is None or not policy.dt > 0:
        raise ValueError("presecular generator requires policy.dt > 0")
    terms = _collect_terms(spectrum, eigenops, bath)
    h_a = _reconstruct_hamiltonian(spectrum)
    return Generator(
        h_eff=h_a,
        dissipator_terms=tuple(terms),
        mode="presecular",
        presecular_dt=policy.dt,
        h_ls=None,
        policy=policy,
    )


def _secular_pieces(g: Generator):
    """Precompute per-term contraction operators for the secular rhs.

    For each term: c_ops[a] = sum_b gamma_ab A_b, so the gain reads
    sum_a c_ops[a] rho A_a^+; the loss uses the single hermitized matrix
    B = sum_terms sum_ab gamma_ab A_a^+ A_b.
    """
    dim = g.dim
    big_b = np.zeros((dim, dim), dtype=complex)
    sandwich = []
    for t in g.dissipator_terms:
        k = t.channel_count
        for a in range(k):
            c_op = np.zeros((dim, dim), dtype=complex)
            for b in range(k):
                if t.gamma[a, b] == 0:
                    continue
                c_op = c_op + t.gamma[a, b] * t.ops[b]
            if np.abs(c_op).max() == 0.0:
                continue
            a_dag = t.ops[a].conj().T
            sandwich.append((c_op, a_dag))
            big_b += a_dag @ c_op
    big_b = _hermitize(big_b)
    return sandwich, big_b


def _presecular_pieces(g: Generator):
    """Expand the presecular double sum into sandwich terms plus a one-sided pair.

    Each ordered frequency pair (W source, W' target) and channel pair (a, b)
    contributes, with c = F(W' - W) W_ab(W):

        c       A_b(W)  rho A_a(W')^+      - c       A_a(W')^+ A_b(W) rho
        conj(c) A_a(W') rho A_b(W)^+       - conj(c) rho A_b(W)^+ A_a(W')

    The one-sided parts accumulate into a single matrix G (and its adjoint).
    """
    policy = g.policy
    if policy is None:
        policy = SecularPolicy(
            dt=g.presecular_dt, filter="F-weighted", matching_tol=0.0
        )
    dim = g.dim
    terms = g.dissipator_terms
    w_mats = [t.w_matrix() for t in terms]
    nonzero = [
        [np.abs(op).max() > 0.0 for op in t.ops] for t in terms
    ]
    sandwich = []
    g_left = np.zeros((dim, dim), dtype=complex)
    for i, src in enumerate(terms):
        for j, dst in enumerate(terms):
            f_w = secular_filter(dst.omega, src.omega, policy)
            if abs(f_w) <= NEGLIGIBLE_WEIGHT:
                continue
            k = src.channel_count
            for a in range(k):
                if not nonzero[j][a]:
                    continue
                dst_a_dag = dst.ops[a].conj().T
                for b in range(k):
                    if not nonzero[i][b]:
                        continue
                    c = f_w * w_mats[i][a, b]
                    if abs(c) <= NEGLIGIBLE_WEIGHT:
                        continue
                    src_b = src.ops[b]
                    sandwich.append((c * src_b, dst_a_dag))
                    sandwich.append((np.conj(c) * dst.ops[a], src_b.conj().T))
                    g_left += -c * (dst_a_dag @ src_b)
    return sandwich, g_left


def rhs_function(g: Generator):
    """Return rhs(rho) as a reusable closure with terms precomputed."""
    h = g.h_eff
    if g.mode == "secular":
        sandwich, big_b = _secular_pieces(g)
        half_b = 0.5 * big_b

        def rhs(rho):
            rho = np.asarray(rho, dtype=complex)
            out = -1j * (h @ rho - rho @ h)
            out -= half_b @ rho + rho @ half_b
            for left, right in sandwich:
                out += left @ rho @ right
            return out

        return rhs

    sandwich, g_left = _presecular_pieces(g)
    g_right = g_left.conj().T

    def rhs(rho):
        rho = np.asarray(rho, dtype=complex)
        out = -1j * (h @ rho - rho @ h)
        out += g_left @ rho + rho @ g_right
        for left, right in sandwich:
            out += left @ rho @ right
        return out

    return rhs


def apply_rhs(g: Generator, rho) -> np.ndarray:
    """One-shot rhs evaluation; use rhs_function for repeated calls."""
    return rhs_function(g)(rho)


def generator_superoperator_matrix(g: Generator) -> np.ndarray:
    """Dense d^2 x d^2 matrix of the generator in column-stacking convention."""
    dim = g.dim
    eye = np.eye(dim, dtype=complex)
    h = g.h_eff
    mat = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    if g.mode == "secular":
        sandwich, big_b = _secular_pieces(g)
        half_b = 0.5 * big_b
        mat -= np.kron(eye, half_b) + np.kron(half_b.T, eye)
    else:
        sandwich, g_left = _presecular_pieces(g)
        mat += np.kron(eye, g_left) + np.kron(g_left.conj(), eye)
    for left, right in sandwich:
        mat += np.kron(right.T, left)
    return mat


# ---------------------------------------------------------------------------
# rate tensors in the energy eigenbasis


@dataclass(frozen=True)
class RateTensors:
    """Secular dissipator data in the energy eigenbasis.

    K maps index quadruples (a, m, b, n) to the gain coefficient connecting
    rho_mn to d rho_ab; it is stored only on quadruples where the transition
    frequencies match (omega_m - omega_a = omega_n - omega_b after snapping
    to the Bohr set). kappa maps same-multiplet pairs (i, j) to the escape
    coefficient sum_w K(w i, w j). pauli_gain / coherence_decay hold the
    nondegenerate closed-form rates and are None when any multiplet is
    degenerate (use pauli_equations for the block forms).
    """

    K: dict
    kappa: dict
    pauli_gain: np.ndarray | None
    coherence_decay: np.ndarray | None
    spectrum: Spectrum = field(repr=False, compare=False, default=None)


def rate_tensor_K(spectrum: Spectrum, a_eigen, gamma_of) -> dict:
    """Gain tensor K(a m, b n) = sum_ab' Gamma_ab'(w_ma) <a|A_b'|m> <b|A_a'|n>*.

    a_eigen: per-channel coupling operators already rotated to the energy
    eigenbasis. gamma_of: either a callable omega -> k x k rate matrix or a
    dict keyed by the Bohr frequencies.
    """
    mats = [np.asarray(m, dtype=complex) for m in a_eigen]
    if not mats:
        raise ValueError("need at least one coupling channel")
    dim = spectrum.dim
    for m in mats:
        if m.shape != (dim, dim):
            raise ValueError(f"expected shape {(dim, dim)}, got {m.shape}")
    bohr = bohr_frequencies(spectrum)
    values = np.asarray(bohr.values)
    reps = spectrum.representative_frequencies()

    if callable(gamma_of):
        gamma_at = {w: np.asarray(gamma_of(w), dtype=complex) for w in bohr.values}
    else:
        gamma_at = {w: np.asarray(gamma_of[w], dtype=complex) for w in bohr.values}

    # snap each directed gap w_ma = w_m - w_a to the nearest Bohr value
    gaps = reps[None, :] - reps[:, None]  # gaps[a, m] = w_m - w_a
    nearest = np.abs(gaps[:, :, None] - values[None, None, :]).argmin(axis=2)

    k_map: dict = {}
    n_ch = len(mats)
    for widx, w in enumerate(bohr.values):
        pairs = [(a, m) for a in range(dim) for m in range(dim) if nearest[a, m] == widx]
        if not pairs:
            continue
        e_mat = np.empty((n_ch, len(pairs)), dtype=complex)
        for ch, mat in enumerate(mats):
            e_mat[ch] = [mat[a, m] for (a, m) in pairs]
        k_block = e_mat.T @ gamma_at[w].T @ e_mat.conj()
        for p, (a, m) in enumerate(pairs):
            for q, (b, n) in enumerate(pairs):
                k_map[(a, m, b, n)] = complex(k_block[p, q])
    return k_map


def kappa(rate_tensors: RateTensors) -> dict:
    """Escape coefficients kappa(i, j) = sum_w K(w i, w j).

    Keys run over ordered same-multiplet index pairs (i, j); the diagonal
    kappa(i, i) is the total escape rate out of level i.
    """
    spectrum = rate_tensors.spectrum
    if spectrum is None:
        raise ValueError("rate tensors carry no spectrum")
    dim = spectrum.dim
    midx = spectrum.multiplet_index
    k_map = rate_tensors.K
    out: dict = {}
    for i in range(dim):
        for j in range(dim):
            if midx[i] != midx[j]:
                continue
            total = 0.0 + 0.0j
            for w in range(dim):
                total += k_map.get((w, i, w, j), 0.0)
            out[(i, j)] = complex(total)
    return out


@dataclass(frozen=True)
class PauliReduction:
    """Population/coherence equations extracted from the rate tensors.

    Nondegenerate spectra get the closed forms: gain[a, m] feeds population
    m into population a, escape[a] drains it, and for a != b the coherence
    rho_ab decays at coherence_decay[a, b] (on top of the oscillation at the
    level splitting) provided all transition frequencies are distinct.

    Degenerate spectra get block tensors over multiplets instead: block_gain
    [(A, M)] has shape (gA, gA, gM, gM) with entries K(Aa Mm, Aa' Mm'), and
    block_escape[A] is the in-multiplet escape matrix kappa(a'', a).
    """

    degenerate: bool
    all_gaps_distinct: bool
    gain: np.ndarray | None
    escape: np.ndarray | None
    coherence_decay: np.ndarray | None
    block_gain: dict | None
    block_escape: dict | None
    flags: tuple[str, ...]


def _distinct_gap_check(spectrum: Spectrum) -> bool:
    """True when no two distinct multiplet pairs share a transition frequency."""
    freqs = spectrum.multiplet_frequencies
    tol = spectrum.degeneracy_tol
    n = len(freqs)
    gaps = {}
    for p in range(n):
        for q in range(p + 1, n):
            gaps[(p, q)] = abs(freqs[q] - freqs[p])
    items = list(gaps.items())
    for x in range(len(items)):
        for y in range(x + 1, len(items)):
            if abs(items[x][1] - items[y][1]) <= tol:
                return False
    return True


def pauli_equations(rate_tensors: RateTensors, spectrum: Spectrum) -> PauliReduction:
    """Reduce the rate tensors to population and coherence equations."""
    dim = spectrum.dim
    k_map = rate_tensors.K
    kap = rate_tensors.kappa if rate_tensors.kappa else kappa(rate_tensors)
    degenerate = any(g > 1 for g in spectrum.degeneracies)
    gaps_ok = _distinct_gap_check(spectrum)
    flags = []
    if degenerate:
        flags.append("degenerate-multiplets")
    if not gaps_ok:
        flags.append("shared-transition-frequency")

    if not degenerate:
        gain = np.zeros((dim, dim))
        escape = np.zeros(dim)
        for a in range(dim):
            escape[a] = kap[(a, a)].real
            for m in range(dim):
                val = k_map.get((a, m, a, m), 0.0)
                gain[a, m] = complex(val).real
        coherence_decay = None
        if gaps_ok:
            coherence_decay = np.zeros((dim, dim))
            for a in range(dim):
                for b in range(dim):
                    if a == b:
                        continue
                    cross = complex(k_map.get((a, a, b, b), 0.0))
                    coherence_decay[a, b] = (
                        0.5 * (kap[(a, a)].real + kap[(b, b)].real) - cross.real
                    )
        return PauliReduction(
            degenerate=False,
            all_gaps_distinct=gaps_ok,
            gain=gain,
            escape=escape,
            coherence_decay=coherence_decay,
            block_gain=None,
            block_escape=None,
            flags=tuple(flags),
        )

    # degenerate case: per-multiplet block tensors
    mults = spectrum.multiplets
    n_mult = len(mults)
    block_gain = {}
    for big_a in range(n_mult):
        idx_a = mults[big_a]
        for big_m in range(n_mult):
            idx_m = mults[big_m]
            g_a, g_m = len(idx_a), len(idx_m)
            block = np.zeros((g_a, g_a, g_m, g_m), dtype=complex)
            hit = False
            for ia, a in enumerate(idx_a):
                for ia2, a2 in enumerate(idx_a):
                    for im, m in enumerate(idx_m):
                        for im2, m2 in enumerate(idx_m):
                            val = k_map.get((a, m, a2, m2))
                            if val is not None and val != 0.0:
                                block[ia, ia2, im, im2] = val
                                hit = True
            if hit:
                block_gain[(big_a, big_m)] = block
    block_escape = {}
    for big_a in range(n_mult):
        idx_a = mults[big_a]
        g_a = len(idx_a)
        block = np.zeros((g_a, g_a), dtype=complex)
        for ia, a in enumerate(idx_a):
            for ia2, a2 in enumerate(idx_a):
                block[ia, ia2] = kap.get((a, a2), 0.0)
        block_escape[big_a] = block
    return PauliReduction(
        degenerate=True,
        all_gaps_distinct=gaps_ok,
        gain=None,
        escape=None,
        coherence_decay=None,
        block_gain=block_gain,
        block_escape=block_escape,
        flags=tuple(flags),
    )


def kernel_superoperator_matrix(rate_tensors: RateTensors) -> np.ndarray:
    """Dissipator as a superoperator in the energy eigenbasis, built from the
    rate tensors alone:

        d rho_ab = sum_(m n supported) K(a m, b n) rho_mn
                   - 1/2 sum_a'' kappa(a'', a) rho_a''b
                   - 1/2 sum_b'' kappa(b, b'') rho_ab''

    This is the generic degenerate-safe kernel; the standard-form dissipator
    rotated to the eigenbasis must match it entry for entry.
    """
    spectrum = rate_tensors.spectrum
    dim = spectrum.dim
    mat = np.zeros((dim * dim, dim * dim), dtype=complex)

    def col(i, j):
        # column-stacking: rho_ij sits at flat index i + dim * j
        return i + dim * j

    for (a, m, b, n), val in rate_tensors.K.items():
        mat[col(a, b), col(m, n)] += val
    kap = rate_tensors.kappa if rate_tensors.kappa else kappa(rate_tensors)
    for (i, j), val in kap.items():
        # -1/2 kappa(a'', a) rho_a''b : here (i, j) = (a'', a)
        for b in range(dim):
            mat[col(j, b), col(i, b)] += -0.5 * val
        # -1/2 kappa(b, b'') rho_ab'' : here (i, j) = (b, b'')
        for a in range(dim):
            mat[col(a, i), col(a, j)] += -0.5 * val
    return mat


def build_rate_tensors(spectrum: Spectrum, system_ops, bath) -> RateTensors:
    """Rotate couplings to the eigenbasis and assemble K, kappa and the
    nondegenerate Pauli rates in one go."""
    v = spectrum.basis
    mats = [v.conj().T @ as_operator(a, "coupling operator") @ v for a in system_ops]
    k_map = rate_tensor_K(spectrum, mats, lambda w: gamma_matrix(bath, w))
    rt = RateTensors(K=k_map, kappa={}, pauli_gain=None, coherence_decay=None,
                     spectrum=spectrum)
    kap = kappa(rt)
    rt = replace(rt, kappa=kap)
    red = pauli_equations(rt, spectrum)
    return replace(rt, pauli_gain=red.gain, coherence_decay=red.coherence_decay)


# ---------------------------------------------------------------------------
# end-to-end derivation


@dataclass(frozen=True)
class DeriveResult:
    """Everything produced by derive_generator."""

    generator: Generator
    spectrum: Spectrum
    eigenops: tuple[EigenOperatorSet, ...]
    rate_tensors: RateTensors
    pauli: PauliReduction
    h_shift: np.ndarray | None = None


def derive_generator(
    h_a,
    bath,
    couplings,
    mode: str = "secular",
    policy: SecularPolicy | None = None,
    degeneracy_tol: float | None = None,
) -> DeriveResult:
    """Full pipeline from microscopic data to a generator.

    couplings: list of system coupling operators, one per bath channel.
    For finite baths whose coupling operators have nonzero stationary mean,
    the mean is shifted into the system hamiltonian first (h_shift reports
    the correction that was added to h_a).
    """
    from .bath import FiniteBath, center_couplings
    from .spectral import build_spectrum

    h_a = as_operator(h_a, "system hamiltonian")
    if hermiticity_defect(h_a) > 1e-9 * max(1.0, np.abs(h_a).max()):
        raise ValueError("system hamiltonian is not hermitian")
    ops = [as_operator(a, f"couplings[{i}]") for i, a in enumerate(couplings)]
    if len(ops) != bath.channel_count:
        raise ValueError(
            f"bath provides {bath.channel_count} coupling channels, "
            f"got {len(ops)} system operators"
        )

    h_shift = None
    if isinstance(bath, FiniteBath):
        bath, shift = center_couplings(bath, ops)
        if np.abs(shift).max() > 0.0:
            h_shift = shift
            h_a = _hermitize(h_a + shift)

    spectrum = build_spectrum(h_a, degeneracy_tol=degeneracy_tol)
    eigenops = tuple(
        eigenoperator_decomposition(a, spectrum, channel=i) for i, a in enumerate(ops)
    )

    if mode == "secular":
        gen = build_standard_form(spectrum, eigenops, bath)
    elif mode == "presecular":
        if policy is None:
            raise ValueError("presecular mode requires a SecularPolicy with dt > 0")
        gen = build_presecular(spectrum, eigenops, bath, policy)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'secular' or 'presecular'")

    rt = build_rate_tensors(spectrum, ops, bath)
    red = pauli_equations(rt, spectrum)
    return DeriveResult(
        generator=gen,
        spectrum=spectrum,
        eigenops=eigenops,
        rate_tensors=rt,
        pauli=red,
        h_shift=h_shift,
    )
