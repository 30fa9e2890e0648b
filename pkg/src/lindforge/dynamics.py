"""Propagation of the reduced density matrix and the exact reference dynamics.

Two independent routes produce time series here. propagate() integrates a
derived master-equation generator (matrix exponential of the superoperator or
classical RK4). exact_oracle() ignores the generator entirely: it builds the
full system+bath hamiltonian, evolves the composite state unitarily from a
factorized initial condition, and partial-traces at each sample time. The
oracle makes no weak-coupling, Markov or secular approximation, so any
disagreement beyond the two-timescale error budget points at the derivation.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bath import AnalyticBath, FiniteBath, estimate_correlation_time, gamma_matrix
from .generator import Generator, generator_superoperator_matrix, rhs_function
from .linalg import (
    DimensionError,
    Superoperator,
    as_operator,
    hermiticity_defect,
    matrix_exponential_unitary,
    unvec,
    vec,
)
from .spectral import bohr_frequencies

# positivity floor along trajectories; below this the state is declared invalid
POSITIVITY_FLOOR = -1e-6
# default cap on dim_A * dim_B for the exact oracle; env var LF_MAX_DIM overrides
ORACLE_DIM_CAP = 1024
# rk4 step control: step <= RK4_STEP_FACTOR / (norm bound of the generator)
RK4_STEP_FACTOR = 1.0 / 20.0


@dataclass(frozen=True)
class Trajectory:
    """Sampled density-matrix evolution with per-sample diagnostics."""

    times: np.ndarray
    states: np.ndarray  # (n, d, d)
    trace_defects: np.ndarray
    hermiticity_defects: np.ndarray
    min_eigenvalues: np.ndarray
    method: str
    complete: bool = True

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return len(self.times)


@dataclass(frozen=True)
class TimescaleReport:
    """Order-of-magnitude check of the two-timescale assumption tau_B << T_A.

    v_strength is sqrt(max_a <X_a^+ X_a>_B) * max_a ||A_a||_2, t_a_estimate is
    1/(V^2 tau_B), and the verdict grades the ratio V*tau_B: pass below 0.1,
    warn below 1, fail otherwise. non_decaying marks correlation functions with
    no certified decay window (the tau_b value is then a fallback scale, not a
    measured decay time).
    """

    tau_b: float
    t_a_estimate: float
    v_strength: float
    two_scale_ratio: float
    verdict: str
    non_decaying: bool = False


class PropagationError(RuntimeError):
    """Raised when a propagated state stops being a density matrix.

    Carries the failure time, the offending defect value, and the partial
    trajectory accumulated up to (not including) the bad sample.
    """

    def __init__(self, message: str, time: float, defect: float, partial=None):
        super().__init__(message)
        self.time = time
        self.defect = defect
        self.partial = partial


def _check_times(times) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("times must be a non-empty 1-d array")
    if t[0] != 0.0:
        raise ValueError(f"times must start at 0, got {t[0]!r}")
    if t.size > 1 and not (np.diff(t) > 0).all():
        raise ValueError("times must be strictly increasing")
    return t


def _check_initial_state(rho0, dim: int) -> np.ndarray:
    rho = as_operator(rho0, "rho0")
    if rho.shape[0] != dim:
        raise ValueError(f"rho0 has dimension {rho.shape[0]}, generator has {dim}")
    if abs(np.trace(rho) - 1.0) > 1e-6:
        raise ValueError(f"rho0 trace is {np.trace(rho):.6g}, expected 1")
    if hermiticity_defect(rho) > 1e-6:
        raise ValueError("rho0 is not hermitian")
    return rho


def _sample_diagnostics(state):
    trace_defect = abs(np.trace(state) - 1.0)
    herm_defect = hermiticity_defect(state)
    min_eig = float(np.linalg.eigvalsh(0.5 * (state + state.conj().T))[0])
    return float(trace_defect), float(herm_defect), min_eig


def liouvillian_superoperator(g: Generator) -> Superoperator:
    """Dense matrix realization of the generator, column-stacking convention.

    The matrix is cross-checked against direct rhs evaluation on 10 random
    density matrices to 1e-12 before being returned.
    """
    mat = generator_superoperator_matrix(g)
    rhs = rhs_function(g)
    dim = g.dim
    rng = np.random.default_rng(7)
    for _ in range(10):
        m = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        rho = m @ m.conj().T
        rho = rho / np.trace(rho)
        direct = rhs(rho)
        via_matrix = unvec(mat @ vec(rho), dim)
        scale = max(1.0, float(np.abs(direct).max()))
        if np.abs(via_matrix - direct).max() > 1e-12 * scale:
            raise RuntimeError(
                "superoperator matrix disagrees with direct rhs evaluation"
            )
    return Superoperator(dim=dim, matrix=mat)


def _rhs_norm_bound(g: Generator) -> float:
    """Crude spectral-norm bound on the generator, used for rk4 step control."""
    from .generator import _presecular_pieces, _secular_pieces

    norm = lambda m: float(np.linalg.norm(m, 2))
    bound = 2.0 * norm(g.h_eff)
    if g.mode == "secular":
        sandwich, big_b = _secular_pieces(g)
        bound += norm(big_b)
    else:
        sandwich, g_left = _presecular_pieces(g)
        bound += 2.0 * norm(g_left)
    for left, right in sandwich:
        bound += norm(left) * norm(right)
    return bound


def _build_trajectory(times, states, method: str, complete: bool = True) -> Trajectory:
    states = np.asarray(states)
    diags = [_sample_diagnostics(s) for s in states]
    trace_d, herm_d, min_e = (np.array(x) for x in zip(*diags)) if diags else (
        np.array([]), np.array([]), np.array([]))
    return Trajectory(
        times=np.asarray(times, dtype=float),
        states=states,
        trace_defects=trace_d,
        hermiticity_defects=herm_d,
        min_eigenvalues=min_e,
        method=method,
        complete=complete,
    )


def propagate(rho0, g: Generator, times, method: str = "expm") -> Trajectory:
    """Integrate d rho / dt = rhs(rho) and sample at the given times.

    method 'expm' exponentiates the superoperator matrix (one exponential per
    distinct time gap, reused across equal gaps); 'rk4' is classical
    fourth-order stepping with step size at most (1/20) / ||L||.

    Raises PropagationError (partial trajectory attached) as soon as a sampled
    state has an eigenvalue below -1e-6.
    """
    t = _check_times(times)
    rho = _check_initial_state(rho0, g.dim)
    if method not in ("expm", "rk4"):
        raise ValueError(f"unknown method {method!r}; expected 'expm' or 'rk4'")

    states = [rho.copy()]
    if method == "expm":
        mat = generator_superoperator_matrix(g)
        v = vec(rho)
        cache: dict = {}
        for k in range(1, t.size):
            gap = float(t[k] - t[k - 1])
            # merge gaps equal up to float noise so uniform grids cost one expm
            key = float(np.format_float_scientific(gap, precision=12))
            if key not in cache:
                cache[key] = scipy.linalg.expm(mat * gap)
            v = cache[key] @ v
            states.append(unvec(v, g.dim))
    else:
        rhs = rhs_function(g)
        bound = _rhs_norm_bound(g)
        h_max = RK4_STEP_FACTOR / bound if bound > 0 else math.inf
        cur = rho.astype(complex)
        for k in range(1, t.size):
            gap = float(t[k] - t[k - 1])
            steps = max(1, int(math.ceil(gap / h_max))) if math.isfinite(h_max) else 1
            h = gap / steps
            for _ in range(steps):
                k1 = rhs(cur)
                k2 = rhs(cur + 0.5 * h * k1)
                k3 = rhs(cur + 0.5 * h * k2)
                k4 = rhs(cur + h * k3)
                cur = cur + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            states.append(cur.copy())

    # per-sample diagnostics with early abort on positivity loss
    kept = []
    diags = []
    for k, state in enumerate(states):
        d = _sample_diagnostics(state)
        if d[2] < POSITIVITY_FLOOR:
            partial = _build_trajectory(t[:k], kept, method, complete=False)
            raise PropagationError(
                f"state left the positivity tolerance at t={t[k]:.6g}: "
                f"min eigenvalue {d[2]:.3e}",
                time=float(t[k]),
                defect=d[2],
                partial=partial,
            )
        kept.append(state)
        diags.append(d)
    trace_d, herm_d, min_e = (np.array(x) for x in zip(*diags))
    return Trajectory(
        times=t,
        states=np.asarray(kept),
        trace_defects=trace_d,
        hermiticity_defects=herm_d,
        min_eigenvalues=min_e,
        method=method,
    )


def oracle_dimension_cap() -> int:
    raw = os.environ.get("LF_MAX_DIM")
    if raw is None:
        return ORACLE_DIM_CAP
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValueError(f"LF_MAX_DIM must be an integer, got {raw!r}") from exc
    if cap < 1:
        raise ValueError(f"LF_MAX_DIM must be positive, got {cap}")
    return cap


def exact_oracle(h_a, bath: FiniteBath, couplings, rho_a0, times,
                 coupling_scale: float = 1.0) -> Trajectory:
    """Exact reduced dynamics from the full system+bath hamiltonian.

    H = H_A x 1 + 1 x H_B + scale * sum_a A_a x X_a is diagonalized once; the
    composite state starts factorized as rho_A(0) x sigma_B (the only place a
    product form enters) and evolves unitarily. The reduced state at each
    sample time is assembled from the eigenphases directly, so the cost per
    sample is d_A^2 D^2 instead of a D^3 matrix product.
    """
    if not isinstance(bath, FiniteBath):
        raise TypeError("exact_oracle needs a FiniteBath (analytic baths have "
                        "no microscopic hamiltonian to diagonalize)")
    h_a = as_operator(h_a, "system hamiltonian")
    rho_a0 = as_operator(rho_a0, "rho_a0")
    t = _check_times(times)
    d_a = h_a.shape[0]
    d_b = bath.dim
    if rho_a0.shape[0] != d_a:
        raise ValueError(f"rho_a0 has dimension {rho_a0.shape[0]}, system has {d_a}")
    ops = [as_operator(a, f"couplings[{i}]") for i, a in enumerate(couplings)]
    if len(ops) != bath.channel_count:
        raise ValueError(
            f"bath provides {bath.channel_count} coupling channels, "
            f"got {len(ops)} system operators"
        )
    total = d_a * d_b
    cap = oracle_dimension_cap()
    if total > cap:
        raise DimensionError(
            f"total dimension {d_a}x{d_b}={total} exceeds the oracle cap {cap}; "
            "use a smaller bath or raise LF_MAX_DIM"
        )

    eye_a = np.eye(d_a, dtype=complex)
    eye_b = np.eye(d_b, dtype=complex)
    h = np.kron(h_a, eye_b) + np.kron(eye_a, bath.h_b)
    for a_op, x_op in zip(ops, bath.coupling_ops):
        h = h + coupling_scale * np.kron(a_op, x_op)
    h = 0.5 * (h + h.conj().T)
    w, v = np.linalg.eigh(h)

    rho_bar = v.conj().T @ np.kron(rho_a0, bath.sigma()) @ v
    p = v.reshape(d_a, d_b, total)  # p[i, k, m] = <i,k|m>

    # rho_A(t)_ij = sum_mn (rho_bar * S_ij)[m,n] e^{-i w_m t} e^{+i w_n t}
    # with S_ij = p_i^T conj(p_j); evaluated for all samples via one
    # (n_t, D) phase matrix per side.
    phase = np.exp(-1j * np.outer(t, w))  # e^{-i w t}
    states = np.empty((t.size, d_a, d_a), dtype=complex)
    for i in range(d_a):
        for j in range(i, d_a):
            s_ij = p[i].T @ p[j].conj()
            c_ij = rho_bar * s_ij
            series = ((phase @ c_ij) * phase.conj()).sum(axis=1)
            states[:, i, j] = series
            if j != i:
                states[:, j, i] = series.conj()
    # hermitian by construction above; diagonal imaginary dust removed
    for k in range(t.size):
        states[k] = 0.5 * (states[k] + states[k].conj().T)

    return _build_trajectory(t, states, method="exact")


def interaction_picture(op, h0, t: float, direction: str = "to") -> np.ndarray:
    """Rotate an operator by e^{i h0 t} ... e^{-i h0 t} ('to') or back ('from')."""
    op = as_operator(op, "op")
    h0 = as_operator(h0, "h0")
    u = matrix_exponential_unitary(h0, t)  # e^{-i h0 t}
    if direction == "to":
        return u.conj().T @ op @ u
    if direction == "from":
        return u @ op @ u.conj().T
    raise ValueError(f"unknown direction {direction!r}; expected 'to' or 'from'")


def timescale_report(bath, couplings, spectrum=None, tau_b: float | None = None
                     ) -> TimescaleReport:
    """Grade the two-timescale assumption for the given microscopic data.

    Finite baths get tau_B from the correlation-function estimator and the
    interaction strength from the exact second moment <X^+ X>_B. Analytic
    baths carry no correlation data, so tau_b must be supplied; their strength
    is inferred as max_W ||Gamma(W)||_2 / (2 tau_b) over the spectrum's Bohr
    frequencies (Gamma ~ 2 * moment * tau_B at the order-of-magnitude level).
    """
    ops = [as_operator(a, f"couplings[{i}]") for i, a in enumerate(couplings)]
    a_norm = max((float(np.linalg.norm(a, 2)) for a in ops), default=0.0)

    non_decaying = False
    if isinstance(bath, FiniteBath):
        if tau_b is None:
            table = estimate_correlation_time(bath)
            tau_b = table.tau_b_estimate
            non_decaying = table.non_decaying
        moment = 0.0
        for alpha in range(bath.channel_count):
            x = bath.coupling_ops[alpha]
            moment = max(moment, bath.expectation(x.conj().T @ x).real)
        v_strength = math.sqrt(max(moment, 0.0)) * a_norm
    elif isinstance(bath, AnalyticBath):
        if tau_b is None:
            raise ValueError(
                "analytic baths have no correlation function to estimate "
                "tau_b from; pass tau_b explicitly"
            )
        if spectrum is None:
            raise ValueError("need the system spectrum to sample Gamma for an "
                             "analytic bath")
        gnorm = 0.0
        for omega in bohr_frequencies(spectrum).values:
            gnorm = max(gnorm, float(np.linalg.norm(gamma_matrix(bath, omega), 2)))
        if tau_b > 0 and math.isfinite(tau_b):
            moment = gnorm / (2.0 * tau_b)
        else:
            moment = 0.0
        v_strength = math.sqrt(moment) * a_norm
    else:
        raise TypeError(f"unsupported bath type {type(bath).__name__}")

    tau_b = float(tau_b)
    if v_strength == 0.0 or tau_b == 0.0:
        ratio = 0.0
        t_a = math.inf
    elif math.isinf(tau_b):
        ratio = math.inf
        t_a = 0.0
    else:
        ratio = v_strength * tau_b
        t_a = 1.0 / (v_strength * v_strength * tau_b)

    if ratio < 0.1:
        verdict = "pass"
    elif ratio < 1.0:
        verdict = "warn"
    else:
        verdict = "fail"
    return TimescaleReport(
        tau_b=tau_b,
        t_a_estimate=t_a,
        v_strength=v_strength,
        two_scale_ratio=ratio,
        verdict=verdict,
        non_decaying=non_decaying,
    )
