"""Reconstruction of purified process tensors from measured reduced densities.

The measurement oracle stands in for the laboratory: it answers reduced
density operators of the (hidden) PPT on contiguous site ranges, optionally
after a circuit of known window gates has been applied, either exactly or
from a finite number of projective samples in a fixed Pauli-product scheme.

The disentangling algorithm walks a window of R sites across the chain.
Each window's reduced density operator has support of dimension at most the
hidden bond, so a window unitary can rotate that support into the subspace
whose first site is |0>.  After f = N - R + 1 gates the state is a product
of |0>s with an entangled block on the trailing R - 1 sites; diagonalising
that block fixes the Schmidt vectors and values, the environment basis is
pinned to the computational one, and undoing the gates yields the state.

The variational route refits the site unitaries directly: the ansatz is a
sequentially generated state with parametric step unitaries (one shared
matrix in the time-independent case) and a final unitary on the
environment.  The step unitaries follow gradient ascent on the overlap
with a polar retraction back onto the unitary manifold; the final unitary
enters the overlap linearly and is therefore set to its exact maximiser at
every evaluation.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import (
    BoundViolationError,
    CapacityError,
    ConvergenceError,
    DimensionError,
    ValidationError,
)
from .models import OqeModel, SchmidtForm, random_haar_unitary, random_hermitian
from .ppt import (
    DENSE_STATE_GUARD,
    PROCESS_TENSOR_GUARD,
    PptMps,
    build_ppt,
    gauge_fidelity,
    mps_to_oqe,
    site_tensor_from_unitary,
    statevector_to_mps,
)
from .tensor_ops import (
    closest_isometry,
    complete_columns,
    fill_unassigned_columns,
    polar_unitary,
)

SUPPORT_TOL = 1e-10


# -- measurement oracle ------------------------------------------------------


class MeasurementOracle:
    """Simulated tomography primitive over a sealed hidden model.

    ``mode`` is "exact" or "sampled"; sampled mode draws ``shots``
    projective samples per reduced-density request, split over a fixed
    informationally complete Pauli-product basis (d = 2 only), and returns
    the re-Hermitised, trace-normalised linear-inversion estimate.
    ``query_log`` counts reduced-density requests.
    """

    def __init__(
        self,
        hidden_model: OqeModel,
        n_steps: int,
        mode: str = "exact",
        shots: int | None = None,
        seed: int | None = None,
        unsealed: bool = True,
    ):
        hidden_model.validate()
        if mode not in ("exact", "sampled"):
            raise ValidationError(f"unknown oracle mode {mode!r}")
        if mode == "sampled":
            if shots is None or shots < 1:
                raise ValidationError("sampled mode requires a positive shot count")
            if hidden_model.d != 2:
                raise ValidationError("the Pauli-product sampling scheme requires d = 2")
        self._model = hidden_model
        self._mps = build_ppt(hidden_model, n_steps)
        if self._mps.dense_size() > DENSE_STATE_GUARD:
            raise CapacityError("hidden PPT exceeds the dense statevector guard")
        d = hidden_model.d
        shape = (d * d,) * n_steps + (self._mps.env_dim,)
        self._state = self._mps.to_statevector().reshape(shape)
        self.d = d
        self.n_steps = n_steps
        self.mode = mode
        self.shots = shots
        self.query_log = 0
        self.unsealed = unsealed
        self._rng = np.random.default_rng(seed)

    # -- unsealed access (testing/diagnostics only) --

    def true_mps(self) -> PptMps:
        if not self.unsealed:
            raise ValidationError("oracle is sealed; the true PPT is not accessible")
        return self._mps

    def true_model(self) -> OqeModel:
        if not self.unsealed:
            raise ValidationError("oracle is sealed; the hidden model is not accessible")
        return self._model

    # -- measurement surface --

    def reduced_density(self, sites: tuple[int, int], circuit=None) -> np.ndarray:
        """Reduced density operator on the contiguous 1-based range ``sites``.

        ``circuit`` is a list of (start_site, window_unitary) gates applied
        to the state before reduction, simulating the disentangling gates a
        laboratory would physically apply.  Counts as one request.
        """
        a, b = int(sites[0]), int(sites[1])
        if not (1 <= a <= b <= self.n_steps):
            raise ValidationError(f"site range {sites} outside [1, {self.n_steps}]")
        width = b - a + 1
        if (self.d * self.d) ** width > PROCESS_TENSOR_GUARD:
            raise CapacityError(f"window of width {width} exceeds the dense guard")
        self.query_log += 1
        state = self._state
        if circuit:
            for start, gate in circuit:
                state = _apply_window(state, gate, start - 1, self.d * self.d)
        kept = list(range(a - 1, b))
        x = np.moveaxis(state, kept, range(width))
        x = x.reshape((self.d * self.d) ** width, -1)
        rho = x @ x.conj().T
        rho = (rho + rho.conj().T) / 2.0
        if self.mode == "exact":
            return rho
        return _pauli_sampled_estimate(rho, self.shots, self._rng)

    def initial_system_state(self) -> np.ndarray:
        """Reduced density operator of the system factor of the initial state."""
        psi = self._model.initial_state.reshape(self._model.d, self._model.D)
        return psi @ psi.conj().T

    def conditional(self, sys_vector: np.ndarray) -> tuple["MeasurementOracle", float]:
        """Oracle for the process conditioned on measuring the initial system
        state along ``sys_vector``; also returns the outcome probability."""
        x = np.asarray(sys_vector, dtype=np.complex128).reshape(-1)
        if x.size != self._model.d:
            raise DimensionError("conditioning vector must live on the system space")
        x = x / np.linalg.norm(x)
        y = x.conj() @ self._model.initial_state.reshape(self._model.d, self._model.D)
        prob = float(np.linalg.norm(y) ** 2)
        if prob < 1e-12:
            raise ValidationError("conditioning outcome has vanishing probability")
        y = y / np.linalg.norm(y)
        sys0 = np.zeros(self._model.d, dtype=np.complex128)
        sys0[0] = 1.0
        cond_model = OqeModel.create(
            self._model.d,
            self._model.D,
            list(self._model.unitaries),
            np.kron(sys0, y),
        )
        oracle = MeasurementOracle(
            cond_model,
            self.n_steps,
            mode=self.mode,
            shots=self.shots,
            seed=int(self._rng.integers(2**63)) if self.mode == "sampled" else None,
            unsealed=self.unsealed,
        )
        return oracle, prob


def reduced_density(oracle: MeasurementOracle, sites: tuple[int, int], circuit=None) -> np.ndarray:
    return oracle.reduced_density(sites, circuit=circuit)


def _apply_window(state: np.ndarray, gate: np.ndarray, start_axis: int, local_dim: int) -> np.ndarray:
    width = int(round(np.log(gate.shape[0]) / np.log(local_dim)))
    g = gate.reshape((local_dim,) * (2 * width))
    axes = list(range(start_axis, start_axis + width))
    out = np.tensordot(state, g, axes=[axes, list(range(width, 2 * width))])
    return np.moveaxis(out, list(range(-width, 0)), axes)


# -- sampled-mode estimator --------------------------------------------------

_BASIS_ROTATIONS = {
    "X": np.array([[1.0, 1.0], [1.0, -1.0]], dtype=np.complex128) / np.sqrt(2.0),
    "Y": np.array([[1.0, -1.0j], [1.0, 1.0j]], dtype=np.complex128) / np.sqrt(2.0),
    "Z": np.eye(2, dtype=np.complex128),
}

_PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=np.complex128),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=np.complex128),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=np.complex128),
}


def _pauli_sampled_estimate(rho: np.ndarray, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Linear-inversion estimate of ``rho`` from Pauli-product measurements.

    The total shot budget is split evenly over the 3^n basis settings of
    the n underlying qubits; every Pauli expectation is averaged over all
    settings compatible with it.
    """
    dim = rho.shape[0]
    n = int(round(np.log2(dim)))
    settings = list(itertools.product("XYZ", repeat=n))
    per_setting = max(1, shots // len(settings))
    parity = _parity_table(n)

    sums: dict[tuple[str, ...], float] = {}
    counts: dict[tuple[str, ...], int] = {}
    for setting in settings:
        rot = _kron_chain([_BASIS_ROTATIONS[c] for c in setting])
        p = np.real(np.einsum("ij,jk,ik->i", rot, rho, rot.conj()))
        p = np.clip(p, 0.0, None)
        p = p / p.sum()
        counts_vec = rng.multinomial(per_setting, p)
        phat = counts_vec / per_setting
        for mask in range(2**n):
            label = tuple(setting[q] if (mask >> (n - 1 - q)) & 1 else "I" for q in range(n))
            val = float(np.dot(phat, parity[:, mask]))
            sums[label] = sums.get(label, 0.0) + val
            counts[label] = counts.get(label, 0) + 1

    est = np.zeros((dim, dim), dtype=np.complex128)
    for label, total in sums.items():
        mean = total / counts[label]
        est += mean * _kron_chain([_PAULI[c] for c in label])
    est /= dim
    est = (est + est.conj().T) / 2.0
    return est / np.trace(est).real


def _kron_chain(mats) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _parity_table(n: int) -> np.ndarray:
    """(-1)**popcount(z & mask) for all outcomes z and qubit masks."""
    size = 2**n
    table = np.empty((size, size))
    for z in range(size):
        for mask in range(size):
            table[z, mask] = -1.0 if bin(z & mask).count("1") % 2 else 1.0
    return table


# -- reconstruction report ----------------------------------------------------


@dataclass
class ReconstructionReport:
    recovered_mps: PptMps
    recovered_model: OqeModel | None
    state_fidelity: float | None
    per_site_unitarity_residual: list[float]
    loss_trace: list[float] = field(default_factory=list)
    gauge_note: str = ""
    converged: bool = True
    queries: int = 0

    def to_json_dict(self) -> dict:
        doc = {
            "state_fidelity": self.state_fidelity,
            "per_site_unitarity_residual": self.per_site_unitarity_residual,
            "loss_trace": self.loss_trace,
            "gauge_note": self.gauge_note,
            "converged": self.converged,
            "queries": self.queries,
            "recovered_mps": self.recovered_mps.to_json_dict(),
        }
        if self.recovered_model is not None:
            doc["recovered_model"] = self.recovered_model.to_json_dict()
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


# -- disentangling tomography --------------------------------------------------


def window_size(d: int, env_bound: int) -> int:
    """Smallest R with (d^2)^(R-1) >= env_bound."""
    k, cap = 0, 1
    while cap < env_bound:
        cap *= d * d
        k += 1
    return k + 1


def disentangle_reconstruct(
    oracle: MeasurementOracle,
    N: int,
    D_bound: int,
    entangled_initial: bool = False,
    support_tol: float = SUPPORT_TOL,
) -> ReconstructionReport:
    """Reconstruct the PPT through the sliding-window disentangling circuit.

    ``D_bound`` bounds the hidden environment size; with
    ``entangled_initial`` the effective bound is ``d * D_bound`` to account
    for the absorbed initial system leg.  Exactly f + 1 reduced-density
    requests are issued: one per window plus one for the trailing block.
    """
    if N != oracle.n_steps:
        raise ValidationError(f"oracle answers {oracle.n_steps} steps, not {N}")
    d = oracle.d
    d2 = d * d
    bound = int(D_bound) * (d if entangled_initial else 1)
    if bound < 1:
        raise ValidationError("environment bound must be positive")
    R = window_size(d, bound)
    if N < R:
        raise ValidationError(f"need at least R={R} steps for environment bound {bound}")
    f = N - R + 1
    limit = d2 ** (R - 1)
    notes: list[str] = []

    gates: list[tuple[int, np.ndarray]] = []
    queries_before = oracle.query_log
    for j in range(1, f + 1):
        rho_w = oracle.reduced_density((j, j + R - 1), circuit=gates)
        evals, vecs = _eigh_descending(rho_w)
        n_support = int(np.count_nonzero(evals > support_tol))
        n_support = max(n_support, 1)
        if n_support > limit:
            if oracle.mode == "exact":
                raise BoundViolationError(
                    f"window {j}: support dimension {n_support} exceeds {limit}; "
                    "the environment bound is too small"
                )
            notes.append(
                f"window {j}: sampled support {n_support} truncated to the bound {limit}"
            )
            n_support = limit
        if n_support > 1 and np.any(np.abs(np.diff(evals[:n_support])) < 1e-10):
            notes.append(f"window {j}: near-degenerate support spectrum, canonical ordering used")
        basis = complete_columns(vecs[:, :n_support])
        gates.append((j, basis.conj().T))

    if f < N:
        rho_tail = oracle.reduced_density((f + 1, N), circuit=gates)
        evals, vecs = _eigh_descending(rho_tail)
        keep = int(np.count_nonzero(evals > max(support_tol, 0.0)))
        keep = min(max(keep, 1), limit)
        lam = np.sqrt(np.clip(evals[:keep], 0.0, None))
        lam = lam / np.linalg.norm(lam)
        tail = vecs[:, :keep] * lam  # columns lam_s |a_s>
        env_dim = keep
        block = tail.reshape((d2,) * (R - 1) + (env_dim,))
    else:
        # Single-site windows disentangle everything; the trailing query is a
        # consistency check on the last site.
        oracle.reduced_density((N, N), circuit=gates)
        env_dim = 1
        block = np.ones((1,), dtype=np.complex128)
        lam = np.ones(1)

    shape = (d2,) * N + (env_dim,)
    psi = np.zeros(shape, dtype=np.complex128)
    psi[(0,) * f] = block
    for j, gate in reversed(gates):
        psi = _apply_window(psi, gate.conj().T, j - 1, d2)

    mps = statevector_to_mps(psi.reshape(-1), d, N, env_dim, max_bond=env_dim)
    model, residuals = mps_to_oqe(mps)
    fidelity = gauge_fidelity(mps, oracle.true_mps()) if oracle.unsealed else None
    notes.append("environment basis pinned to the computational frame")
    return ReconstructionReport(
        recovered_mps=mps,
        recovered_model=model,
        state_fidelity=fidelity,
        per_site_unitarity_residual=residuals,
        gauge_note="; ".join(notes),
        queries=oracle.query_log - queries_before,
    )


def _eigh_descending(rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigendecomposition with a deterministic phase convention."""
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2.0)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    v = v[:, order]
    for k in range(v.shape[1]):
        idx = int(np.argmax(np.abs(v[:, k])))
        if abs(v[idx, k]) > 0:
            v[:, k] = v[:, k] * (v[idx, k].conjugate() / abs(v[idx, k]))
    return w, v


# -- variational fitting -------------------------------------------------------


def _ansatz_sites(u_list, d: int, D: int, n_steps: int) -> list[np.ndarray]:
    sites = []
    for n in range(n_steps):
        u = u_list[0] if len(u_list) == 1 else u_list[n]
        sites.append(site_tensor_from_unitary(u, d, D))
    sites[0] = sites[0][0:1]  # initial environment pinned to |0>
    return sites


def _forward_envs(target_chain, boundary, ansatz_sites):
    env = np.outer(boundary.conj(), np.ones(1, dtype=np.complex128))
    envs = [env]
    for tn, an in zip(target_chain, ansatz_sites):
        env = np.einsum("pq,poir,qois->rs", env, tn.conj(), an)
        envs.append(env)
    return envs


def _fit_overlap_and_grads(target: PptMps, u_list, of, d, D, shared: bool):
    chain = target.chain()
    n_steps = len(chain)
    sites = _ansatz_sites(u_list, d, D, n_steps)
    fwd = _forward_envs(chain, target.boundary_vector(), sites)
    overlap = complex(np.einsum("pq,pq", fwd[-1], of))
    grads_u = _backward_grads(chain, sites, of, fwd, d, D, shared, len(u_list))
    return overlap, grads_u, fwd[-1]


def _backward_grads(chain, sites, of, fwd, d, D, shared, u_count):
    grads_u = [np.zeros((d * D, d * D), dtype=np.complex128) for _ in range(u_count)]
    right = of
    for n in range(len(chain), 0, -1):
        tn, an = chain[n - 1], sites[n - 1]
        g = np.einsum("pq,poir,rs->qois", fwd[n - 1], tn.conj(), right)
        h = g.transpose(1, 3, 2, 0).reshape(d * an.shape[3], d * an.shape[0]) / np.sqrt(d)
        target_idx = 0 if shared else n - 1
        if n > 1:
            grads_u[target_idx] += h
        else:  # boundary site, left bond pinned to |0>: columns (i, alpha=0)
            for i in range(d):
                grads_u[target_idx][:, i * D] += h[:, i]
        if n > 1:
            right = np.einsum("poir,qois,rs->pq", tn.conj(), an, right)
    return grads_u


def _optimal_final_unitary(lmat: np.ndarray) -> tuple[np.ndarray, float]:
    """Final environment unitary maximising Re<target|ansatz>.

    The overlap is linear in the final unitary, Re sum Of[p,q] L[p,q], so
    the maximiser follows from the SVD and the attained value is the
    nuclear norm of L.
    """
    u_, s_, vh_ = np.linalg.svd(lmat.T)
    return (u_ @ vh_).conj().T, float(s_.sum())


def _retract(u: np.ndarray, direction: np.ndarray, step: float) -> np.ndarray:
    m = u + step * direction
    u_, s, vh = np.linalg.svd(m)
    return u_ @ vh


def variational_fit(
    target: PptMps,
    N: int,
    D: int,
    time_independent: bool,
    seed=0,
    warm_start: tuple[list[np.ndarray], np.ndarray] | None = None,
    max_iter: int = 400,
    success_tol: float = 1e-10,
    n_restarts: int = 5,
) -> ReconstructionReport:
    """Fit parametric step unitaries (plus a final environment unitary) to a
    target PPT by gradient ascent on the overlap with polar retraction.

    The warm start defaults to the polar projections of the reshaped target
    site matrices, with the environment gauge aligned so the ansatz initial
    state |0> is consistent.  Restarts perturb the warm start; the best loss
    wins.  The fit is not deterministic in general and may stall in a local
    minimum, in which case the report flags ``converged = False``.
    """
    if N != target.n_steps:
        raise ValidationError(f"target has {target.n_steps} steps, not {N}")
    if target.env_dim != D:
        raise DimensionError(f"target environment dimension {target.env_dim} != D={D}")
    if target.canonical != "right":
        from .ppt import to_right_canonical

        target = to_right_canonical(target)
    d = target.d
    rng = np.random.default_rng(seed)

    if warm_start is not None:
        u0, of0 = [u.copy() for u in warm_start[0]], warm_start[1].copy()
        residuals: list[float] = []
    else:
        u0, of0, residuals = _warm_start(target, d, D, time_independent)
    if time_independent and len(u0) != 1:
        raise ValidationError("time-independent fit takes a single warm-start unitary")
    if not time_independent and len(u0) != N:
        raise ValidationError(f"time-dependent fit takes {N} warm-start unitaries")

    nt2 = target.norm() ** 2
    best = None
    for attempt in range(n_restarts + 1):
        if attempt == 0:
            u_list = [u.copy() for u in u0]
        elif attempt <= (n_restarts + 1) // 2:  # perturb the warm start
            scale = 0.1 * attempt
            u_list = [
                u @ scipy.linalg.expm(1j * scale * random_hermitian(u.shape[0], rng))
                for u in u0
            ]
        else:  # fresh random basins
            u_list = [random_haar_unitary(u.shape[0], rng) for u in u0]
        of_box = [of0.copy()]
        trace = _descend(target, u_list, of_box, d, D, time_independent, nt2, max_iter)
        if best is None or trace[-1] < best[0]:
            best = (trace[-1], [u.copy() for u in u_list], of_box[0].copy(), trace)
        if best[0] < success_tol:
            break

    loss, u_list, of, trace = best
    mps = _ansatz_mps(u_list, of, d, D, N)
    psi0 = np.zeros(d * D, dtype=np.complex128)
    psi0[0] = 1.0
    model = OqeModel.create(d, D, u_list, psi0)
    note = "ansatz initial state fixed to |0>; recovered unitaries carry an environment gauge"
    converged = loss < success_tol
    if not converged:
        note += f"; stalled at loss {loss:.3e} after {n_restarts} restarts"
    return ReconstructionReport(
        recovered_mps=mps,
        recovered_model=model,
        state_fidelity=gauge_fidelity(mps, target),
        per_site_unitarity_residual=residuals,
        loss_trace=trace,
        gauge_note=note,
        converged=converged,
    )


def _descend(target, u_list, of_box, d, D, shared, nt2, max_iter) -> list[float]:
    """Gradient descent on the step unitaries with polar retraction.

    The final environment unitary enters the overlap linearly, so it is set
    to its exact maximiser at every evaluation; the step-unitary gradient
    taken at that point is the gradient of the envelope.
    """
    chain = target.chain()
    boundary = target.boundary_vector()

    def evaluate(ul):
        sites = _ansatz_sites(ul, d, D, len(chain))
        fwd = _forward_envs(chain, boundary, sites)
        of, nuclear = _optimal_final_unitary(fwd[-1])
        return nt2 + 1.0 - 2.0 * nuclear, of, sites, fwd

    loss, of, sites, fwd = evaluate(u_list)
    grads = _backward_grads(chain, sites, of, fwd, d, D, shared, len(u_list))
    step = 0.2
    trace = [loss]
    for _ in range(max_iter):
        if loss < 1e-14 or step < 1e-12:
            break
        cand_u = [_retract(u, g.conj(), step) for u, g in zip(u_list, grads)]
        cand_loss, cand_of, cand_sites, cand_fwd = evaluate(cand_u)
        if cand_loss < loss - 1e-16:
            u_list[:] = cand_u
            loss, of, sites, fwd = cand_loss, cand_of, cand_sites, cand_fwd
            trace.append(loss)
            grads = _backward_grads(chain, sites, of, fwd, d, D, shared, len(u_list))
            step = min(step * 1.5, 2.0)
        else:
            step *= 0.5
    if trace[-1] != loss:
        trace.append(loss)
    of_box[0] = of
    return trace


def _ansatz_mps(u_list, of, d, D, n_steps) -> PptMps:
    sites = _ansatz_sites(u_list, d, D, n_steps)
    last = np.einsum("aoib,cb->aoic", sites[-1], of)
    sites[-1] = last
    return PptMps(sites=tuple(sites), d=d, canonical="right")


def _warm_start(target: PptMps, d: int, D: int, time_independent: bool):
    """Polar warm start from the reshaped target sites, gauge aligned.

    For the time-independent ansatz the shared unitary is the polar mean of
    the bulk site matrices; the initial environment vector implied by the
    boundary site is rotated onto |0>, which also fixes the final gauge
    unitary.
    """
    model, residuals = mps_to_oqe(target)
    if model.D != D:
        raise DimensionError(f"target bond dimension {model.D} incompatible with D={D}")
    if not time_independent:
        return list(model.unitaries), np.eye(D, dtype=np.complex128), residuals

    if len(model.unitaries) >= 2:
        from .exceptions import SingularityError

        try:
            u_shared = polar_unitary(np.mean(np.stack(model.unitaries[1:]), axis=0))
        except SingularityError:  # wildly inconsistent site gauges average to ~0
            u_shared = model.unitaries[1]
    else:
        u_shared = model.unitaries[0]
    # Initial environment vector in the shared gauge, read off the boundary site.
    t1 = target.sites[0]
    v = np.sqrt(d) * t1.transpose(1, 3, 2, 0).reshape(d * t1.shape[3], d)
    if t1.shape[3] < D:
        v = np.vstack([v, np.zeros((d * (D - t1.shape[3]), d), dtype=np.complex128)])
    uv = u_shared.conj().T @ v  # (i', beta), i -> delta_{i', i} psi_beta
    psi = np.zeros(D, dtype=np.complex128)
    for i in range(d):
        psi += uv[i * D : (i + 1) * D, i]
    nrm = np.linalg.norm(psi)
    if nrm < 1e-8:
        return [u_shared], np.eye(D, dtype=np.complex128), residuals
    psi /= nrm
    w = complete_columns(psi.reshape(-1, 1))
    lifted = np.kron(np.eye(d), w)
    return [lifted.conj().T @ u_shared @ lifted], w, residuals


def predict_future(report: ReconstructionReport, n_future: int) -> PptMps:
    """Extend a time-independent recovered model to ``n_future`` steps."""
    from .exceptions import UnsupportedPredictionError

    if report.recovered_model is None:
        raise UnsupportedPredictionError("report carries no recovered model")
    if not report.recovered_model.time_independent:
        raise UnsupportedPredictionError("prediction requires a time-independent model")
    return build_ppt(report.recovered_model, n_future)


# -- entangled initial states ---------------------------------------------------


def reconstruct_entangled_initial(
    oracle: MeasurementOracle,
    D_bound: int | None = None,
    outcome_tol: float = 1e-6,
    fit_tol: float = 1e-9,
) -> tuple[SchmidtForm, OqeModel]:
    """Recover an entangled initial state together with the step unitaries.

    Measuring the initial system state in its eigenbasis collapses the
    environment to one pure branch per outcome.  The first branch is
    tomographed and fixes the step unitaries, with the recovered
    environment basis pinned so that branch starts in |0>.  Every further
    branch is tomographed and fitted while the later step unitaries are
    held fixed; the free parameters are the first-step injection of the new
    branch (the step unitary applied to the unknown initial environment
    vector, which is the identifiable combination) together with a final
    environment unitary.  Recovered branches are installed on successive
    computational basis vectors, orthogonal to all previous ones, so the
    assembled initial state is sum_s lambda_s |x_s> |s>.
    """
    rho_s = oracle.initial_system_state()
    evals, xs = _eigh_descending(rho_s)
    lam = np.sqrt(np.clip(evals, 0.0, None))
    n_out = max(int(np.count_nonzero(lam > outcome_tol)), 1)
    lam = lam[:n_out] / np.linalg.norm(lam[:n_out])
    xs = xs[:, :n_out]
    if D_bound is None:
        D_bound = oracle.true_model().D

    cond0, _ = oracle.conditional(xs[:, 0])
    rep0 = disentangle_reconstruct(cond0, oracle.n_steps, D_bound)
    d = oracle.d
    D0 = rep0.recovered_model.D
    if D0 < n_out:
        raise ConvergenceError(
            f"recovered environment dimension {D0} cannot hold {n_out} branches"
        )
    later_sites = [
        site_tensor_from_unitary(u, d, D0) for u in rep0.recovered_model.unitaries[1:]
    ]
    injections = [_branch_injection(rep0.recovered_mps.sites[0], d, D0)]

    for s in range(1, n_out):
        cond, _ = oracle.conditional(xs[:, s])
        rep = disentangle_reconstruct(cond, oracle.n_steps, D_bound)
        inj, loss = _fit_branch_injection(rep.recovered_mps, later_sites, d, D0)
        if loss > fit_tol and oracle.mode == "exact":
            raise ConvergenceError(
                f"recovered {s}/{n_out} outcomes; the conditional fit for outcome {s} "
                f"stalled at loss {loss:.3e}",
                residual=loss,
            )
        injections.append(inj)

    u1 = _assemble_first_unitary(injections, d, D0)
    u_list = [u1, *rep0.recovered_model.unitaries[1:]]
    env_basis = np.eye(D0, dtype=np.complex128)[:, :n_out]
    psi = np.zeros(d * D0, dtype=np.complex128)
    for s in range(n_out):
        psi += lam[s] * np.kron(xs[:, s], env_basis[:, s])
    model = OqeModel.create(d, D0, u_list, psi)
    form = SchmidtForm(lambdas=lam, sys_basis=xs, env_basis=env_basis)
    return form, model


def _branch_injection(site1: np.ndarray, d: int, D: int) -> np.ndarray:
    """First-step injection isometry L[(o, b), i] = sqrt(d) B_1[0, o, i, b]."""
    inj = np.sqrt(d) * site1.transpose(1, 3, 2, 0).reshape(d * site1.shape[3], d)
    if site1.shape[3] < D:
        pad = np.zeros((d * D, d), dtype=np.complex128)
        pad_view = pad.reshape(d, D, d)
        pad_view[:, : site1.shape[3], :] = inj.reshape(d, site1.shape[3], d)
        inj = pad
    return inj


def _fit_branch_injection(target: PptMps, later_sites, d: int, D: int):
    """Best first-step injection isometry and final environment unitary
    matching ``target``, with the later step tensors held fixed.

    The overlap is linear in both unknowns, so alternating closed-form
    updates (closest isometry and polar factor) converge in a few rounds.
    """
    if len(later_sites) != target.n_steps - 1:
        raise DimensionError("later-site count does not match the target length")
    chain = target.chain()
    nt2 = target.norm() ** 2
    of = np.eye(D, dtype=np.complex128)
    inj = None
    loss = np.inf
    for _ in range(100):
        # backward environment through the fixed later sites
        right = of
        for n in range(len(chain), 1, -1):
            right = np.einsum(
                "poir,qois,rs->pq", chain[n - 1].conj(), later_sites[n - 2], right
            )
        g1 = np.einsum("p,poir,rb->oib", target.boundary_vector().conj(), chain[0].conj(), right)
        grad_inj = g1.transpose(0, 2, 1).reshape(d * D, d) / np.sqrt(d)
        inj = closest_isometry(grad_inj.conj())
        first = (inj.reshape(d, D, d) / np.sqrt(d)).transpose(0, 2, 1)  # (o, i, b)
        sites = [first[np.newaxis], *later_sites]
        env = np.outer(target.boundary_vector().conj(), np.ones(1))
        for tn, an in zip(chain, sites):
            env = np.einsum("pq,poir,qois->rs", env, tn.conj(), an)
        u_, _, vh_ = np.linalg.svd(env.T)
        of = (u_ @ vh_).conj().T
        overlap = complex(np.einsum("pq,pq", env, of))
        new_loss = nt2 + 1.0 - 2.0 * overlap.real
        if abs(loss - new_loss) < 1e-15:
            loss = new_loss
            break
        loss = new_loss
    return inj, loss


def _assemble_first_unitary(injections, d: int, D: int) -> np.ndarray:
    """First step unitary with branch s installed on columns (i, e_s).

    The collected injection columns are jointly re-orthonormalised (they
    are orthogonal across branches up to reconstruction error) and the
    remaining columns completed deterministically.
    """
    n_out = len(injections)
    block = np.column_stack([inj[:, i] for i in range(d) for inj in injections])
    block = closest_isometry(block)
    full = np.zeros((d * D, d * D), dtype=np.complex128)
    assigned = np.zeros(d * D, dtype=bool)
    col = 0
    for i in range(d):
        for s in range(n_out):
            full[:, i * D + s] = block[:, col]
            assigned[i * D + s] = True
            col += 1
    return fill_unassigned_columns(full, assigned)
