"""Shared helpers and independent oracles for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from pptlab import MultiTimeObservable, OqeModel
from pptlab.models import random_hermitian


def random_observable(rng, d, n_steps, n_insertions=2):
    """Random Hermitian insertions at strictly increasing steps."""
    steps = sorted(rng.choice(np.arange(1, n_steps + 1), size=n_insertions, replace=False))
    return MultiTimeObservable.create(
        [(int(s), random_hermitian(d * d, rng)) for s in steps]
    )


def embed_environment(model: OqeModel, iso: np.ndarray) -> OqeModel:
    """Lift a model through an environment isometry S (columns orthonormal).

    The step unitaries become (I (x) S) U (I (x) S)^dag plus the identity on
    the orthogonal complement, and the initial state is mapped by I (x) S.
    All physical predictions are unchanged.
    """
    D_new = iso.shape[0]
    lift = np.kron(np.eye(model.d), iso)
    proj = lift @ lift.conj().T
    us = [
        lift @ u @ lift.conj().T + np.eye(model.d * D_new) - proj for u in model.unitaries
    ]
    psi = lift @ model.initial_state
    return OqeModel.create(model.d, D_new, us, psi)


def random_env_isometry(rng, D_from: int, D_to: int) -> np.ndarray:
    """Haar-random isometry with D_from orthonormal columns in C^{D_to}."""
    z = rng.standard_normal((D_to, D_from)) + 1j * rng.standard_normal((D_to, D_from))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))[np.newaxis, :]


def dense_ppt_vector(model: OqeModel, N: int) -> np.ndarray:
    """Statevector over (o_1, i_1, ..., o_N, i_N, env) by explicit circuit replay.

    Independent of the MPS construction: starts from the joint initial
    state, appends maximally entangled pairs and applies the step unitaries
    with plain tensordot calls.  For separable initial states the system
    factor is projected out (it never evolves), matching the split-off
    convention of the MPS route; entangled initial states keep the full
    joint space as the effective environment.
    """
    d, D = model.d, model.D
    pair = np.eye(d, dtype=np.complex128) / np.sqrt(d)
    if model.entangled:
        state = model.initial_state.reshape(d, D)  # (o0, env) kept jointly
        env_axes = (0, 1)
    else:
        form = model.initial_schmidt()
        state = form.env_basis[:, 0].reshape(D)
        env_axes = (0,)
    for n in range(1, N + 1):
        u = np.asarray(model.unitary_at(n)).reshape(d, D, d, D)
        state = np.tensordot(state, pair, axes=0)
        state = np.tensordot(state, u, axes=[[-3, -2], [3, 2]])
        state = np.moveaxis(state, -2, -3)
    # axes now: [o0 if entangled], o_1, i_1, ..., o_N, i_N, env; for the
    # entangled case fold (o0, env) into one trailing effective leg.
    if model.entangled:
        state = np.moveaxis(state, 0, -2)  # (..., o0, env)
        state = state.reshape(state.shape[:-2] + (d * D,))
    return state.reshape(-1)


def schmidt_spectra_dense(vec: np.ndarray, site_dims: list[int]) -> list[np.ndarray]:
    """Singular values across every cut of a dense state, by direct SVD."""
    spectra = []
    left = 1
    total = int(np.prod(site_dims))
    for dim in site_dims[:-1]:
        left *= dim
        mat = vec.reshape(left, total // left)
        spectra.append(np.linalg.svd(mat, compute_uv=False))
    return spectra


def _replay_branch(model: OqeModel, env_vec: np.ndarray, k: int) -> np.ndarray:
    """Replay k circuit steps from a pure (true-environment) branch vector.

    Returns the branch state as a matrix (physical configs, env).
    """
    d, D = model.d, model.D
    pair = np.eye(d, dtype=np.complex128) / np.sqrt(d)
    state = env_vec.reshape(D)
    for n in range(1, k + 1):
        u = np.asarray(model.unitary_at(n)).reshape(d, D, d, D)
        state = np.tensordot(state, pair, axes=0)
        state = np.tensordot(state, u, axes=[[-3, -2], [3, 2]])
        state = np.moveaxis(state, -2, -3)
    return state.reshape(-1, D)


def partial_process_tensor(model: OqeModel, rho_env: np.ndarray, k: int) -> np.ndarray:
    """Dense k-step process tensor given the current environment state.

    Decomposes rho_env into pure branches (on the effective environment:
    absorbed system factor first for entangled models), replays the circuit
    for each branch and sums the resulting process tensors.
    """
    d, D = model.d, model.D
    D_eff = rho_env.shape[0]
    evals, vecs = np.linalg.eigh((rho_env + rho_env.conj().T) / 2.0)
    out = np.zeros((d ** (2 * k), d ** (2 * k)), dtype=np.complex128)
    for w, v in zip(evals, vecs.T):
        if w < 1e-14:
            continue
        if D_eff == D:
            x = _replay_branch(model, v, k)
        else:  # effective environment (s_abs, env): evolve each s_abs slice
            branch = v.reshape(d, D)
            x = np.stack([_replay_branch(model, branch[s], k) for s in range(d)], axis=1)
            x = x.reshape(-1, d * D)
        out += w * (x @ x.conj().T)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
