"""Stationary environment states and the memory complexity of a process.

Iterating the transfer map drives the environment to its stationary state;
the Renyi entropy (base 2) of that state measures how much quantum memory
the process consumes.  For generic evolutions the values are known in
closed form: log2(D) for product initial states, plus the entropy of the
reduced initial system state when system and environment start entangled.
"""

import numpy as np

import pptlab as pl

print("--- separable initial states: complexity = log2 D ---")
for D in (2, 3, 4):
    model = pl.random_separable_model(2, D, seed=D)
    rho, steps, degenerate = pl.stationary_state(model)
    for alpha in (0.5, 1.0, 2.0):
        value = pl.renyi_complexity(rho, alpha)
        print(f"D={D} alpha={alpha}: {value:.9f} (log2 D = {np.log2(D):.9f})")

print()
print("--- entangled initial states add the initial system entropy ---")
for lam2 in ([0.5, 0.5], [0.9, 0.1]):
    model = pl.random_entangled_model(2, 2, seed=3, lambdas=np.sqrt(lam2))
    result = pl.theorem1_check(model, alpha=2.0)
    print(
        f"lambda^2={lam2}: measured {result.measured:.9f}, "
        f"predicted {result.predicted:.9f}, pass={result.passed}"
    )
    rho, steps, degenerate = pl.stationary_state(model)
    print(
        f"  stationary eigenvalues {np.round(np.linalg.eigvalsh(rho), 6)}"
        f" (degenerate transfer spectrum: {degenerate}, {steps} iterations)"
    )

print()
print("--- the transfer matrix behind it ---")
model = pl.random_separable_model(2, 2, seed=1)
tm = pl.model_transfer_matrix(model)
iD = np.eye(2) / 2
print("spectral radius:     ", tm.spectral_radius())
print("I/D left fixed point:", np.max(np.abs(tm.apply_left(iD) - iD)))
print("I/D right fixed point:", np.max(np.abs(tm.apply_right(iD) - iD)))

# How long until the process forgets its initial state?
print("stationarity onset (fidelity 1-1e-8):", pl.stationarity_onset(model, tol=1e-8))
