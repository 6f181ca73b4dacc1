"""How well does the chain's ground state transmit a Bell pair?

Each cell of the ground state acts on the logical bond qubit as a depolarizing
step with survival weight f(theta). Stacking cells composes the steps, so the
cap qubits hold a Werner state with Bell weight f**ell. This script checks
that picture three ways: the closed-form single step, the channel obtained by
tracing a cell out of the ground-state isometry, and the explicit partial trace
of the assembled ground state for short chains.
"""
import numpy as np

from telegap import ModelParams
from telegap.ground_state import (
    assemble_ground_state,
    bell_fidelity,
    cap_density_matrix,
    depolarize_step,
    g0_isometry,
    isometry_channel,
    single_fidelity,
)
from telegap.tensor import partial_trace

theta = 1.56
f = single_fidelity(theta)
print(f"single cell: f({theta}) = {f:.9f}   (1 - f = {1 - f:.3e})")

# the channel read off the isometry agrees with the closed-form depolarizing step
rho = np.array([[0.8, 0.3], [0.3, 0.2]], dtype=complex)
diff = np.abs(isometry_channel(rho, g0_isometry(theta)) - depolarize_step(rho, theta).matrix).max()
print(f"isometry channel vs depolarizing step: max difference {diff:.1e}")

# short chains: explicit partial trace against the composed channel
for ell in (1, 2, 3):
    p = ModelParams(theta, 1.0, ell)
    psi = assemble_ground_state(p)
    explicit = partial_trace(psi, [0, p.shape.n_sites - 1]).matrix
    err = np.abs(explicit - cap_density_matrix(p).matrix).max()
    print(f"ell={ell}: state dimension {psi.shape.total_dim:6d}, cap state error {err:.1e}")

# long chains only need the 4 x 4 cap state
print("\n ell   Bell weight   <Phi+|rho|Phi+>")
for ell in (1, 10, 100, 1000, 5000):
    r = bell_fidelity(theta, ell)
    print(f"{ell:5d}   {r.bell_weight:.6f}      {r.phi_plus_overlap:.6f}")
ell_half = np.log(0.5) / np.log(f)
print(f"\nthe Bell weight halves after about {ell_half:.0f} cells")
