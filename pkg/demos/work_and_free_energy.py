"""
Extractable work of a qutrit
============================

Unitary work (ergotropy) against nonequilibrium free energy, and how the
gap between them closes when many copies are processed together.
"""
import numpy as np

from ergokit.spectra import Hamiltonian, gibbs
from ergokit.workfn import beta_of_state, coherent_ergotropy, ergotropy, ergotropy_ncopy, free_energy

h = Hamiltonian(np.array([0.0, 1.0, 2.0]))

# a population-inverted diagonal state
rho = np.diag([0.1, 0.6, 0.3])
print("ergotropy      ", ergotropy(h, rho))
print("free energy    ", free_energy(h, rho))
print("matched beta   ", beta_of_state(h, rho).beta)

# many copies: work per copy climbs toward the free energy
for n in (1, 2, 4, 8):
    print(f"n={n}  work per copy {ergotropy_ncopy(h, rho, n) / n:.6f}")

# coherence adds work on top of the dephased populations
psi = np.ones(3) / np.sqrt(3)
pure = np.outer(psi, psi.conj())
print("coherent part  ", coherent_ergotropy(h, pure))

# equilibrium carries nothing
print("Gibbs state    ", ergotropy(h, gibbs(h, 1.0).matrix), free_energy(h, gibbs(h, 1.0).matrix))
