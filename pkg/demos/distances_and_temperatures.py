"""
Distance to passive and Gibbs states
====================================

Work as distance from the free set, measured by the relative entropy
(the passive monotone and the Gibbs monotone) and by the Tsallis family.
"""
import numpy as np

from ergokit.geometry import family_Mp, monotone_Mcp, monotone_Mp
from ergokit.spectra import Hamiltonian, random_state
from ergokit.workfn import ergotropy, free_energy

h = Hamiltonian(np.array([0.0, 0.5, 1.5]))
rho = random_state(3, seed=11)

mp = monotone_Mp(h, rho)
mcp = monotone_Mcp(h, rho)
print("ergotropy       ", ergotropy(h, rho))
print("free energy     ", free_energy(h, rho))
print("M_p             ", mp.value, "closest passive populations", mp.minimizer.populations)
print("M_cp            ", mcp.value)

# at nu = 1 the Tsallis family returns the ergotropy whatever alpha is
for alpha in (0.5, 1.0, 2.0):
    print(f"alpha={alpha}  nu=1  {family_Mp(h, rho, alpha, 1.0).value:.6f}")

# other exponents weight the divergence against the temperature differently
for nu in (0.0, 0.5):
    print(f"alpha=2.0  nu={nu}  {family_Mp(h, rho, 2.0, nu).value:.6f}")
