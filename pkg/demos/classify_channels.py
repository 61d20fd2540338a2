"""
Which channels can never create work
====================================

Sample-based certificates for a few standard channels. A failing condition
comes with a concrete state where the monotone increases.
"""
import numpy as np

from ergokit.certify import classify
from ergokit.channels import dephasing, lambda_beta_map, coherent_gibbs, level_swap, thermalizing
from ergokit.spectra import Hamiltonian

h = Hamiltonian(np.array([0.0, 1.0, 2.0]))
channels = {
    "dephasing": dephasing(h, representation="phases"),
    "thermalizing": thermalizing(h, 1.0),
    "lambda_beta": lambda_beta_map(h, 1.0, coherent_gibbs(h, 1.0)),
    "swap": level_swap(h),
}

for name, ch in channels.items():
    rep = classify(ch, h, trials=300, starts=2, eta=False)
    verdicts = ", ".join(f"{v['condition']}:{v['status']}" for v in rep["verdicts"])
    print(f"{name:13s} passed={rep['passed']}  {verdicts}")
