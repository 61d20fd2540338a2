"""Ergotropy, free energy and the resource theories built on passive and Gibbs states."""

__version__ = "0.1.0"

from .exceptions import DomainError, PreconditionError, ValidationError
from .spectra import (
    INFINITE,
    GibbsState,
    Hamiltonian,
    PassiveState,
    dephase,
    energy,
    entropy,
    extraction_unitary,
    gibbs,
    is_passive,
    passive_rearrangement,
    random_passive,
    random_state,
    random_unitary,
    spectral,
    validate_state,
)
from .workfn import (
    beta_of_state,
    coherent_ergotropy,
    ergo_free_identity_gap,
    ergotropy,
    ergotropy_ncopy,
    free_energy,
)
from .geometry import (
    distance_to_free,
    family_Mcp,
    family_Mp,
    monotone_Mcp,
    monotone_Mp,
    noneq_temperature,
    relative_entropy,
    tsallis_divergence,
    tsallis_temperature_cp,
    tsallis_temperature_p,
)
from .channels import (
    ChannelFamily,
    KrausChannel,
    apply,
    dephasing,
    lambda_beta_map,
    mixture,
    partial_dephasing,
    random_channel,
    selective_outcomes,
    thermal_operation,
    thermalizing,
    unitary_channel,
)
