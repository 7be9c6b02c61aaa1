"""Mean-field Bose gas laboratory.

Gross-Pitaevskii ground states, Bogoliubov excitation spectra, truncated
Fock-space exact diagonalization, coherent-state (de Finetti) checks and the
time-dependent counterparts, all on small discretized model spaces.
"""

__version__ = "0.1.0"

CSV_HEADER = "# meanfield-bose-lab v1"

from .model import (  # noqa: F401
    DIRICHLET,
    PERIODIC,
    Interaction,
    ModelConfig,
    ModelSpace,
    OneBodyOperator,
    WaveFunction,
    build_model,
    convolve_density,
    make_interaction,
    make_one_body,
)
