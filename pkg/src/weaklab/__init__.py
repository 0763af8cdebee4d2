"""weaklab: a desk-scale numerical laboratory for a four-fermion decay model.

Truncated multi-species fermionic Fock spaces, sparse Hamiltonian assembly
from momentum-space kernels, spectral scans, and executable checks of the
model's operator bounds and commutator estimates.
"""

from .errors import (
    ConfigurationError,
    InfraredGridError,
    KernelFormatError,
    KernelRegularityError,
    ResourceError,
    SolverError,
    ThresholdCollisionError,
    WeaklabError,
)
from .fock import (
    FockBasis,
    Mode,
    ModeTable,
    annihilator,
    build_basis,
    build_mode_table,
    creator,
    number_operator,
    smeared_annihilator,
)
from .model import (
    Kernel,
    PhysicalParams,
    ReducedKernel,
    assemble_H,
    assemble_H0,
    assemble_H_sigma,
    assemble_HI,
    infrared_cutoff,
    quark_decay_kernel,
    sharp_cutoff_kernel,
    smooth_gaussian_kernel,
)
from .spectral import (
    MourreRecord,
    SpectralReport,
    ThresholdSet,
    ground_state,
    mourre_bottom,
    spectral_window,
    thresholds,
)
from .checks import CheckResult

__version__ = "0.1.0"
