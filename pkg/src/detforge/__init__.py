"""detforge: sample-based subspace diagonalization and phaseless AFQMC at
desk scale.

The package covers the full classical side of a hybrid pipeline: FCIDUMP
integrals, bitmask determinants, Slater-Condon matrix elements, Davidson and
heat-bath selected CI, LUCJ-style correlated states with configuration
sampling and recovery, phaseless auxiliary-field quantum Monte Carlo with
multi-determinant trials, and zero-variance linear extrapolation.
"""

from .afqmc import (
    AFQMCConfig,
    EstimatorSeries,
    Trial,
    Walker,
    WalkerEnsemble,
    local_energy,
    overlap,
    population_control,
    prepare_trial,
    propagate_step,
    reblock,
    run_afqmc,
)
from .determinant import (
    Determinant,
    ExcitationInfo,
    enumerate_space,
    enumerate_strings,
    excitation_info,
    from_bitstring,
    hartree_fock_determinant,
    occupied_orbitals,
    to_bitstring,
)
from .errors import (
    CapacityError,
    DegenerateFit,
    DetforgeError,
    DivergenceGuard,
    InsufficientData,
    InternalError,
    NotPSDError,
    ParseError,
    RunAbort,
    SymmetryError,
)
from .extrapolate import ExtrapolationInput, FitResult, fit_linear
from .fcidump import (
    Integrals,
    IntegralsBuilder,
    emit_fcidump,
    emit_fcidump_file,
    parse_fcidump,
    parse_fcidump_file,
)
from .hamiltonian import (
    CholeskyFactors,
    build_subspace_hamiltonian,
    cholesky_decompose,
    slater_condon,
)
from .lucj import (
    LUCJParams,
    SampleBatch,
    build_lucj_state,
    default_connectivity_mask,
    kl_divergence_objective,
    optimize_params,
    params_from_json,
    params_to_json,
    random_params,
    recover_configurations,
    sample_configurations,
    sqd_energy_objective,
    sqd_pipeline,
    subspace_from_samples,
    zero_params,
)
from .sci import (
    CIWavefunction,
    VarianceReport,
    davidson,
    diagonalize,
    energy_variance,
    hci_select,
    normalized_wavefunction,
    truncate_by_weight,
)

__version__ = "0.1.0"
