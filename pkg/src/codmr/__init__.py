"""Simulation and fitting of optically detected magnetic resonance in triplet color centers."""

__version__ = "0.1.0"

from .errors import CodmrError, DegenerateModelError, FrameError, StiffnessError, ValidationError
from .spin import (
    MU_B_MHZ_PER_T,
    EigenSystem,
    GTensor,
    MagneticField,
    Transition,
    ZfsParams,
    assemble_hamiltonian,
    eigensystem,
    spin1_operators,
    transitions,
)
from .crystal import (
    CUBIC_ROTATIONS,
    DefectFrame,
    LabFrameConfig,
    OrientationSet,
    orientation_preset,
    to_defect_frame,
)
from .spectrum import (
    FieldSweep,
    FrequencyGrid,
    LineShape,
    OdcrModel,
    OdmrSpectrum,
    ResonanceLine,
    cluster_frequencies,
    count_clusters,
    ensemble_resonances,
    field_sweep,
    odcr_background,
    synthesize_spectrum,
    write_field_sweep,
)
from .rates import (
    LEVELS,
    QUENCH_A,
    QUENCH_EA_MEV,
    LockinOutput,
    RateParams,
    RfCoupling,
    RfDrive,
    lockin_sweep,
    rate_matrix,
    simulate_lockin,
    steady_state,
    temperature_quench,
    transient,
)
from .fitting import (
    FitParam,
    FitProblem,
    FitResult,
    ModelConfig,
    detect_peaks,
    fit_params,
    model_spectrum,
    zfs_from_two_peaks,
)
from .optics import ct_energy_mev, fabry_perot_fsr, line_catalog, mev_to_nm, nm_to_mev
