"""Approximate MRI pulse-sequence forward models.

The package synthesizes brain-image intensities from tissue NMR maps under
three-parameter approximations of common pulse sequences, estimates those
parameters from a single image's tissue class means, and emits
contrast-augmented training batches plus multi-acquisition consistency
metrics.
"""

from .augment import (
    PatchSpec,
    Subject,
    assemble_minibatch,
    emit_batches,
    epoch_schedule,
    extract_patch,
    synthesis_norm,
    synthesize_patch,
)
from .batchfile import (
    BatchRecord,
    Provenance,
    RegressionRecord,
    read_psab,
    read_psbr,
)
from .estimate import (
    FieldTransform,
    TissueNMR,
    TissueTable,
    build_field_transform,
    design_matrix,
    estimate_corpus,
    estimate_theta,
    estimate_theta_from_volume,
    field_transform_residual,
    map_theta,
    packaged_table,
    read_tissue_table,
)
from .grid import ParamGrid, build_grid, enumerate_grid, sample_uniform
from .metrics import (
    StructureSet,
    coefficient_of_variation,
    dice,
    signed_relative_difference,
    structure_volumes,
)
from .relaxometry import (
    MefAcquisition,
    export_regression_pairs,
    fit_rho_t1,
    solve_t2,
    synthesize_gamma_a,
)
from .sequences import (
    SequenceKind,
    T1TermFit,
    TheoreticalFlashParams,
    TheoreticalT2SpaceParams,
    ThetaSet,
    approx_intensity,
    approx_log_intensity,
    fit_approximation_to_theory,
    flash_theoretical,
    t2space_theoretical,
    theoretical_t1_term,
)
from .tissue import ClassMeans, GmmFit, assign_tissues, fit_gmm3
from .volume import (
    BrainMask,
    Intent,
    NMRMaps,
    Volume,
    conform,
    read_nifti,
    scale_unit,
    standardize_wm,
    write_nifti,
)

__version__ = "0.1.0"
