"""qplab: a numerical laboratory for quasiperiodic Schrodinger cocycles on T^2.

Torus dynamics (skew-shift and multi-frequency shift), Fourier potentials
with sub-analytic coefficient decay, SL(2,R) transfer products with log
scaling, Lyapunov-exponent and large-deviation measurements, a constructive
sublevel-set cover for transversal potentials, finite-box spectral
diagnostics, and a reproducible experiment harness.
"""

from .backend import HAVE_NUMBA, backend_name
from .cocycle import (
    AlmostInvariance,
    AvalancheReport,
    CocycleParams,
    MeanLE,
    OverflowRegimeError,
    ScaledProduct,
    TrotterGap,
    almost_invariance_defect,
    avalanche_residual,
    finite_le,
    mean_finite_le,
    orbit_blocks,
    scaling_factor,
    step_matrix,
    transfer_product,
    trotter_gap,
)
from .dynamics import (
    DiophantineParams,
    DiophantineReport,
    MultiShift,
    SkewShift,
    Torus2Point,
    check_diophantine,
    iterate,
    standard_frequencies,
    torus_distance,
)
from .potential import (
    FourierSeries2,
    GevreyParams,
    GevreyTailBound,
    TransversalityCertificate,
    TruncationPlan,
    gevrey_series,
    gevrey_tail_bound,
    preset_potential,
    transversality_certificate,
)

__version__ = "0.1.0"
