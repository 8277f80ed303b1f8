"""Minimum end-to-end power design for full-duplex MISO SWIPT systems.

The downlink is designed either jointly by a semidefinite relaxation with
a rank-one certificate (:mod:`fdswipt.jbps`) or by closed-form zero
forcing (:mod:`fdswipt.zf`); the uplink by alternating Wiener filters and
power control (:mod:`fdswipt.uplink`). :mod:`fdswipt.harness` runs Monte
Carlo sweeps over both.
"""

from . import conic
from .exceptions import (CapViolationWarning, ContractError, DegenerateChannel, InfeasibleError,
                         InfeasibleUplink, NonConvergence, RankDeficiencyWarning,
                         SingularMatrixError, SolverError)
from .harness import (ExperimentConfig, JointSolution, SweepResult, run_point, run_sweep,
                      solve_joint)
from .jbps import DownlinkSolution, build_sdr, certify, solve_downlink
from .linalg import hermitian_eig, null_space_basis, solve_hermitian_pd, spectral_norm
from .system import (ChannelRealization, RobustBounds, SystemParams, compute_bounds,
                     sample_channels)
from .uplink import UplinkSolution, min_uplink_power, uplink_solve, wiener_filter
from .zf import ZfSolution, zf_beamformer, zf_rho, zf_solve

__version__ = "0.1.0"
