"""Monte Carlo and quadrature tools for moments of planar Brownian exit times."""
from __future__ import annotations

from .conformal import (Composed, HansenSpiral, HardyNormResult, Identity, Koebe, MobiusAuto, Rotation,
                        WedgePower, circular_mean, hardy_norm, hardy_norm_at, hardy_vs_moment,
                        image_membership_check, kernel_boundary_mean, map_from_dict, poisson_kernel)
from .errors import *  # noqa: F401,F403
from .estimators import (MomentAccumulator, MomentEstimate, TailIndexEstimate, burkholder_check,
                         estimate_moment, hill_tail_index, moment_sweep)
from .geometry import (BoundarySegment, Disk, Domain, HalfPlane, MobiusImage, SpiralComplement, SpiralSector,
                       Union, Wedge, boundary_grid, critical_exponent, domain_from_dict, largest_arc,
                       limiting_arc, load_domain, slit_plane)
from .gluing import (GlueProblem, GlueReport, alternating_exit, classify_boundary, estimate_boundary_moment,
                     estimate_r, glue, series_bound)
from .plcheck import (BoundedRational, Constant, ExpPower, Polynomial, PLVerdict, circular_mean_check,
                      function_from_dict, harmonic_measure_halfplane, harmonic_measure_mc, verify_pl)
from .rng import Stream
from .sampler import (ExitBatch, ExitSample, SamplerConfig, coupled_exit_pair, disk_exit_survival,
                      sample_exit, sample_exits, sample_unit_disk_exit_time)

__version__ = "1.0.0"
