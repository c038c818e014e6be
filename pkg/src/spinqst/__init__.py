"""Quantum state transfer in engineered spin chains.

Builds one-excitation Hamiltonians for short-range Heisenberg and
long-range dipolar chains, evolves a single excitation exactly, optimizes
couplings with the pivot method and computes spectral diagnostics.
"""

from .analysis import (GapLadder, LocalizationProfile, OrderReport, gap_ladder,
                       localization_profile, nearest_odd, order_report)
from .chain import (D_MIN, ChainSpec, Model, OneExcitationHamiltonian, build_hamiltonian,
                    build_long_range, build_short_range, homogeneous_baseline)
from .dynamics import (EvolvedState, SpectralDecomposition, TimeSeries, averaged_fidelity,
                       count_local_maxima, decompose, evolve, ipr, pretty_good_time,
                       sample_series, state_fidelity, transferred_population)
from .errors import CapacityError, NumericalError, ValidationError
from .pivot import (HypercubeSchedule, OptimizerRun, Parameterization, PivotConfig, cost,
                    optimize_counts, pivot_step, run_pivot, run_schedule, suboptimal_snapshots)

__version__ = "0.1.0"
