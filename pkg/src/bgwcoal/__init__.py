"""Coalescence times in continuous-time Bienayme-Galton-Watson processes."""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"

from .errors import (BGWError, ConvergenceError, DegenerateQsdError, DomainError, InsufficientPopulationError,
                     NotSubcriticalError, NumericalError, PopulationExplosionError, QuadratureError, SolverError,
                     TruncationError, UnsupportedMeasureError)
from .offspring import Criticality, OffspringMeasure, Regime
from .psi import SolverConfig, closed_form_psi, psi_at, psi_grid, psi_series
from .coalescence import (Variant, conservation_check, multivariate_bin_masses, multivariate_joint_density,
                          no_common_ancestor, pair_cdf, pair_density_point, pair_pgf_conditioned,
                          pair_pgf_density_conditioned)
from .qsd import YaglomLimit, qsd_pair_cdf, qsd_pair_point, yaglom
from .report import CoalescenceReport, ReportRow
from .simulate import GenealogyForest, SampleResult, run_replicas, sample_and_trace, simulate
from .empirical import EmpiricalCdf, empirical_multivariate, empirical_pair_cdf
from .validate import run_validation
