"""Nonextensive (Tsallis) statistical models of financial markets.

Maximum-entropy investor distributions under q-deformed statistics, their
mean-field self-consistency, Monte Carlo price series and q-Gaussian fits.
"""

from .continuous_market import JointDensity, JointParams, JointSolution, joint_energy, solve_joint
from .errors import DomainError, InfeasibleError, NemlabError, NumericalError
from .fit import FitResult, QGaussian, fit_qgaussian, histogram, qgaussian_pdf, sample_qgaussian
from .maxent import DiscreteDistribution, GridDistribution, QuadSpec, build_discrete, build_grid
from .qmath import QParams, escort, q_exp, q_expectation, q_log, tsallis_entropy
from .simulate import PriceSeries, SimConfig, run_ensemble, run_series, sample_investors
from .spin_market import (
    MeanFieldSolution,
    ModelParams,
    bifurcation_scan,
    brute_force_full_model,
    price_change_from_bias,
    self_consistent_bias,
)
from .xy_market import XYParams, XYSolution, solve_order_parameter, xy_critical_scan

__version__ = "0.1.0"

__all__ = [
    "DiscreteDistribution",
    "DomainError",
    "FitResult",
    "GridDistribution",
    "InfeasibleError",
    "JointDensity",
    "JointParams",
    "JointSolution",
    "MeanFieldSolution",
    "ModelParams",
    "NemlabError",
    "NumericalError",
    "PriceSeries",
    "QGaussian",
    "QParams",
    "QuadSpec",
    "SimConfig",
    "XYParams",
    "XYSolution",
    "bifurcation_scan",
    "brute_force_full_model",
    "build_discrete",
    "build_grid",
    "escort",
    "fit_qgaussian",
    "histogram",
    "joint_energy",
    "price_change_from_bias",
    "q_exp",
    "q_expectation",
    "q_log",
    "qgaussian_pdf",
    "run_ensemble",
    "run_series",
    "sample_investors",
    "sample_qgaussian",
    "self_consistent_bias",
    "solve_joint",
    "solve_order_parameter",
    "tsallis_entropy",
    "xy_critical_scan",
]
