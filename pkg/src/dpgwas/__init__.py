"""Differentially private release of GWAS association statistics."""

from .tables import GenotypeTable, allelic_view, enumerate_tables, neighbors, validate
from .stats import ScoredSnp, allelic_statistic, chi2_statistic, chi2_survival
from .sensitivity import (allelic_sensitivity, chi2_sensitivity_controls_known,
                          chi2_sensitivity_general, projected_chi2_sensitivity)
from .mechanisms import ReleaseConfig, MechanismOutput, top_m_exponential, top_m_laplace

__all__ = [
    "GenotypeTable", "allelic_view", "enumerate_tables", "neighbors", "validate",
    "ScoredSnp", "allelic_statistic", "chi2_statistic", "chi2_survival",
    "allelic_sensitivity", "chi2_sensitivity_controls_known", "chi2_sensitivity_general",
    "projected_chi2_sensitivity",
    "ReleaseConfig", "MechanismOutput", "top_m_exponential", "top_m_laplace",
]
