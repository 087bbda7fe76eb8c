"""Mechanism-design laboratory for multi-party machine-learning markets.

Agents contribute private data to a shared model; their values depend on the
models everyone deploys, so other agents' true data sizes impose
externalities. The package provides valuation families, mechanisms (maximal
exploitation payments, VCG, the free mechanism), grid audits of incentive
properties, the difference-constraint existence test and seeded experiments.
"""

from .core import (EMPTY, GridSpec, Outcome, QualityFunction, ReportProfile, TypeProfile,
                   effective_quality, grid_points)
from .valuations import (LinearExternalityModel, PowerMarketModel, ProportionalFixedMarketModel,
                         QuasiMonotoneModel, is_non_competitive, market_size, value)
from .mechanisms import (Mechanism, best_model_allocation, build_mechanism,
                         efficient_allocation_linear, free_mechanism, mep_mechanism,
                         mep_payment, run_mechanism, vcg_mechanism)
from .auditors import (AuditReport, audit_desirable, audit_efficiency, audit_ic, audit_ir,
                       audit_wbb, check_necessary_conditions, check_sufficient_conditions)
from .existence import (PaymentTable, brute_force_oracle, desirable_exists, disparity_boundary,
                        gap, max_payments_slice, payment_upper_bound)

__version__ = "0.1.0"

__all__ = [
    "EMPTY", "GridSpec", "Outcome", "QualityFunction", "ReportProfile", "TypeProfile",
    "effective_quality", "grid_points",
    "LinearExternalityModel", "PowerMarketModel", "ProportionalFixedMarketModel",
    "QuasiMonotoneModel", "is_non_competitive", "market_size", "value",
    "Mechanism", "best_model_allocation", "build_mechanism", "efficient_allocation_linear",
    "free_mechanism", "mep_mechanism", "mep_payment", "run_mechanism", "vcg_mechanism",
    "AuditReport", "audit_desirable", "audit_efficiency", "audit_ic", "audit_ir", "audit_wbb",
    "check_necessary_conditions", "check_sufficient_conditions",
    "PaymentTable", "brute_force_oracle", "desirable_exists", "disparity_boundary", "gap",
    "max_payments_slice", "payment_upper_bound",
]
