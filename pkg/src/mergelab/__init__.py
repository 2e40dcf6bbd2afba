"""Entanglement-coherence rate regions and exact simulations of incoherent state merging."""

from .qstate import DensityOperator, PureState, SystemLayout
from .info import JointDistribution
from .channels import KrausChannel
from .coding import SWCode, build_code
from .rates import RateBounds, ResourcePair, classify_pair, compute_bounds
from .protocols import MergeOutcome, ResourceLedger, merge_flower, merge_pure, merge_separable

__version__ = "0.1.0"
