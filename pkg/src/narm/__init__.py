"""Poisson-gamma relational models for binary networks with node attributes.

Two samplers are provided: an undirected model with a symmetric block
matrix (``narm.sym``) and a directed model with Dirichlet-normalized
factor scores (``narm.asym``).  Binary node attributes enter both models
as multiplicative factors on the gamma shape prior of the node loadings,
with optional second-level (hierarchical) attributes.
"""

from narm.data import (
    AttributeMatrix,
    EvalSet,
    SparseBinaryMatrix,
    SplitSpec,
    encode_categorical,
    load_attributes,
    load_edge_list,
    make_split,
)
from narm.distributions import RngStream
from narm.sym import SymModel
from narm.asym import AsymModel
from narm.evaluation import auc_pr, auc_roc, evaluate_run

__all__ = [
    "AttributeMatrix",
    "EvalSet",
    "SparseBinaryMatrix",
    "SplitSpec",
    "RngStream",
    "SymModel",
    "AsymModel",
    "auc_pr",
    "auc_roc",
    "evaluate_run",
    "encode_categorical",
    "load_attributes",
    "load_edge_list",
    "make_split",
]
