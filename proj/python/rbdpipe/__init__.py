"""Rigid body dynamics toolkit: the seven joint-space dynamics functions
(inverse/forward dynamics, mass matrix and its inverse, analytic
derivatives) on kinematic trees, plus a cycle-approximate simulator of
their pipelined-dataflow evaluation."""

from ._core import (  # noqa: F401
    RobotModel,
    batch_rnea,
    dfd,
    difd,
    drnea,
    fd,
    load_model,
    mass_matrix,
    minv,
    parse_model,
    reroot,
    rnea,
    simulate,
    sparsity_pattern,
    split_root,
    __version__,
)

__all__ = [
    "RobotModel",
    "batch_rnea",
    "dfd",
    "difd",
    "drnea",
    "fd",
    "load_model",
    "mass_matrix",
    "minv",
    "parse_model",
    "reroot",
    "rnea",
    "simulate",
    "sparsity_pattern",
    "split_root",
    "__version__",
]
