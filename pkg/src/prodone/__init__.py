"""Exact combinatorics of product-one sequences over the non-abelian groups of order pq."""

__version__ = "0.1.0"

from .group import GroupCtx, GroupParamError, GroupParams, make_group

__all__ = ["GroupCtx", "GroupParamError", "GroupParams", "make_group", "__version__"]
