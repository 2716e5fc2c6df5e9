from .system import TimeGrid, common_carrier
from .full import Trajectory, propagate_full, propagate_full_batch
from .hierarchy import (OrderIndex, HierarchyEntry, HierarchyState, allowed_phases,
                        propagate_hierarchy, propagate_hierarchy_batch, resum)

__all__ = [
    "TimeGrid", "common_carrier", "Trajectory", "propagate_full", "propagate_full_batch",
    "OrderIndex", "HierarchyEntry", "HierarchyState", "allowed_phases",
    "propagate_hierarchy", "propagate_hierarchy_batch", "resum",
]
