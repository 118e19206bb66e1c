"""GPT-FAR: catwalk analytics and automated fashion report generation."""

from .domain import (
    CategoryGroup,
    CollectionKey,
    DomainConfig,
    GarmentTagRecord,
    ReportScope,
)

__version__ = "0.1.0"

__all__ = [
    "CategoryGroup",
    "CollectionKey",
    "DomainConfig",
    "GarmentTagRecord",
    "ReportScope",
    "__version__",
]
