"""Dyadic tent structures and weighted Bergman projection bounds on model domains."""

__version__ = "0.1.0"

from .geometry import ModelDomain, SampleCloud, CloudGrading, sample

__all__ = ["ModelDomain", "SampleCloud", "CloudGrading", "sample", "__version__"]
