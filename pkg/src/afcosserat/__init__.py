"""Quasistatic Armstrong-Frederick plasticity with Cosserat effects in 2D,
with numerical diagnostics of local energy growth and Hoelder regularity."""

from .constitutive import LocalState, MaterialParams
from .grid_fem import Mesh, build_mesh

__version__ = "0.1.0"

__all__ = ["LocalState", "MaterialParams", "Mesh", "build_mesh", "__version__"]
