"""Front tracking and vanishing viscosity for two-flux conservation laws."""
from .backend import NAME as BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
