"""Numerical workbench for commutators of singular integrals with Zygmund dilations."""

from .errors import ZygcommError
from .fields import Symbol, get_symbol, symbol_names
from .geometry import Interval, ZygmundDilation, ZygmundRectangle
from .kernels import Kernel, get_kernel, kernel_names

__all__ = [
    "Interval",
    "Kernel",
    "Symbol",
    "ZygcommError",
    "ZygmundDilation",
    "ZygmundRectangle",
    "get_kernel",
    "get_symbol",
    "kernel_names",
    "symbol_names",
]
__version__ = "0.1.0"
