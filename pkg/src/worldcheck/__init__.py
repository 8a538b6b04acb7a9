"""Memory-protection checker models: worlds checkers (S-WC, PE-WC, M-WC) and IOPMP.

Bit-exact register images, a reference oracle, a cycle-accounting bus
simulator, a structural cost model and a policy compiler.
"""

from .core import (AccessRequest, AddressMode, CheckOutcome, ConfigError, Decision, ErrorKind,
                   Kind, Op, Region)
from .regmap import RegisterImage, make_image, restore

__version__ = "0.1.0"

__all__ = ["AccessRequest", "AddressMode", "CheckOutcome", "ConfigError", "Decision",
           "ErrorKind", "Kind", "Op", "Region", "RegisterImage", "make_image", "restore"]
