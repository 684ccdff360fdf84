"""Capacity-budgeted federated learning with a sparsifying uplink codec.

The package provides, in rough dependency order:

* ``quantizer``   -- Lloyd-Max scalar quantizers for the standard normal input
* ``transform``   -- seeded random orthogonal transforms
* ``bitstream``   -- MSB-first bit packing
* ``positions``   -- combinatorial (combinadic) support-set coding
* ``codec``       -- the full value+position uplink codec
* ``budget``      -- per-round (sparsity, quantizer) selection under a bit budget
* ``fl``          -- the federated simulation loop with error feedback
* ``tasks``       -- learning tasks, data loading and partitioning
* ``service``     -- FastAPI wrapper around the above
* ``cli``         -- thin command-line client for the service
"""

__version__ = "0.1.0"

from .quantizer import Quantizer, train_lloyd_max, get_quantizer
from .codec import CodecParams, CompressedUpdate, compress, reconstruct, nmse
from .budget import choose_parameters, s_max_for_q

__all__ = [
    "Quantizer",
    "train_lloyd_max",
    "get_quantizer",
    "CodecParams",
    "CompressedUpdate",
    "compress",
    "reconstruct",
    "nmse",
    "choose_parameters",
    "s_max_for_q",
    "__version__",
]
