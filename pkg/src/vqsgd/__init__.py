"""Vector-quantized SGD: convex-hull gradient quantizers and a simulator."""

from .encoder import (
    CoeffVector,
    encode,
    encode_cross_polytope,
    encode_hadamard,
    encode_iterative,
    encode_reed_muller,
    encode_simplex,
    pad_to_valid,
    reconstruct,
)
from .pointset import (
    Family,
    PointSet,
    build_cross_polytope,
    build_eps_net,
    build_gaussian,
    build_hadamard,
    build_reed_muller,
    build_scaled_cross_polytope,
    build_simplex,
    decode,
    make_pointset,
)
from .quantizer import (
    QuantizedGradient,
    RngState,
    aggregate,
    dequantize,
    deserialize,
    exact_second_moment,
    quantize,
    sample,
    serialize,
)

__version__ = "0.1.0"
