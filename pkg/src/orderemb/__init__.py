"""Order-embeddings toolkit.

Learns and evaluates embeddings into the reversed product order on the
nonnegative orthant for partial-order completion tasks: hypernym prediction
over a taxonomy, caption-image retrieval over precomputed image features,
and two-class textual entailment.
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
