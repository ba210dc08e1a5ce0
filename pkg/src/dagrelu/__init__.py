"""ReLU networks on DAGs: training, invariant sets and their topology."""
from .dag import Dag

__version__ = "0.1.0"
__all__ = ["Dag", "__version__"]
