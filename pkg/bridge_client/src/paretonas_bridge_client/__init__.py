"""Reference worker for the paretonas-eval wire protocol."""

__version__ = "0.1.0"

from .surrogate import Surrogate
from .worker import serve

__all__ = ["Surrogate", "serve", "__version__"]
