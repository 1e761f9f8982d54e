"""Periodic-orbit towers over the full shift and weak Lyapunov exponents of
their limit measures."""

__version__ = "0.1.0"

from .core import *  # noqa: F401,F403
from .errors import *  # noqa: F401,F403
from .spectrum import *  # noqa: F401,F403
from .shadowing import *  # noqa: F401,F403
from .equalizer import *  # noqa: F401,F403
from .tower import *  # noqa: F401,F403
from .models import *  # noqa: F401,F403
