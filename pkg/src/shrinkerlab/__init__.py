"""Numerical laboratory for Gaussian area, stability and intersection of shrinkers."""

from .catalog import *  # noqa: F401,F403
from .certificates import *  # noqa: F401,F403
from .errors import *  # noqa: F401,F403
from .frankel import *  # noqa: F401,F403
from .functional import *  # noqa: F401,F403
from .growth import *  # noqa: F401,F403
from .io import *  # noqa: F401,F403
from .mesh import *  # noqa: F401,F403

__version__ = "0.1.0"
