"""Direct-segment memory allocation, DS-n translation and placement simulator."""

from ._segvirt import *  # noqa: F401,F403
from ._segvirt import __doc__  # noqa: F401
