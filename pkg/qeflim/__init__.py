__version__ = '0.1.0'

from .exceptions import *
from .ldos import *
from .tagstream import *
from .simulation import *
from .reconstruct import *
from .calibrate import *
from .utils import *
