from . import config
from . import utils
from . import witt_base
from . import exact_homology
from . import drw_core
from . import log_semistable
from . import monodromy_filtration
from . import comparison_mw
from . import suites
from . import pipeline
