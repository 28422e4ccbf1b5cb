"""
Standardized logging for poikg.
"""

import logging as _logging

from poikg.logging.loggingmachine import LoggingMachine

logging = LoggingMachine(LoggingMachine.config())

# Keep numerical libraries quiet unless debugging.
_logging.getLogger("sklearn").setLevel(_logging.WARNING)
_logging.getLogger("sklearn").propagate = False
_logging.getLogger("matplotlib").setLevel(_logging.WARNING)
_logging.getLogger("matplotlib").propagate = False
