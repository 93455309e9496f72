import colorama

# Initialize colorama
colorama.init()

LOG_COLOR = colorama.Fore.WHITE
WARNING_COLOR = colorama.Fore.YELLOW
ERROR_COLOR = colorama.Fore.RED
SYSTEM_COLOR = colorama.Fore.LIGHTBLUE_EX
SUCCESS_COLOR = colorama.Fore.GREEN
TRACE_COLOR = colorama.Fore.CYAN + colorama.Back.BLACK
RESULT_COLOR = colorama.Fore.MAGENTA
RESET_COLOR = colorama.Style.RESET_ALL

QUIET = 0
NORMAL = 1
VERBOSE = 2

_LEVELS = {"quiet": QUIET, "normal": NORMAL, "verbose": VERBOSE}

_verbosity = NORMAL


def set_verbosity(level: str | int):
    """Sets the global verbosity ('quiet', 'normal' or 'verbose')."""
    global _verbosity
    if isinstance(level, str):
        if level not in _LEVELS:
            raise ValueError(f"Unknown verbosity '{level}', expected one of {list(_LEVELS)}")
        level = _LEVELS[level]
    _verbosity = level


def _emit(color: str, tag: str, message: str, min_level: int):
    if _verbosity >= min_level:
        print(f"{color}[{tag}] {message}{RESET_COLOR}")


def info(message: str):
    """Prints a standard log message."""
    _emit(LOG_COLOR, "INFO", message, NORMAL)

def warning(message: str):
    """Prints a warning message."""
    _emit(WARNING_COLOR, "WARNING", message, NORMAL)

def error(message: str):
    """Prints an error message. Never silenced."""
    _emit(ERROR_COLOR, "ERROR", message, QUIET)

def system(message: str):
    """Prints a system message."""
    _emit(SYSTEM_COLOR, "SYSTEM", message, NORMAL)

def success(message: str):
    """Prints a success message."""
    _emit(SUCCESS_COLOR, "SUCCESS", message, NORMAL)

def trace(message: str):
    """Prints an optimizer iteration line (verbose only)."""
    _emit(TRACE_COLOR, "TRACE", message, VERBOSE)

def result(message: str):
    """Prints a campaign summary line."""
    _emit(RESULT_COLOR, "RESULT", message, NORMAL)
