"""
Console output helpers shared by the library and the launcher.

Every progress message goes through ``log()`` so that verbosity and coloring
are decided in one place.
"""

import os
import sys
import time
import threading


class Colors:
    HEADER = '\033[95m'
    BLUE = '\033[94m'
    CYAN = '\033[96m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    GREY = '\033[90m'
    ENDC = '\033[0m'
    BOLD = '\033[1m'


LEVEL_COLORS = {
    "INFO": Colors.CYAN,
    "SUCCESS": Colors.GREEN,
    "WARNING": Colors.YELLOW,
    "ERROR": Colors.RED,
    "HEADER": Colors.HEADER,
    "DEBUG": Colors.GREY,
}

# quiet keeps warnings and errors only
_VISIBLE = {
    "quiet": {"WARNING", "ERROR"},
    "normal": {"INFO", "SUCCESS", "WARNING", "ERROR", "HEADER"},
    "debug": set(LEVEL_COLORS),
}

_state = {"verbosity": "normal"}
_print_lock = threading.Lock()


def set_verbosity(verbosity):
    """Set the process-wide verbosity: ``quiet``, ``normal`` or ``debug``."""
    if verbosity not in _VISIBLE:
        raise ValueError(f"Unknown verbosity '{verbosity}', expected one of {sorted(_VISIBLE)}")
    _state["verbosity"] = verbosity


def get_verbosity():
    return _state["verbosity"]


def _use_color(stream):
    if os.environ.get("NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def log(message, level="INFO"):
    """Pretty print a log message if the current verbosity lets it through."""
    if level not in _VISIBLE[_state["verbosity"]]:
        return
    stream = sys.stderr if level in ("WARNING", "ERROR") else sys.stdout
    timestamp = time.strftime("%H:%M:%S")
    if _use_color(stream):
        color = LEVEL_COLORS.get(level, Colors.CYAN)
        line = f"{Colors.BOLD}[{timestamp}]{Colors.ENDC} {color}[{level}]{Colors.ENDC} {message}"
    else:
        line = f"[{timestamp}] [{level}] {message}"
    with _print_lock:
        print(line, file=stream, flush=True)


def print_banner():
    """Print the launcher banner (suppressed in quiet mode)."""
    if _state["verbosity"] == "quiet":
        return
    color = _use_color(sys.stdout)
    start, end = (Colors.CYAN, Colors.ENDC) if color else ("", "")
    banner = f"""{start}
╔══════════════════════════════════════════════════════╗
║   F3  ·  federated feature fusion simulator          ║
║   local pre-training → one-round sharing → fusion    ║
╚══════════════════════════════════════════════════════╝
{end}"""
    print(banner)
