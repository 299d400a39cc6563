"""Protocol language, compiler and built-in exchange generators."""

from .builtins import (
    builtin_exchange_same_defect,
    builtin_exchange_two_defects,
    builtin_fuse_to_site,
    fuse_site,
)
from .compiler import (
    DefectState,
    RampEvent,
    Schedule,
    compile_program,
    expand,
    schedule_events_from_csv,
)
from .language import (
    Cut,
    DefectPath,
    Exchange,
    Fuse,
    Grow,
    ProtocolProgram,
    Shrink,
    format_program,
    parse,
)

compile = compile_program  # noqa: A001

__all__ = [
    "Cut",
    "DefectPath",
    "DefectState",
    "Exchange",
    "Fuse",
    "Grow",
    "ProtocolProgram",
    "RampEvent",
    "Schedule",
    "Shrink",
    "builtin_exchange_same_defect",
    "builtin_exchange_two_defects",
    "builtin_fuse_to_site",
    "compile",
    "compile_program",
    "expand",
    "format_program",
    "fuse_site",
    "parse",
    "schedule_events_from_csv",
]
