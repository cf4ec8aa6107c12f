"""Retrofit type checking onto JavaScript repositories without changing what the code does."""

from .fingerprint import Fingerprint, fingerprint, token_diff
from .orchestrator import RunPlan, execute_run
from .report import RunReport, build_report, render_table

__version__ = "0.1.0"

__all__ = [
    "Fingerprint",
    "RunPlan",
    "RunReport",
    "build_report",
    "execute_run",
    "fingerprint",
    "render_table",
    "token_diff",
]
