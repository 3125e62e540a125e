"""Solver kernel selection: compiled extension if available, numpy fallback.

Set ``SCRIBBLESEG_FORCE_FALLBACK=1`` before import to skip the extension
(used by the benchmark and by tests that exercise both paths).
"""

from __future__ import annotations

import os

from . import purepy

try:
    from . import _pcg as compiled
except ImportError:
    compiled = None

HAVE_COMPILED = compiled is not None
FORCE_FALLBACK = os.environ.get("SCRIBBLESEG_FORCE_FALLBACK", "") not in ("", "0")

active = purepy if (FORCE_FALLBACK or not HAVE_COMPILED) else compiled
pcg_solve = active.pcg_solve
BACKEND_NAME = active.BACKEND_NAME

CONVERGED = purepy.CONVERGED
MAX_ITERATIONS = purepy.MAX_ITERATIONS
BREAKDOWN = purepy.BREAKDOWN

__all__ = [
    "pcg_solve",
    "BACKEND_NAME",
    "HAVE_COMPILED",
    "active",
    "purepy",
    "compiled",
    "CONVERGED",
    "MAX_ITERATIONS",
    "BREAKDOWN",
]
