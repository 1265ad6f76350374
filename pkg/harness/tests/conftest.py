from __future__ import annotations

import sys
from pathlib import Path

FIXTURES = Path(__file__).parent / "fixtures"

# Make teststub and stubpkg importable for in-process scans; child
# processes get the same directory through PYTHONPATH.
if str(FIXTURES) not in sys.path:
    sys.path.insert(0, str(FIXTURES))

CHILD_ENV = {"PYTHONPATH": str(FIXTURES)}
