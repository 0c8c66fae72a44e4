"""Shared test fixtures and hypothesis strategies."""

from __future__ import annotations

import math
import sys
from pathlib import Path

import hypothesis.strategies as st

sys.path.insert(0, str(Path(__file__).parent))


def finite(lo: float, hi: float):
    return st.floats(min_value=lo, max_value=hi, allow_nan=False, allow_infinity=False)


# (cx, cy, w, h, theta) tuples with well-conditioned extents
box_params = st.tuples(
    finite(-80.0, 80.0),
    finite(-80.0, 80.0),
    finite(1.0, 64.0),
    finite(1.0, 64.0),
    finite(-math.pi, math.pi),
)
