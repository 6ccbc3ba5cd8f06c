"""Kernel selection: compiled extension when built, pure-numpy fallback otherwise."""
from __future__ import annotations

try:
    from evanflow._kernels import (  # type: ignore[attr-defined]
        USING_EXTENSION,
        action_assemble,
        el_residual_max,
        trapezoid,
    )
except ImportError:
    from evanflow._kernels_py import (
        USING_EXTENSION,
        action_assemble,
        el_residual_max,
        trapezoid,
    )

__all__ = ["USING_EXTENSION", "action_assemble", "el_residual_max", "trapezoid"]
