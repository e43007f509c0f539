"""Hot attention kernels with a compiled core and a pure-numpy fallback.

Both backends expose a single entry point:

    banded_attention(qr, kr, v, window, scale, tile_rows=128, tile_keys=128)
        -> (out, lse, pairs)

where row i of qr attends keys [max(0, i - window + 1), i] of kr with online
(streaming) softmax, so no full score matrix is ever held. Full block-causal
attention is the window >= rows special case.

The compiled backend is used when the extension built; set SHIFTROPE_KERNELS
to "python" or "cython" to force one.
"""

from __future__ import annotations

import os

from ..errors import ContractViolation
from . import pykernels

_BACKENDS = {"python": pykernels}
try:
    from . import _ckernels

    _BACKENDS["cython"] = _ckernels
except ImportError:
    _ckernels = None

_env = os.environ.get("SHIFTROPE_KERNELS")
if _env:
    if _env not in _BACKENDS:
        raise ImportError(
            f"SHIFTROPE_KERNELS={_env!r} but available backends are "
            f"{sorted(_BACKENDS)}"
        )
    DEFAULT_BACKEND = _env
else:
    DEFAULT_BACKEND = "cython" if "cython" in _BACKENDS else "python"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend(name: str | None = None):
    """Resolve a backend module by name; None picks the default."""
    if name is None:
        name = DEFAULT_BACKEND
    try:
        return _BACKENDS[name]
    except KeyError:
        raise ContractViolation(
            f"unknown kernel backend {name!r}; available: {sorted(_BACKENDS)}"
        ) from None
