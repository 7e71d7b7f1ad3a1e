"""Kernel dispatch: compiled extension when available, pure Python otherwise.

Set ``FOLMI_NO_EXT=1`` before import to force the fallback. ``BACKEND`` names
the implementation in use; ``IMPLEMENTATIONS`` maps every importable
implementation by name so both can be compared.
"""

from __future__ import annotations

import os

from folmi import _fallback

try:
    from folmi import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

IMPLEMENTATIONS = {"python": _fallback}
if _compiled is not None:
    IMPLEMENTATIONS["cython"] = _compiled

if _compiled is not None and os.environ.get("FOLMI_NO_EXT") != "1":
    BACKEND = "cython"
else:
    BACKEND = "python"

_impl = IMPLEMENTATIONS[BACKEND]
jacobi_eigh = _impl.jacobi_eigh
hessenberg = _impl.hessenberg
hqr_eigvals = _impl.hqr_eigvals
gl_march = _impl.gl_march
