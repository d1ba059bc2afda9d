"""Hot-kernel backend selection.

The compiled Cython module (``_native``) is used when it has been built
(``python3 setup.py build_ext --inplace``); otherwise the pure-numpy
fallback in ``pure.py`` is selected.  Both expose the same functions
with identical semantics, so everything above this package is
backend-agnostic.  ``use_backend`` rebinds the exported functions; the
benchmark and the parity tests rely on it.
"""

from . import pure as _pure

try:
    from . import _native as _native_mod
except ImportError:
    _native_mod = None

_EXPORTED = (
    "im2col",
    "col2im",
    "maxpool2_forward",
    "maxpool2_backward",
    "rgbe_decode_scanlines",
    "rgbe_encode_scanlines",
)

MIN_RLE_WIDTH = _pure.MIN_RLE_WIDTH
MAX_RLE_WIDTH = _pure.MAX_RLE_WIDTH

BACKEND = "native" if _native_mod is not None else "pure"


def available_backends():
    backends = ["pure"]
    if _native_mod is not None:
        backends.insert(0, "native")
    return backends


def use_backend(name):
    """Select the kernel implementation by name ('native' or 'pure')."""
    global BACKEND
    if name == "pure":
        mod = _pure
    elif name == "native":
        if _native_mod is None:
            raise RuntimeError("native kernels are not built; run "
                               "'python3 setup.py build_ext --inplace'")
        mod = _native_mod
    else:
        raise ValueError(f"unknown kernel backend {name!r}")
    for fname in _EXPORTED:
        globals()[fname] = getattr(mod, fname)
    BACKEND = name


use_backend(BACKEND)
