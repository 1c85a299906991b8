"""Backend selection for the hot kernels.

``PADR_NUMBA=0`` forces the pure-numpy path; anything else uses numba when it
imports cleanly.  ``PADR_THREADS`` caps the numba thread pool and has to be
exported before numba is first imported, so it is handled here.
"""
import os

_threads = os.environ.get("PADR_THREADS")
if _threads and "NUMBA_NUM_THREADS" not in os.environ:
    os.environ["NUMBA_NUM_THREADS"] = str(max(1, int(_threads)))
# the built-in pool needs no TBB/OpenMP runtime; callers are single-threaded
os.environ.setdefault("NUMBA_THREADING_LAYER", "workqueue")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_backend = "numba" if HAVE_NUMBA and os.environ.get("PADR_NUMBA", "1") != "0" else "numpy"


def backend():
    return _backend


def set_backend(name):
    """Switch between ``"numba"`` and ``"numpy"`` at runtime (tests, benchmarks)."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not importable")
    _backend = name


def thread_count():
    if not HAVE_NUMBA:
        return 1
    import numba

    return numba.get_num_threads()
