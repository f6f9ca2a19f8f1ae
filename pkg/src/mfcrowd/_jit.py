"""Optional numba acceleration.

When numba is missing the decorated functions run as plain Python with the
identical update order, so results differ at most by interpreter speed.
MFCROWD_THREADS caps the numba thread pool; the solver loops themselves are
serial, the cap only constrains threaded numba regions.
"""

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False


def _apply_thread_cap() -> None:
    cap = os.environ.get("MFCROWD_THREADS")
    if not cap or numba is None:
        return
    try:
        requested = max(1, int(cap))
    except ValueError:
        return
    try:
        numba.set_num_threads(min(requested, numba.config.NUMBA_NUM_THREADS))
    except Exception:
        pass


if HAVE_NUMBA:
    _apply_thread_cap()
    njit = numba.njit
else:  # pragma: no cover

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
