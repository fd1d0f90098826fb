"""Optional numba acceleration.

Every hot kernel in this package is written as plain Python over numpy
scalars/arrays so that the exact same source runs either jit-compiled or
interpreted.  When numba is missing the decorators below degrade to
identity and callers wrap kernel invocations in ``np.errstate`` so that
the intended uint64 wraparound does not spam RuntimeWarnings.
"""

try:
    import numba as _numba

    HAVE_NUMBA = True

    def njit(*args, **kwargs):
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)

except ImportError:  # pragma: no cover - exercised only on numba-less installs
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap
