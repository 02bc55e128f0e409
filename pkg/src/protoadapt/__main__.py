"""Entry point.

BLAS thread pinning must be in place before numpy loads its backend, but by
the time any code in this package runs the interpreter has already imported
the package (and numpy with it). Under --deterministic the process
therefore re-execs itself once with the thread-count variables set, which
guarantees every reduction, including GEMM, runs single-threaded in a fixed
order.
"""

import os
import sys

_PIN_MARKER = "PROTOADAPT_THREADS_PINNED"
_THREAD_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")


def main() -> int:
    if "--deterministic" in sys.argv[1:] and os.environ.get(_PIN_MARKER) != "1":
        env = dict(os.environ, **{v: "1" for v in _THREAD_VARS})
        env[_PIN_MARKER] = "1"
        os.execve(
            sys.executable,
            [sys.executable, "-m", "protoadapt", *sys.argv[1:]],
            env,
        )
    from .cli import main as cli_main

    return cli_main()


if __name__ == "__main__":
    sys.exit(main())
