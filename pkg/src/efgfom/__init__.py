"""First-order methods for bilinear saddle-point problems over sequence-form
strategy polytopes (treeplexes) and scaled-extension chains of simplexes.

Subpackages:
    treeplex  -- sequence-form decision structures and linear optimization
    games     -- Kuhn/Leduc generators and the game file format
    dgf       -- distance-generating functions (dilated entropy, global entropy)
    scext     -- scaled-extension chains of simplexes
    solver    -- EGT, Mirror Prox, EGT/AS, gap evaluation, bound monitoring
    cli       -- command-line entry point
"""

import os as _os

# Thread cap must land before numpy initializes its BLAS backend.
_threads = _os.environ.get("EFGFOM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"
