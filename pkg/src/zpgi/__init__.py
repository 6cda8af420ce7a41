"""Zero-photon ghost imaging toolkit.

Closed-form photon-number statistics of correlated thermal light, a
pseudothermal speckle Monte Carlo with photon-counting detection, streaming
correlation estimators, and ghost-image reconstruction from the statistics
of empty time bins.
"""

__version__ = "0.1.0"

from . import analytic, detect, estimator, fieldgen, fitting, imaging  # noqa: F401
