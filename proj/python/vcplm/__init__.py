"""Profile least-squares estimation and testing for varying-coefficient
partially linear models whose linear covariates are observed with a
distortion that depends on a confounding variable V.

Data arguments shared by ``fit``, ``cv_profile`` and ``test``:

``y`` (n,), ``eta`` (n, p1), ``v`` (n,), ``w`` (n, p2), ``x`` (n, q),
``u`` (n,) and optionally the true ``xi`` (n, p1), which benchmark mode
requires.  For GLR tests ``constant`` lists 0-based columns of ``x`` whose
coefficient functions are constant under the null.
"""

from ._vcplm import (
    InvalidInput,
    VcplmError,
    calibrate,
    cv_profile,
    fit,
    presets,
    read_csv,
    simulate,
    test,
    version,
)

__all__ = [
    "InvalidInput",
    "VcplmError",
    "calibrate",
    "cv_profile",
    "fit",
    "presets",
    "read_csv",
    "simulate",
    "test",
    "version",
]
