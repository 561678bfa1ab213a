"""Two-point-source superresolution lab.

Thin Python layer over the C++ core. Lengths are in the same units as the
PSF width; information values are totals for the scene's photon budget.
"""

from ._core import (
    Error,
    ModeBasis,
    PointSpreadFunction,
    QuadratureError,
    Scene,
    Scheme,
    SingularMatrixError,
    SupportViolation,
    TruncationError,
    UnsupportedError,
    ValidationError,
    __version__,
    analyze,
    binary_spade,
    continuum_direct_fisher,
    correlation,
    crb,
    custom_unitary,
    direct_imaging,
    helstrom_fisher,
    hg_spade,
    load_unitary_csv,
    mle_separation,
    probabilities,
    run_campaign,
    run_command,
)


def gaussian_scene(separation, sigma=1.0, centroid=0.0, photons=1e4):
    """Gaussian-PSF scene with the given photon budget."""
    scene = Scene(PointSpreadFunction.gaussian(sigma), centroid=centroid, separation=separation)
    return scene.with_photons(photons)


__all__ = [name for name in dir() if not name.startswith("_")]
