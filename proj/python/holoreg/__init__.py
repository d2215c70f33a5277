"""Near-field phase-contrast imaging: Fresnel propagation, IRGNM phase
retrieval, Newton-Kaczmarz tomography, and FSC/localization analysis."""

from ._holoreg import (
    ConfigError,
    DataError,
    NumericalError,
    add_gaussian_noise,
    add_poisson_noise,
    builtin_glyph,
    ctf_apply,
    ctf_invert_homogeneous,
    formfactor_deconvolve,
    fresnel_propagate,
    fsc,
    half_bit_threshold,
    locate_peaks,
    pc_derivative,
    pc_forward,
    radon,
    random_packing,
    reconstruct2d,
    reconstruct_tomo,
    render_packing,
    sphere_form_factor,
    tomo_forward,
)

__all__ = [
    "ConfigError",
    "DataError",
    "NumericalError",
    "add_gaussian_noise",
    "add_poisson_noise",
    "builtin_glyph",
    "ctf_apply",
    "ctf_invert_homogeneous",
    "formfactor_deconvolve",
    "fresnel_propagate",
    "fsc",
    "half_bit_threshold",
    "locate_peaks",
    "pc_derivative",
    "pc_forward",
    "radon",
    "random_packing",
    "reconstruct2d",
    "reconstruct_tomo",
    "render_packing",
    "sphere_form_factor",
    "tomo_forward",
]
