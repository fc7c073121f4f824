"""Python bindings for the coatsynth renderer, baselines and toy flow model."""

from ._core import (
    ConfigError,
    Error,
    InvalidArgument,
    PreconditionError,
    TraitVector,
    __version__,
    blend_if,
    color_blend,
    conditioning_width,
    extruded_icosphere_vertices,
    generate_mask,
    grad_check,
    icosphere_vertices,
    luminance,
    psnr,
    reference_scene,
    render,
    render_coated,
    set_thread_count,
)

__all__ = [
    "ConfigError",
    "Error",
    "InvalidArgument",
    "PreconditionError",
    "TraitVector",
    "__version__",
    "blend_if",
    "color_blend",
    "conditioning_width",
    "extruded_icosphere_vertices",
    "generate_mask",
    "grad_check",
    "icosphere_vertices",
    "luminance",
    "psnr",
    "reference_scene",
    "render",
    "render_coated",
    "set_thread_count",
]
