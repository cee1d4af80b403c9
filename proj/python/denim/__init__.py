# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the denim Project.

"""Deterministic neural illumination mapping for auto white balance."""

from ._denim import (
    FormatError,
    Model,
    PpmError,
    ShapeError,
    angular_error_deg,
    apply,
    ciede2000,
    dncm_a,
    dncm_c,
    encode,
    evaluate,
    load_image,
    naive_a_muls_per_pixel,
    naive_c_muls_per_pixel,
    precomposed_a_muls_per_pixel,
    precomposed_c_muls_per_pixel,
    random_scene,
    save_image,
    srgb_to_lab,
    synthesize,
    train,
)

__all__ = [
    "FormatError",
    "Model",
    "PpmError",
    "ShapeError",
    "angular_error_deg",
    "apply",
    "ciede2000",
    "dncm_a",
    "dncm_c",
    "encode",
    "evaluate",
    "load_image",
    "naive_a_muls_per_pixel",
    "naive_c_muls_per_pixel",
    "precomposed_a_muls_per_pixel",
    "precomposed_c_muls_per_pixel",
    "random_scene",
    "save_image",
    "srgb_to_lab",
    "synthesize",
    "train",
]
