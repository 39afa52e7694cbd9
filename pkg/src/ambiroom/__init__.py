"""Spherical-harmonic room acoustics: image-source ARIRs, HRTF decoding,
spherical-array encoders, head rotation and benchmark tooling."""

__version__ = "0.1.0"

from .array import ArraySpec, SphericalArray, radial_coefficient, spherical_bessel, \
    steering_matrix
from .errors import (AmbiroomError, ChainError, ConfigError, DimensionError, FormatError,
                     GeometryError, IllConditionedError, IncompleteSceneError,
                     MalformedSignalError, NumericalError, SingularityError,
                     UnderdeterminedGridError)
from .evaluation import LsdReport, lsd, nn_baseline_render, render_brir, sh_interp_render
from .grids import DirectionGrid
from .hrtf import HrtfSet, ShHrtf, load_file, ls_hrtf, magls, magls_hrtf, project_ls, \
    resample_hrtf, save_file
from .ism import RoomSpec, compute_images
from .processors import (ASM, BSM, ArrayDecoder, ASMEncoder, BinauralDecoder, Processor,
                         ProcessorChain, SHRotation, chain)
from .room import Room, Scene, compute_amb, compute_arir
from .sh import head_rotation, rotate_sh, sh_matrix, wigner_d_matrix
from .signal import Domain, SpatialSignal, read_wav, write_wav
from .synthetic import SyntheticHrtf, generate_synthetic_hrtf

__all__ = [
    "ASM", "ASMEncoder", "AmbiroomError", "ArrayDecoder", "ArraySpec", "BSM", "BinauralDecoder",
    "ChainError", "ConfigError", "DimensionError", "DirectionGrid", "Domain", "FormatError",
    "GeometryError", "HrtfSet", "IllConditionedError", "IncompleteSceneError", "LsdReport",
    "MalformedSignalError", "NumericalError", "Processor", "ProcessorChain", "Room", "RoomSpec",
    "SHRotation", "Scene", "ShHrtf", "SingularityError", "SpatialSignal", "SphericalArray",
    "SyntheticHrtf", "UnderdeterminedGridError", "chain", "compute_amb", "compute_arir",
    "compute_images", "generate_synthetic_hrtf", "head_rotation", "load_file", "ls_hrtf", "lsd",
    "magls", "magls_hrtf", "nn_baseline_render", "project_ls", "radial_coefficient", "read_wav",
    "render_brir", "resample_hrtf", "rotate_sh", "save_file", "sh_interp_render", "sh_matrix",
    "spherical_bessel", "steering_matrix", "wigner_d_matrix", "write_wav",
]
