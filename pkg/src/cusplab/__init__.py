"""Numerical potential theory near cusp boundary points."""
from .geometry import CuspFrame, CuspParams, boundary_distance_planar, cusp_contains, holder_to_cusp
from .conformal import collision_scan, f_inverse, f_map, hopf_constant, image_profile
from .green import GreenEstimate, WosConfig, axis_green_profile, green_disk, green_fd, green_wos
from .barrier import GenericProfile, HBProfile, check_ln_conditions, green_bound_check, phi_subharmonicity_scan
from .hopf import HopfCertificate, hopf_bound, hopf_certify
from .exhaustion import ExhaustionParams, SequenceTable, alpha_sequence, patch_decay_sim, sequence_table
from .capacity import CapacityEstimate, ShellSpec, capacity_variational, shell_family, wiener_report

__version__ = "0.1.0"

__all__ = [
    "CuspParams", "CuspFrame", "cusp_contains", "boundary_distance_planar", "holder_to_cusp",
    "hopf_constant", "f_map", "f_inverse", "collision_scan", "image_profile",
    "GreenEstimate", "WosConfig", "green_disk", "green_fd", "green_wos", "axis_green_profile",
    "HBProfile", "GenericProfile", "check_ln_conditions", "phi_subharmonicity_scan", "green_bound_check",
    "HopfCertificate", "hopf_bound", "hopf_certify",
    "ExhaustionParams", "SequenceTable", "alpha_sequence", "sequence_table", "patch_decay_sim",
    "CapacityEstimate", "ShellSpec", "capacity_variational", "shell_family", "wiener_report",
]
