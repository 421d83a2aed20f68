"""Keller-Segel blow-up verification library."""

from ._ksblow import (
    EULER_GAMMA,
    ConfigError,
    DomainError,
    KsblowError,
    QuadratureError,
    SolveError,
    Z0,
    apply_L,
    bubble_U,
    cubic_moment_Z0,
    expint_Ei,
    gaussian_Z0_closed,
    gaussian_Z0_integral,
    heat6_factor,
    mass_at_T_formula,
    parse_config,
    run_command,
    run_sim,
    selftest,
    solve_L,
    solve_rate,
    total_mass,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
