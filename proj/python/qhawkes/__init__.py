"""Quadratic Hawkes (QHawkes / ZHawkes) toolkit.

Model configurations are flat ``dict[str, str]`` maps using the same keys as
the command-line tool, e.g. ``{"diagonal.kind": "exponential", "diagonal.n_h":
"0.5", "diagonal.beta": "1"}``. ``presets()`` returns the named ones.
"""

from ._core import (
    BinSeries,
    DomainError,
    EventStream,
    NumericalError,
    apparent_branching,
    astar,
    estimate_c,
    gmm_estimate,
    hill_exponent,
    kernel_norms,
    mle_student,
    normalize_panel,
    phase_exponents,
    presets,
    rank_one_diag_fit,
    rs_vol,
    sample_stationary,
    simulate,
    simulate_qarch,
    stationarity,
    stationary_cdf_nohawkes,
    stationary_density_nohawkes,
    tail_exponents,
    tra_curve,
)

__version__ = "0.1.0"
__all__ = [name for name in dir() if not name.startswith("_")]
