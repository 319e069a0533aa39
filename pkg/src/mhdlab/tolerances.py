"""Single machine-readable table of every certification tolerance.

The acceptance suite, the CLI `check`/`run` assertions and the docs all read
from here; nothing is calibrated elsewhere.
"""

import json

TOLERANCES = {
    # constitutive layer
    "gibbs_relative_residual": 1e-6,
    "gibbs_fd_step": 1e-4,
    "thermo_grid_lo": 0.1,
    "thermo_grid_hi": 10.0,
    "coercivity_min_margin": 0.0,
    # discretization
    "transform_round_trip": 1e-12,
    "integration_by_parts": 1e-10,
    "spectral_derivative": 1e-10,
    "projection_round_trip": 1e-12,
    # solver invariants
    "mass_relative_drift": 1e-12,
    "domination_drift": 1e-8,
    "proportional_fields_drift": 1e-8,
    "equilibrium_drift": 1e-12,
    "scalar_decay_error": 1e-6,
    "theta_star_error": 1e-4,
    "theta_equal_rates_drift": 1e-10,
    # balance residuals
    "sigma_nodal_floor": -1e-12,
    "richardson_ratio_lo": 1.7,
    "richardson_ratio_hi": 2.3,
    "weak_mass_residual": 1e-9,
    "entropy_slack": 1e-6,
    "renormalized_vs_continuity": 1e-12,
    # orders
    "mms_spatial_order": 1.9,
    "mms_temporal_order": 0.9,
    # inequality estimators
    "constant_stability_factor": 2.0,
    "inequality_samples": 100,
    # regularization constraints
    "gamma_cap_min": 4.0,
    "theta_floor": 1e-10,
}


def dump(path):
    """Write the table as JSON (the machine-readable shipped form)."""
    with open(path, "w") as fh:
        json.dump(TOLERANCES, fh, indent=2, sort_keys=True)
        fh.write("\n")
