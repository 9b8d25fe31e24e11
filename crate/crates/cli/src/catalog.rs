//! Static table of experiment suites.

/// One runnable experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub name: &'static str,
    /// The estimate or identity the experiment checks.
    pub verifies: &'static str,
    /// Library operation the experiment drives.
    pub operation: &'static str,
    pub required: &'static [&'static str],
    /// Every `quantity` value the experiment may write, gates included.
    pub quantities: &'static [&'static str],
}

const GRID: [&str; 3] = ["n", "N", "L"];

macro_rules! keys {
    ($($k:expr),* $(,)?) => {
        &[GRID[0], GRID[1], GRID[2], $($k),*]
    };
}

pub const CATALOG: &[Entry] = &[
    Entry {
        name: "carleman",
        verifies: "inverse conjugated Laplacian is an isometry from the dual modulation space to the modulation space",
        operation: "apply_inverse_delta_zeta",
        required: keys!["tau", "zetas", "samples"],
        quantities: &["dz_inverse_isometry", "gate_isometry"],
    },
    Entry {
        name: "conjugation",
        verifies: "spectral symbol of the conjugated Laplacian equals Laplacian plus 2 zeta dot gradient",
        operation: "apply_delta_zeta",
        required: keys!["tau", "samples"],
        quantities: &["conjugation_defect", "gate_conjugation"],
    },
    Entry {
        name: "strichartz",
        verifies: "L^p bound on one modulation band growing like (lambda/tau)^(1/n), p = 2n/(n-2)",
        operation: "strichartz_constant",
        required: keys!["tau", "lambdas", "trials"],
        quantities: &[
            "strichartz_ratio",
            "strichartz_random_ratio",
            "strichartz_constant",
            "strichartz_exponent",
            "circle_truncated",
            "gate_band_exponent",
            "gate_constant_stability",
        ],
    },
    Entry {
        name: "dyadic",
        verifies: "scalar dyadic sums behind the bilinear bound are bounded uniformly in tau with the stated exponents",
        operation: "verify_dyadic_sums",
        required: &["n", "theta", "tau_exponents"],
        quantities: &[
            "dyadic_below_constant",
            "dyadic_above_constant",
            "dyadic_below_slope",
            "dyadic_above_slope",
            "dyadic_below_variation",
            "dyadic_above_variation",
            "dyadic_below_limit",
            "dyadic_above_limit",
            "alpha_below",
            "alpha_above",
            "gate_below_flat",
            "gate_above_flat",
            "gate_below_exponent",
        ],
    },
    Entry {
        name: "haar",
        verifies: "QR sampler draws Haar-distributed orthogonal matrices",
        operation: "sample_haar",
        required: &["n", "samples"],
        quantities: &[
            "haar_second_moment_deviation",
            "haar_second_moment_bound",
            "haar_ks_statistic",
            "haar_ks_p_value",
            "gate_second_moment",
            "gate_sphere_marginal",
        ],
    },
    Entry {
        name: "planeavg",
        verifies: "averaging a directional projection over rotations gains (nu/lambda)^(1/2) in L^2",
        operation: "plane_avg",
        required: keys!["lambda", "ratios", "p", "samples"],
        quantities: &[
            "planeavg_constant",
            "planeavg_projection",
            "planeavg_exponent",
            "gate_bounded",
            "gate_exponent",
        ],
    },
    Entry {
        name: "qavg",
        verifies: "the dual modulation norm of a potential averaged over tau in [M, 2M] and rotations decays like 1/M",
        operation: "avg_qnorm",
        required: keys!["M", "band", "samples"],
        quantities: &["qavg_lhs", "qavg_rhs", "qavg_ratio", "qavg_doubling_ratio", "gate_bounded", "gate_doubling"],
    },
    Entry {
        name: "bilinear",
        verifies: "multiplication by a potential is bounded between the modulation spaces",
        operation: "bilinear_norm",
        required: keys!["tau", "gamma", "samples"],
        quantities: &["bilinear_norm_q", "bilinear_norm_div", "bilinear_linfinity_bound", "bilinear_interval"],
    },
    Entry {
        name: "localization",
        verifies: "multiplication by a smooth cutoff maps homogeneous to inhomogeneous modulation spaces",
        operation: "verify_localization",
        required: keys!["tau", "radius", "width", "trials"],
        quantities: &["localization_dual", "localization_loc", "localization_unit", "gate_unit_exact"],
    },
    Entry {
        name: "zeta_stability",
        verifies: "modulation norms for nearby phases are equivalent with constants depending on their distance",
        operation: "verify_zeta_stability",
        required: keys!["tau", "r", "trials"],
        quantities: &[
            "stability_forward",
            "stability_backward",
            "stability_mc_forward",
            "stability_bound",
            "stability_distance",
            "gate_within_bound",
        ],
    },
    Entry {
        name: "zeta_pair",
        verifies: "tilted phase pairs are null and sum to i k exactly",
        operation: "make_zeta_pair",
        required: keys!["tau", "r", "samples"],
        quantities: &[
            "pair_null_defect",
            "pair_sum_defect",
            "pair_tilt",
            "pair_snap_distance",
            "gate_null",
            "gate_sum",
            "gate_tilt",
        ],
    },
    Entry {
        name: "conductivity",
        verifies: "synthetic conductivities are elliptic, supported in the ball and have the requested dyadic profile",
        operation: "make_conductivity",
        required: keys!["gamma"],
        quantities: &[
            "gamma_min",
            "gamma_max",
            "gamma_profile",
            "gamma_profile_slope",
            "gamma_besov_norm",
            "potential_route_gap",
        ],
    },
    Entry {
        name: "cgo",
        verifies: "Picard iteration for the CGO remainder contracts and the remainder is bounded by the potential",
        operation: "solve_cgo",
        required: keys!["tau", "gamma", "samples"],
        quantities: &[
            "cgo_converged",
            "cgo_max_ratio",
            "cgo_iterations",
            "cgo_refined_residual",
            "cgo_psi_norm",
            "cgo_q_norm",
            "cgo_floor_defect",
            "cgo_median_psi_norm",
            "gate_contraction",
            "gate_residual",
            "gate_psi_bound",
            "gate_psi_trend",
        ],
    },
    Entry {
        name: "selection",
        verifies: "some phase in [M, 2M] near the identity makes the smallness functional small",
        operation: "select_parameters",
        required: keys!["M", "eps_ball", "gamma", "samples"],
        quantities: &["selected_tau", "selection_delta", "selection_attempts", "selection_distance"],
    },
    Entry {
        name: "recovery",
        verifies: "pairing a potential against products of CGO solutions recovers its Fourier coefficient as tau grows",
        operation: "recover_fourier",
        required: keys!["tau", "r", "gamma", "samples"],
        quantities: &[
            "qhat_est_re",
            "qhat_est_im",
            "qhat_true_re",
            "qhat_true_im",
            "recovery_error",
            "remainder_linear",
            "remainder_bilinear",
            "bookkeeping_defect",
            "recovery_delta",
            "k_norm",
            "median_error",
            "error_ratio",
            "gate_bookkeeping",
            "gate_error_trend",
        ],
    },
    Entry {
        name: "alessandrini",
        verifies: "the interior identity pairing q1 - q2 against products of CGO solutions",
        operation: "alessandrini_gap",
        required: keys!["tau", "r", "gamma", "gamma2", "samples"],
        quantities: &[
            "gap_equal",
            "gap_abs",
            "gap_direct_abs",
            "gap_relative_error",
            "remainder_share",
            "gate_null_gap",
            "gate_gap_matches",
        ],
    },
    Entry {
        name: "gaidentity",
        verifies: "integral identity for g1 grad g2 - g2 grad g1 against grad log(g1/g2) that forces equal conductivities",
        operation: "gradient_identity_check",
        required: keys!["gamma", "gamma2"],
        quantities: &["gaidentity_lhs", "gaidentity_rhs", "gaidentity_discrepancy", "gate_discrepancy"],
    },
];

pub fn find(name: &str) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.name == name)
}

/// Human-readable listing for `cgolab list`.
pub fn render() -> String {
    let mut out = String::new();
    for e in CATALOG {
        out.push_str(&format!("{}\n", e.name));
        out.push_str(&format!("  verifies:  {}\n", e.verifies));
        out.push_str(&format!("  operation: {}\n", e.operation));
        out.push_str(&format!("  requires:  {}\n", e.required.join(", ")));
        out.push_str(&format!("  writes:    {}\n", e.quantities.join(", ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn names_and_operations_are_unique() {
        let names: HashSet<_> = CATALOG.iter().map(|e| e.name).collect();
        let ops: HashSet<_> = CATALOG.iter().map(|e| e.operation).collect();
        assert_eq!(names.len(), CATALOG.len());
        assert_eq!(ops.len(), CATALOG.len());
    }

    #[test]
    fn every_sampling_and_recovery_operation_listed_once() {
        let ops = [
            "sample_haar",
            "strichartz_constant",
            "plane_avg",
            "avg_qnorm",
            "bilinear_norm",
            "verify_localization",
            "verify_zeta_stability",
            "verify_dyadic_sums",
            "make_conductivity",
            "make_zeta_pair",
            "select_parameters",
            "recover_fourier",
            "alessandrini_gap",
            "gradient_identity_check",
        ];
        for op in ops {
            assert_eq!(CATALOG.iter().filter(|e| e.operation == op).count(), 1, "{op}");
        }
    }

    #[test]
    fn listing_is_stable() {
        assert_eq!(render(), render());
        assert!(render().contains("strichartz\n"));
        assert!(find("planeavg").is_some() && find("recovery").is_some());
    }
}
