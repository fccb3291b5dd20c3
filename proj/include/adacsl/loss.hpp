#pragma once

// Cost-weighted binary cross-entropy and the adaptive machinery around it:
// the negative-class weight, the per-subgroup exponential adjustment factor,
// its size-weighted average, and the prior-shift probability correction.

#include <cmath>
#include <cstddef>

#include "adacsl/core.hpp"

namespace adacsl {

// Predicted probabilities are clamped away from {0,1} before any log or
// gradient evaluation so saturated sigmoids cannot produce infinities.
inline constexpr double kProbEps = 1e-12;

inline double clamp_probability(double p) {
    if (p < kProbEps) return kProbEps;
    if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
    return p;
}

// ---------------------------------------------------------------------------
// Loss parameterization: cost matrix, intended operating threshold T', and
// the adaptive factor lambda. lambda = 1 gives the fixed weighted CE; a
// symmetric cost matrix with T' = 0.5 reduces to standard CE.

struct LossSpec {
    CostMatrix cm;
    double target_threshold; // T'
    double lambda;

    LossSpec(CostMatrix cost_matrix, double t_prime = 0.5, double lambda_factor = 1.0)
        : cm(cost_matrix), target_threshold(t_prime), lambda(lambda_factor) {
        if (!(target_threshold > 0.0 && target_threshold < 1.0))
            throw invalid_input_error("target threshold must lie strictly inside (0,1)");
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw invalid_input_error("lambda must be a positive finite real");
    }
};

/// Multiplier on the negative-class CE term:
/// w = lambda * (fp/fn) * ((1-T')/T').
inline double negative_weight(const LossSpec& spec) {
    if (spec.cm.fn_cost() == 0.0)
        throw invalid_cost_error("negative weight undefined for zero false-negative cost");
    const double t = spec.target_threshold;
    return spec.lambda * (spec.cm.fp_cost() / spec.cm.fn_cost()) * ((1.0 - t) / t);
}

/// Per-sample loss: -y*ln(y_hat) - w*(1-y)*ln(1-y_hat).
inline double weighted_ce(int y, double y_hat, double w) {
    if (y != 0 && y != 1) throw invalid_input_error("label must be 0 or 1");
    const double p = clamp_probability(y_hat);
    if (y == 1) return -std::log(p);
    return -w * std::log(1.0 - p);
}

/// dL/dy_hat = -y/y_hat + w*(1-y)/(1-y_hat).
inline double weighted_ce_gradient(int y, double y_hat, double w) {
    if (y != 0 && y != 1) throw invalid_input_error("label must be 0 or 1");
    const double p = clamp_probability(y_hat);
    if (y == 1) return -1.0 / p;
    return w / (1.0 - p);
}

// ---------------------------------------------------------------------------
// Adaptive adjustment factors.

/// Exponential adjustment for one subgroup:
/// exp(-(T' - T_actual) / (T' * (1 - T'))).
/// Equals 1 exactly when the actual threshold already matches the target,
/// rises above 1 when the actual threshold is higher.
inline double subgroup_lambda(double t_prime, double t_actual) {
    if (!(t_prime > 0.0 && t_prime < 1.0))
        throw invalid_input_error("target threshold must lie strictly inside (0,1)");
    return std::exp(-(t_prime - t_actual) / (t_prime * (1.0 - t_prime)));
}

/// The exact odds-rescaling factor the exponential approximates:
/// (T_actual/(1-T_actual)) * ((1-T')/T'). Kept alongside subgroup_lambda so
/// the quality of the first-order approximation is testable.
inline double exact_odds_factor(double t_prime, double t_actual) {
    if (!(t_prime > 0.0 && t_prime < 1.0) || !(t_actual > 0.0 && t_actual < 1.0))
        throw invalid_input_error("thresholds must lie strictly inside (0,1)");
    return (t_actual / (1.0 - t_actual)) * ((1.0 - t_prime) / t_prime);
}

/// Size-weighted average of subgroup_lambda over the non-empty bins of a
/// partition whose thresholds have been filled in.
inline double averaged_lambda(const SubgroupPartition& partition, double t_prime) {
    double weighted_sum = 0.0;
    double total = 0.0;
    for (std::size_t m = 0; m < partition.num_bins(); ++m) {
        if (partition.bin_sizes[m] == 0) continue;
        if (!partition.bin_thresholds[m].has_value())
            throw invalid_input_error("non-empty bin has no threshold");
        const auto size = static_cast<double>(partition.bin_sizes[m]);
        weighted_sum += size * subgroup_lambda(t_prime, *partition.bin_thresholds[m]);
        total += size;
    }
    if (total == 0.0) throw invalid_input_error("all bins are empty");
    return weighted_sum / total;
}

// ---------------------------------------------------------------------------
// Prior-shift correction.

/// Rescales a predicted probability when the positive-class prior moves from
/// p_old to p_new, via the Bayes odds update
/// odds' = odds * (p_new/(1-p_new)) * ((1-p_old)/p_old).
/// Identity at p_new == p_old; inverting the shift restores the input.
inline double prior_shift_probability(double y_hat, double p_old, double p_new) {
    if (!(y_hat > 0.0 && y_hat < 1.0) || !(p_old > 0.0 && p_old < 1.0) ||
        !(p_new > 0.0 && p_new < 1.0))
        throw invalid_input_error("prior shift arguments must lie strictly inside (0,1)");
    const double numerator = p_new * y_hat * (1.0 - p_old);
    const double denominator = p_old - p_old * y_hat + p_new * y_hat - p_old * p_new;
    return numerator / denominator;
}

} // namespace adacsl
