#pragma once

// Decision-level cost mathematics: the analytic cost-minimizing threshold,
// expected risk of a decision, empirical cost of a thresholded prediction
// vector, grid search for the empirically optimal threshold, and the
// class-rebalancing multiplier used by the data-level baseline.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "adacsl/core.hpp"

namespace adacsl {

// ---------------------------------------------------------------------------
// Candidate threshold set for the empirical search.

class ThresholdCandidates {
public:
    explicit ThresholdCandidates(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw invalid_input_error("threshold candidate set is empty");
        double prev = -1.0;
        for (double v : values_) {
            if (!std::isfinite(v) || v < 0.0 || v > 1.0)
                throw invalid_input_error("threshold candidate out of [0,1]");
            if (v < prev) throw invalid_input_error("threshold candidates must be sorted ascending");
            prev = v;
        }
    }

    /// Uniform grid {1/(steps+1), ..., steps/(steps+1)}; the default 99 steps
    /// gives {0.01, 0.02, ..., 0.99}.
    static ThresholdCandidates uniform_grid(int steps = 99) {
        if (steps < 1) throw invalid_input_error("grid needs at least one step");
        std::vector<double> v(static_cast<std::size_t>(steps));
        for (int i = 1; i <= steps; ++i)
            v[static_cast<std::size_t>(i - 1)] = static_cast<double>(i) / static_cast<double>(steps + 1);
        return ThresholdCandidates(std::move(v));
    }

    /// Midpoints between consecutive distinct predicted probabilities.
    /// Falls back to {0.5} when there are fewer than two distinct values.
    static ThresholdCandidates from_midpoints(const PredictionVector& preds) {
        std::vector<double> sorted = preds.probs();
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        if (sorted.size() < 2) return ThresholdCandidates({0.5});
        std::vector<double> mids;
        mids.reserve(sorted.size() - 1);
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
            mids.push_back(0.5 * (sorted[i] + sorted[i + 1]));
        return ThresholdCandidates(std::move(mids));
    }

    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Analytic quantities.

/// Probability cutoff that minimizes expected cost: fp / (fp + fn).
inline double optimal_threshold(const CostMatrix& cm) {
    return cm.fp_cost() / (cm.fp_cost() + cm.fn_cost());
}

/// Expected cost of deciding `predicted_class` for an instance whose
/// positive probability is p_pos. With a zero diagonal this is a single term:
/// class 0 risks the false-negative cost, class 1 the false-positive cost.
inline double expected_risk(double p_pos, int predicted_class, const CostMatrix& cm) {
    if (!(p_pos >= 0.0 && p_pos <= 1.0))
        throw invalid_input_error("p_pos must lie in [0,1]");
    if (predicted_class == 0) return p_pos * cm.fn_cost();
    if (predicted_class == 1) return (1.0 - p_pos) * cm.fp_cost();
    throw invalid_input_error("predicted class must be 0 or 1");
}

/// Multiplier on the negative-class count that makes operating threshold
/// `target_threshold` cost-optimal: (fp/fn) * ((1-T')/T').
inline double negative_multiplier(const CostMatrix& cm, double target_threshold) {
    if (!(target_threshold > 0.0 && target_threshold < 1.0))
        throw invalid_input_error("target threshold must lie strictly inside (0,1)");
    if (cm.fn_cost() == 0.0)
        throw invalid_cost_error("negative multiplier undefined for zero false-negative cost");
    return (cm.fp_cost() / cm.fn_cost()) * ((1.0 - target_threshold) / target_threshold);
}

// ---------------------------------------------------------------------------
// Empirical quantities.

/// Label 1 where p > tau, else 0. The comparison is strict, so p == tau is
/// classified negative.
inline std::vector<int> classify(const PredictionVector& preds, double tau) {
    std::vector<int> labels(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        labels[i] = preds[i] > tau ? 1 : 0;
    return labels;
}

/// Total misclassification cost of thresholding `preds` at tau:
/// #FP * fp_cost + #FN * fn_cost.
inline double empirical_cost(const PredictionVector& preds, std::span<const int> labels,
                             double tau, const CostMatrix& cm) {
    if (preds.size() != labels.size())
        throw invalid_input_error("predictions and labels differ in length");
    std::size_t false_pos = 0, false_neg = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const bool predicted_pos = preds[i] > tau;
        if (predicted_pos && labels[i] == 0) ++false_pos;
        if (!predicted_pos && labels[i] == 1) ++false_neg;
    }
    return static_cast<double>(false_pos) * cm.fp_cost()
         + static_cast<double>(false_neg) * cm.fn_cost();
}

/// Candidate threshold with minimal empirical cost. Cost ties are broken by
/// proximity to `target_threshold`, remaining ties by the smaller candidate;
/// keeping the target competitive on plateaus leaves the adaptive adjustment
/// at its fixed point.
inline double search_optimal_threshold(const PredictionVector& preds, std::span<const int> labels,
                                       const CostMatrix& cm, const ThresholdCandidates& candidates,
                                       double target_threshold) {
    if (preds.empty()) throw invalid_input_error("threshold search over empty predictions");
    if (preds.size() != labels.size())
        throw invalid_input_error("predictions and labels differ in length");

    double best_tau = candidates.values().front();
    double best_cost = empirical_cost(preds, labels, best_tau, cm);
    double best_dist = std::abs(best_tau - target_threshold);
    for (std::size_t i = 1; i < candidates.values().size(); ++i) {
        const double tau = candidates.values()[i];
        const double cost = empirical_cost(preds, labels, tau, cm);
        const double dist = std::abs(tau - target_threshold);
        if (cost < best_cost || (cost == best_cost && dist < best_dist)) {
            best_tau = tau;
            best_cost = cost;
            best_dist = dist;
        }
    }
    return best_tau;
}

} // namespace adacsl
