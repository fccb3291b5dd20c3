#pragma once

// Adaptive cost-sensitive training driver. Each epoch trains with the current
// lambda, scores the validation set, partitions the predictions into
// probability bins, finds the cost-minimizing threshold per bin, and updates
// lambda multiplicatively by the size-weighted average of the per-bin
// exponential factors, stopping once the update is smaller than epsilon.

#include <cmath>
#include <cstddef>
#include <iostream>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "adacsl/core.hpp"
#include "adacsl/costmodel.hpp"
#include "adacsl/loss.hpp"
#include "adacsl/nnet.hpp"

namespace adacsl {

// Accumulated lambda is kept inside these bounds; the multiplicative update
// is otherwise unbounded across epochs.
inline constexpr double kLambdaMin = 1e-3;
inline constexpr double kLambdaMax = 1e3;

struct AdaCslConfig {
    CostMatrix cm;
    double target_threshold = 0.5; // T'
    int num_bins = 10;             // 1 = single threshold over the whole validation set
    ThresholdCandidates candidates = ThresholdCandidates::uniform_grid();
    double epsilon = 0.01;
    int max_epochs = 30;
    TrainConfig train;

    explicit AdaCslConfig(CostMatrix cost_matrix) : cm(cost_matrix) {}
};

struct TrajectoryEntry {
    int epoch = 0;     // 1-based completed epoch
    double lambda = 1; // accumulated lambda after this epoch's adjustment
    std::vector<std::optional<double>> bin_thresholds;
    double val_cost = 0.0;
    double train_cost = std::numeric_limits<double>::quiet_NaN(); // filled by run_adacsl
    bool clamped = false;
};

struct LambdaState {
    double lambda_current = 1.0;
    int epoch_index = 0; // completed adaptation steps
    std::vector<TrajectoryEntry> trajectory;
};

/// Steps (c)-(d) of the per-epoch adjustment: partition validation
/// predictions into bins and search the cost-minimizing threshold of every
/// non-empty bin.
inline SubgroupPartition subgroup_thresholds(const PredictionVector& preds,
                                             std::span<const int> labels,
                                             const AdaCslConfig& cfg) {
    if (preds.size() != labels.size())
        throw invalid_input_error("predictions and labels differ in length");
    SubgroupPartition part = partition_by_probability(preds, cfg.num_bins);

    for (std::size_t m = 0; m < part.num_bins(); ++m) {
        if (part.bin_sizes[m] == 0) continue;
        std::vector<double> bin_probs;
        std::vector<int> bin_labels;
        bin_probs.reserve(part.bin_sizes[m]);
        bin_labels.reserve(part.bin_sizes[m]);
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (part.assignments[i] != m) continue;
            bin_probs.push_back(preds[i]);
            bin_labels.push_back(labels[i]);
        }
        part.bin_thresholds[m] = search_optimal_threshold(
            PredictionVector(std::move(bin_probs)), bin_labels, cfg.cm, cfg.candidates,
            cfg.target_threshold);
    }
    return part;
}

/// One adaptive adjustment: multiplies the accumulated lambda by the
/// size-weighted average factor, clamps it, and appends a trajectory entry.
/// Pure with respect to model parameters.
inline LambdaState adapt_lambda(const LambdaState& state, const PredictionVector& val_preds,
                                std::span<const int> val_labels, const AdaCslConfig& cfg) {
    const SubgroupPartition part = subgroup_thresholds(val_preds, val_labels, cfg);
    const double factor = averaged_lambda(part, cfg.target_threshold);

    LambdaState next = state;
    double updated = state.lambda_current * factor;
    bool clamped = false;
    if (updated < kLambdaMin) { updated = kLambdaMin; clamped = true; }
    if (updated > kLambdaMax) { updated = kLambdaMax; clamped = true; }

    next.lambda_current = updated;
    next.epoch_index = state.epoch_index + 1;
    TrajectoryEntry entry;
    entry.epoch = next.epoch_index;
    entry.lambda = updated;
    entry.bin_thresholds = part.bin_thresholds;
    entry.val_cost = empirical_cost(val_preds, val_labels, cfg.target_threshold, cfg.cm);
    entry.clamped = clamped;
    next.trajectory.push_back(std::move(entry));
    return next;
}

struct AdaCslResult {
    NetworkParams final_params;
    NetworkParams best_params; // epoch with minimum validation cost
    int best_epoch = 0;
    double best_val_cost = std::numeric_limits<double>::infinity();
    LambdaState state;
    PredictionVector epoch1_val_preds; // validation scores after the first epoch
};

/// Full adaptive training loop. Stops when |lambda_{i+1} - lambda_i| falls
/// below epsilon or max_epochs is reached. The best-validation-cost model is
/// retained alongside the final one.
inline AdaCslResult run_adacsl(const LabeledDataset& train, const LabeledDataset& val,
                               const AdaCslConfig& cfg) {
    validate_dataset(train);
    const DatasetSummary val_summary = validate_dataset(val);
    if (val_summary.positives == 0 || val_summary.negatives == 0)
        std::cerr << "warning: validation set contains a single class; "
                     "threshold search will be one-sided\n";
    if (!(cfg.epsilon > 0.0)) throw invalid_input_error("epsilon must be positive");
    if (cfg.max_epochs < 1) throw invalid_input_error("max_epochs must be >= 1");

    std::vector<std::size_t> layer_sizes;
    layer_sizes.push_back(train.dim());
    layer_sizes.insert(layer_sizes.end(), cfg.train.hidden_sizes.begin(),
                       cfg.train.hidden_sizes.end());
    layer_sizes.push_back(1);

    AdaCslResult result;
    result.final_params = init_network(layer_sizes, cfg.train.seed);
    result.best_params = result.final_params;
    std::mt19937_64 shuffle_rng(cfg.train.seed + 1);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const LossSpec spec(cfg.cm, cfg.target_threshold, result.state.lambda_current);
        train_epoch(result.final_params, train, spec, cfg.train, shuffle_rng, epoch);

        const PredictionVector val_preds = predict_batch(result.final_params, val.features);
        if (epoch == 1) result.epoch1_val_preds = val_preds;

        const double lambda_before = result.state.lambda_current;
        result.state = adapt_lambda(result.state, val_preds, val.labels, cfg);
        TrajectoryEntry& entry = result.state.trajectory.back();
        entry.train_cost = empirical_cost(predict_batch(result.final_params, train.features),
                                          train.labels, cfg.target_threshold, cfg.cm);

        if (entry.val_cost < result.best_val_cost) {
            result.best_val_cost = entry.val_cost;
            result.best_epoch = epoch;
            result.best_params = result.final_params;
        }
        if (std::abs(result.state.lambda_current - lambda_before) < cfg.epsilon) break;
    }
    return result;
}

} // namespace adacsl
