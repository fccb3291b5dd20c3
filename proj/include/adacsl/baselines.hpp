#pragma once

// The comparison methods: standard CE, decision-level threshold adjustment,
// fixed weighted CE, cost-ratio resampling of the negative class, and tabular
// SMOTE oversampling of the minority class.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "adacsl/core.hpp"
#include "adacsl/costmodel.hpp"
#include "adacsl/loss.hpp"
#include "adacsl/nnet.hpp"

namespace adacsl {

struct TrainedModel {
    NetworkParams final_params;
    NetworkParams best_params; // epoch with minimum validation cost
    int best_epoch = 0;
    double best_val_cost = std::numeric_limits<double>::infinity();
    std::vector<double> val_costs; // per epoch, at the selection threshold
};

/// Fixed-loss training with per-epoch model selection by validation cost at
/// `selection_threshold` under `selection_cm`.
inline TrainedModel fit_with_selection(const LabeledDataset& train, const LabeledDataset& val,
                                       const LossSpec& spec, const TrainConfig& cfg,
                                       double selection_threshold,
                                       const CostMatrix& selection_cm) {
    validate_dataset(train);
    validate_dataset(val);

    std::vector<std::size_t> layer_sizes;
    layer_sizes.push_back(train.dim());
    layer_sizes.insert(layer_sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
    layer_sizes.push_back(1);

    TrainedModel model;
    model.final_params = init_network(layer_sizes, cfg.seed);
    model.best_params = model.final_params;
    std::mt19937_64 shuffle_rng(cfg.seed + 1);

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        train_epoch(model.final_params, train, spec, cfg, shuffle_rng, epoch);
        const PredictionVector val_preds = predict_batch(model.final_params, val.features);
        const double cost =
            empirical_cost(val_preds, val.labels, selection_threshold, selection_cm);
        model.val_costs.push_back(cost);
        if (cost < model.best_val_cost) {
            model.best_val_cost = cost;
            model.best_epoch = epoch;
            model.best_params = model.final_params;
        }
    }
    return model;
}

/// Plain cross-entropy baseline; decisions at 0.5. The cost matrix is used
/// only to pick the reported epoch by validation cost.
inline TrainedModel train_standard(const LabeledDataset& train, const LabeledDataset& val,
                                   const TrainConfig& cfg,
                                   const CostMatrix& selection_cm = CostMatrix(1.0, 1.0)) {
    return fit_with_selection(train, val, LossSpec(CostMatrix(1.0, 1.0), 0.5, 1.0), cfg, 0.5,
                              selection_cm);
}

/// Fixed weighted CE: the cost-ratio weight at T' = 0.5, no adaptation;
/// decisions at 0.5.
inline TrainedModel train_weighted_ce(const LabeledDataset& train, const LabeledDataset& val,
                                      const TrainConfig& cfg, const CostMatrix& cm) {
    return fit_with_selection(train, val, LossSpec(cm, 0.5, 1.0), cfg, 0.5, cm);
}

// ---------------------------------------------------------------------------
// Decision-level approach: keep the model, move the threshold.

struct ThresholdDecision {
    NetworkParams params;
    double threshold;

    std::vector<int> operator()(const PredictionVector& preds) const {
        return classify(preds, threshold);
    }
    std::vector<int> classify_features(const Matrix& features) const {
        return classify(predict_batch(params, features), threshold);
    }
};

inline ThresholdDecision threshold_adjusted_decision(NetworkParams params, const CostMatrix& cm) {
    return ThresholdDecision{std::move(params), optimal_threshold(cm)};
}

// ---------------------------------------------------------------------------
// Data-level approaches.

/// Resamples the negative class so its count becomes round(m * |D-|), where
/// m is the rebalancing multiplier. m < 1 keeps a seeded sample without
/// replacement; m > 1 appends whole copies plus a seeded remainder sample.
/// Positive rows are untouched.
inline LabeledDataset resample_by_cost(const LabeledDataset& ds, const CostMatrix& cm,
                                       double target_threshold, std::uint64_t seed) {
    validate_dataset(ds);
    const double multiplier = negative_multiplier(cm, target_threshold);

    std::vector<std::size_t> negative_rows;
    for (std::size_t r = 0; r < ds.size(); ++r)
        if (ds.labels[r] == 0) negative_rows.push_back(r);

    const auto target = static_cast<std::size_t>(
        std::llround(multiplier * static_cast<double>(negative_rows.size())));
    if (!negative_rows.empty() && target == 0)
        throw invalid_input_error("resampling would remove all negatives");
    if (target == negative_rows.size()) return ds;

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> keep; // negative rows of the output, as source indices
    if (target < negative_rows.size()) {
        std::vector<std::size_t> pool = negative_rows;
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(target);
        std::sort(pool.begin(), pool.end()); // preserve original row order
        keep = std::move(pool);
    } else {
        const std::size_t full_copies = target / negative_rows.size();
        const std::size_t remainder = target % negative_rows.size();
        for (std::size_t c = 0; c < full_copies; ++c)
            keep.insert(keep.end(), negative_rows.begin(), negative_rows.end());
        std::vector<std::size_t> pool = negative_rows;
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(remainder);
        keep.insert(keep.end(), pool.begin(), pool.end());
    }

    LabeledDataset out;
    out.features = Matrix(0, ds.dim(), {});
    // Positives first in original order, then the resampled negatives.
    for (std::size_t r = 0; r < ds.size(); ++r) {
        if (ds.labels[r] != 1) continue;
        out.features.append_row(ds.features.row(r));
        out.labels.push_back(1);
    }
    for (std::size_t r : keep) {
        out.features.append_row(ds.features.row(r));
        out.labels.push_back(0);
    }
    return out;
}

/// Synthetic minority oversampling: interpolates between a sampled minority
/// row and one of its k nearest minority neighbors until the minority count
/// reaches round(target_ratio * majority count).
inline LabeledDataset smote_oversample(const LabeledDataset& ds, int k, double target_ratio,
                                       std::uint64_t seed) {
    const DatasetSummary summary = validate_dataset(ds);
    if (k < 1) throw invalid_input_error("k must be >= 1");
    if (!(target_ratio > 0.0)) throw invalid_input_error("target ratio must be positive");

    const int minority_label = summary.positives <= summary.negatives ? 1 : 0;
    std::vector<std::size_t> minority_rows;
    for (std::size_t r = 0; r < ds.size(); ++r)
        if (ds.labels[r] == minority_label) minority_rows.push_back(r);
    const std::size_t n_minority = minority_rows.size();
    const std::size_t n_majority = ds.size() - n_minority;

    if (n_minority < static_cast<std::size_t>(k) + 1)
        throw invalid_input_error("minority class too small for k=" + std::to_string(k) +
                                  " nearest neighbors");

    const auto target = static_cast<std::size_t>(
        std::llround(target_ratio * static_cast<double>(n_majority)));
    if (target <= n_minority) return ds;
    const std::size_t n_synthetic = target - n_minority;

    // k nearest minority neighbors of each minority row (Euclidean).
    std::vector<std::vector<std::size_t>> neighbors(n_minority);
    for (std::size_t a = 0; a < n_minority; ++a) {
        std::vector<std::pair<double, std::size_t>> dists;
        dists.reserve(n_minority - 1);
        for (std::size_t b = 0; b < n_minority; ++b) {
            if (a == b) continue;
            const auto ra = ds.features.row(minority_rows[a]);
            const auto rb = ds.features.row(minority_rows[b]);
            double d2 = 0.0;
            for (std::size_t c = 0; c < ra.size(); ++c) {
                const double diff = ra[c] - rb[c];
                d2 += diff * diff;
            }
            dists.emplace_back(d2, b);
        }
        std::sort(dists.begin(), dists.end());
        for (int j = 0; j < k; ++j) neighbors[a].push_back(dists[static_cast<std::size_t>(j)].second);
    }

    LabeledDataset out = ds;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_row(0, n_minority - 1);
    std::uniform_int_distribution<std::size_t> pick_neighbor(0, static_cast<std::size_t>(k) - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> synthetic(ds.dim());

    for (std::size_t s = 0; s < n_synthetic; ++s) {
        const std::size_t a = pick_row(rng);
        const std::size_t b = neighbors[a][pick_neighbor(rng)];
        const double u = unit(rng);
        const auto ra = ds.features.row(minority_rows[a]);
        const auto rb = ds.features.row(minority_rows[b]);
        for (std::size_t c = 0; c < synthetic.size(); ++c)
            synthetic[c] = ra[c] + u * (rb[c] - ra[c]);
        out.features.append_row(synthetic);
        out.labels.push_back(minority_label);
    }
    return out;
}

} // namespace adacsl
