#pragma once

// Shared domain types for the cost-sensitive learning toolkit: cost matrix,
// labeled dataset, prediction vector, probability-bin partition, and the
// adaptive-factor state threaded through training.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adacsl {

inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Errors

struct invalid_input_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct invalid_cost_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class training_diverged_error : public std::runtime_error {
public:
    training_diverged_error(const std::string& what, int epoch = -1, int batch = -1)
        : std::runtime_error(what), epoch_(epoch), batch_(batch) {}

    int epoch() const { return epoch_; }
    int batch() const { return batch_; }

private:
    int epoch_;
    int batch_;
};

// ---------------------------------------------------------------------------
// Dense row-major matrix of doubles. Small and value-semantic; rows are
// exposed as spans so callers never touch raw pointers.

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw invalid_input_error("matrix data size does not match rows*cols");
    }

    static Matrix zeros(std::size_t rows, std::size_t cols) {
        return Matrix(rows, cols, std::vector<double>(rows * cols, 0.0));
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const {
        return std::span<const double>(data_.data() + r * cols_, cols_);
    }

    void append_row(std::span<const double> values) {
        if (cols_ == 0 && rows_ == 0) cols_ = values.size();
        if (values.size() != cols_)
            throw invalid_input_error("appended row has wrong number of columns");
        data_.insert(data_.end(), values.begin(), values.end());
        ++rows_;
    }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// 2x2 misclassification cost structure with zero diagonal. Only the two
// off-diagonal entries are stored: the cost of a false positive (predicting
// 1 for an actual 0) and of a false negative (predicting 0 for an actual 1).

class CostMatrix {
public:
    CostMatrix(double false_positive_cost, double false_negative_cost)
        : fp_(false_positive_cost), fn_(false_negative_cost) {
        if (!(fp_ >= 0.0) || !(fn_ >= 0.0) || !std::isfinite(fp_) || !std::isfinite(fn_))
            throw invalid_cost_error("misclassification costs must be finite and nonnegative");
        if (fp_ == 0.0 && fn_ == 0.0)
            throw invalid_cost_error("at least one misclassification cost must be positive");
    }

    double fp_cost() const { return fp_; }
    double fn_cost() const { return fn_; }

    // rho, the experiment knob: fn/fp.
    double cost_ratio() const { return fn_ / fp_; }

private:
    double fp_;
    double fn_;
};

// ---------------------------------------------------------------------------
// Feature matrix plus binary labels.

struct LabeledDataset {
    Matrix features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return features.cols(); }
};

struct DatasetSummary {
    std::size_t rows = 0;       // K
    std::size_t features = 0;   // d
    std::size_t positives = 0;  // |D+|
    std::size_t negatives = 0;  // |D-|
    double imbalance_ratio = 0; // |D-| / |D+|
};

/// Checks every dataset invariant and returns per-class counts; throws
/// invalid_input_error naming the offending row otherwise.
inline DatasetSummary validate_dataset(const LabeledDataset& ds) {
    if (ds.size() == 0) throw invalid_input_error("empty dataset");
    if (ds.features.rows() != ds.labels.size())
        throw invalid_input_error("feature rows do not match label count");
    if (ds.dim() == 0) throw invalid_input_error("dataset has zero feature columns");

    DatasetSummary s;
    s.rows = ds.size();
    s.features = ds.dim();
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (double v : ds.features.row(r)) {
            if (!std::isfinite(v)) {
                std::ostringstream msg;
                msg << "non-finite feature value at row " << r;
                throw invalid_input_error(msg.str());
            }
        }
        const int y = ds.labels[r];
        if (y == 1) {
            ++s.positives;
        } else if (y == 0) {
            ++s.negatives;
        } else {
            std::ostringstream msg;
            msg << "label out of {0,1} at row " << r;
            throw invalid_input_error(msg.str());
        }
    }
    s.imbalance_ratio = s.positives > 0
        ? static_cast<double>(s.negatives) / static_cast<double>(s.positives)
        : std::numeric_limits<double>::infinity();
    return s;
}

// ---------------------------------------------------------------------------
// Per-instance positive-class probabilities.

class PredictionVector {
public:
    PredictionVector() = default;

    explicit PredictionVector(std::vector<double> probs) : probs_(std::move(probs)) {
        for (std::size_t i = 0; i < probs_.size(); ++i) {
            const double p = probs_[i];
            if (!std::isfinite(p) || p < 0.0 || p > 1.0) {
                std::ostringstream msg;
                msg << "probability out of [0,1] at index " << i;
                throw invalid_input_error(msg.str());
            }
        }
    }

    std::size_t size() const { return probs_.size(); }
    bool empty() const { return probs_.empty(); }
    double operator[](std::size_t i) const { return probs_[i]; }
    const std::vector<double>& probs() const { return probs_; }

private:
    std::vector<double> probs_;
};

// ---------------------------------------------------------------------------
// Assignment of instances to equal-width probability bins, with an optional
// cost-minimizing threshold per bin (filled in by the threshold search).

struct SubgroupPartition {
    std::vector<double> bin_edges;                     // num_bins+1 edges over [0,1]
    std::vector<std::size_t> assignments;              // per-instance bin index
    std::vector<std::size_t> bin_sizes;                // per-bin count
    std::vector<std::optional<double>> bin_thresholds; // unset for empty bins

    std::size_t num_bins() const { return bin_sizes.size(); }
};

/// Splits predictions into `num_bins` equal-width bins over [0,1]. Bins are
/// half-open [lo, hi) except the last, which is closed so p = 1.0 lands in it.
/// Thresholds are left unset.
inline SubgroupPartition partition_by_probability(const PredictionVector& preds, int num_bins) {
    if (preds.empty()) throw invalid_input_error("cannot partition an empty prediction vector");
    if (num_bins < 1) throw invalid_input_error("num_bins must be >= 1");

    const auto bins = static_cast<std::size_t>(num_bins);
    SubgroupPartition part;
    part.bin_edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i)
        part.bin_edges[i] = static_cast<double>(i) / static_cast<double>(bins);
    part.bin_sizes.assign(bins, 0);
    part.bin_thresholds.assign(bins, std::nullopt);
    part.assignments.reserve(preds.size());

    for (std::size_t i = 0; i < preds.size(); ++i) {
        auto bin = static_cast<std::size_t>(preds[i] * static_cast<double>(bins));
        bin = std::min(bin, bins - 1); // clamp p = 1.0 into the final bin
        part.assignments.push_back(bin);
        ++part.bin_sizes[bin];
    }
    return part;
}

} // namespace adacsl
