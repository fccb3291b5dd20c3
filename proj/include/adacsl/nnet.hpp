#pragma once

// Minimal feed-forward binary classifier: rectified-linear (or tanh) hidden
// layers, sigmoid output, trained by mini-batch SGD with backpropagation
// against any LossSpec, with optional weight decay on the weights.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "adacsl/core.hpp"
#include "adacsl/loss.hpp"

namespace adacsl {

enum class Activation { relu, tanh_act };

inline std::string activation_name(Activation a) {
    return a == Activation::relu ? "relu" : "tanh";
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "tanh") return Activation::tanh_act;
    throw invalid_input_error("unknown activation: " + name);
}

// ---------------------------------------------------------------------------

struct NetworkParams {
    std::vector<std::size_t> layer_sizes;      // [d, hidden..., 1]
    std::vector<Matrix> weights;               // layer l: layer_sizes[l] x layer_sizes[l+1]
    std::vector<std::vector<double>> biases;   // layer l: layer_sizes[l+1]
    Activation hidden_activation = Activation::relu;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t num_layers() const { return weights.size(); }
};

struct TrainConfig {
    double learning_rate = 0.05;
    std::size_t batch_size = 64;
    double weight_decay = 0.0;
    int max_epochs = 30;
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_sizes = {32};
};

/// Deterministic initialization: weights drawn from a zero-mean normal scaled
/// by fan-in (sqrt(2/fan_in) for rectified-linear hidden layers, sqrt(1/fan_in)
/// for the sigmoid output and tanh layers), biases zero.
inline NetworkParams init_network(const std::vector<std::size_t>& layer_sizes,
                                  std::uint64_t seed,
                                  Activation hidden_activation = Activation::relu) {
    if (layer_sizes.size() < 2) throw invalid_input_error("network needs at least input and output layers");
    for (std::size_t s : layer_sizes)
        if (s == 0) throw invalid_input_error("layer sizes must be positive");
    if (layer_sizes.back() != 1)
        throw invalid_input_error("output layer must have exactly one unit");

    NetworkParams params;
    params.layer_sizes = layer_sizes;
    params.hidden_activation = hidden_activation;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> unit_normal(0.0, 1.0);

    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        const std::size_t fan_in = layer_sizes[l];
        const std::size_t fan_out = layer_sizes[l + 1];
        const bool relu_hidden =
            l + 2 < layer_sizes.size() && hidden_activation == Activation::relu;
        const double scale = std::sqrt((relu_hidden ? 2.0 : 1.0) / static_cast<double>(fan_in));
        Matrix w = Matrix::zeros(fan_in, fan_out);
        for (double& v : w.data()) v = scale * unit_normal(rng);
        params.weights.push_back(std::move(w));
        params.biases.emplace_back(fan_out, 0.0);
    }
    return params;
}

namespace detail {

inline double hidden_forward(Activation a, double z) {
    return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

inline double hidden_derivative(Activation a, double z) {
    if (a == Activation::relu) return z > 0.0 ? 1.0 : 0.0;
    const double t = std::tanh(z);
    return 1.0 - t * t;
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Forward pass storing per-layer pre-activations and activations;
// activations[0] is the input row.
struct ForwardTrace {
    std::vector<std::vector<double>> pre;   // z per layer
    std::vector<std::vector<double>> act;   // a per layer, act[0] = x
};

inline double traced_forward(const NetworkParams& params, std::span<const double> x,
                             ForwardTrace& trace) {
    const std::size_t layers = params.num_layers();
    trace.pre.assign(layers, {});
    trace.act.assign(layers + 1, {});
    trace.act[0].assign(x.begin(), x.end());

    for (std::size_t l = 0; l < layers; ++l) {
        const Matrix& w = params.weights[l];
        const auto& in = trace.act[l];
        auto& z = trace.pre[l];
        z = params.biases[l];
        for (std::size_t i = 0; i < w.rows(); ++i) {
            const double xi = in[i];
            if (xi == 0.0) continue;
            for (std::size_t j = 0; j < w.cols(); ++j) z[j] += xi * w(i, j);
        }
        auto& a = trace.act[l + 1];
        a.resize(z.size());
        if (l + 1 == layers) {
            a[0] = clamp_probability(sigmoid(z[0]));
        } else {
            for (std::size_t j = 0; j < z.size(); ++j)
                a[j] = hidden_forward(params.hidden_activation, z[j]);
        }
    }
    return trace.act[layers][0];
}

} // namespace detail

/// Positive-class probability for a single feature row, strictly inside (0,1).
inline double forward(const NetworkParams& params, std::span<const double> x) {
    if (x.size() != params.input_dim())
        throw invalid_input_error("feature row does not match network input size");
    detail::ForwardTrace trace;
    return detail::traced_forward(params, x, trace);
}

inline PredictionVector predict_batch(const NetworkParams& params, const Matrix& features) {
    if (features.cols() != params.input_dim())
        throw invalid_input_error("feature matrix does not match network input size");
    std::vector<double> probs(features.rows());
    detail::ForwardTrace trace;
    for (std::size_t r = 0; r < features.rows(); ++r)
        probs[r] = detail::traced_forward(params, features.row(r), trace);
    return PredictionVector(std::move(probs));
}

/// One gradient-descent step on the mean weighted-CE over the rows listed in
/// `batch_rows`. Returns the mean batch loss measured before the update.
/// Weight decay, when nonzero, is added to weight gradients only.
inline double train_batch(NetworkParams& params, const Matrix& features,
                          std::span<const int> labels, std::span<const std::size_t> batch_rows,
                          const LossSpec& spec, const TrainConfig& cfg) {
    if (batch_rows.empty()) throw invalid_input_error("empty training batch");
    if (features.cols() != params.input_dim())
        throw invalid_input_error("feature matrix does not match network input size");

    const double w_neg = negative_weight(spec);
    const std::size_t layers = params.num_layers();
    std::vector<Matrix> weight_grads;
    std::vector<std::vector<double>> bias_grads;
    weight_grads.reserve(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        weight_grads.push_back(Matrix::zeros(params.weights[l].rows(), params.weights[l].cols()));
        bias_grads.emplace_back(params.biases[l].size(), 0.0);
    }

    double loss_sum = 0.0;
    detail::ForwardTrace trace;
    std::vector<std::vector<double>> delta(layers);

    for (std::size_t row : batch_rows) {
        const int y = labels[row];
        const double y_hat = detail::traced_forward(params, features.row(row), trace);
        loss_sum += weighted_ce(y, y_hat, w_neg);

        // Output delta: dL/dy_hat * sigmoid'(z) with sigmoid' = y_hat(1-y_hat).
        delta[layers - 1].assign(1, weighted_ce_gradient(y, y_hat, w_neg) * y_hat * (1.0 - y_hat));

        for (std::size_t l = layers; l-- > 0;) {
            const auto& d = delta[l];
            const auto& in = trace.act[l];
            Matrix& wg = weight_grads[l];
            for (std::size_t i = 0; i < wg.rows(); ++i) {
                const double xi = in[i];
                if (xi == 0.0) continue;
                for (std::size_t j = 0; j < wg.cols(); ++j) wg(i, j) += xi * d[j];
            }
            auto& bg = bias_grads[l];
            for (std::size_t j = 0; j < bg.size(); ++j) bg[j] += d[j];

            if (l == 0) break;
            auto& prev = delta[l - 1];
            prev.assign(trace.pre[l - 1].size(), 0.0);
            const Matrix& w = params.weights[l];
            for (std::size_t i = 0; i < w.rows(); ++i) {
                double s = 0.0;
                for (std::size_t j = 0; j < w.cols(); ++j) s += w(i, j) * d[j];
                prev[i] = s * detail::hidden_derivative(params.hidden_activation, trace.pre[l - 1][i]);
            }
        }
    }

    const double inv_batch = 1.0 / static_cast<double>(batch_rows.size());
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix& w = params.weights[l];
        const Matrix& wg = weight_grads[l];
        for (std::size_t i = 0; i < w.data().size(); ++i) {
            const double g = wg.data()[i] * inv_batch + cfg.weight_decay * w.data()[i];
            if (!std::isfinite(g)) throw training_diverged_error("non-finite weight gradient");
            w.data()[i] -= cfg.learning_rate * g;
        }
        auto& b = params.biases[l];
        for (std::size_t j = 0; j < b.size(); ++j) {
            const double g = bias_grads[l][j] * inv_batch;
            if (!std::isfinite(g)) throw training_diverged_error("non-finite bias gradient");
            b[j] -= cfg.learning_rate * g;
        }
    }
    return loss_sum * inv_batch;
}

/// Convenience overload: the given arrays are the whole batch.
inline double train_batch(NetworkParams& params, const Matrix& features,
                          std::span<const int> labels, const LossSpec& spec,
                          const TrainConfig& cfg) {
    std::vector<std::size_t> rows(features.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return train_batch(params, features, labels, rows, spec, cfg);
}

/// One pass over the training set in seeded-shuffle order, split into
/// ceil(K / batch_size) batches. Returns the sample-weighted mean loss.
/// Divergence errors are annotated with the epoch and batch index.
inline double train_epoch(NetworkParams& params, const LabeledDataset& train,
                          const LossSpec& spec, const TrainConfig& cfg,
                          std::mt19937_64& shuffle_rng, int epoch_index = -1) {
    const std::size_t n = train.size();
    if (n == 0) throw invalid_input_error("empty training set");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    const std::size_t batch = std::max<std::size_t>(1, cfg.batch_size);
    double loss_sum = 0.0;
    int batch_index = 0;
    for (std::size_t start = 0; start < n; start += batch, ++batch_index) {
        const std::size_t count = std::min(batch, n - start);
        std::span<const std::size_t> rows(order.data() + start, count);
        try {
            loss_sum += train_batch(params, train.features, train.labels, rows, spec, cfg)
                        * static_cast<double>(count);
        } catch (const training_diverged_error& e) {
            throw training_diverged_error(
                std::string(e.what()) + " (epoch " + std::to_string(epoch_index) +
                    ", batch " + std::to_string(batch_index) + ")",
                epoch_index, batch_index);
        }
    }
    return loss_sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Checkpoints: layer sizes plus flat parameter arrays as JSON; doubles are
// written with shortest round-trip precision.

inline nlohmann::json network_to_json(const NetworkParams& params) {
    nlohmann::json j;
    j["layer_sizes"] = params.layer_sizes;
    j["activation"] = activation_name(params.hidden_activation);
    nlohmann::json weights = nlohmann::json::array();
    nlohmann::json biases = nlohmann::json::array();
    for (std::size_t l = 0; l < params.num_layers(); ++l) {
        weights.push_back(params.weights[l].data());
        biases.push_back(params.biases[l]);
    }
    j["weights"] = std::move(weights);
    j["biases"] = std::move(biases);
    return j;
}

inline NetworkParams network_from_json(const nlohmann::json& j) {
    NetworkParams params;
    params.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    if (params.layer_sizes.size() < 2)
        throw invalid_input_error("checkpoint has fewer than two layers");
    params.hidden_activation = activation_from_name(j.at("activation").get<std::string>());
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() + 1 != params.layer_sizes.size() || biases.size() != weights.size())
        throw invalid_input_error("checkpoint layer counts are inconsistent");
    for (std::size_t l = 0; l + 1 < params.layer_sizes.size(); ++l) {
        params.weights.emplace_back(params.layer_sizes[l], params.layer_sizes[l + 1],
                                    weights[l].get<std::vector<double>>());
        params.biases.push_back(biases[l].get<std::vector<double>>());
        if (params.biases.back().size() != params.layer_sizes[l + 1])
            throw invalid_input_error("checkpoint bias length is inconsistent");
    }
    return params;
}

inline void save_network(const NetworkParams& params, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open checkpoint for writing: " + path);
    out << network_to_json(params).dump(2) << '\n';
    if (!out) throw io_error("failed writing checkpoint: " + path);
}

inline NetworkParams load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw io_error("malformed checkpoint " + path + ": " + e.what());
    }
    return network_from_json(j);
}

} // namespace adacsl
