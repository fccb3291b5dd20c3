#pragma once

// Experiment harness: synthetic data generation, CSV ingestion, deterministic
// splits, the (cost setup x method x seed) sweep with summary-table reports,
// per-subgroup analysis, and trajectory series emission.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "adacsl/adacsl.hpp"
#include "adacsl/baselines.hpp"
#include "adacsl/core.hpp"
#include "adacsl/costmodel.hpp"
#include "adacsl/loss.hpp"
#include "adacsl/nnet.hpp"

namespace adacsl {

// ---------------------------------------------------------------------------
// Formatting: shortest round-trip decimal so emitted files are diffable and
// parse back to the exact double.

inline std::string format_double(double v) {
    if (std::isnan(v)) return "";
    std::array<char, 40> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), static_cast<std::size_t>(ptr - buf.data()));
}

// ---------------------------------------------------------------------------
// Synthetic data: two class-conditional unit-covariance Gaussians separated
// along the first coordinate, with an optional mean shift applied to the
// validation/test positives so a model calibrated on train is locally
// miscalibrated downstream.

struct SyntheticSpec {
    std::size_t n_train = 2000;
    std::size_t n_val = 1000;
    std::size_t n_test = 2000;
    std::size_t dim = 2;
    double class_sep = 2.0;
    double imbalance_ratio = 1.0;   // |D-| / |D+|
    std::vector<double> val_shift;  // empty: none; 1 value: first coordinate; d values: elementwise
    std::uint64_t seed = 0;
};

struct SyntheticData {
    LabeledDataset train;
    LabeledDataset val;
    LabeledDataset test;
};

namespace detail {

inline LabeledDataset gaussian_split(const SyntheticSpec& spec, std::size_t n,
                                     const std::vector<double>& negative_mean,
                                     const std::vector<double>& positive_mean,
                                     std::mt19937_64& rng) {
    const double r = spec.imbalance_ratio;
    const auto n_pos = static_cast<std::size_t>(std::llround(static_cast<double>(n) / (1.0 + r)));
    if (n_pos == 0 || n_pos >= n)
        throw invalid_input_error("degenerate class counts for requested size and imbalance");
    const std::size_t n_neg = n - n_pos;

    std::normal_distribution<double> unit_normal(0.0, 1.0);
    Matrix features = Matrix::zeros(n, spec.dim);
    std::vector<int> labels(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        const bool positive = i >= n_neg;
        labels[i] = positive ? 1 : 0;
        const auto& mean = positive ? positive_mean : negative_mean;
        for (std::size_t c = 0; c < spec.dim; ++c)
            features(i, c) = unit_normal(rng) + mean[c];
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    LabeledDataset out;
    out.features = Matrix(0, spec.dim, {});
    out.labels.reserve(n);
    for (std::size_t i : order) {
        out.features.append_row(features.row(i));
        out.labels.push_back(labels[i]);
    }
    return out;
}

} // namespace detail

inline SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    if (spec.dim == 0) throw invalid_input_error("dimensionality must be positive");
    if (!(spec.imbalance_ratio > 0.0)) throw invalid_input_error("imbalance ratio must be positive");
    if (!spec.val_shift.empty() && spec.val_shift.size() != 1 && spec.val_shift.size() != spec.dim)
        throw invalid_input_error("val_shift must be empty, a scalar, or one value per feature");

    // Classes are centered at -sep/2 and +sep/2 along the first coordinate so
    // the pooled input distribution is zero-mean.
    std::vector<double> negative_mean(spec.dim, 0.0);
    negative_mean[0] = -0.5 * spec.class_sep;
    std::vector<double> positive_mean(spec.dim, 0.0);
    positive_mean[0] = 0.5 * spec.class_sep;
    std::vector<double> shifted_mean = positive_mean;
    if (spec.val_shift.size() == 1) {
        shifted_mean[0] += spec.val_shift[0];
    } else {
        for (std::size_t c = 0; c < spec.val_shift.size(); ++c)
            shifted_mean[c] += spec.val_shift[c];
    }

    std::mt19937_64 rng(spec.seed);
    SyntheticData data;
    data.train = detail::gaussian_split(spec, spec.n_train, negative_mean, positive_mean, rng);
    data.val = detail::gaussian_split(spec, spec.n_val, negative_mean, shifted_mean, rng);
    data.test = detail::gaussian_split(spec, spec.n_test, negative_mean, shifted_mean, rng);
    return data;
}

// ---------------------------------------------------------------------------
// CSV ingestion and emission. Format: header row, feature columns as decimal
// reals, final column `label` in {0,1}, comma delimited.

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    while (ptr < end && (*ptr == ' ' || *ptr == '\t')) ++ptr;
    return ec == std::errc() && ptr == end;
}

} // namespace detail

inline LabeledDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open dataset: " + path);

    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::size_t columns = 0;
    LabeledDataset ds;
    std::vector<double> row;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = detail::split_csv_line(line);

        if (!header_seen) {
            // A first line made entirely of numbers is data, not a header.
            double ignored;
            bool all_numeric = true;
            for (const auto& c : cells)
                if (!detail::parse_double(c, ignored)) { all_numeric = false; break; }
            if (all_numeric) throw invalid_input_error("expected header row");
            if (cells.size() < 2)
                throw invalid_input_error("header must name at least one feature and the label");
            columns = cells.size();
            header_seen = true;
            ds.features = Matrix(0, columns - 1, {});
            continue;
        }

        if (cells.size() != columns) {
            std::ostringstream msg;
            msg << "row has " << cells.size() << " columns, expected " << columns
                << " at line " << line_no;
            throw invalid_input_error(msg.str());
        }
        row.clear();
        for (std::size_t c = 0; c + 1 < cells.size(); ++c) {
            double v;
            if (!detail::parse_double(cells[c], v)) {
                std::ostringstream msg;
                msg << "cannot parse feature value '" << cells[c] << "' at line " << line_no;
                throw invalid_input_error(msg.str());
            }
            row.push_back(v);
        }
        double label;
        if (!detail::parse_double(cells.back(), label) || (label != 0.0 && label != 1.0)) {
            std::ostringstream msg;
            msg << "label out of {0,1} at line " << line_no;
            throw invalid_input_error(msg.str());
        }
        ds.features.append_row(row);
        ds.labels.push_back(static_cast<int>(label));
    }
    if (!header_seen) throw invalid_input_error("expected header row");
    validate_dataset(ds);
    return ds;
}

inline void save_csv(const LabeledDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open file for writing: " + path);
    for (std::size_t c = 0; c < ds.dim(); ++c) out << 'x' << c << ',';
    out << "label\n";
    for (std::size_t r = 0; r < ds.size(); ++r) {
        for (double v : ds.features.row(r)) out << format_double(v) << ',';
        out << ds.labels[r] << '\n';
    }
    if (!out) throw io_error("failed writing " + path);
}

/// Seeded disjoint train/val/test split of a single dataset.
inline SyntheticData split_dataset(const LabeledDataset& ds, const std::array<double, 3>& fractions,
                                   std::uint64_t seed) {
    double sum = 0.0;
    for (double f : fractions) {
        if (!(f > 0.0)) throw invalid_input_error("split fractions must be positive");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw invalid_input_error("split fractions must sum to 1");

    const std::size_t n = ds.size();
    auto n_train = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
    auto n_val = static_cast<std::size_t>(std::llround(fractions[1] * static_cast<double>(n)));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw invalid_input_error("split leaves an empty subset");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);

    SyntheticData out;
    auto take = [&](std::size_t begin, std::size_t count) {
        LabeledDataset part;
        part.features = Matrix(0, ds.dim(), {});
        part.labels.reserve(count);
        for (std::size_t i = begin; i < begin + count; ++i) {
            part.features.append_row(ds.features.row(order[i]));
            part.labels.push_back(ds.labels[order[i]]);
        }
        return part;
    };
    out.train = take(0, n_train);
    out.val = take(n_train, n_val);
    out.test = take(n_train + n_val, n - n_train - n_val);
    return out;
}

// ---------------------------------------------------------------------------
// Experiment configuration.

struct ExperimentConfig {
    std::optional<SyntheticSpec> synthetic;
    std::string csv_path; // single-file source, split by `split`
    std::array<double, 3> split = {0.6, 0.2, 0.2};
    std::vector<double> rho_values; // c_fp = 1, c_fn = rho per setup
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds;
    TrainConfig train;
    double target_threshold = 0.5;
    int num_bins = 10;
    double epsilon = 0.01;
    int smote_k = 5;
    double smote_ratio = 1.0;
    std::string out_dir = "out";
    bool svg = false;
};

inline const std::set<std::string>& known_methods() {
    static const std::set<std::string> methods = {"standard", "ta",       "wce",
                                                  "resample", "smote",    "adacsl"};
    return methods;
}

inline void validate_config(const ExperimentConfig& cfg) {
    if (cfg.synthetic.has_value() == !cfg.csv_path.empty())
        throw invalid_input_error("exactly one dataset source (synthetic or csv) is required");
    if (cfg.rho_values.empty()) throw invalid_input_error("at least one rho value is required");
    for (double rho : cfg.rho_values)
        if (!(rho > 0.0)) throw invalid_input_error("rho values must be positive");
    if (cfg.methods.empty()) throw invalid_input_error("at least one method is required");
    std::set<std::string> seen;
    for (const auto& m : cfg.methods) {
        if (!known_methods().count(m)) throw invalid_input_error("unknown method: " + m);
        if (!seen.insert(m).second) throw invalid_input_error("duplicate method: " + m);
    }
    if (cfg.seeds.empty()) throw invalid_input_error("at least one seed is required");
    if (!cfg.csv_path.empty()) {
        double total = 0.0;
        for (double f : cfg.split) {
            if (!(f > 0.0)) throw invalid_input_error("split fractions must be positive");
            total += f;
        }
        if (std::abs(total - 1.0) > 1e-9)
            throw invalid_input_error("split fractions must sum to 1");
    }
    if (!(cfg.target_threshold > 0.0 && cfg.target_threshold < 1.0))
        throw invalid_input_error("target threshold must lie strictly inside (0,1)");
    if (cfg.num_bins < 1) throw invalid_input_error("num_bins must be >= 1");
    if (!(cfg.epsilon > 0.0)) throw invalid_input_error("epsilon must be positive");
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                                const std::string& context) {
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw invalid_input_error("unknown key '" + item.key() + "' in " + context);
}

inline SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
    reject_unknown_keys(j, {"n_train", "n_val", "n_test", "dim", "class_sep", "imbalance_ratio",
                            "val_shift", "seed"},
                        "dataset.synthetic");
    SyntheticSpec spec;
    if (j.contains("n_train")) spec.n_train = j["n_train"].get<std::size_t>();
    if (j.contains("n_val")) spec.n_val = j["n_val"].get<std::size_t>();
    if (j.contains("n_test")) spec.n_test = j["n_test"].get<std::size_t>();
    if (j.contains("dim")) spec.dim = j["dim"].get<std::size_t>();
    if (j.contains("class_sep")) spec.class_sep = j["class_sep"].get<double>();
    if (j.contains("imbalance_ratio")) spec.imbalance_ratio = j["imbalance_ratio"].get<double>();
    if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("val_shift")) {
        if (j["val_shift"].is_number()) {
            spec.val_shift = {j["val_shift"].get<double>()};
        } else {
            spec.val_shift = j["val_shift"].get<std::vector<double>>();
        }
    }
    return spec;
}

} // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    detail::reject_unknown_keys(j, {"dataset", "split", "rho", "methods", "seeds", "train",
                                    "adacsl", "smote", "out_dir", "svg"},
                                "config");
    ExperimentConfig cfg;

    if (!j.contains("dataset")) throw invalid_input_error("config requires a dataset source");
    const auto& dataset = j["dataset"];
    detail::reject_unknown_keys(dataset, {"synthetic", "csv"}, "dataset");
    if (dataset.contains("synthetic")) cfg.synthetic = detail::synthetic_from_json(dataset["synthetic"]);
    if (dataset.contains("csv")) cfg.csv_path = dataset["csv"].get<std::string>();

    if (j.contains("split")) {
        const auto v = j["split"].get<std::vector<double>>();
        if (v.size() != 3) throw invalid_input_error("split must list exactly three fractions");
        std::copy(v.begin(), v.end(), cfg.split.begin());
    }
    if (j.contains("rho")) cfg.rho_values = j["rho"].get<std::vector<double>>();
    if (j.contains("methods")) cfg.methods = j["methods"].get<std::vector<std::string>>();
    if (j.contains("seeds")) cfg.seeds = j["seeds"].get<std::vector<std::uint64_t>>();

    if (j.contains("train")) {
        const auto& t = j["train"];
        detail::reject_unknown_keys(
            t, {"learning_rate", "batch_size", "weight_decay", "max_epochs", "hidden"}, "train");
        if (t.contains("learning_rate")) cfg.train.learning_rate = t["learning_rate"].get<double>();
        if (t.contains("batch_size")) cfg.train.batch_size = t["batch_size"].get<std::size_t>();
        if (t.contains("weight_decay")) cfg.train.weight_decay = t["weight_decay"].get<double>();
        if (t.contains("max_epochs")) cfg.train.max_epochs = t["max_epochs"].get<int>();
        if (t.contains("hidden")) cfg.train.hidden_sizes = t["hidden"].get<std::vector<std::size_t>>();
    }
    if (j.contains("adacsl")) {
        const auto& a = j["adacsl"];
        detail::reject_unknown_keys(a, {"t_prime", "num_bins", "epsilon"}, "adacsl");
        if (a.contains("t_prime")) cfg.target_threshold = a["t_prime"].get<double>();
        if (a.contains("num_bins")) cfg.num_bins = a["num_bins"].get<int>();
        if (a.contains("epsilon")) cfg.epsilon = a["epsilon"].get<double>();
    }
    if (j.contains("smote")) {
        const auto& s = j["smote"];
        detail::reject_unknown_keys(s, {"k", "ratio"}, "smote");
        if (s.contains("k")) cfg.smote_k = s["k"].get<int>();
        if (s.contains("ratio")) cfg.smote_ratio = s["ratio"].get<double>();
    }
    if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("svg")) cfg.svg = j["svg"].get<bool>();

    validate_config(cfg);
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_input_error("config parse error in " + path + ": " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Series emission (lambda, per-bin thresholds, train/validation cost).

inline void write_line_chart_svg(const std::string& path, const std::string& title,
                                 const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    constexpr double width = 640, height = 420, margin = 52;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t n = 0;
    for (const auto& [name, ys] : series) {
        n = std::max(n, ys.size());
        for (double y : ys) {
            if (std::isnan(y)) continue;
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
    }
    if (!(lo <= hi)) { lo = 0.0; hi = 1.0; }
    if (hi == lo) { hi += 1.0; lo -= 1.0; }

    std::ofstream out(path);
    if (!out) throw io_error("cannot open file for writing: " + path);
    const auto x_of = [&](std::size_t i) {
        return margin + (width - 2 * margin) * (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5);
    };
    const auto y_of = [&](double v) {
        return height - margin - (height - 2 * margin) * (v - lo) / (hi - lo);
    };
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='" << height
        << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << width / 2 << "' y='24' text-anchor='middle' font-size='15'>" << title
        << "</text>\n";
    out << "<line x1='" << margin << "' y1='" << height - margin << "' x2='" << width - margin
        << "' y2='" << height - margin << "' stroke='black'/>\n";
    out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin << "' y2='"
        << height - margin << "' stroke='black'/>\n";
    out << "<text x='" << margin << "' y='" << margin - 8 << "' font-size='11'>" << format_double(hi)
        << "</text>\n<text x='" << margin << "' y='" << height - margin + 14 << "' font-size='11'>"
        << format_double(lo) << "</text>\n";
    out << "<text x='" << width - margin << "' y='" << height - margin + 28
        << "' text-anchor='end' font-size='11'>epoch</text>\n";

    std::size_t color = 0;
    for (const auto& [name, ys] : series) {
        out << "<polyline fill='none' stroke='" << palette[color % 10] << "' points='";
        for (std::size_t i = 0; i < ys.size(); ++i) {
            if (std::isnan(ys[i])) continue;
            out << x_of(i) << ',' << y_of(ys[i]) << ' ';
        }
        out << "'/>\n";
        out << "<text x='" << width - margin + 2 << "' y='" << margin + 14.0 * static_cast<double>(color)
            << "' font-size='11' fill='" << palette[color % 10] << "'>" << name << "</text>\n";
        ++color;
    }
    out << "</svg>\n";
}

/// Writes series_lambda.csv, series_threshold.csv, and series_cost.csv (and
/// matching SVG charts when requested) from a trajectory. Returns the paths.
inline std::vector<std::string> emit_series(const LambdaState& state, const std::string& out_dir,
                                            bool svg = false) {
    if (state.trajectory.empty()) throw invalid_input_error("empty trajectory");
    std::filesystem::create_directories(out_dir);

    const std::size_t bins = state.trajectory.front().bin_thresholds.size();
    std::vector<std::string> paths;

    const std::string lambda_path = out_dir + "/series_lambda.csv";
    {
        std::ofstream out(lambda_path);
        if (!out) throw io_error("cannot open file for writing: " + lambda_path);
        out << "epoch,lambda\n";
        for (const auto& e : state.trajectory)
            out << e.epoch << ',' << format_double(e.lambda) << '\n';
    }
    paths.push_back(lambda_path);

    const std::string threshold_path = out_dir + "/series_threshold.csv";
    {
        std::ofstream out(threshold_path);
        if (!out) throw io_error("cannot open file for writing: " + threshold_path);
        out << "epoch";
        for (std::size_t m = 0; m < bins; ++m) out << ",bin_" << m;
        out << '\n';
        for (const auto& e : state.trajectory) {
            out << e.epoch;
            for (std::size_t m = 0; m < bins; ++m) {
                out << ',';
                if (m < e.bin_thresholds.size() && e.bin_thresholds[m].has_value())
                    out << format_double(*e.bin_thresholds[m]);
            }
            out << '\n';
        }
    }
    paths.push_back(threshold_path);

    const std::string cost_path = out_dir + "/series_cost.csv";
    {
        std::ofstream out(cost_path);
        if (!out) throw io_error("cannot open file for writing: " + cost_path);
        out << "epoch,train_cost,val_cost\n";
        for (const auto& e : state.trajectory)
            out << e.epoch << ',' << format_double(e.train_cost) << ','
                << format_double(e.val_cost) << '\n';
    }
    paths.push_back(cost_path);

    if (svg) {
        std::vector<double> lambdas, train_costs, val_costs;
        std::vector<std::pair<std::string, std::vector<double>>> threshold_series(bins);
        for (std::size_t m = 0; m < bins; ++m) threshold_series[m].first = "bin_" + std::to_string(m);
        for (const auto& e : state.trajectory) {
            lambdas.push_back(e.lambda);
            train_costs.push_back(e.train_cost);
            val_costs.push_back(e.val_cost);
            for (std::size_t m = 0; m < bins; ++m)
                threshold_series[m].second.push_back(
                    m < e.bin_thresholds.size() && e.bin_thresholds[m].has_value()
                        ? *e.bin_thresholds[m]
                        : std::numeric_limits<double>::quiet_NaN());
        }
        write_line_chart_svg(out_dir + "/series_lambda.svg", "lambda per epoch",
                             {{"lambda", lambdas}});
        write_line_chart_svg(out_dir + "/series_threshold.svg", "per-bin optimal threshold",
                             threshold_series);
        write_line_chart_svg(out_dir + "/series_cost.svg", "misclassification cost",
                             {{"train", train_costs}, {"val", val_costs}});
        paths.push_back(out_dir + "/series_lambda.svg");
        paths.push_back(out_dir + "/series_threshold.svg");
        paths.push_back(out_dir + "/series_cost.svg");
    }
    return paths;
}

// ---------------------------------------------------------------------------
// Per-subgroup report: bins assigned from epoch-1 probabilities, cost and
// accuracy per bin for two methods side by side.

struct SubgroupMethodStats {
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double mean_ce = std::numeric_limits<double>::quiet_NaN();
    double cost = std::numeric_limits<double>::quiet_NaN();
};

struct SubgroupRow {
    std::size_t bin = 0;
    double lo = 0.0, hi = 0.0;
    std::size_t size = 0;
    SubgroupMethodStats epoch1;
    bool high_cost = false; // epoch-1 cost above the median of non-empty bins
    SubgroupMethodStats method_a;
    SubgroupMethodStats method_b;
};

struct SubgroupReport {
    std::vector<SubgroupRow> rows;
    std::string method_a_name;
    std::string method_b_name;
    double threshold = 0.5;
};

namespace detail {

inline SubgroupMethodStats bin_stats(const PredictionVector& preds, std::span<const int> labels,
                                     const std::vector<std::size_t>& rows, double threshold,
                                     const CostMatrix& cm) {
    SubgroupMethodStats stats;
    if (rows.empty()) return stats;
    std::size_t correct = 0;
    double ce_sum = 0.0, cost = 0.0;
    for (std::size_t i : rows) {
        const int predicted = preds[i] > threshold ? 1 : 0;
        if (predicted == labels[i]) ++correct;
        else cost += labels[i] == 1 ? cm.fn_cost() : cm.fp_cost();
        ce_sum += weighted_ce(labels[i], preds[i], 1.0);
    }
    stats.accuracy = static_cast<double>(correct) / static_cast<double>(rows.size());
    stats.mean_ce = ce_sum / static_cast<double>(rows.size());
    stats.cost = cost;
    return stats;
}

} // namespace detail

inline SubgroupReport subgroup_report(const PredictionVector& epoch1_preds,
                                      std::span<const int> labels,
                                      const PredictionVector& method_a_preds,
                                      const PredictionVector& method_b_preds,
                                      const CostMatrix& cm, int num_bins, double threshold = 0.5,
                                      std::string method_a_name = "baseline",
                                      std::string method_b_name = "adacsl") {
    if (epoch1_preds.size() != labels.size() || method_a_preds.size() != labels.size() ||
        method_b_preds.size() != labels.size())
        throw invalid_input_error("prediction vectors and labels differ in length");

    const SubgroupPartition part = partition_by_probability(epoch1_preds, num_bins);
    SubgroupReport report;
    report.method_a_name = std::move(method_a_name);
    report.method_b_name = std::move(method_b_name);
    report.threshold = threshold;

    std::vector<std::vector<std::size_t>> rows_by_bin(part.num_bins());
    for (std::size_t i = 0; i < epoch1_preds.size(); ++i)
        rows_by_bin[part.assignments[i]].push_back(i);

    for (std::size_t m = 0; m < part.num_bins(); ++m) {
        SubgroupRow row;
        row.bin = m;
        row.lo = part.bin_edges[m];
        row.hi = part.bin_edges[m + 1];
        row.size = part.bin_sizes[m];
        row.epoch1 = detail::bin_stats(epoch1_preds, labels, rows_by_bin[m], threshold, cm);
        row.method_a = detail::bin_stats(method_a_preds, labels, rows_by_bin[m], threshold, cm);
        row.method_b = detail::bin_stats(method_b_preds, labels, rows_by_bin[m], threshold, cm);
        report.rows.push_back(row);
    }

    std::vector<double> costs;
    for (const auto& row : report.rows)
        if (row.size > 0) costs.push_back(row.epoch1.cost);
    if (!costs.empty()) {
        std::sort(costs.begin(), costs.end());
        const std::size_t n = costs.size();
        const double median =
            n % 2 == 1 ? costs[n / 2] : 0.5 * (costs[n / 2 - 1] + costs[n / 2]);
        for (auto& row : report.rows)
            row.high_cost = row.size > 0 && row.epoch1.cost > median;
    }
    return report;
}

inline void write_subgroups_csv(const SubgroupReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open file for writing: " + path);
    const auto& a = report.method_a_name;
    const auto& b = report.method_b_name;
    out << "bin,range_lo,range_hi,size,epoch1_acc,epoch1_cost,high_cost," << a << "_acc," << a
        << "_ce," << a << "_cost," << b << "_acc," << b << "_ce," << b << "_cost\n";
    for (const auto& row : report.rows) {
        out << row.bin << ',' << format_double(row.lo) << ',' << format_double(row.hi) << ','
            << row.size << ',' << format_double(row.epoch1.accuracy) << ','
            << format_double(row.epoch1.cost) << ',' << (row.high_cost ? 1 : 0) << ','
            << format_double(row.method_a.accuracy) << ',' << format_double(row.method_a.mean_ce)
            << ',' << format_double(row.method_a.cost) << ','
            << format_double(row.method_b.accuracy) << ',' << format_double(row.method_b.mean_ce)
            << ',' << format_double(row.method_b.cost) << '\n';
    }
}

// ---------------------------------------------------------------------------
// The sweep: (cost setup x method x seed) cells, summary-table aggregation,
// self-auditing outputs.

struct CellResult {
    double rho = 1.0;
    std::string method;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double decision_threshold = 0.5;
    int selected_epoch = 0;
    double val_cost = std::numeric_limits<double>::quiet_NaN();
    double test_cost = std::numeric_limits<double>::quiet_NaN();
    double test_accuracy = std::numeric_limits<double>::quiet_NaN();
    std::vector<double> test_preds; // retained for the audit pass
};

struct ExperimentReport {
    ExperimentConfig config;
    std::vector<CellResult> cells;
    std::map<std::uint64_t, std::vector<int>> test_labels_by_seed;
    std::string report_csv;
    std::string results_json;
    std::string manifest_txt;
    std::string subgroups_csv; // empty when the illustration cell was unavailable
    std::vector<std::string> series_files;
};

/// Recomputes every reported test cost from the stored predictions.
inline bool audit_report(const ExperimentReport& report) {
    for (const auto& cell : report.cells) {
        if (!cell.ok) continue;
        const auto it = report.test_labels_by_seed.find(cell.seed);
        if (it == report.test_labels_by_seed.end()) return false;
        const CostMatrix cm(1.0, cell.rho);
        const double recomputed = empirical_cost(PredictionVector(cell.test_preds), it->second,
                                                 cell.decision_threshold, cm);
        if (recomputed != cell.test_cost) return false;
    }
    return true;
}

namespace detail {

struct CellArtifacts {
    std::optional<LambdaState> trajectory;          // adacsl cells
    std::optional<PredictionVector> epoch1_val;     // adacsl cells
    std::optional<PredictionVector> selected_val;   // all cells
};

inline double accuracy_at(const PredictionVector& preds, std::span<const int> labels,
                          double threshold) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if ((preds[i] > threshold ? 1 : 0) == labels[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(preds.size());
}

inline CellResult run_cell(const ExperimentConfig& cfg, const SyntheticData& data, double rho,
                           const std::string& method, std::uint64_t seed,
                           CellArtifacts& artifacts) {
    CellResult cell;
    cell.rho = rho;
    cell.method = method;
    cell.seed = seed;

    const CostMatrix cm(1.0, rho);
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = seed;

    NetworkParams selected;
    if (method == "adacsl") {
        AdaCslConfig acfg(cm);
        acfg.target_threshold = cfg.target_threshold;
        acfg.num_bins = cfg.num_bins;
        acfg.epsilon = cfg.epsilon;
        acfg.max_epochs = cfg.train.max_epochs;
        acfg.train = train_cfg;
        AdaCslResult result = run_adacsl(data.train, data.val, acfg);
        selected = result.best_params;
        cell.selected_epoch = result.best_epoch;
        cell.val_cost = result.best_val_cost;
        cell.decision_threshold = cfg.target_threshold;
        artifacts.trajectory = result.state;
        artifacts.epoch1_val = result.epoch1_val_preds;
    } else {
        TrainedModel model;
        if (method == "standard") {
            model = train_standard(data.train, data.val, train_cfg, cm);
            cell.decision_threshold = 0.5;
        } else if (method == "ta") {
            model = fit_with_selection(data.train, data.val, LossSpec(CostMatrix(1.0, 1.0), 0.5, 1.0),
                                       train_cfg, optimal_threshold(cm), cm);
            cell.decision_threshold = optimal_threshold(cm);
        } else if (method == "wce") {
            model = train_weighted_ce(data.train, data.val, train_cfg, cm);
            cell.decision_threshold = 0.5;
        } else if (method == "resample") {
            const LabeledDataset resampled =
                resample_by_cost(data.train, cm, cfg.target_threshold, seed);
            model = fit_with_selection(resampled, data.val, LossSpec(CostMatrix(1.0, 1.0), 0.5, 1.0),
                                       train_cfg, 0.5, cm);
            cell.decision_threshold = 0.5;
        } else if (method == "smote") {
            const LabeledDataset oversampled =
                smote_oversample(data.train, cfg.smote_k, cfg.smote_ratio, seed);
            model = fit_with_selection(oversampled, data.val, LossSpec(CostMatrix(1.0, 1.0), 0.5, 1.0),
                                       train_cfg, 0.5, cm);
            cell.decision_threshold = 0.5;
        } else {
            throw invalid_input_error("unknown method: " + method);
        }
        selected = model.best_params;
        cell.selected_epoch = model.best_epoch;
        cell.val_cost = model.best_val_cost;
    }

    artifacts.selected_val = predict_batch(selected, data.val.features);
    const PredictionVector test_preds = predict_batch(selected, data.test.features);
    cell.test_cost = empirical_cost(test_preds, data.test.labels, cell.decision_threshold, cm);
    cell.test_accuracy = accuracy_at(test_preds, data.test.labels, cell.decision_threshold);
    cell.test_preds = test_preds.probs();
    cell.ok = true;
    return cell;
}

inline void write_report_csv(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open file for writing: " + path);
    const auto& methods = report.config.methods;
    out << "rho";
    for (const auto& m : methods)
        out << ',' << m << "_cost_mean," << m << "_cost_sd," << m << "_acc_mean," << m << "_acc_sd";
    out << '\n';

    for (double rho : report.config.rho_values) {
        out << format_double(rho);
        for (const auto& method : methods) {
            std::vector<double> costs, accs;
            for (const auto& cell : report.cells) {
                if (!cell.ok || cell.rho != rho || cell.method != method) continue;
                costs.push_back(cell.test_cost);
                accs.push_back(cell.test_accuracy);
            }
            const auto mean_sd = [](const std::vector<double>& v) -> std::pair<double, double> {
                if (v.empty())
                    return {std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN()};
                const double mean =
                    std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
                if (v.size() == 1) return {mean, 0.0};
                double ss = 0.0;
                for (double x : v) ss += (x - mean) * (x - mean);
                return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
            };
            const auto [cost_mean, cost_sd] = mean_sd(costs);
            const auto [acc_mean, acc_sd] = mean_sd(accs);
            out << ',' << format_double(cost_mean) << ',' << format_double(cost_sd) << ','
                << format_double(acc_mean) << ',' << format_double(acc_sd);
        }
        out << '\n';
    }
}

inline void write_results_json(const ExperimentReport& report, const std::string& path) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : report.cells) {
        nlohmann::json c;
        c["rho"] = cell.rho;
        c["method"] = cell.method;
        c["seed"] = cell.seed;
        c["ok"] = cell.ok;
        if (!cell.ok) {
            c["error"] = cell.error;
        } else {
            c["decision_threshold"] = cell.decision_threshold;
            c["selected_epoch"] = cell.selected_epoch;
            c["val_cost"] = cell.val_cost;
            c["test_cost"] = cell.test_cost;
            c["test_accuracy"] = cell.test_accuracy;
        }
        cells.push_back(std::move(c));
    }
    nlohmann::json j;
    j["version"] = kVersion;
    j["cells"] = std::move(cells);
    std::ofstream out(path);
    if (!out) throw io_error("cannot open file for writing: " + path);
    out << j.dump(2) << '\n';
}

inline void write_manifest(const ExperimentConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot open file for writing: " + path);
    const auto join = [](const auto& values) {
        std::string s;
        for (const auto& v : values) {
            if (!s.empty()) s += ',';
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::string>) s += v;
            else if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) s += format_double(v);
            else s += std::to_string(v);
        }
        return s;
    };

    out << "version = " << kVersion << '\n';
    if (cfg.synthetic) {
        const auto& s = *cfg.synthetic;
        out << "dataset = synthetic\n";
        out << "synthetic.n_train = " << s.n_train << '\n';
        out << "synthetic.n_val = " << s.n_val << '\n';
        out << "synthetic.n_test = " << s.n_test << '\n';
        out << "synthetic.dim = " << s.dim << '\n';
        out << "synthetic.class_sep = " << format_double(s.class_sep) << '\n';
        out << "synthetic.imbalance_ratio = " << format_double(s.imbalance_ratio) << '\n';
        out << "synthetic.val_shift = " << (s.val_shift.empty() ? "0" : join(s.val_shift)) << '\n';
        out << "synthetic.seed = " << s.seed << '\n';
        out << "synthetic.data_seed_rule = spec_seed + run_seed\n";
    } else {
        out << "dataset = csv:" << cfg.csv_path << '\n';
        out << "split = " << join(cfg.split) << '\n';
        out << "split_seed_rule = run_seed\n";
    }
    out << "rho = " << join(cfg.rho_values) << '\n';
    for (double rho : cfg.rho_values) {
        out << "setup.rho_" << format_double(rho) << ".c_fp = 1\n";
        out << "setup.rho_" << format_double(rho) << ".c_fn = " << format_double(rho) << '\n';
        out << "setup.rho_" << format_double(rho)
            << ".ta_threshold = " << format_double(optimal_threshold(CostMatrix(1.0, rho))) << '\n';
    }
    out << "methods = " << join(cfg.methods) << '\n';
    out << "seeds = " << join(cfg.seeds) << '\n';
    out << "selection = min_validation_cost\n";
    out << "train.learning_rate = " << format_double(cfg.train.learning_rate) << '\n';
    out << "train.batch_size = " << cfg.train.batch_size << '\n';
    out << "train.weight_decay = " << format_double(cfg.train.weight_decay) << '\n';
    out << "train.max_epochs = " << cfg.train.max_epochs << '\n';
    out << "train.hidden = " << join(cfg.train.hidden_sizes) << '\n';
    out << "train.optimizer = sgd\n";
    out << "adacsl.t_prime = " << format_double(cfg.target_threshold) << '\n';
    out << "adacsl.num_bins = " << cfg.num_bins << '\n';
    out << "report.subgroup_bins = " << std::max(cfg.num_bins, 10) << '\n';
    out << "adacsl.epsilon = " << format_double(cfg.epsilon) << '\n';
    out << "adacsl.lambda_clamp = " << format_double(kLambdaMin) << ',' << format_double(kLambdaMax)
        << '\n';
    out << "adacsl.candidates = uniform_grid(0.01..0.99)\n";
    out << "smote.k = " << cfg.smote_k << '\n';
    out << "smote.ratio = " << format_double(cfg.smote_ratio) << '\n';
    out << "svg = " << (cfg.svg ? "true" : "false") << '\n';
}

} // namespace detail

/// Runs the full sweep and writes report.csv, results.json, manifest.txt,
/// the series files for the first adacsl cell, and subgroups.csv comparing
/// the first baseline against adacsl on the first (rho, seed) cell.
/// Per-cell failures are recorded and the sweep continues.
inline ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    validate_config(cfg);
    std::filesystem::create_directories(cfg.out_dir);

    ExperimentReport report;
    report.config = cfg;

    // Materialize per-seed datasets. Synthetic data mixes the run seed into
    // the generator seed; CSV data is re-split per seed.
    std::map<std::uint64_t, SyntheticData> data_by_seed;
    std::optional<LabeledDataset> csv_data;
    if (!cfg.csv_path.empty()) csv_data = load_csv(cfg.csv_path);
    for (std::uint64_t seed : cfg.seeds) {
        if (cfg.synthetic) {
            SyntheticSpec spec = *cfg.synthetic;
            spec.seed = spec.seed + seed;
            data_by_seed.emplace(seed, generate_synthetic(spec));
        } else {
            data_by_seed.emplace(seed, split_dataset(*csv_data, cfg.split, seed));
        }
        report.test_labels_by_seed.emplace(seed, data_by_seed.at(seed).test.labels);
    }

    // Illustration cell for subgroups.csv and the series files.
    const double first_rho = cfg.rho_values.front();
    const std::uint64_t first_seed = cfg.seeds.front();
    std::optional<PredictionVector> illustration_epoch1;
    std::optional<PredictionVector> illustration_adacsl;
    std::optional<PredictionVector> illustration_baseline;
    std::string illustration_baseline_name;
    std::optional<LambdaState> illustration_trajectory;

    for (double rho : cfg.rho_values) {
        for (const auto& method : cfg.methods) {
            for (std::uint64_t seed : cfg.seeds) {
                detail::CellArtifacts artifacts;
                CellResult cell;
                try {
                    cell = detail::run_cell(cfg, data_by_seed.at(seed), rho, method, seed, artifacts);
                } catch (const std::exception& e) {
                    cell.rho = rho;
                    cell.method = method;
                    cell.seed = seed;
                    cell.ok = false;
                    cell.error = e.what();
                }
                if (cell.ok && rho == first_rho && seed == first_seed) {
                    if (method == "adacsl") {
                        illustration_epoch1 = artifacts.epoch1_val;
                        illustration_adacsl = artifacts.selected_val;
                        illustration_trajectory = artifacts.trajectory;
                    } else if (!illustration_baseline) {
                        illustration_baseline = artifacts.selected_val;
                        illustration_baseline_name = method;
                    }
                }
                report.cells.push_back(std::move(cell));
            }
        }
    }

    report.report_csv = cfg.out_dir + "/report.csv";
    detail::write_report_csv(report, report.report_csv);
    report.results_json = cfg.out_dir + "/results.json";
    detail::write_results_json(report, report.results_json);
    report.manifest_txt = cfg.out_dir + "/manifest.txt";
    detail::write_manifest(cfg, report.manifest_txt);

    if (illustration_trajectory)
        report.series_files = emit_series(*illustration_trajectory, cfg.out_dir, cfg.svg);

    if (illustration_epoch1 && illustration_adacsl && illustration_baseline) {
        const auto& val_labels = data_by_seed.at(first_seed).val.labels;
        // Reporting granularity is independent of the lambda-update binning;
        // a whole-set adaptive run still gets a 10-bin breakdown.
        const int report_bins = std::max(cfg.num_bins, 10);
        const SubgroupReport sub = subgroup_report(
            *illustration_epoch1, val_labels, *illustration_baseline, *illustration_adacsl,
            CostMatrix(1.0, first_rho), report_bins, cfg.target_threshold,
            illustration_baseline_name, "adacsl");
        report.subgroups_csv = cfg.out_dir + "/subgroups.csv";
        write_subgroups_csv(sub, report.subgroups_csv);
    }

    if (!audit_report(report))
        throw std::logic_error("report audit failed: stored predictions disagree with reported costs");
    return report;
}

} // namespace adacsl
