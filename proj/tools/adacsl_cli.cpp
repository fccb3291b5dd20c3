// Command-line front end: synthetic data generation, single-method training,
// checkpoint evaluation, full experiment sweeps, and report re-rendering.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "adacsl/adacsl.hpp"
#include "adacsl/baselines.hpp"
#include "adacsl/harness.hpp"

namespace {

using namespace adacsl;

struct GenerateArgs {
    SyntheticSpec spec;
    double val_shift = 0.0;
    std::string out_dir = "data";
};

void run_generate(GenerateArgs& args) {
    if (args.val_shift != 0.0) args.spec.val_shift = {args.val_shift};
    const SyntheticData data = generate_synthetic(args.spec);
    std::filesystem::create_directories(args.out_dir);
    save_csv(data.train, args.out_dir + "/train.csv");
    save_csv(data.val, args.out_dir + "/val.csv");
    save_csv(data.test, args.out_dir + "/test.csv");

    const DatasetSummary train_summary = validate_dataset(data.train);
    std::cout << "wrote " << args.out_dir << "/{train,val,test}.csv"
              << "  (train: " << train_summary.rows << " rows, " << train_summary.negatives
              << " neg / " << train_summary.positives << " pos)\n";
}

struct TrainArgs {
    std::string method = "adacsl";
    std::string train_path, val_path, test_path;
    double c_fp = 1.0, c_fn = 1.0;
    double t_prime = 0.5;
    int num_bins = 10;
    double epsilon = 0.01;
    int smote_k = 5;
    double smote_ratio = 1.0;
    TrainConfig train_cfg;
    std::string out_dir = "out";
    bool svg = false;
};

void run_train(TrainArgs& args) {
    if (!known_methods().count(args.method))
        throw invalid_input_error("unknown method: " + args.method);
    const LabeledDataset train = load_csv(args.train_path);
    const LabeledDataset val = load_csv(args.val_path);
    const CostMatrix cm(args.c_fp, args.c_fn);
    std::filesystem::create_directories(args.out_dir);

    NetworkParams selected;
    double decision_threshold = 0.5;
    int selected_epoch = 0;
    double val_cost = 0.0;

    if (args.method == "adacsl") {
        AdaCslConfig cfg(cm);
        cfg.target_threshold = args.t_prime;
        cfg.num_bins = args.num_bins;
        cfg.epsilon = args.epsilon;
        cfg.max_epochs = args.train_cfg.max_epochs;
        cfg.train = args.train_cfg;
        const AdaCslResult result = run_adacsl(train, val, cfg);
        selected = result.best_params;
        selected_epoch = result.best_epoch;
        val_cost = result.best_val_cost;
        decision_threshold = args.t_prime;
        emit_series(result.state, args.out_dir, args.svg);
        std::cout << "lambda_final = " << format_double(result.state.lambda_current)
                  << " after " << result.state.epoch_index << " epochs\n";
    } else {
        TrainedModel model;
        if (args.method == "standard") {
            model = train_standard(train, val, args.train_cfg, cm);
        } else if (args.method == "ta") {
            model = fit_with_selection(train, val, LossSpec(CostMatrix(1.0, 1.0), 0.5, 1.0),
                                       args.train_cfg, optimal_threshold(cm), cm);
            decision_threshold = optimal_threshold(cm);
        } else if (args.method == "wce") {
            model = train_weighted_ce(train, val, args.train_cfg, cm);
        } else if (args.method == "resample") {
            model = train_standard(resample_by_cost(train, cm, args.t_prime, args.train_cfg.seed),
                                   val, args.train_cfg, cm);
        } else { // smote
            model = train_standard(
                smote_oversample(train, args.smote_k, args.smote_ratio, args.train_cfg.seed), val,
                args.train_cfg, cm);
        }
        selected = model.best_params;
        selected_epoch = model.best_epoch;
        val_cost = model.best_val_cost;
    }

    const std::string checkpoint = args.out_dir + "/checkpoint.json";
    save_network(selected, checkpoint);
    std::cout << "method = " << args.method << "\nselected_epoch = " << selected_epoch
              << "\ndecision_threshold = " << format_double(decision_threshold)
              << "\nval_cost = " << format_double(val_cost) << "\ncheckpoint = " << checkpoint
              << '\n';

    if (!args.test_path.empty()) {
        const LabeledDataset test = load_csv(args.test_path);
        const PredictionVector preds = predict_batch(selected, test.features);
        const double cost = empirical_cost(preds, test.labels, decision_threshold, cm);
        std::size_t correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i)
            if ((preds[i] > decision_threshold ? 1 : 0) == test.labels[i]) ++correct;
        std::cout << "test_cost = " << format_double(cost) << "\ntest_accuracy = "
                  << format_double(static_cast<double>(correct) / static_cast<double>(preds.size()))
                  << '\n';
    }
}

struct EvaluateArgs {
    std::string model_path, data_path;
    double c_fp = 1.0, c_fn = 1.0;
    double threshold = 0.5;
    bool cost_threshold = false; // use the analytic optimum instead of --threshold
};

void run_evaluate(EvaluateArgs& args) {
    const NetworkParams params = load_network(args.model_path);
    const LabeledDataset data = load_csv(args.data_path);
    const CostMatrix cm(args.c_fp, args.c_fn);
    const double tau = args.cost_threshold ? optimal_threshold(cm) : args.threshold;

    const PredictionVector preds = predict_batch(params, data.features);
    const double cost = empirical_cost(preds, data.labels, tau, cm);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i)
        if ((preds[i] > tau ? 1 : 0) == data.labels[i]) ++correct;

    std::cout << "threshold = " << format_double(tau) << "\ncost = " << format_double(cost)
              << "\naccuracy = "
              << format_double(static_cast<double>(correct) / static_cast<double>(preds.size()))
              << '\n';
}

struct SweepArgs {
    std::string config_path;
    // Flag overrides on top of the config file; sentinels mean "not given".
    std::string out_dir;
    std::vector<double> rho_values;
    std::vector<std::string> methods;
    std::vector<std::uint64_t> seeds;
    double learning_rate = -1.0;
    long batch_size = -1;
    int max_epochs = -1;
    std::vector<std::size_t> hidden;
    double t_prime = -1.0;
    int num_bins = -1;
    double epsilon = -1.0;
    bool svg = false;
};

void run_sweep(SweepArgs& args) {
    ExperimentConfig cfg = load_config(args.config_path);
    if (!args.out_dir.empty()) cfg.out_dir = args.out_dir;
    if (!args.rho_values.empty()) cfg.rho_values = args.rho_values;
    if (!args.methods.empty()) cfg.methods = args.methods;
    if (!args.seeds.empty()) cfg.seeds = args.seeds;
    if (args.learning_rate > 0.0) cfg.train.learning_rate = args.learning_rate;
    if (args.batch_size > 0) cfg.train.batch_size = static_cast<std::size_t>(args.batch_size);
    if (args.max_epochs > 0) cfg.train.max_epochs = args.max_epochs;
    if (!args.hidden.empty()) cfg.train.hidden_sizes = args.hidden;
    if (args.t_prime > 0.0) cfg.target_threshold = args.t_prime;
    if (args.num_bins > 0) cfg.num_bins = args.num_bins;
    if (args.epsilon > 0.0) cfg.epsilon = args.epsilon;
    if (args.svg) cfg.svg = true;
    validate_config(cfg);
    const ExperimentReport report = run_experiment(cfg);

    std::size_t failed = 0;
    for (const auto& cell : report.cells)
        if (!cell.ok) ++failed;
    std::cout << "cells = " << report.cells.size() << " (" << failed << " failed)\n"
              << "report = " << report.report_csv << '\n'
              << "results = " << report.results_json << '\n';
    if (!report.subgroups_csv.empty()) std::cout << "subgroups = " << report.subgroups_csv << '\n';
    for (const auto& f : report.series_files) std::cout << "series = " << f << '\n';
}

struct ReportArgs {
    std::string results_path;
    std::string out_path = "report.csv";
};

// Re-renders the summary table from a results.json produced by `sweep`.
void run_report(ReportArgs& args) {
    std::ifstream in(args.results_path);
    if (!in) throw io_error("cannot open results: " + args.results_path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw invalid_input_error("results parse error: " + std::string(e.what()));
    }

    std::vector<double> rhos;
    std::vector<std::string> methods;
    struct Agg { std::vector<double> costs, accs; };
    std::map<std::pair<double, std::string>, Agg> groups;
    for (const auto& cell : j.at("cells")) {
        const double rho = cell.at("rho").get<double>();
        const std::string method = cell.at("method").get<std::string>();
        if (std::find(rhos.begin(), rhos.end(), rho) == rhos.end()) rhos.push_back(rho);
        if (std::find(methods.begin(), methods.end(), method) == methods.end())
            methods.push_back(method);
        if (!cell.at("ok").get<bool>()) continue;
        auto& agg = groups[{rho, method}];
        agg.costs.push_back(cell.at("test_cost").get<double>());
        agg.accs.push_back(cell.at("test_accuracy").get<double>());
    }

    std::ofstream out(args.out_path);
    if (!out) throw io_error("cannot open file for writing: " + args.out_path);
    const auto mean = [](const std::vector<double>& v) {
        return v.empty() ? std::numeric_limits<double>::quiet_NaN()
                         : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    out << "rho";
    for (const auto& m : methods) out << ',' << m << "_cost_mean," << m << "_acc_mean";
    out << '\n';
    for (double rho : rhos) {
        out << format_double(rho);
        std::cout << "rho=" << format_double(rho);
        for (const auto& m : methods) {
            const auto it = groups.find({rho, m});
            const double cost = it == groups.end() ? std::numeric_limits<double>::quiet_NaN()
                                                   : mean(it->second.costs);
            const double acc = it == groups.end() ? std::numeric_limits<double>::quiet_NaN()
                                                  : mean(it->second.accs);
            out << ',' << format_double(cost) << ',' << format_double(acc);
            std::cout << "  " << m << ": cost=" << format_double(cost)
                      << " acc=" << format_double(acc);
        }
        out << '\n';
        std::cout << '\n';
    }
    std::cout << "wrote " << args.out_path << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cost-sensitive learning toolkit with adaptive loss adjustment"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic train/val/test triple");
    generate->add_option("--n-train", gen.spec.n_train, "Training rows");
    generate->add_option("--n-val", gen.spec.n_val, "Validation rows");
    generate->add_option("--n-test", gen.spec.n_test, "Test rows");
    generate->add_option("--dim", gen.spec.dim, "Feature dimensionality");
    generate->add_option("--class-sep", gen.spec.class_sep, "Distance between class means");
    generate->add_option("--imbalance", gen.spec.imbalance_ratio, "Negative:positive ratio");
    generate->add_option("--val-shift", gen.val_shift,
                         "Mean shift of val/test positives along the first coordinate");
    generate->add_option("--seed", gen.spec.seed, "Generator seed");
    generate->add_option("--out", gen.out_dir, "Output directory");
    generate->callback([&] { run_generate(gen); });

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train one method on CSV data");
    train->add_option("--method", tr.method, "standard|ta|wce|resample|smote|adacsl");
    train->add_option("--train", tr.train_path, "Training CSV")->required();
    train->add_option("--val", tr.val_path, "Validation CSV")->required();
    train->add_option("--test", tr.test_path, "Optional test CSV");
    train->add_option("--c-fp", tr.c_fp, "False-positive cost");
    train->add_option("--c-fn", tr.c_fn, "False-negative cost");
    train->add_option("--t-prime", tr.t_prime, "Target operating threshold");
    train->add_option("--bins", tr.num_bins, "Validation probability bins");
    train->add_option("--epsilon", tr.epsilon, "Adaptation stop tolerance");
    train->add_option("--lr", tr.train_cfg.learning_rate, "Learning rate");
    train->add_option("--batch-size", tr.train_cfg.batch_size, "Mini-batch size");
    train->add_option("--weight-decay", tr.train_cfg.weight_decay, "Weight decay");
    train->add_option("--epochs", tr.train_cfg.max_epochs, "Maximum epochs");
    train->add_option("--hidden", tr.train_cfg.hidden_sizes, "Hidden layer sizes");
    train->add_option("--seed", tr.train_cfg.seed, "Training seed");
    train->add_option("--smote-k", tr.smote_k, "SMOTE nearest neighbors");
    train->add_option("--smote-ratio", tr.smote_ratio, "SMOTE target minority:majority ratio");
    train->add_option("--out", tr.out_dir, "Output directory");
    train->add_flag("--svg", tr.svg, "Also render series charts");
    train->callback([&] { run_train(tr); });

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on a CSV dataset");
    evaluate->add_option("--model", ev.model_path, "Checkpoint JSON")->required();
    evaluate->add_option("--data", ev.data_path, "Dataset CSV")->required();
    evaluate->add_option("--c-fp", ev.c_fp, "False-positive cost");
    evaluate->add_option("--c-fn", ev.c_fn, "False-negative cost");
    evaluate->add_option("--threshold", ev.threshold, "Decision threshold");
    evaluate->add_flag("--cost-threshold", ev.cost_threshold,
                       "Decide at the analytic cost-optimal threshold instead");
    evaluate->callback([&] { run_evaluate(ev); });

    SweepArgs sw;
    auto* sweep = app.add_subcommand("sweep", "Run a full (setup x method x seed) experiment");
    sweep->add_option("--config", sw.config_path, "Experiment config JSON")->required();
    sweep->add_option("--out", sw.out_dir, "Override output directory");
    sweep->add_option("--rho", sw.rho_values, "Override cost-ratio setups");
    sweep->add_option("--methods", sw.methods, "Override method list");
    sweep->add_option("--seeds", sw.seeds, "Override seed list");
    sweep->add_option("--lr", sw.learning_rate, "Override learning rate");
    sweep->add_option("--batch-size", sw.batch_size, "Override mini-batch size");
    sweep->add_option("--epochs", sw.max_epochs, "Override maximum epochs");
    sweep->add_option("--hidden", sw.hidden, "Override hidden layer sizes");
    sweep->add_option("--t-prime", sw.t_prime, "Override target threshold");
    sweep->add_option("--bins", sw.num_bins, "Override probability bins");
    sweep->add_option("--epsilon", sw.epsilon, "Override stop tolerance");
    sweep->add_flag("--svg", sw.svg, "Also render series charts");
    sweep->callback([&] { run_sweep(sw); });

    ReportArgs rp;
    auto* report = app.add_subcommand("report", "Re-render report.csv from results.json");
    report->add_option("--results", rp.results_path, "results.json from a sweep")->required();
    report->add_option("--out", rp.out_path, "Output CSV path");
    report->callback([&] { run_report(rp); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const adacsl::training_diverged_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const adacsl::io_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
