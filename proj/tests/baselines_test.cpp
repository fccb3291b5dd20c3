#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "adacsl/baselines.hpp"
#include "adacsl/harness.hpp"

using namespace adacsl;

namespace {

bool params_equal(const NetworkParams& a, const NetworkParams& b) {
    if (a.layer_sizes != b.layer_sizes) return false;
    for (std::size_t l = 0; l < a.num_layers(); ++l) {
        if (a.weights[l].data() != b.weights[l].data()) return false;
        if (a.biases[l] != b.biases[l]) return false;
    }
    return true;
}

LabeledDataset imbalanced_dataset(std::size_t n_neg, std::size_t n_pos, std::uint64_t seed,
                                  std::size_t dim = 2) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    LabeledDataset ds;
    ds.features = Matrix(0, dim, {});
    std::vector<double> row(dim);
    for (std::size_t i = 0; i < n_neg + n_pos; ++i) {
        const bool positive = i >= n_neg;
        for (std::size_t c = 0; c < dim; ++c)
            row[c] = noise(rng) + (positive && c == 0 ? 2.0 : 0.0);
        ds.features.append_row(row);
        ds.labels.push_back(positive ? 1 : 0);
    }
    return ds;
}

std::multiset<std::vector<double>> rows_with_label(const LabeledDataset& ds, int label) {
    std::multiset<std::vector<double>> rows;
    for (std::size_t r = 0; r < ds.size(); ++r) {
        if (ds.labels[r] != label) continue;
        const auto row = ds.features.row(r);
        rows.insert(std::vector<double>(row.begin(), row.end()));
    }
    return rows;
}

} // namespace

TEST(TrainStandardTest, DeterministicUnderFixedSeed) {
    SyntheticSpec spec;
    spec.n_train = 300;
    spec.n_val = 200;
    spec.n_test = 50;
    spec.seed = 5;
    const SyntheticData data = generate_synthetic(spec);
    TrainConfig cfg;
    cfg.seed = 9;
    cfg.max_epochs = 5;
    cfg.hidden_sizes = {8};

    const TrainedModel a = train_standard(data.train, data.val, cfg);
    const TrainedModel b = train_standard(data.train, data.val, cfg);
    EXPECT_TRUE(params_equal(a.final_params, b.final_params));
    EXPECT_EQ(a.best_epoch, b.best_epoch);
    EXPECT_EQ(a.val_costs, b.val_costs);
}

TEST(TrainStandardTest, SeparableDataReachesZeroTrainingErrors) {
    // Classes split cleanly along the first coordinate.
    LabeledDataset train;
    train.features = Matrix(0, 2, {});
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    for (int i = 0; i < 60; ++i) {
        const bool positive = i % 2 == 0;
        const std::vector<double> row{(positive ? 2.0 : -2.0) + jitter(rng), jitter(rng)};
        train.features.append_row(row);
        train.labels.push_back(positive ? 1 : 0);
    }
    TrainConfig cfg;
    cfg.seed = 3;
    cfg.learning_rate = 0.2;
    cfg.batch_size = 8;
    cfg.max_epochs = 40;
    cfg.hidden_sizes = {8};

    const TrainedModel model = train_standard(train, train, cfg);
    const std::vector<int> decided = classify(predict_batch(model.best_params, train.features), 0.5);
    EXPECT_EQ(decided, train.labels);
    EXPECT_DOUBLE_EQ(model.best_val_cost, 0.0);
}

TEST(TrainWeightedCeTest, SymmetricCostsMatchStandard) {
    SyntheticSpec spec;
    spec.n_train = 300;
    spec.n_val = 200;
    spec.n_test = 50;
    spec.seed = 6;
    const SyntheticData data = generate_synthetic(spec);
    TrainConfig cfg;
    cfg.seed = 4;
    cfg.max_epochs = 4;
    cfg.hidden_sizes = {8};

    const TrainedModel standard = train_standard(data.train, data.val, cfg);
    const TrainedModel weighted = train_weighted_ce(data.train, data.val, cfg, CostMatrix(2.0, 2.0));
    EXPECT_TRUE(params_equal(standard.final_params, weighted.final_params));
}

TEST(ThresholdDecisionTest, UsesAnalyticThreshold) {
    const NetworkParams params = init_network({2, 4, 1}, 13);
    const ThresholdDecision ta = threshold_adjusted_decision(params, CostMatrix(1.0, 8.0));
    EXPECT_DOUBLE_EQ(ta.threshold, optimal_threshold(CostMatrix(1.0, 8.0)));

    // Symmetric costs: extensionally identical to plain 0.5 classification.
    const ThresholdDecision symmetric = threshold_adjusted_decision(params, CostMatrix(3.0, 3.0));
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> probs(200);
    for (double& p : probs) p = unit(rng);
    const PredictionVector preds(probs);
    EXPECT_EQ(symmetric(preds), classify(preds, 0.5));

    // A lower threshold never produces fewer positives, and strictly more
    // when predictions straddle the two cutoffs.
    const PredictionVector straddling({0.2, 0.3, 0.45, 0.6});
    const auto aggressive = ta(straddling);
    const auto conservative = classify(straddling, 0.5);
    int more = 0;
    for (std::size_t i = 0; i < straddling.size(); ++i) {
        EXPECT_GE(aggressive[i], conservative[i]);
        more += aggressive[i] - conservative[i];
    }
    EXPECT_GT(more, 0);
}

TEST(ResampleByCostTest, IdentityWhenMultiplierIsOne) {
    const LabeledDataset ds = imbalanced_dataset(30, 10, 21);
    const LabeledDataset out = resample_by_cost(ds, CostMatrix(2.0, 2.0), 0.5, 1);
    EXPECT_EQ(out.size(), ds.size());
    EXPECT_EQ(out.labels, ds.labels);
    EXPECT_EQ(out.features.data(), ds.features.data());
}

TEST(ResampleByCostTest, DownsamplesNegativesExactly) {
    const LabeledDataset ds = imbalanced_dataset(800, 100, 22);
    const LabeledDataset out = resample_by_cost(ds, CostMatrix(1.0, 8.0), 0.5, 7);

    const DatasetSummary summary = validate_dataset(out);
    EXPECT_EQ(summary.negatives, 100u);
    EXPECT_EQ(summary.positives, 100u);
    // Positive rows are untouched.
    EXPECT_EQ(rows_with_label(out, 1), rows_with_label(ds, 1));
    // Every kept negative row exists in the source.
    const auto source_negatives = rows_with_label(ds, 0);
    for (const auto& row : rows_with_label(out, 0))
        EXPECT_TRUE(source_negatives.count(row) > 0);
}

TEST(ResampleByCostTest, UpsamplesWithWholeCopiesPlusRemainder) {
    // multiplier (2.5/1)*((1-0.5)/0.5) = 2.5: 100 negatives become 250.
    const LabeledDataset ds = imbalanced_dataset(100, 40, 23);
    const LabeledDataset out = resample_by_cost(ds, CostMatrix(2.5, 1.0), 0.5, 7);

    const DatasetSummary summary = validate_dataset(out);
    EXPECT_EQ(summary.negatives, 250u);
    EXPECT_EQ(summary.positives, 40u);

    // Each source negative appears at least twice (two whole copies).
    const auto source_negatives = rows_with_label(ds, 0);
    const auto kept = rows_with_label(out, 0);
    for (const auto& row : source_negatives) EXPECT_GE(kept.count(row), 2u);
}

TEST(ResampleByCostTest, RefusesToRemoveAllNegatives) {
    const LabeledDataset ds = imbalanced_dataset(800, 100, 24);
    try {
        resample_by_cost(ds, CostMatrix(1.0, 1e6), 0.5, 1);
        FAIL() << "expected invalid_input_error";
    } catch (const invalid_input_error& e) {
        EXPECT_STREQ(e.what(), "resampling would remove all negatives");
    }
}

TEST(ResampleByCostTest, DeterministicUnderFixedSeed) {
    const LabeledDataset ds = imbalanced_dataset(200, 50, 25);
    const LabeledDataset a = resample_by_cost(ds, CostMatrix(1.0, 4.0), 0.5, 99);
    const LabeledDataset b = resample_by_cost(ds, CostMatrix(1.0, 4.0), 0.5, 99);
    EXPECT_EQ(a.features.data(), b.features.data());
    EXPECT_EQ(a.labels, b.labels);
}

TEST(SmoteTest, NoOpWhenRatioAlreadyMet) {
    const LabeledDataset ds = imbalanced_dataset(30, 30, 31);
    const LabeledDataset out = smote_oversample(ds, 3, 1.0, 1);
    EXPECT_EQ(out.size(), ds.size());
    EXPECT_EQ(out.features.data(), ds.features.data());
}

TEST(SmoteTest, SyntheticsLieOnMinoritySegments) {
    const LabeledDataset ds = imbalanced_dataset(120, 20, 32, 3);
    const LabeledDataset out = smote_oversample(ds, 5, 1.0, 42);

    const DatasetSummary summary = validate_dataset(out);
    EXPECT_EQ(summary.positives, 120u);
    EXPECT_EQ(summary.negatives, 120u);

    // Original rows are preserved as a prefix; synthetics follow.
    for (std::size_t r = 0; r < ds.size(); ++r) {
        EXPECT_EQ(out.labels[r], ds.labels[r]);
        const auto original = ds.features.row(r);
        const auto copy = out.features.row(r);
        EXPECT_TRUE(std::equal(original.begin(), original.end(), copy.begin()));
    }

    // Each synthetic row lies on a segment between two real minority rows.
    std::vector<std::vector<double>> minority;
    for (std::size_t r = 0; r < ds.size(); ++r)
        if (ds.labels[r] == 1) {
            const auto row = ds.features.row(r);
            minority.emplace_back(row.begin(), row.end());
        }
    for (std::size_t r = ds.size(); r < out.size(); ++r) {
        EXPECT_EQ(out.labels[r], 1);
        const auto synth = out.features.row(r);
        bool on_segment = false;
        for (std::size_t a = 0; a < minority.size() && !on_segment; ++a) {
            for (std::size_t b = 0; b < minority.size() && !on_segment; ++b) {
                if (a == b) continue;
                double u = -1.0;
                bool ok = true;
                for (std::size_t c = 0; c < synth.size(); ++c) {
                    const double span = minority[b][c] - minority[a][c];
                    const double offset = synth[c] - minority[a][c];
                    if (std::abs(span) > 1e-12) {
                        const double candidate = offset / span;
                        if (u < 0.0) u = candidate;
                        else if (std::abs(candidate - u) > 1e-7) { ok = false; break; }
                    } else if (std::abs(offset) > 1e-9) {
                        ok = false;
                        break;
                    }
                }
                on_segment = ok && u >= -1e-9 && u <= 1.0 + 1e-9;
            }
        }
        EXPECT_TRUE(on_segment) << "synthetic row " << r << " is off every minority segment";
    }
}

TEST(SmoteTest, SingleNeighborPairInterpolatesOneSegment) {
    LabeledDataset ds;
    ds.features = Matrix(0, 2, {});
    // Majority cloud plus exactly two minority points.
    std::mt19937_64 rng(33);
    std::normal_distribution<double> noise(0.0, 0.5);
    for (int i = 0; i < 10; ++i) {
        const std::vector<double> row{noise(rng), noise(rng)};
        ds.features.append_row(row);
        ds.labels.push_back(0);
    }
    const std::vector<double> p1{5.0, 5.0}, p2{7.0, 9.0};
    ds.features.append_row(p1);
    ds.labels.push_back(1);
    ds.features.append_row(p2);
    ds.labels.push_back(1);

    const LabeledDataset out = smote_oversample(ds, 1, 1.0, 17);
    for (std::size_t r = ds.size(); r < out.size(); ++r) {
        const auto synth = out.features.row(r);
        const double u = (synth[0] - 5.0) / 2.0;
        EXPECT_GE(u, -1e-12);
        EXPECT_LE(u, 1.0 + 1e-12);
        EXPECT_NEAR(synth[1], 5.0 + u * 4.0, 1e-9);
    }
}

TEST(SmoteTest, RejectsTinyMinorityNamingK) {
    const LabeledDataset ds = imbalanced_dataset(30, 4, 34);
    try {
        smote_oversample(ds, 5, 1.0, 1);
        FAIL() << "expected invalid_input_error";
    } catch (const invalid_input_error& e) {
        EXPECT_NE(std::string(e.what()).find("k=5"), std::string::npos);
    }
}

TEST(FitWithSelectionTest, PicksEpochWithMinimumValidationCost) {
    SyntheticSpec spec;
    spec.n_train = 300;
    spec.n_val = 200;
    spec.n_test = 50;
    spec.seed = 8;
    const SyntheticData data = generate_synthetic(spec);
    TrainConfig cfg;
    cfg.seed = 2;
    cfg.max_epochs = 6;
    cfg.hidden_sizes = {8};
    const CostMatrix cm(1.0, 3.0);

    const TrainedModel model =
        fit_with_selection(data.train, data.val, LossSpec(cm, 0.5, 1.0), cfg, 0.5, cm);
    ASSERT_EQ(model.val_costs.size(), 6u);
    const double min_cost = *std::min_element(model.val_costs.begin(), model.val_costs.end());
    EXPECT_DOUBLE_EQ(model.best_val_cost, min_cost);
    EXPECT_DOUBLE_EQ(model.val_costs[static_cast<std::size_t>(model.best_epoch - 1)], min_cost);

    const double recomputed = empirical_cost(predict_batch(model.best_params, data.val.features),
                                             data.val.labels, 0.5, cm);
    EXPECT_DOUBLE_EQ(recomputed, min_cost);
}
