#include <gtest/gtest.h>

#include <limits>
#include <random>

#include "adacsl/core.hpp"

using namespace adacsl;

TEST(CostMatrixTest, ValidatesEntries) {
    const CostMatrix cm(1.0, 8.0);
    EXPECT_DOUBLE_EQ(cm.fp_cost(), 1.0);
    EXPECT_DOUBLE_EQ(cm.fn_cost(), 8.0);
    EXPECT_DOUBLE_EQ(cm.cost_ratio(), 8.0);

    EXPECT_THROW(CostMatrix(0.0, 0.0), invalid_cost_error);
    EXPECT_THROW(CostMatrix(-1.0, 2.0), invalid_cost_error);
    EXPECT_THROW(CostMatrix(1.0, std::numeric_limits<double>::infinity()), invalid_cost_error);
    EXPECT_NO_THROW(CostMatrix(0.0, 1.0));
}

TEST(PredictionVectorTest, ValidatesRange) {
    EXPECT_NO_THROW(PredictionVector({0.0, 0.5, 1.0}));
    EXPECT_THROW(PredictionVector({0.5, 1.5}), invalid_input_error);
    EXPECT_THROW(PredictionVector({-0.1}), invalid_input_error);
    EXPECT_THROW(PredictionVector({std::numeric_limits<double>::quiet_NaN()}), invalid_input_error);
}

TEST(MatrixTest, RowAccessAndAppend) {
    Matrix m(2, 3, {1, 2, 3, 4, 5, 6});
    EXPECT_EQ(m.rows(), 2u);
    EXPECT_EQ(m.cols(), 3u);
    EXPECT_DOUBLE_EQ(m(1, 2), 6.0);

    const std::vector<double> row = {7, 8, 9};
    m.append_row(row);
    EXPECT_EQ(m.rows(), 3u);
    EXPECT_DOUBLE_EQ(m(2, 0), 7.0);

    const std::vector<double> short_row = {1, 2};
    EXPECT_THROW(m.append_row(short_row), invalid_input_error);
    EXPECT_THROW(Matrix(2, 2, {1, 2, 3}), invalid_input_error);
}

TEST(ValidateDatasetTest, CountsAndRatio) {
    LabeledDataset ds;
    ds.features = Matrix(3, 2, {0, 1, 2, 3, 4, 5});
    ds.labels = {0, 0, 1};
    const DatasetSummary s = validate_dataset(ds);
    EXPECT_EQ(s.rows, 3u);
    EXPECT_EQ(s.features, 2u);
    EXPECT_EQ(s.negatives, 2u);
    EXPECT_EQ(s.positives, 1u);
    EXPECT_DOUBLE_EQ(s.imbalance_ratio, 2.0);
}

TEST(ValidateDatasetTest, RejectsBadLabelNamingRow) {
    LabeledDataset ds;
    ds.features = Matrix(3, 1, {0, 1, 2});
    ds.labels = {0, 2, 1};
    try {
        validate_dataset(ds);
        FAIL() << "expected invalid_input_error";
    } catch (const invalid_input_error& e) {
        EXPECT_STREQ(e.what(), "label out of {0,1} at row 1");
    }
}

TEST(ValidateDatasetTest, RejectsEmptyAndNonFinite) {
    LabeledDataset empty;
    try {
        validate_dataset(empty);
        FAIL() << "expected invalid_input_error";
    } catch (const invalid_input_error& e) {
        EXPECT_STREQ(e.what(), "empty dataset");
    }

    LabeledDataset bad;
    bad.features = Matrix(2, 1, {1.0, std::numeric_limits<double>::quiet_NaN()});
    bad.labels = {0, 1};
    try {
        validate_dataset(bad);
        FAIL() << "expected invalid_input_error";
    } catch (const invalid_input_error& e) {
        EXPECT_STREQ(e.what(), "non-finite feature value at row 1");
    }

    LabeledDataset ragged;
    ragged.features = Matrix(2, 1, {1.0, 2.0});
    ragged.labels = {0, 1, 1};
    EXPECT_THROW(validate_dataset(ragged), invalid_input_error);
}

TEST(PartitionTest, AssignsEqualWidthBins) {
    const SubgroupPartition part = partition_by_probability(PredictionVector({0.05, 0.15, 0.55}), 10);
    ASSERT_EQ(part.num_bins(), 10u);
    EXPECT_EQ(part.assignments, (std::vector<std::size_t>{0, 1, 5}));
    for (std::size_t m = 0; m < 10; ++m) {
        const std::size_t expected = (m == 0 || m == 1 || m == 5) ? 1u : 0u;
        EXPECT_EQ(part.bin_sizes[m], expected) << "bin " << m;
        EXPECT_FALSE(part.bin_thresholds[m].has_value());
    }
}

TEST(PartitionTest, ClampsUnitProbabilityIntoLastBin) {
    const SubgroupPartition part = partition_by_probability(PredictionVector({1.0}), 10);
    EXPECT_EQ(part.assignments, (std::vector<std::size_t>{9}));
}

TEST(PartitionTest, SingleBinDegenerateCase) {
    const SubgroupPartition part = partition_by_probability(PredictionVector({0.3, 0.31, 0.39}), 1);
    ASSERT_EQ(part.num_bins(), 1u);
    EXPECT_EQ(part.bin_sizes[0], 3u);
    EXPECT_EQ(part.assignments, (std::vector<std::size_t>(3, 0)));
}

TEST(PartitionTest, RejectsEmptyPredictions) {
    EXPECT_THROW(partition_by_probability(PredictionVector{}, 10), invalid_input_error);
    EXPECT_THROW(partition_by_probability(PredictionVector({0.5}), 0), invalid_input_error);
}

// Totality, monotonicity, and size conservation over random draws.
TEST(PartitionTest, PartitionProperties) {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> bin_count(1, 25);

    for (int iter = 0; iter < 50; ++iter) {
        const int bins = bin_count(rng);
        std::vector<double> probs(200);
        for (double& p : probs) p = unit(rng);
        probs[0] = 0.0;
        probs[1] = 1.0;
        const SubgroupPartition part = partition_by_probability(PredictionVector(probs), bins);

        std::size_t total = 0;
        for (std::size_t size : part.bin_sizes) total += size;
        EXPECT_EQ(total, probs.size());

        for (std::size_t i = 0; i < probs.size(); ++i) {
            EXPECT_LT(part.assignments[i], static_cast<std::size_t>(bins));
            for (std::size_t j = 0; j < probs.size(); ++j) {
                if (probs[i] <= probs[j]) {
                    EXPECT_LE(part.assignments[i], part.assignments[j]);
                }
            }
        }
    }
}

TEST(PartitionTest, EdgesSpanUnitInterval) {
    const SubgroupPartition part = partition_by_probability(PredictionVector({0.5}), 4);
    ASSERT_EQ(part.bin_edges.size(), 5u);
    EXPECT_DOUBLE_EQ(part.bin_edges.front(), 0.0);
    EXPECT_DOUBLE_EQ(part.bin_edges.back(), 1.0);
    for (std::size_t i = 0; i + 1 < part.bin_edges.size(); ++i)
        EXPECT_LT(part.bin_edges[i], part.bin_edges[i + 1]);
}
