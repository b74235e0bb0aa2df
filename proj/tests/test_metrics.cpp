#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "qneat/metrics.hpp"

using namespace qneat;

TEST(Accuracy, Counting) {
    std::vector<int> preds{1, 0, 1, 1};
    std::vector<int> truth{1, 0, 0, 1};
    EXPECT_DOUBLE_EQ(accuracy(preds, truth), 0.75);
}

TEST(F1, HandConfusion) {
    // TP=3, FP=1, FN=1 -> P=0.75, R=0.75, F1=0.75
    Confusion c{3, 1, 0, 1};
    EXPECT_DOUBLE_EQ(f1_score(c), 0.75);
}

TEST(F1, DegeneratePredictorsGiveZero) {
    std::vector<int> all_normal{0, 0, 0, 0};
    std::vector<int> truth{0, 0, 1, 1};
    EXPECT_DOUBLE_EQ(f1_score(all_normal, truth), 0.0);
    EXPECT_DOUBLE_EQ(accuracy(all_normal, truth), 0.5);
}

TEST(F1, PerfectPredictor) {
    std::vector<int> truth{0, 1, 0, 1};
    EXPECT_DOUBLE_EQ(f1_score(truth, truth), 1.0);
    EXPECT_DOUBLE_EQ(accuracy(truth, truth), 1.0);
}

TEST(Nmi, PerfectBalancedPredictions) {
    std::vector<int> labels{0, 1, 0, 1, 0, 1};
    EXPECT_DOUBLE_EQ(normalized_mutual_information(labels, labels), 1.0);
}

TEST(Nmi, ConstantPredictionsAreZero) {
    std::vector<int> preds{1, 1, 1, 1};
    std::vector<int> truth{0, 1, 0, 1};
    EXPECT_DOUBLE_EQ(normalized_mutual_information(preds, truth), 0.0);
}

TEST(Nmi, IndependentCheckerboardIsZero) {
    std::vector<int> a{0, 0, 1, 1};
    std::vector<int> b{0, 1, 0, 1};
    EXPECT_NEAR(normalized_mutual_information(a, b), 0.0, 1e-12);
}

TEST(Nmi, AntiCorrelatedIsAlsoInformative) {
    std::vector<int> truth{0, 1, 0, 1};
    std::vector<int> flipped{1, 0, 1, 0};
    EXPECT_DOUBLE_EQ(normalized_mutual_information(flipped, truth), 1.0);
}

TEST(Nmi, SymmetricAndPermutationInvariant) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 4 + rng() % 40;
        std::vector<int> a(n), b(n);
        for (auto& x : a) x = static_cast<int>(rng() & 1);
        for (auto& x : b) x = static_cast<int>(rng() & 1);
        EXPECT_DOUBLE_EQ(normalized_mutual_information(a, b),
                         normalized_mutual_information(b, a));

        // Permuting both sequences together changes nothing.
        std::vector<std::size_t> perm(n);
        for (std::size_t i = 0; i < n; ++i) perm[i] = i;
        std::shuffle(perm.begin(), perm.end(), rng);
        std::vector<int> ap(n), bp(n);
        for (std::size_t i = 0; i < n; ++i) {
            ap[i] = a[perm[i]];
            bp[i] = b[perm[i]];
        }
        EXPECT_DOUBLE_EQ(normalized_mutual_information(a, b),
                         normalized_mutual_information(ap, bp));
    }
}

TEST(Nmi, RejectsNonBinaryAndLengthMismatch) {
    std::vector<int> bad{0, 2};
    std::vector<int> ok{0, 1};
    std::vector<int> shorter{0};
    EXPECT_THROW(normalized_mutual_information(bad, ok), std::invalid_argument);
    EXPECT_THROW(normalized_mutual_information(ok, shorter), DimensionError);
}
