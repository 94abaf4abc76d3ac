#include <cmath>

#include "doctest.h"
#include "spectro/errors.hpp"
#include "spectro/matrix.hpp"
#include "spectro/rng.hpp"

using namespace spectro;

namespace {

SusceptibilityMatrix make(size_t n, size_t h, const std::vector<double>& vals) {
    SusceptibilityMatrix m;
    m.values = Matrix(n, h);
    m.values.data = vals;
    for (size_t i = 0; i < n; ++i) m.row_ids.push_back("r" + std::to_string(i));
    for (size_t j = 0; j < h; ++j) m.component_ids.push_back("c" + std::to_string(j));
    return m;
}

SusceptibilityMatrix random_matrix(size_t n, size_t h, uint64_t seed) {
    Rng rng(seed);
    SusceptibilityMatrix m;
    m.values = Matrix(n, h);
    for (auto& v : m.values.data) v = 3.0 * rng.next_normal() + 1.5;
    for (size_t i = 0; i < n; ++i) m.row_ids.push_back("r" + std::to_string(i));
    for (size_t j = 0; j < h; ++j) m.component_ids.push_back("c" + std::to_string(j));
    return m;
}

} // namespace

TEST_CASE("symmetric 2x2 collapses to the uniform mode") {
    auto out = preprocess(make(2, 2, {1, 2, 3, 4}));
    for (double v : out.values.data) CHECK(std::fabs(v) <= 1e-12);
    CHECK(out.dropped_columns.empty());
}

TEST_CASE("constant columns are dropped and recorded") {
    auto out = preprocess(make(2, 2, {1, 5, 3, 5}));
    REQUIRE(out.dropped_columns == std::vector<size_t>{1});
    REQUIRE(out.values.cols == 1);
    // The surviving column standardizes to (-1, 1) and then row centering
    // (h = 1) removes everything.
    CHECK(std::fabs(out.values.at(0, 0)) <= 1e-12);
    CHECK(std::fabs(out.values.at(1, 0)) <= 1e-12);
}

TEST_CASE("all-constant input is an error") {
    CHECK_THROWS_AS(preprocess(make(2, 2, {7, 7, 7, 7})), DataError);
}

TEST_CASE("single-row input is an error") {
    CHECK_THROWS_AS(preprocess(make(1, 2, {1, 2})), DomainError);
}

TEST_CASE("random 100x8: independent oracle confirms the normalization") {
    auto m = random_matrix(100, 8, 99);
    auto out = preprocess(m);
    REQUIRE(out.values.rows == 100);
    REQUIRE(out.values.cols == 8);

    // Independent summation oracle over the output.
    const size_t n = out.values.rows, h = out.values.cols;
    for (size_t j = 0; j < h; ++j) {
        long double mean = 0.0L, var = 0.0L;
        for (size_t i = 0; i < n; ++i) mean += out.values.at(i, j);
        mean /= n;
        for (size_t i = 0; i < n; ++i) {
            const long double d = out.values.at(i, j) - mean;
            var += d * d;
        }
        var /= n;
        CHECK(std::fabs(static_cast<double>(mean)) <= 1e-10 * std::sqrt(100.0));
        CHECK(std::fabs(static_cast<double>(var) - 1.0) <= 1e-9);
    }
    for (size_t i = 0; i < n; ++i) {
        long double rm = 0.0L;
        for (size_t j = 0; j < h; ++j) rm += out.values.at(i, j);
        CHECK(std::fabs(static_cast<double>(rm)) <= 1e-10);
    }

    // First-pass statistics recorded for the retained columns.
    REQUIRE(out.column_means.size() == 8);
    for (size_t j = 0; j < 8; ++j) {
        long double mean = 0.0L;
        for (size_t i = 0; i < 100; ++i) mean += m.values.at(i, j);
        mean /= 100;
        CHECK(std::fabs(static_cast<double>(mean) - out.column_means[j]) <= 1e-12);
    }
}

TEST_CASE("preprocess is idempotent to 1e-9") {
    auto m = random_matrix(60, 6, 7);
    auto once = preprocess(m);

    SusceptibilityMatrix again;
    again.values = once.values;
    for (size_t i = 0; i < once.values.rows; ++i) again.row_ids.push_back("r");
    for (size_t j = 0; j < once.values.cols; ++j) again.component_ids.push_back("c");
    auto twice = preprocess(again);

    REQUIRE(twice.values.rows == once.values.rows);
    REQUIRE(twice.values.cols == once.values.cols);
    double worst = 0.0;
    for (size_t i = 0; i < once.values.data.size(); ++i)
        worst = std::max(worst, std::fabs(twice.values.data[i] - once.values.data[i]));
    CHECK(worst <= 1e-9);
}

TEST_CASE("the all-ones direction in row space is annihilated") {
    auto out = preprocess(random_matrix(40, 5, 13));
    for (size_t i = 0; i < out.values.rows; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < out.values.cols; ++j) s += out.values.at(i, j);
        CHECK(std::fabs(s) <= 1e-10);
    }
}
