#include <cmath>

#include "spectro/errors.hpp"
#include "spectro/matrix.hpp"

namespace spectro {

namespace {

// One column-standardization pass. Returns the largest |variance - 1| seen
// before the pass, so the caller can detect the fixed point.
double standardize_columns(Matrix& x) {
    const size_t n = x.rows, h = x.cols;
    double worst = 0.0;
    for (size_t j = 0; j < h; ++j) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += x.at(i, j);
        const double mean = s / static_cast<double>(n);
        double v = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double d = x.at(i, j) - mean;
            v += d * d;
        }
        v /= static_cast<double>(n);
        const double sd = std::sqrt(v);
        worst = std::max(worst, std::max(std::fabs(mean), std::fabs(v - 1.0)));
        for (size_t i = 0; i < n; ++i) x.at(i, j) = (x.at(i, j) - mean) / sd;
    }
    return worst;
}

void center_rows(Matrix& x) {
    const size_t n = x.rows, h = x.cols;
    for (size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < h; ++j) s += x.at(i, j);
        const double rm = s / static_cast<double>(h);
        for (size_t j = 0; j < h; ++j) x.at(i, j) -= rm;
    }
}

bool any_zero_variance(const Matrix& x) {
    const size_t n = x.rows, h = x.cols;
    for (size_t j = 0; j < h; ++j) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += x.at(i, j);
        const double mean = s / static_cast<double>(n);
        double v = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double d = x.at(i, j) - mean;
            v += d * d;
        }
        if (v == 0.0) return true;
    }
    return false;
}

} // namespace

// Column standardization (population std) followed by row mean subtraction,
// alternated to its fixed point so the result is stable under reapplication.
// Row centering perturbs column variances by O(1/H), so a single pass is not
// a fixed point; the alternation contracts geometrically. Zero-variance
// columns are dropped up front and recorded. If the alternation collapses a
// column to zero variance (e.g. 2x2 inputs where rows equal the uniform
// mode), iteration stops with the collapsed values.
PreprocessedMatrix preprocess(const SusceptibilityMatrix& m) {
    const size_t n = m.n();
    const size_t h = m.h();
    if (n < 2) throw DomainError("preprocess needs at least 2 rows, got " + std::to_string(n));

    // Identify and drop zero-variance columns.
    std::vector<size_t> kept;
    PreprocessedMatrix out;
    for (size_t j = 0; j < h; ++j) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += m.values.at(i, j);
        const double mean = s / static_cast<double>(n);
        double v = 0.0;
        for (size_t i = 0; i < n; ++i) {
            const double d = m.values.at(i, j) - mean;
            v += d * d;
        }
        if (v == 0.0) {
            out.dropped_columns.push_back(j);
        } else {
            kept.push_back(j);
            out.column_means.push_back(mean);
            out.column_stds.push_back(std::sqrt(v / static_cast<double>(n)));
        }
    }
    if (kept.empty()) throw DataError("all columns have zero variance");

    Matrix x(n, kept.size());
    for (size_t i = 0; i < n; ++i)
        for (size_t jj = 0; jj < kept.size(); ++jj) x.at(i, jj) = m.values.at(i, kept[jj]);

    constexpr double kTol = 1e-13;
    constexpr int kMaxSweeps = 200;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        const double worst = standardize_columns(x);
        center_rows(x);
        if (sweep > 0 && worst <= kTol) break;
        if (any_zero_variance(x)) break;  // collapsed (uniform-mode rows); stable
    }

    out.values = std::move(x);
    return out;
}

} // namespace spectro
