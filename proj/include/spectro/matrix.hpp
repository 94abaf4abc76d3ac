#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spectro {

// Dense row-major matrix. Stored on disk as little-endian float32
// ("SUSC" format), held in memory as double so accumulations do not drift.
struct Matrix {
    size_t rows = 0;
    size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(size_t i, size_t j) { return data[i * cols + j]; }
    double at(size_t i, size_t j) const { return data[i * cols + j]; }
    const double* row(size_t i) const { return data.data() + i * cols; }
    double* row(size_t i) { return data.data() + i * cols; }
};

// Per-token response profiles: n rows (token records) x H columns (components).
struct SusceptibilityMatrix {
    Matrix values;
    std::vector<std::string> row_ids;
    std::vector<std::string> component_ids;

    size_t n() const { return values.rows; }
    size_t h() const { return values.cols; }
};

// One evaluation token in its context.
struct TokenRecord {
    std::vector<int64_t> context;
    int64_t target = 0;
    std::string dataset_tag;
    std::string decoded_target;
};

struct PreprocessedMatrix {
    Matrix values;
    std::vector<double> column_means;  // of retained columns, pre-standardization
    std::vector<double> column_stds;   // population formula (divide by n)
    std::vector<size_t> dropped_columns;
};

// "SUSC" binary format: magic, u32 version=1, u64 n, u64 H, n*H f32 row-major.
SusceptibilityMatrix load_matrix(const std::string& path);
void save_matrix(const std::string& path, const SusceptibilityMatrix& m,
                 bool write_sidecar = false);

// Newline-delimited JSON records. If expected_rows is set, mismatch is a pairing error.
std::vector<TokenRecord> load_token_metadata(const std::string& path,
                                             std::optional<size_t> expected_rows = std::nullopt);
void save_token_metadata(const std::string& path, const std::vector<TokenRecord>& recs);

// Column standardization (drop zero-variance columns, then zero mean / unit
// variance with the population std) followed by row mean subtraction.
PreprocessedMatrix preprocess(const SusceptibilityMatrix& m);

} // namespace spectro
