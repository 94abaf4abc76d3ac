#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spectro/matrix.hpp"

namespace spectro {

// Exact finite distribution: context marginal q(x) and row-stochastic
// conditional q(y|x).
struct DiscreteDistribution {
    std::vector<int64_t> contexts;
    std::vector<int64_t> tokens;
    std::vector<double> q_x;
    Matrix q_y_given_x;  // contexts x tokens

    size_t n_contexts() const { return contexts.size(); }
    size_t n_tokens() const { return tokens.size(); }
    void validate() const;

    void save(const std::string& path) const;
    static DiscreteDistribution load(const std::string& path);
};

// SVD of the whitened conditional operator M'(y,x) = sqrt(q(x)) q(y|x).
// Right vectors are orthonormal rows of vt (one per context mode, a full
// basis of context space); left vectors are the columns of u, extended to a
// full orthonormal token basis. Under the q(x)^{-1}-weighted context inner
// product this realizes the mode basis; the dual evaluation is
// vhat_a(x) = vt(a,x) / sqrt(q(x)).
struct ModeDecomposition {
    std::vector<double> singular_values;  // length min(nx, ny), descending
    Matrix u;                             // ny x ny, columns = token patterns
    Matrix vt;                            // nx x nx, rows = context patterns
    std::vector<double> q_x;

    size_t n_contexts() const { return vt.rows; }
    size_t n_tokens() const { return u.rows; }
    double sval(size_t a) const { return a < singular_values.size() ? singular_values[a] : 0.0; }
    double vhat(size_t a, size_t x) const { return vt.at(a, x) / std::sqrt(q_x[x]); }

    void save(const std::string& path) const;
};

ModeDecomposition mode_decompose(const DiscreteDistribution& d);

// Closed-form modes of the three-context / two-token sentence-ending
// distribution with ambiguity parameter a (b = 1-a).
struct ToyModes {
    double s1 = 0.0, s2 = 0.0;
    double u1[2], u2[2];   // token patterns, unit norm
    double v1[3], v2[3];   // context patterns over (x_C, x_N, x_E), unit norm
};
ToyModes toy_oracle(double a);
DiscreteDistribution toy_distribution(double a);

// Propensity profile s_ab(x,y) = vhat_a(x) * u_b(y) for one pair.
Matrix propensity(const ModeDecomposition& md, size_t x, size_t y);

// Right-hand side of the loss-deviation identity:
//   l_xy - L = sum_ab [s_ab(xy) - delta_ab s_a] Phi_ab,
// where Phi_ab projects the loss profile onto the mode basis.
double decompose_loss_deviation(const ModeDecomposition& md, const DiscreteDistribution& d,
                                const Matrix& loss_table, size_t x, size_t y);

// Inversion of the mode decomposition of susceptibilities.
struct ModeSusceptibilities {
    // chi[a*ny + b] is the H-vector for mode pair (a,b).
    std::vector<std::vector<double>> chi;
    std::vector<double> chi_bar;  // H-vector
    size_t nx = 0, ny = 0;
    // Diagnostics: the self-consistency equation for chi_bar is singular by
    // construction (sum_a s_a <1,e_aa> == 1 identically), so the returned
    // solution is the minimum-norm gauge with <chi, c> = 0. residual is
    // |1 - sum_a s_a c_aa| as computed, gauge_norm is ||c||.
    double selfconsistency_residual = 0.0;
    double gauge_norm = 0.0;

    const std::vector<double>& at(size_t a, size_t b) const { return chi[a * ny + b]; }
};

// Recover mode susceptibilities from a full per-pair susceptibility table.
// chi_table is (nx*ny) x H with row index x * ny + y. Requires the table to
// be centered: || sum_xy q(x,y) chi_xy || <= 1e-6.
ModeSusceptibilities mode_susceptibilities(const ModeDecomposition& md,
                                           const DiscreteDistribution& d,
                                           const Matrix& chi_table);

// Forward direction: chi_xy = sum_ab s_ab(xy) chi_ab - chi_bar with
// chi_bar = sum_a s_a chi_aa. Used by tests and the invert round trip.
Matrix synthesize_chi_table(const ModeDecomposition& md, const DiscreteDistribution& d,
                            const std::vector<std::vector<double>>& chi_modes, size_t h);

} // namespace spectro
