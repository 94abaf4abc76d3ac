#include <cmath>

#include "doctest.h"
#include "spectro/errors.hpp"
#include "spectro/modes.hpp"
#include "spectro/rng.hpp"

using namespace spectro;

namespace {

DiscreteDistribution random_dist(size_t nx, size_t ny, uint64_t seed) {
    Rng rng(seed);
    DiscreteDistribution d;
    for (size_t x = 0; x < nx; ++x) d.contexts.push_back(static_cast<int64_t>(x));
    for (size_t y = 0; y < ny; ++y) d.tokens.push_back(static_cast<int64_t>(y));
    d.q_x.assign(nx, 0.0);
    double qs = 0.0;
    for (auto& q : d.q_x) {
        q = 0.1 + rng.next_double();
        qs += q;
    }
    double acc = 0.0;
    for (size_t x = 0; x + 1 < nx; ++x) {
        d.q_x[x] /= qs;
        acc += d.q_x[x];
    }
    d.q_x[nx - 1] = 1.0 - acc;
    d.q_y_given_x = Matrix(nx, ny);
    for (size_t x = 0; x < nx; ++x) {
        double rs = 0.0;
        std::vector<double> row(ny);
        for (auto& v : row) {
            v = 0.05 + rng.next_double();
            rs += v;
        }
        double racc = 0.0;
        for (size_t y = 0; y + 1 < ny; ++y) {
            d.q_y_given_x.at(x, y) = row[y] / rs;
            racc += d.q_y_given_x.at(x, y);
        }
        d.q_y_given_x.at(x, ny - 1) = 1.0 - racc;
    }
    d.validate();
    return d;
}

// Gram matrix of the mode basis under the weighted inner product:
// <e_ab, e_cd> = sum_x q(x) vhat_a(x) vhat_c(x) * sum_y u_b(y) u_d(y).
double mode_gram(const ModeDecomposition& md, size_t a, size_t b, size_t c, size_t dd) {
    double sx = 0.0;
    for (size_t x = 0; x < md.n_contexts(); ++x)
        sx += md.q_x[x] * md.vhat(a, x) * md.vhat(c, x);
    double sy = 0.0;
    for (size_t y = 0; y < md.n_tokens(); ++y) sy += md.u.at(y, b) * md.u.at(y, dd);
    return sx * sy;
}

} // namespace

TEST_CASE("absolute bigrams: uniform 2x2 identity conditional") {
    DiscreteDistribution d;
    d.contexts = {0, 1};
    d.tokens = {0, 1};
    d.q_x = {0.5, 0.5};
    d.q_y_given_x = Matrix(2, 2);
    d.q_y_given_x.at(0, 0) = 1.0;
    d.q_y_given_x.at(1, 1) = 1.0;
    auto md = mode_decompose(d);
    // Whitened operator is I/sqrt(2): both singular values 1/sqrt(2).
    CHECK(md.sval(0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    CHECK(md.sval(1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
    // Left vectors span the standard basis (degenerate pair, compare the
    // projector instead of individual vectors).
    double proj[2][2] = {{0, 0}, {0, 0}};
    for (size_t b = 0; b < 2; ++b)
        for (size_t i = 0; i < 2; ++i)
            for (size_t j = 0; j < 2; ++j) proj[i][j] += md.u.at(i, b) * md.u.at(j, b);
    CHECK(proj[0][0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(proj[1][1] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::fabs(proj[0][1]) <= 1e-10);
}

TEST_CASE("toy closed form at a = 1/2") {
    auto t = toy_oracle(0.5);
    CHECK(t.s1 == doctest::Approx(0.70710678118).epsilon(1e-10));
    CHECK(t.s2 == doctest::Approx(0.57735026919).epsilon(1e-10));
    CHECK(t.v2[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(t.v2[1] == doctest::Approx(-1.0 / std::sqrt(2.0)));
    CHECK(t.v2[2] == 0.0);
}

TEST_CASE("toy model: numerical SVD matches the closed form across a") {
    for (double a : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}) {
        auto t = toy_oracle(a);
        auto md = mode_decompose(toy_distribution(a));
        CHECK(std::fabs(md.sval(0) - t.s1) <= 1e-10);
        CHECK(std::fabs(md.sval(1) - t.s2) <= 1e-10);
        // v2 never loads on the ambiguous context.
        CHECK(std::fabs(md.vt.at(1, 2)) <= 1e-10);
        // Vectors agree up to the sign convention (compare |dot| = 1).
        double du1 = md.u.at(0, 0) * t.u1[0] + md.u.at(1, 0) * t.u1[1];
        double du2 = md.u.at(0, 1) * t.u2[0] + md.u.at(1, 1) * t.u2[1];
        CHECK(std::fabs(std::fabs(du1) - 1.0) <= 1e-10);
        CHECK(std::fabs(std::fabs(du2) - 1.0) <= 1e-10);
        double dv1 = 0.0, dv2 = 0.0;
        for (size_t x = 0; x < 3; ++x) {
            dv1 += md.vt.at(0, x) * t.v1[x];
            dv2 += md.vt.at(1, x) * t.v2[x];
        }
        CHECK(std::fabs(std::fabs(dv1) - 1.0) <= 1e-10);
        CHECK(std::fabs(std::fabs(dv2) - 1.0) <= 1e-10);
    }
    CHECK_THROWS_AS(toy_oracle(0.0), DomainError);
    CHECK_THROWS_AS(toy_oracle(1.0), DomainError);
}

TEST_CASE("toy a=0.9 closed-form values") {
    auto md = mode_decompose(toy_distribution(0.9));
    CHECK(md.sval(0) == doctest::Approx(std::sqrt(2.0 * (1.0 - 0.09) / 3.0)).epsilon(1e-12));
    CHECK(md.sval(0) == doctest::Approx(0.77889).epsilon(1e-4));
    CHECK(md.sval(1) == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("reconstruction and orthonormality of the mode basis") {
    auto d = random_dist(7, 5, 11);
    auto md = mode_decompose(d);
    const size_t nx = 7, ny = 5;

    // sum_a s_a u_a vt_a reproduces the whitened operator.
    for (size_t y = 0; y < ny; ++y)
        for (size_t x = 0; x < nx; ++x) {
            double rec = 0.0;
            for (size_t a = 0; a < std::min(nx, ny); ++a)
                rec += md.sval(a) * md.u.at(y, a) * md.vt.at(a, x);
            const double expect = std::sqrt(d.q_x[x]) * d.q_y_given_x.at(x, y);
            CHECK(std::fabs(rec - expect) <= 1e-10);
        }

    // Gram matrix of the mode basis is the identity.
    for (size_t a = 0; a < nx; ++a)
        for (size_t b = 0; b < ny; ++b)
            for (size_t c = 0; c < nx; ++c)
                for (size_t dd = 0; dd < ny; ++dd) {
                    const double gram = mode_gram(md, a, b, c, dd);
                    const double expect = (a == c && b == dd) ? 1.0 : 0.0;
                    CHECK(std::fabs(gram - expect) <= 1e-10);
                }
}

TEST_CASE("token-basis norm identity") {
    auto d = random_dist(5, 4, 3);
    auto md = mode_decompose(d);
    // || y o x^* ||^2 = sum_ab s_ab(xy)^2 = q(x)^{-1}
    for (size_t x = 0; x < 5; ++x)
        for (size_t y = 0; y < 4; ++y) {
            auto p = propensity(md, x, y);
            double n2 = 0.0;
            for (double v : p.data) n2 += v * v;
            CHECK(std::fabs(n2 - 1.0 / d.q_x[x]) <= 1e-9);
        }
}

TEST_CASE("propensity expansion reproduces the token basis element") {
    auto d = random_dist(5, 4, 21);
    auto md = mode_decompose(d);
    const size_t nx = 5, ny = 4;
    const size_t x0 = 2, y0 = 1;
    auto p = propensity(md, x0, y0);
    // sum_ab s_ab(x0,y0) e_ab evaluated at (x,y)
    for (size_t x = 0; x < nx; ++x)
        for (size_t y = 0; y < ny; ++y) {
            double val = 0.0;
            for (size_t a = 0; a < nx; ++a)
                for (size_t b = 0; b < ny; ++b)
                    val += p.at(a, b) * md.vhat(a, x) * md.u.at(y, b);
            const double expect = (x == x0 && y == y0) ? 1.0 / d.q_x[x0] : 0.0;
            CHECK(std::fabs(val - expect) <= 1e-10);
        }
    CHECK_THROWS_AS(propensity(md, 5, 0), DomainError);
}

TEST_CASE("toy model: ambiguous context does not touch the discriminating mode") {
    auto md = mode_decompose(toy_distribution(0.37));
    // vhat_2(x_E) = 0, so every (2, b) propensity of pairs with x = x_E is 0.
    auto p = propensity(md, 2, 0);
    for (size_t b = 0; b < 2; ++b) CHECK(std::fabs(p.at(1, b)) <= 1e-10);
}

TEST_CASE("loss deviation identity on random distributions") {
    Rng rng(5);
    for (int rep = 0; rep < 3; ++rep) {
        auto d = random_dist(5, 4, 100 + rep);
        auto md = mode_decompose(d);
        Matrix loss(5, 4);
        for (auto& v : loss.data) v = 3.0 * rng.next_double();
        double big_l = 0.0;
        for (size_t x = 0; x < 5; ++x)
            for (size_t y = 0; y < 4; ++y)
                big_l += d.q_x[x] * d.q_y_given_x.at(x, y) * loss.at(x, y);
        for (size_t x = 0; x < 5; ++x)
            for (size_t y = 0; y < 4; ++y) {
                const double lhs = loss.at(x, y) - big_l;
                const double rhs = decompose_loss_deviation(md, d, loss, x, y);
                CHECK(std::fabs(lhs - rhs) <= 1e-8);
            }
    }
}

TEST_CASE("constant loss tables have zero deviation") {
    auto d = random_dist(4, 3, 8);
    auto md = mode_decompose(d);
    Matrix loss(4, 3);
    for (auto& v : loss.data) v = 2.5;
    for (size_t x = 0; x < 4; ++x)
        for (size_t y = 0; y < 3; ++y)
            CHECK(std::fabs(decompose_loss_deviation(md, d, loss, x, y)) <= 1e-10);
}

TEST_CASE("forward/inverse mode susceptibility round trip") {
    Rng rng(17);
    auto d = random_dist(6, 4, 55);
    auto md = mode_decompose(d);
    const size_t nx = 6, ny = 4, h = 3;

    // Plant random mode susceptibilities, then project out the gauge
    // direction c_ab = <1, e_ab> (the decomposition determines chi only up
    // to that direction; the inverter returns the representative with
    // <chi, c> = 0 per component).
    std::vector<double> cx(nx, 0.0), cy(ny, 0.0);
    for (size_t a = 0; a < nx; ++a)
        for (size_t x = 0; x < nx; ++x) cx[a] += d.q_x[x] * md.vhat(a, x);
    for (size_t b = 0; b < ny; ++b)
        for (size_t y = 0; y < ny; ++y) cy[b] += md.u.at(y, b);

    std::vector<std::vector<double>> planted(nx * ny, std::vector<double>(h));
    for (auto& v : planted)
        for (auto& c : v) c = rng.next_normal();
    for (size_t c = 0; c < h; ++c) {
        double dot = 0.0, n2 = 0.0;
        for (size_t a = 0; a < nx; ++a)
            for (size_t b = 0; b < ny; ++b) {
                const double cab = cx[a] * cy[b];
                dot += planted[a * ny + b][c] * cab;
                n2 += cab * cab;
            }
        for (size_t a = 0; a < nx; ++a)
            for (size_t b = 0; b < ny; ++b)
                planted[a * ny + b][c] -= (dot / n2) * cx[a] * cy[b];
    }

    auto table = synthesize_chi_table(md, d, planted, h);
    auto rec = mode_susceptibilities(md, d, table);

    double worst = 0.0;
    for (size_t ab = 0; ab < nx * ny; ++ab)
        for (size_t c = 0; c < h; ++c)
            worst = std::max(worst, std::fabs(rec.chi[ab][c] - planted[ab][c]));
    CHECK(worst <= 1e-8);

    // chi_bar consistency: chi_bar == sum_a s_a chi_aa.
    for (size_t c = 0; c < h; ++c) {
        double cb = 0.0;
        for (size_t a = 0; a < std::min(nx, ny); ++a) cb += md.sval(a) * rec.chi[a * ny + a][c];
        CHECK(std::fabs(cb - rec.chi_bar[c]) <= 1e-9);
    }
    // The self-consistency system is singular by construction.
    CHECK(rec.selfconsistency_residual <= 1e-9);
}

TEST_CASE("zero mode susceptibilities give a zero table and invert to zero") {
    auto d = random_dist(4, 3, 2);
    auto md = mode_decompose(d);
    std::vector<std::vector<double>> zeros(12, std::vector<double>(2, 0.0));
    auto table = synthesize_chi_table(md, d, zeros, 2);
    for (double v : table.data) CHECK(std::fabs(v) <= 1e-12);
    auto rec = mode_susceptibilities(md, d, table);
    for (const auto& row : rec.chi)
        for (double v : row) CHECK(std::fabs(v) <= 1e-10);
}

TEST_CASE("single-mode synthetic stays on its diagonal") {
    auto d = random_dist(5, 5, 31);
    auto md = mode_decompose(d);
    const size_t nx = 5, ny = 5;
    std::vector<double> cx(nx, 0.0), cy(ny, 0.0);
    for (size_t a = 0; a < nx; ++a)
        for (size_t x = 0; x < nx; ++x) cx[a] += d.q_x[x] * md.vhat(a, x);
    for (size_t b = 0; b < ny; ++b)
        for (size_t y = 0; y < ny; ++y) cy[b] += md.u.at(y, b);

    std::vector<std::vector<double>> planted(nx * ny, std::vector<double>(1, 0.0));
    planted[1 * ny + 1][0] = 2.0;
    // gauge projection
    double dot = 0.0, n2 = 0.0;
    for (size_t a = 0; a < nx; ++a)
        for (size_t b = 0; b < ny; ++b) {
            const double cab = cx[a] * cy[b];
            dot += planted[a * ny + b][0] * cab;
            n2 += cab * cab;
        }
    for (size_t a = 0; a < nx; ++a)
        for (size_t b = 0; b < ny; ++b) planted[a * ny + b][0] -= (dot / n2) * cx[a] * cy[b];

    auto table = synthesize_chi_table(md, d, planted, 1);
    auto rec = mode_susceptibilities(md, d, table);
    for (size_t ab = 0; ab < nx * ny; ++ab)
        CHECK(std::fabs(rec.chi[ab][0] - planted[ab][0]) <= 1e-10);
}

TEST_CASE("non-centered chi tables are rejected") {
    auto d = random_dist(4, 3, 77);
    auto md = mode_decompose(d);
    Matrix table(12, 1);
    for (auto& v : table.data) v = 1.0;  // constant table is not centered
    CHECK_THROWS_AS(mode_susceptibilities(md, d, table), DataError);
}

TEST_CASE("separation principle: pairs differing only in dead modes coincide") {
    auto d = random_dist(6, 5, 42);
    auto md = mode_decompose(d);
    const size_t nx = 6, ny = 5, h = 2;
    // chi_ab nonzero only for modes a,b < 2; everything else (including the
    // gauge component) zero.
    Rng rng(1);
    std::vector<std::vector<double>> planted(nx * ny, std::vector<double>(h, 0.0));
    for (size_t a = 0; a < 2; ++a)
        for (size_t b = 0; b < 2; ++b)
            for (size_t c = 0; c < h; ++c) planted[a * ny + b][c] = rng.next_normal();

    // Two synthetic pairs with identical propensities on live modes: this is
    // exactly the statement that the chi rows agree.
    auto table = synthesize_chi_table(md, d, planted, h);
    // Construct virtual propensity profiles directly: use two (x,y) pairs
    // and replace their dead-mode components; table rows depend only on the
    // live-mode propensities, so equality of live propensities forces
    // equality of rows. Verify via explicit recomputation.
    for (size_t x = 0; x < nx; ++x)
        for (size_t y = 0; y < ny; ++y) {
            const auto p = propensity(md, x, y);
            std::vector<double> expect(h, 0.0);
            std::vector<double> chi_bar(h, 0.0);
            for (size_t a = 0; a < std::min(nx, ny); ++a)
                for (size_t c = 0; c < h; ++c)
                    chi_bar[c] += md.sval(a) * planted[a * ny + a][c];
            for (size_t a = 0; a < 2; ++a)
                for (size_t b = 0; b < 2; ++b)
                    for (size_t c = 0; c < h; ++c)
                        expect[c] += p.at(a, b) * planted[a * ny + b][c];
            for (size_t c = 0; c < h; ++c)
                CHECK(std::fabs(table.at(x * ny + y, c) - (expect[c] - chi_bar[c])) <= 1e-9);
        }
}

TEST_CASE("distribution json round trip and validation") {
    auto d = random_dist(4, 3, 9);
    const std::string path = "/tmp/spectro_test_dist.json";
    d.save(path);
    auto back = DiscreteDistribution::load(path);
    REQUIRE(back.n_contexts() == 4);
    for (size_t x = 0; x < 4; ++x) CHECK(back.q_x[x] == doctest::Approx(d.q_x[x]).epsilon(1e-9));
    std::remove(path.c_str());

    DiscreteDistribution bad = d;
    bad.q_y_given_x.at(0, 0) += 0.5;
    CHECK_THROWS_AS(bad.validate(), DataError);
}
