#include "spectro/modes.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include "json.hpp"
#include "spectro/canonical_json.hpp"
#include "spectro/errors.hpp"

namespace spectro {

void DiscreteDistribution::validate() const {
    const size_t nx = n_contexts(), ny = n_tokens();
    if (nx == 0 || ny == 0) throw DataError("distribution: empty context or token set");
    if (q_x.size() != nx || q_y_given_x.rows != nx || q_y_given_x.cols != ny)
        throw DataError("distribution: dimension mismatch");
    double sum = 0.0;
    for (double q : q_x) {
        if (!(q > 0.0)) throw DataError("distribution: q(x) must be positive");
        sum += q;
    }
    if (std::fabs(sum - 1.0) > 1e-12) throw DataError("distribution: q(x) must sum to 1");
    for (size_t x = 0; x < nx; ++x) {
        double rs = 0.0;
        for (size_t y = 0; y < ny; ++y) {
            const double v = q_y_given_x.at(x, y);
            if (!(v >= 0.0) || v > 1.0) throw DataError("distribution: conditional out of range");
            rs += v;
        }
        if (std::fabs(rs - 1.0) > 1e-12)
            throw DataError("distribution: conditional row " + std::to_string(x) +
                            " sums to " + std::to_string(rs));
    }
}

void DiscreteDistribution::save(const std::string& path) const {
    nlohmann::json js;
    js["contexts"] = contexts;
    js["tokens"] = tokens;
    js["q_x"] = q_x;
    auto& rows = js["q_y_given_x"] = nlohmann::json::array();
    for (size_t x = 0; x < n_contexts(); ++x) {
        nlohmann::json row = nlohmann::json::array();
        for (size_t y = 0; y < n_tokens(); ++y) row.push_back(q_y_given_x.at(x, y));
        rows.push_back(std::move(row));
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << js.dump() << "\n";  // full precision; these files feed computation
}

DiscreteDistribution DiscreteDistribution::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open distribution " + path);
    nlohmann::json js;
    try {
        in >> js;
    } catch (const std::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    DiscreteDistribution d;
    d.contexts = js.at("contexts").get<std::vector<int64_t>>();
    d.tokens = js.at("tokens").get<std::vector<int64_t>>();
    d.q_x = js.at("q_x").get<std::vector<double>>();
    const auto& rows = js.at("q_y_given_x");
    d.q_y_given_x = Matrix(d.contexts.size(), d.tokens.size());
    if (rows.size() != d.contexts.size()) throw DataError(path + ": conditional row count");
    for (size_t x = 0; x < d.contexts.size(); ++x) {
        const auto row = rows[x].get<std::vector<double>>();
        if (row.size() != d.tokens.size()) throw DataError(path + ": conditional row length");
        for (size_t y = 0; y < row.size(); ++y) d.q_y_given_x.at(x, y) = row[y];
    }
    d.validate();
    return d;
}

namespace {

// Fix signs: paired (u_a, v_a) for a < min(nx,ny) flip together so the first
// nonvanishing component of u_a is positive; unpaired basis completions flip
// on their own first component.
void apply_sign_convention(Eigen::MatrixXd& u, Eigen::MatrixXd& v, size_t n_pairs) {
    constexpr double kTol = 1e-12;
    auto first_sign = [](const Eigen::VectorXd& col) {
        for (Eigen::Index i = 0; i < col.size(); ++i)
            if (std::fabs(col[i]) > kTol) return col[i] < 0.0 ? -1.0 : 1.0;
        return 1.0;
    };
    for (Eigen::Index a = 0; a < u.cols(); ++a) {
        const double s = first_sign(u.col(a));
        if (s < 0.0) {
            u.col(a) = -u.col(a);
            if (static_cast<size_t>(a) < n_pairs) v.col(a) = -v.col(a);
        }
    }
    for (Eigen::Index a = static_cast<Eigen::Index>(n_pairs); a < v.cols(); ++a) {
        if (first_sign(v.col(a)) < 0.0) v.col(a) = -v.col(a);
    }
}

} // namespace

ModeDecomposition mode_decompose(const DiscreteDistribution& d) {
    d.validate();
    const size_t nx = d.n_contexts(), ny = d.n_tokens();

    Eigen::MatrixXd mp(ny, nx);
    for (size_t x = 0; x < nx; ++x) {
        const double sq = std::sqrt(d.q_x[x]);
        for (size_t y = 0; y < ny; ++y) mp(y, x) = sq * d.q_y_given_x.at(x, y);
    }

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(mp, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd u = svd.matrixU();  // ny x ny
    Eigen::MatrixXd v = svd.matrixV();  // nx x nx
    const size_t n_pairs = std::min(nx, ny);
    apply_sign_convention(u, v, n_pairs);

    ModeDecomposition md;
    md.q_x = d.q_x;
    md.singular_values.assign(svd.singularValues().data(),
                              svd.singularValues().data() + n_pairs);
    md.u = Matrix(ny, ny);
    for (size_t i = 0; i < ny; ++i)
        for (size_t j = 0; j < ny; ++j) md.u.at(i, j) = u(i, j);
    md.vt = Matrix(nx, nx);
    for (size_t a = 0; a < nx; ++a)
        for (size_t x = 0; x < nx; ++x) md.vt.at(a, x) = v(x, a);
    return md;
}

void ModeDecomposition::save(const std::string& path) const {
    nlohmann::json js;
    js["singular_values"] = singular_values;
    auto dump_matrix = [](const Matrix& m) {
        nlohmann::json rows = nlohmann::json::array();
        for (size_t i = 0; i < m.rows; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (size_t j = 0; j < m.cols; ++j) row.push_back(m.at(i, j));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    js["left_vectors"] = dump_matrix(u);
    js["right_vectors"] = dump_matrix(vt);
    js["q_x"] = q_x;
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << js.dump() << "\n";  // full precision
}

ToyModes toy_oracle(double a) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("toy model needs a in (0,1)");
    const double b = 1.0 - a;
    ToyModes t;
    t.s1 = std::sqrt(2.0 * (1.0 - a * b) / 3.0);
    t.s2 = 1.0 / std::sqrt(3.0);
    const double nu = std::sqrt(a * a + b * b);
    t.u1[0] = a / nu;
    t.u1[1] = b / nu;
    t.u2[0] = b / nu;
    t.u2[1] = -a / nu;
    const double c = 1.0 - 2.0 * a * b;
    const double nv1 = std::sqrt(a * a + b * b + c * c);
    t.v1[0] = a / nv1;
    t.v1[1] = b / nv1;
    t.v1[2] = c / nv1;
    t.v2[0] = b / nu;
    t.v2[1] = -a / nu;
    t.v2[2] = 0.0;
    return t;
}

DiscreteDistribution toy_distribution(double a) {
    if (!(a > 0.0 && a < 1.0)) throw DomainError("toy model needs a in (0,1)");
    DiscreteDistribution d;
    d.contexts = {0, 1, 2};  // x_C, x_N, x_E
    d.tokens = {0, 1};       // y_C, y_N
    d.q_x = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    d.q_y_given_x = Matrix(3, 2);
    d.q_y_given_x.at(0, 0) = 1.0;
    d.q_y_given_x.at(0, 1) = 0.0;
    d.q_y_given_x.at(1, 0) = 0.0;
    d.q_y_given_x.at(1, 1) = 1.0;
    d.q_y_given_x.at(2, 0) = a;
    d.q_y_given_x.at(2, 1) = 1.0 - a;
    return d;
}

Matrix propensity(const ModeDecomposition& md, size_t x, size_t y) {
    const size_t nx = md.n_contexts(), ny = md.n_tokens();
    if (x >= nx || y >= ny) throw DomainError("propensity: index out of range");
    Matrix p(nx, ny);
    for (size_t a = 0; a < nx; ++a) {
        const double vh = md.vhat(a, x);
        for (size_t b = 0; b < ny; ++b) p.at(a, b) = vh * md.u.at(y, b);
    }
    return p;
}

double decompose_loss_deviation(const ModeDecomposition& md, const DiscreteDistribution& d,
                                const Matrix& loss_table, size_t x, size_t y) {
    const size_t nx = md.n_contexts(), ny = md.n_tokens();
    if (loss_table.rows != nx || loss_table.cols != ny)
        throw DomainError("loss table dimensions do not match the distribution");
    if (x >= nx || y >= ny) throw DomainError("pair index out of range");

    // Phi_ab = sum_x' sqrt(q(x')) vt(a,x') sum_y' l(x',y') u(y',b)
    Matrix lu(nx, ny);  // lu(x', b) = sum_y' l(x',y') u(y',b)
    for (size_t xp = 0; xp < nx; ++xp)
        for (size_t b = 0; b < ny; ++b) {
            double s = 0.0;
            for (size_t yp = 0; yp < ny; ++yp) s += loss_table.at(xp, yp) * md.u.at(yp, b);
            lu.at(xp, b) = s;
        }
    Matrix phi(nx, ny);
    for (size_t a = 0; a < nx; ++a)
        for (size_t b = 0; b < ny; ++b) {
            double s = 0.0;
            for (size_t xp = 0; xp < nx; ++xp)
                s += std::sqrt(d.q_x[xp]) * md.vt.at(a, xp) * lu.at(xp, b);
            phi.at(a, b) = s;
        }

    double rhs = 0.0;
    for (size_t a = 0; a < nx; ++a) {
        const double vh = md.vhat(a, x);
        for (size_t b = 0; b < ny; ++b) {
            double coeff = vh * md.u.at(y, b);
            if (a == b) coeff -= md.sval(a);
            rhs += coeff * phi.at(a, b);
        }
    }
    return rhs;
}

Matrix synthesize_chi_table(const ModeDecomposition& md, const DiscreteDistribution& d,
                            const std::vector<std::vector<double>>& chi_modes, size_t h) {
    const size_t nx = md.n_contexts(), ny = md.n_tokens();
    if (chi_modes.size() != nx * ny) throw DomainError("chi_modes must have nx*ny entries");

    std::vector<double> chi_bar(h, 0.0);
    for (size_t a = 0; a < std::min(nx, ny); ++a)
        for (size_t c = 0; c < h; ++c) chi_bar[c] += md.sval(a) * chi_modes[a * ny + a][c];

    Matrix table(nx * ny, h);
    for (size_t x = 0; x < nx; ++x) {
        for (size_t y = 0; y < ny; ++y) {
            std::vector<double> acc(h, 0.0);
            for (size_t a = 0; a < nx; ++a) {
                const double vh = md.vhat(a, x);
                for (size_t b = 0; b < ny; ++b) {
                    const double s_ab = vh * md.u.at(y, b);
                    const auto& cm = chi_modes[a * ny + b];
                    for (size_t c = 0; c < h; ++c) acc[c] += s_ab * cm[c];
                }
            }
            for (size_t c = 0; c < h; ++c) table.at(x * ny + y, c) = acc[c] - chi_bar[c];
        }
    }
    return table;
}

ModeSusceptibilities mode_susceptibilities(const ModeDecomposition& md,
                                           const DiscreteDistribution& d,
                                           const Matrix& chi_table) {
    const size_t nx = md.n_contexts(), ny = md.n_tokens();
    if (chi_table.rows != nx * ny) throw DomainError("chi table must have nx*ny rows");
    const size_t h = chi_table.cols;

    // Centering precondition: sum_xy q(x,y) chi_xy = 0.
    for (size_t c = 0; c < h; ++c) {
        double s = 0.0;
        for (size_t x = 0; x < nx; ++x)
            for (size_t y = 0; y < ny; ++y)
                s += d.q_x[x] * d.q_y_given_x.at(x, y) * chi_table.at(x * ny + y, c);
        if (std::fabs(s) > 1e-6)
            throw DataError("chi table is not centered under q (component " +
                            std::to_string(c) + ")");
    }

    // T_ab = sum_xy s_ab(xy) q(x) chi_xy  (measure q(x) dx, counting dy).
    // Exactly T_ab = chi_ab - c_ab * chi_bar with c_ab = <1, e_ab>.
    std::vector<double> cvec_x(nx, 0.0);  // sum_x q(x) vhat_a(x)
    for (size_t a = 0; a < nx; ++a) {
        double s = 0.0;
        for (size_t x = 0; x < nx; ++x) s += d.q_x[x] * md.vhat(a, x);
        cvec_x[a] = s;
    }
    std::vector<double> cvec_y(ny, 0.0);  // sum_y u_b(y)
    for (size_t b = 0; b < ny; ++b) {
        double s = 0.0;
        for (size_t y = 0; y < ny; ++y) s += md.u.at(y, b);
        cvec_y[b] = s;
    }

    ModeSusceptibilities out;
    out.nx = nx;
    out.ny = ny;
    out.chi.assign(nx * ny, std::vector<double>(h, 0.0));

    std::vector<std::vector<double>> T(nx * ny, std::vector<double>(h, 0.0));
    for (size_t a = 0; a < nx; ++a) {
        for (size_t b = 0; b < ny; ++b) {
            auto& t = T[a * ny + b];
            for (size_t x = 0; x < nx; ++x) {
                const double qa = d.q_x[x] * md.vhat(a, x);
                for (size_t y = 0; y < ny; ++y) {
                    const double w = qa * md.u.at(y, b);
                    const double* row = chi_table.row(x * ny + y);
                    for (size_t c = 0; c < h; ++c) t[c] += w * row[c];
                }
            }
        }
    }

    // The diagonal self-consistency system chi_bar = sum_a s_a chi_aa is
    // singular because sum_a s_a c_aa == 1 identically; pick the
    // minimum-norm solution, i.e. the gauge <chi, c> = 0, which gives
    // chi_bar = -<T, c> / ||c||^2 and chi_ab = T_ab + c_ab chi_bar.
    double c_norm2 = 0.0, s_dot_caa = 0.0;
    for (size_t a = 0; a < nx; ++a)
        for (size_t b = 0; b < ny; ++b) {
            const double cab = cvec_x[a] * cvec_y[b];
            c_norm2 += cab * cab;
            if (a == b) s_dot_caa += md.sval(a) * cab;
        }
    out.selfconsistency_residual = std::fabs(1.0 - s_dot_caa);
    out.gauge_norm = std::sqrt(c_norm2);

    out.chi_bar.assign(h, 0.0);
    for (size_t c = 0; c < h; ++c) {
        double tc = 0.0;
        for (size_t a = 0; a < nx; ++a)
            for (size_t b = 0; b < ny; ++b) tc += T[a * ny + b][c] * cvec_x[a] * cvec_y[b];
        out.chi_bar[c] = -tc / c_norm2;
    }
    for (size_t a = 0; a < nx; ++a)
        for (size_t b = 0; b < ny; ++b) {
            const double cab = cvec_x[a] * cvec_y[b];
            auto& dst = out.chi[a * ny + b];
            const auto& t = T[a * ny + b];
            for (size_t c = 0; c < h; ++c) dst[c] = t[c] + cab * out.chi_bar[c];
        }
    return out;
}

} // namespace spectro
