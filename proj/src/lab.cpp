#include "spectro/lab.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "spectro/errors.hpp"
#include "spectro/rng.hpp"

namespace spectro {

double LossModel::population_loss(const std::vector<double>& w) const {
    const auto& q = eval_weights();
    double s = 0.0;
    for (size_t j = 0; j < eval_count(); ++j) s += q[j] * pair_loss(w, j);
    return s;
}

std::vector<double> LossModel::all_pair_losses(const std::vector<double>& w) const {
    std::vector<double> out(eval_count());
    for (size_t j = 0; j < eval_count(); ++j) out[j] = pair_loss(w, j);
    return out;
}

QuadraticModel::QuadraticModel(std::vector<double> w0, std::vector<Matrix> quad_forms,
                               std::vector<double> offsets, std::vector<double> weights,
                               std::vector<std::vector<uint32_t>> comps)
    : w0_(std::move(w0)),
      quad_forms_(std::move(quad_forms)),
      offsets_(std::move(offsets)),
      weights_(std::move(weights)),
      comps_(std::move(comps)) {
    const size_t d = w0_.size();
    for (const auto& a : quad_forms_)
        if (a.rows != d || a.cols != d) throw DomainError("quadratic form dimension mismatch");
    if (offsets_.size() != quad_forms_.size() || weights_.size() != quad_forms_.size())
        throw DomainError("quadratic model: inconsistent pair counts");
}

double QuadraticModel::pair_loss(const std::vector<double>& w, size_t pair) const {
    const size_t d = w0_.size();
    const Matrix& a = quad_forms_[pair];
    double s = 0.0;
    for (size_t i = 0; i < d; ++i) {
        const double zi = w[i] - w0_[i];
        double row = 0.0;
        for (size_t j = 0; j < d; ++j) row += a.at(i, j) * (w[j] - w0_[j]);
        s += zi * row;
    }
    return 0.5 * s + offsets_[pair];
}

void QuadraticModel::batch_loss_grad(const std::vector<double>& w,
                                     const std::vector<uint32_t>& batch,
                                     std::vector<double>& grad_out) const {
    const size_t d = w0_.size();
    grad_out.assign(d, 0.0);
    const double inv = 1.0 / static_cast<double>(batch.size());
    for (uint32_t pair : batch) {
        const Matrix& a = quad_forms_[pair];
        for (size_t i = 0; i < d; ++i) {
            double row = 0.0;
            for (size_t j = 0; j < d; ++j) row += a.at(i, j) * (w[j] - w0_[j]);
            grad_out[i] += inv * row;
        }
    }
}

SoftmaxSequenceModel::SoftmaxSequenceModel(size_t vocab, size_t embed_dim,
                                           std::vector<EvalPair> pairs,
                                           std::vector<std::vector<uint32_t>> comps)
    : vocab_(vocab), embed_dim_(embed_dim), pairs_(std::move(pairs)), comps_(std::move(comps)) {
    if (vocab_ == 0 || embed_dim_ == 0) throw DomainError("softmax model: empty dimensions");
    weights_.reserve(pairs_.size());
    double total = 0.0;
    for (const auto& p : pairs_) {
        if (p.context.empty()) throw DomainError("softmax model: empty context");
        for (int32_t t : p.context)
            if (t < 0 || static_cast<size_t>(t) >= vocab_)
                throw DomainError("softmax model: context token out of vocab");
        if (p.target < 0 || static_cast<size_t>(p.target) >= vocab_)
            throw DomainError("softmax model: target out of vocab");
        weights_.push_back(p.weight);
        total += p.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw DomainError("softmax model: eval weights must sum to 1");
}

void SoftmaxSequenceModel::forward(const std::vector<double>& w, const EvalPair& p,
                                   std::vector<double>& probs) const {
    std::vector<double> hidden(embed_dim_, 0.0);
    const double inv = 1.0 / static_cast<double>(p.context.size());
    for (int32_t t : p.context)
        for (size_t dd = 0; dd < embed_dim_; ++dd)
            hidden[dd] += inv * w[embed_index(static_cast<size_t>(t), dd)];

    probs.assign(vocab_, 0.0);
    double mx = -1e300;
    for (size_t y = 0; y < vocab_; ++y) {
        double logit = 0.0;
        for (size_t dd = 0; dd < embed_dim_; ++dd)
            logit += w[output_index(y, dd)] * hidden[dd];
        probs[y] = logit;
        mx = std::max(mx, logit);
    }
    double z = 0.0;
    for (size_t y = 0; y < vocab_; ++y) {
        probs[y] = std::exp(probs[y] - mx);
        z += probs[y];
    }
    for (size_t y = 0; y < vocab_; ++y) probs[y] /= z;
}

double SoftmaxSequenceModel::pair_loss(const std::vector<double>& w, size_t pair) const {
    std::vector<double> probs;
    forward(w, pairs_[pair], probs);
    return -std::log(std::max(probs[static_cast<size_t>(pairs_[pair].target)], 1e-300));
}

void SoftmaxSequenceModel::batch_loss_grad(const std::vector<double>& w,
                                           const std::vector<uint32_t>& batch,
                                           std::vector<double>& grad_out) const {
    grad_out.assign(dim(), 0.0);
    std::vector<double> probs, hidden(embed_dim_);
    const double inv_batch = 1.0 / static_cast<double>(batch.size());
    for (uint32_t pj : batch) {
        const EvalPair& p = pairs_[pj];
        forward(w, p, probs);
        std::fill(hidden.begin(), hidden.end(), 0.0);
        const double inv_ctx = 1.0 / static_cast<double>(p.context.size());
        for (int32_t t : p.context)
            for (size_t dd = 0; dd < embed_dim_; ++dd)
                hidden[dd] += inv_ctx * w[embed_index(static_cast<size_t>(t), dd)];
        // d l / d logit_y = p_y - [y == target]
        for (size_t y = 0; y < vocab_; ++y) {
            const double dl = probs[y] - (static_cast<int32_t>(y) == p.target ? 1.0 : 0.0);
            for (size_t dd = 0; dd < embed_dim_; ++dd)
                grad_out[output_index(y, dd)] += inv_batch * dl * hidden[dd];
        }
        // Backprop into the mean-pooled embeddings.
        for (size_t dd = 0; dd < embed_dim_; ++dd) {
            double dh = 0.0;
            for (size_t y = 0; y < vocab_; ++y) {
                const double dl = probs[y] - (static_cast<int32_t>(y) == p.target ? 1.0 : 0.0);
                dh += dl * w[output_index(y, dd)];
            }
            dh *= inv_batch * inv_ctx;
            for (int32_t t : p.context) grad_out[embed_index(static_cast<size_t>(t), dd)] += dh;
        }
    }
}

std::vector<double> SoftmaxSequenceModel::random_init(uint64_t seed, double scale) const {
    Rng rng(seed, 0x1ab);
    std::vector<double> w(dim());
    for (auto& v : w) v = scale * rng.next_normal();
    return w;
}

double SoftmaxSequenceModel::train(std::vector<double>& w, size_t steps, double lr) const {
    std::vector<uint32_t> all(eval_count());
    for (size_t j = 0; j < all.size(); ++j) all[j] = static_cast<uint32_t>(j);
    // Full-batch gradient of the q-weighted population loss via weighted
    // accumulation (batch_loss_grad averages uniformly, so do it directly).
    std::vector<double> g(dim()), m(dim(), 0.0), v(dim(), 0.0);
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    double loss = 0.0;
    for (size_t step = 1; step <= steps; ++step) {
        g.assign(dim(), 0.0);
        std::vector<double> gj;
        for (size_t j = 0; j < eval_count(); ++j) {
            batch_loss_grad(w, {static_cast<uint32_t>(j)}, gj);
            for (size_t i = 0; i < dim(); ++i) g[i] += weights_[j] * gj[i];
        }
        for (size_t i = 0; i < dim(); ++i) {
            m[i] = b1 * m[i] + (1 - b1) * g[i];
            v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(b1, static_cast<double>(step)));
            const double vh = v[i] / (1 - std::pow(b2, static_cast<double>(step)));
            w[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
    loss = population_loss(w);
    return loss;
}

std::vector<std::vector<uint32_t>> SoftmaxSequenceModel::block_components(size_t vocab,
                                                                          size_t embed_dim) {
    std::vector<std::vector<uint32_t>> comps;
    std::vector<uint32_t> embed_block;
    embed_block.reserve(vocab * embed_dim);
    for (size_t i = 0; i < vocab * embed_dim; ++i) embed_block.push_back(static_cast<uint32_t>(i));
    comps.push_back(std::move(embed_block));
    for (size_t y = 0; y < vocab; ++y) {
        std::vector<uint32_t> row;
        row.reserve(embed_dim);
        for (size_t dd = 0; dd < embed_dim; ++dd)
            row.push_back(static_cast<uint32_t>(vocab * embed_dim + y * embed_dim + dd));
        comps.push_back(std::move(row));
    }
    return comps;
}

void SamplerConfig::validate() const {
    if (!(gamma > 0.0)) throw DomainError("gamma must be positive");
    if (n_beta < 0.0) throw DomainError("n_beta must be nonnegative");
    if (!(step_eps > 0.0)) throw DomainError("step_eps must be positive");
    if (batch_size == 0) throw DomainError("batch_size must be positive");
    if (chains == 0) throw DomainError("chains must be positive");
    if (draws == 0) throw DomainError("draws must be positive");
    if (steps_between_draws == 0) throw DomainError("steps_between_draws must be at least 1");
}

double observable_phi(const LossModel& model, const std::vector<double>& w_star,
                      const std::vector<double>& w_draw, size_t component) {
    const auto& comps = model.components();
    if (component >= comps.size()) throw DomainError("observable_phi: component out of range");
    std::vector<double> hybrid = w_star;
    for (uint32_t idx : comps[component]) hybrid[idx] = w_draw[idx];
    return model.population_loss(hybrid) - model.population_loss(w_star);
}

namespace {

// Weighted index sampling from the cumulative eval distribution.
struct WeightedSampler {
    std::vector<double> cdf;
    explicit WeightedSampler(const std::vector<double>& q) {
        cdf.resize(q.size());
        double acc = 0.0;
        for (size_t i = 0; i < q.size(); ++i) {
            acc += q[i];
            cdf[i] = acc;
        }
        cdf.back() = 1.0;
    }
    uint32_t draw(Rng& rng) const {
        const double u = rng.next_double();
        return static_cast<uint32_t>(std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    }
};

void record_draw(const LossModel& model, const std::vector<double>& w_star,
                 const std::vector<double>& w, PosteriorDraws& out, size_t flat_draw) {
    const size_t h = model.components().size();
    for (size_t c = 0; c < h; ++c)
        out.phi[flat_draw * h + c] = observable_phi(model, w_star, w, c);
    for (size_t j = 0; j < model.eval_count(); ++j)
        out.losses[flat_draw * model.eval_count() + j] = model.pair_loss(w, j);
}

} // namespace

PosteriorDraws sgld_sample(const LossModel& model, const std::vector<double>& w_star,
                           const SamplerConfig& cfg) {
    cfg.validate();
    if (w_star.size() != model.dim()) throw DomainError("sgld: w_star dimension mismatch");

    PosteriorDraws out;
    out.chains = cfg.chains;
    out.draws = cfg.draws;
    out.n_components = model.components().size();
    out.n_eval = model.eval_count();
    out.eval_q = model.eval_weights();
    out.phi.assign(out.total_draws() * out.n_components, 0.0);
    out.losses.assign(out.total_draws() * out.n_eval, 0.0);

    const double loss0 = model.population_loss(w_star);
    const double divergence_bar = 1000.0 * (std::fabs(loss0) + 1.0);
    const WeightedSampler sampler(model.eval_weights());
    const size_t d = model.dim();

    std::string failure;
#pragma omp parallel for schedule(dynamic, 1)
    for (size_t chain = 0; chain < cfg.chains; ++chain) {
        Rng rng(cfg.rng_seed, 0x5010 + chain);
        std::vector<double> w = w_star;
        // Accumulator initialized at one (TensorFlow RMSProp convention):
        // starting it at zero makes the preconditioner 1/floor on the first
        // step, which launches the chain when w* is an exact optimum.
        std::vector<double> vacc(d, 1.0), grad(d), batch_grad;
        std::vector<uint32_t> batch(cfg.batch_size);
        const double decay = 0.99, floor = 1e-8;

        for (size_t draw = 0; draw < cfg.draws; ++draw) {
            for (size_t step = 0; step < cfg.steps_between_draws; ++step) {
                for (auto& b : batch) b = sampler.draw(rng);
                model.batch_loss_grad(w, batch, grad);
                for (size_t i = 0; i < d; ++i)
                    vacc[i] = decay * vacc[i] + (1.0 - decay) * grad[i] * grad[i];
                for (size_t i = 0; i < d; ++i) {
                    const double g = 1.0 / (std::sqrt(vacc[i]) + floor);
                    const double drift =
                        cfg.n_beta * grad[i] + cfg.gamma * (w[i] - w_star[i]);
                    w[i] += -0.5 * cfg.step_eps * g * drift +
                            std::sqrt(cfg.step_eps * g) * rng.next_normal();
                }
            }
            const size_t flat = chain * cfg.draws + draw;
            record_draw(model, w_star, w, out, flat);
            double ld = 0.0;
            for (size_t j = 0; j < out.n_eval; ++j)
                ld += out.eval_q[j] * out.losses[flat * out.n_eval + j];
            if (!(std::fabs(ld - loss0) < divergence_bar)) {
#pragma omp critical
                failure = "sgld diverged in chain " + std::to_string(chain) + " at draw " +
                          std::to_string(draw) + " (loss " + std::to_string(ld) + ")";
                break;
            }
        }
    }
    if (!failure.empty()) throw DivergenceError(failure);
    return out;
}

PosteriorDraws gaussian_sample(const LossModel& model, const std::vector<double>& w_star,
                               double lambda, const SamplerConfig& cfg) {
    cfg.validate();
    if (!(lambda > 0.0)) throw DomainError("gaussian_sample: lambda must be positive");
    if (w_star.size() != model.dim()) throw DomainError("gaussian: w_star dimension mismatch");

    PosteriorDraws out;
    out.chains = cfg.chains;
    out.draws = cfg.draws;
    out.n_components = model.components().size();
    out.n_eval = model.eval_count();
    out.eval_q = model.eval_weights();
    out.phi.assign(out.total_draws() * out.n_components, 0.0);
    out.losses.assign(out.total_draws() * out.n_eval, 0.0);

    const double sd = std::sqrt(lambda);
    const size_t d = model.dim();
#pragma omp parallel for schedule(dynamic, 1)
    for (size_t chain = 0; chain < cfg.chains; ++chain) {
        Rng rng(cfg.rng_seed, 0x6a55 + chain);
        std::vector<double> w(d);
        for (size_t draw = 0; draw < cfg.draws; ++draw) {
            for (size_t i = 0; i < d; ++i) w[i] = w_star[i] + sd * rng.next_normal();
            record_draw(model, w_star, w, out, chain * cfg.draws + draw);
        }
    }
    return out;
}

namespace {

// Order-independent sum: chain partials are combined in sorted order so the
// pooled estimate is bit-identical under any permutation of the chains.
double sorted_sum(std::vector<double>& xs) {
    std::sort(xs.begin(), xs.end());
    double s = 0.0;
    for (double x : xs) s += x;
    return s;
}

} // namespace

SusceptibilityMatrix per_token_susceptibility(const PosteriorDraws& draws,
                                              const std::vector<double>& eval_q) {
    const size_t n_draws = draws.total_draws();
    if (n_draws < 2) throw DomainError("susceptibility needs at least 2 draws");
    if (eval_q.size() != draws.n_eval) throw DomainError("eval_q size mismatch");
    const size_t n_eval = draws.n_eval;
    const size_t h = draws.n_components;
    const size_t nc = draws.chains;
    const size_t per_chain = draws.draws;

    // Per-draw population loss, then centered deviations.
    std::vector<double> big_l(n_draws, 0.0);
    for (size_t t = 0; t < n_draws; ++t) {
        double s = 0.0;
        for (size_t j = 0; j < n_eval; ++j) s += eval_q[j] * draws.loss_at(t, j);
        big_l[t] = s;
    }

    // Means pooled over chains with chain-symmetric reduction.
    std::vector<double> phi_mean(h, 0.0);
    {
        std::vector<double> part(nc);
        for (size_t c = 0; c < h; ++c) {
            for (size_t ch = 0; ch < nc; ++ch) {
                double s = 0.0;
                for (size_t dd = 0; dd < per_chain; ++dd) s += draws.phi_at(ch * per_chain + dd, c);
                part[ch] = s;
            }
            phi_mean[c] = sorted_sum(part) / static_cast<double>(n_draws);
        }
    }
    std::vector<double> dev_mean(n_eval, 0.0);
    {
        std::vector<double> part(nc);
        for (size_t j = 0; j < n_eval; ++j) {
            for (size_t ch = 0; ch < nc; ++ch) {
                double s = 0.0;
                for (size_t dd = 0; dd < per_chain; ++dd) {
                    const size_t t = ch * per_chain + dd;
                    s += draws.loss_at(t, j) - big_l[t];
                }
                part[ch] = s;
            }
            dev_mean[j] = sorted_sum(part) / static_cast<double>(n_draws);
        }
    }

    SusceptibilityMatrix out;
    out.values = Matrix(n_eval, h);
#pragma omp parallel for schedule(static)
    for (size_t j = 0; j < n_eval; ++j) {
        std::vector<double> part(nc);
        for (size_t c = 0; c < h; ++c) {
            for (size_t ch = 0; ch < nc; ++ch) {
                double s = 0.0;
                for (size_t dd = 0; dd < per_chain; ++dd) {
                    const size_t t = ch * per_chain + dd;
                    const double dphi = draws.phi_at(t, c) - phi_mean[c];
                    const double ddev = (draws.loss_at(t, j) - big_l[t]) - dev_mean[j];
                    s += dphi * ddev;
                }
                part[ch] = s;
            }
            const double cov = sorted_sum(part) / static_cast<double>(n_draws);
            out.values.at(j, c) = -cov;  // population covariance
        }
    }
    out.row_ids.reserve(n_eval);
    for (size_t j = 0; j < n_eval; ++j) out.row_ids.push_back("pair" + std::to_string(j));
    out.component_ids.reserve(h);
    for (size_t c = 0; c < h; ++c) out.component_ids.push_back("C" + std::to_string(c));
    return out;
}

std::vector<double> per_pattern_susceptibility(const SusceptibilityMatrix& m,
                                               const std::vector<uint32_t>& members) {
    if (members.empty()) throw DomainError("per-pattern susceptibility of an empty set");
    std::vector<double> out(m.h(), 0.0);
    for (uint32_t j : members) {
        if (j >= m.n()) throw DomainError("pattern member out of range");
        for (size_t c = 0; c < m.h(); ++c) out[c] += m.values.at(j, c);
    }
    for (auto& v : out) v /= static_cast<double>(members.size());
    return out;
}

std::vector<double> perturbation_susceptibility(const SusceptibilityMatrix& m,
                                                const std::vector<double>& q_prime) {
    if (q_prime.size() != m.n()) throw DomainError("q' size mismatch");
    double sum = 0.0;
    for (double q : q_prime) {
        if (q < 0.0) throw DomainError("q' must be nonnegative");
        sum += q;
    }
    if (std::fabs(sum - 1.0) > 1e-9) throw DomainError("q' must sum to 1");
    std::vector<double> out(m.h(), 0.0);
    for (size_t j = 0; j < m.n(); ++j)
        for (size_t c = 0; c < m.h(); ++c) out[c] += q_prime[j] * m.values.at(j, c);
    return out;
}

void save_draws(const std::string& path, const PosteriorDraws& d) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path);
    out.write("DRWS", 4);
    auto w32 = [&](uint32_t v) {
        unsigned char b[4];
        for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
        out.write(reinterpret_cast<char*>(b), 4);
    };
    w32(1);  // version
    w32(static_cast<uint32_t>(d.chains));
    w32(static_cast<uint32_t>(d.draws));
    w32(static_cast<uint32_t>(d.n_components));
    w32(static_cast<uint32_t>(d.n_eval));
    auto write_f32 = [&](const std::vector<double>& xs) {
        for (double x : xs) {
            float f = static_cast<float>(x);
            uint32_t bits;
            std::memcpy(&bits, &f, 4);
            w32(bits);
        }
    };
    write_f32(d.phi);
    write_f32(d.losses);
}

PosteriorDraws load_draws(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open draws file " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "DRWS", 4) != 0) throw FormatError(path + ": bad magic");
    auto r32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
    };
    const uint32_t version = r32();
    if (version != 1) throw FormatError(path + ": unsupported version");
    PosteriorDraws d;
    d.chains = r32();
    d.draws = r32();
    d.n_components = r32();
    d.n_eval = r32();
    if (!in) throw TruncationError(path + ": header ends early");
    auto read_f32 = [&](std::vector<double>& xs, size_t count) {
        xs.resize(count);
        for (size_t i = 0; i < count; ++i) {
            const uint32_t bits = r32();
            if (!in) throw TruncationError(path + ": payload ends early");
            float f;
            std::memcpy(&f, &bits, 4);
            if (!std::isfinite(f)) throw DataError(path + ": non-finite draw value");
            xs[i] = f;
        }
    };
    read_f32(d.phi, d.total_draws() * d.n_components);
    read_f32(d.losses, d.total_draws() * d.n_eval);
    d.eval_q.assign(d.n_eval, 1.0 / static_cast<double>(d.n_eval));
    return d;
}

} // namespace spectro
