#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "spectro/matrix.hpp"

namespace spectro {

// A differentiable per-pair loss over a finite evaluation distribution.
// L(w) is always the exact eval-weighted mean, so centering identities hold
// to rounding rather than statistically.
class LossModel {
public:
    virtual ~LossModel() = default;
    virtual size_t dim() const = 0;
    virtual size_t eval_count() const = 0;
    virtual const std::vector<double>& eval_weights() const = 0;
    virtual double pair_loss(const std::vector<double>& w, size_t pair) const = 0;
    // Gradient of the mean loss over the given batch of pair indices.
    virtual void batch_loss_grad(const std::vector<double>& w,
                                 const std::vector<uint32_t>& batch,
                                 std::vector<double>& grad_out) const = 0;
    virtual const std::vector<std::vector<uint32_t>>& components() const = 0;

    double population_loss(const std::vector<double>& w) const;
    std::vector<double> all_pair_losses(const std::vector<double>& w) const;
};

// Exactly quadratic loss l_j(w) = 0.5 (w-w0)' A_j (w-w0) + c_j with
// symmetric A_j. Covariances under Gaussian draws have closed forms, which
// makes this the oracle model for the sampler tests.
class QuadraticModel : public LossModel {
public:
    QuadraticModel(std::vector<double> w0, std::vector<Matrix> quad_forms,
                   std::vector<double> offsets, std::vector<double> weights,
                   std::vector<std::vector<uint32_t>> comps);

    size_t dim() const override { return w0_.size(); }
    size_t eval_count() const override { return quad_forms_.size(); }
    const std::vector<double>& eval_weights() const override { return weights_; }
    double pair_loss(const std::vector<double>& w, size_t pair) const override;
    void batch_loss_grad(const std::vector<double>& w, const std::vector<uint32_t>& batch,
                         std::vector<double>& grad_out) const override;
    const std::vector<std::vector<uint32_t>>& components() const override { return comps_; }

    const std::vector<double>& center() const { return w0_; }
    const Matrix& quad_form(size_t j) const { return quad_forms_[j]; }

private:
    std::vector<double> w0_;
    std::vector<Matrix> quad_forms_;
    std::vector<double> offsets_;
    std::vector<double> weights_;
    std::vector<std::vector<uint32_t>> comps_;
};

// Two-block softmax sequence predictor: mean-pooled token embeddings into a
// linear output layer. Weights are [embedding rows | output rows] flattened;
// gradients are closed form. Small enough that the population loss is exact.
class SoftmaxSequenceModel : public LossModel {
public:
    struct EvalPair {
        std::vector<int32_t> context;
        int32_t target;
        double weight;
    };

    SoftmaxSequenceModel(size_t vocab, size_t embed_dim, std::vector<EvalPair> pairs,
                         std::vector<std::vector<uint32_t>> comps);

    size_t dim() const override { return 2 * vocab_ * embed_dim_; }
    size_t eval_count() const override { return pairs_.size(); }
    const std::vector<double>& eval_weights() const override { return weights_; }
    double pair_loss(const std::vector<double>& w, size_t pair) const override;
    void batch_loss_grad(const std::vector<double>& w, const std::vector<uint32_t>& batch,
                         std::vector<double>& grad_out) const override;
    const std::vector<std::vector<uint32_t>>& components() const override { return comps_; }

    size_t vocab() const { return vocab_; }
    size_t embed_dim() const { return embed_dim_; }
    const std::vector<EvalPair>& pairs() const { return pairs_; }

    // Index helpers into the flat weight vector.
    size_t embed_index(size_t token, size_t d) const { return token * embed_dim_ + d; }
    size_t output_index(size_t token, size_t d) const {
        return vocab_ * embed_dim_ + token * embed_dim_ + d;
    }

    std::vector<double> random_init(uint64_t seed, double scale = 0.1) const;
    // Full-batch Adam on the population loss; returns final loss.
    double train(std::vector<double>& w, size_t steps, double lr) const;
    // One component per output-layer token row plus one for the whole
    // embedding block.
    static std::vector<std::vector<uint32_t>> block_components(size_t vocab, size_t embed_dim);

private:
    void forward(const std::vector<double>& w, const EvalPair& p, std::vector<double>& probs) const;

    size_t vocab_;
    size_t embed_dim_;
    std::vector<EvalPair> pairs_;
    std::vector<double> weights_;
    std::vector<std::vector<uint32_t>> comps_;
};

// Hyperparameters of the localized-posterior sampler. Defaults are the
// published Pythia-14M row.
struct SamplerConfig {
    double gamma = 300.0;
    double n_beta = 3.0;
    double step_eps = 1e-5;
    size_t batch_size = 16;
    size_t chains = 4;
    size_t draws = 100;
    size_t steps_between_draws = 55;
    uint64_t rng_seed = 0;

    void validate() const;
};

struct PosteriorDraws {
    size_t chains = 0;
    size_t draws = 0;
    size_t n_components = 0;
    size_t n_eval = 0;
    // phi[(c*draws + d)*H + h], losses[(c*draws + d)*n_eval + j]
    std::vector<double> phi;
    std::vector<double> losses;
    std::vector<double> eval_q;

    size_t total_draws() const { return chains * draws; }
    double loss_at(size_t flat_draw, size_t pair) const {
        return losses[flat_draw * n_eval + pair];
    }
    double phi_at(size_t flat_draw, size_t comp) const {
        return phi[flat_draw * n_components + comp];
    }
};

// Preconditioned SGLD over the localized posterior
// exp{-n_beta * L_batch(w) - gamma/2 ||w - w*||^2}, RMSProp preconditioner
// (decay 0.99, floor 1e-8), step applied after preconditioning. Chains run
// independently from w*; every draw is preceded by steps_between_draws
// steps. Divergence (draw loss exceeding 1000x the initial scale) aborts.
PosteriorDraws sgld_sample(const LossModel& model, const std::vector<double>& w_star,
                           const SamplerConfig& cfg);

// Baseline: i.i.d. draws w ~ N(w*, lambda I) with the same record schema
// (the n_beta = 0 analogue).
PosteriorDraws gaussian_sample(const LossModel& model, const std::vector<double>& w_star,
                               double lambda, const SamplerConfig& cfg);

// Component-localized observable: population loss at the hybrid point where
// all weights outside the component are reset to w*, minus L(w*).
double observable_phi(const LossModel& model, const std::vector<double>& w_star,
                      const std::vector<double>& w_draw, size_t component);

// chi[pair][comp] = -Cov(phi_comp, l_pair - L) over all pooled draws,
// population covariance, L recomputed per draw as the eval_q-weighted mean.
SusceptibilityMatrix per_token_susceptibility(const PosteriorDraws& draws,
                                              const std::vector<double>& eval_q);

// Mean susceptibility row over a pattern's member pairs.
std::vector<double> per_pattern_susceptibility(const SusceptibilityMatrix& m,
                                               const std::vector<uint32_t>& members);

// q'-weighted mixture of susceptibility rows; q' must sum to 1.
std::vector<double> perturbation_susceptibility(const SusceptibilityMatrix& m,
                                                const std::vector<double>& q_prime);

// "DRWS" binary format round trip.
void save_draws(const std::string& path, const PosteriorDraws& d);
PosteriorDraws load_draws(const std::string& path);

} // namespace spectro
