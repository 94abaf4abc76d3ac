// Benchmark comparing the OpenMP kernels against their serial reference
// implementations: brute-force k-NN, PPR push, and the susceptibility
// covariance.

#include <chrono>
#include <cstdio>
#include <omp.h>

#include "spectro/graph.hpp"
#include "spectro/lab.hpp"
#include "spectro/ppr.hpp"
#include "spectro/rng.hpp"

using namespace spectro;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix gaussian_cloud(size_t n, size_t d, uint64_t seed) {
    Rng rng(seed);
    Matrix m(n, d);
    for (auto& v : m.data) v = rng.next_normal();
    return m;
}

void bench_knn(size_t n, size_t d, size_t k) {
    auto pts = gaussian_cloud(n, d, 1);
    auto t0 = Clock::now();
    auto serial_nn = serial::knn(pts, k);
    const double t_serial = seconds_since(t0);
    t0 = Clock::now();
    auto par_nn = knn(pts, k);
    const double t_par = seconds_since(t0);
    bool same = true;
    for (size_t i = 0; i < n && same; ++i) same = serial_nn.neighbors[i] == par_nn.neighbors[i];
    std::printf("knn        n=%-6zu d=%-3zu k=%-3zu serial %7.3fs  openmp %7.3fs  speedup %5.2fx  %s\n",
                n, d, k, t_serial, t_par, t_serial / t_par, same ? "match" : "MISMATCH");
}

void bench_push(size_t n, size_t d, size_t k) {
    auto pts = gaussian_cloud(n, d, 2);
    auto g = knn_graph(pts, k);
    auto mask = NodeMask::all(g);
    auto t0 = Clock::now();
    auto qp = push_ppr(g, 0, 0.001, 1e-7, mask);
    const double t_serial = seconds_since(t0);
    t0 = Clock::now();
    auto sp = sync_push_ppr(g, 0, 0.001, 1e-7, mask);
    const double t_par = seconds_since(t0);
    std::printf("push_ppr   n=%-6zu                queue  %7.3fs  sync   %7.3fs  ratio   %5.2fx  "
                "(mass %.6f vs %.6f)\n",
                n, t_serial, t_par, t_serial / t_par, qp.mass(), sp.mass());
}

// Single-threaded covariance reference for the benchmark.
Matrix covariance_serial(const PosteriorDraws& draws) {
    const size_t n = draws.total_draws(), n_eval = draws.n_eval, h = draws.n_components;
    std::vector<double> big_l(n, 0.0);
    for (size_t t = 0; t < n; ++t)
        for (size_t j = 0; j < n_eval; ++j) big_l[t] += draws.eval_q[j] * draws.loss_at(t, j);
    Matrix chi(n_eval, h);
    for (size_t j = 0; j < n_eval; ++j)
        for (size_t c = 0; c < h; ++c) {
            double mp = 0.0, md = 0.0;
            for (size_t t = 0; t < n; ++t) {
                mp += draws.phi_at(t, c);
                md += draws.loss_at(t, j) - big_l[t];
            }
            mp /= n;
            md /= n;
            double cov = 0.0;
            for (size_t t = 0; t < n; ++t)
                cov += (draws.phi_at(t, c) - mp) * ((draws.loss_at(t, j) - big_l[t]) - md);
            chi.at(j, c) = -cov / static_cast<double>(n);
        }
    return chi;
}

void bench_covariance(size_t n_eval, size_t h, size_t draws_per_chain) {
    PosteriorDraws d;
    d.chains = 4;
    d.draws = draws_per_chain;
    d.n_components = h;
    d.n_eval = n_eval;
    d.eval_q.assign(n_eval, 1.0 / static_cast<double>(n_eval));
    Rng rng(3);
    d.phi.resize(d.total_draws() * h);
    d.losses.resize(d.total_draws() * n_eval);
    for (auto& v : d.phi) v = rng.next_normal();
    for (auto& v : d.losses) v = rng.next_normal();

    auto t0 = Clock::now();
    auto ref = covariance_serial(d);
    const double t_serial = seconds_since(t0);
    t0 = Clock::now();
    auto fast = per_token_susceptibility(d, d.eval_q);
    const double t_par = seconds_since(t0);
    double worst = 0.0;
    for (size_t i = 0; i < ref.data.size(); ++i)
        worst = std::max(worst, std::fabs(ref.data[i] - fast.values.data[i]));
    std::printf("covariance pairs=%-5zu H=%-4zu     serial %7.3fs  openmp %7.3fs  speedup %5.2fx  "
                "max dev %.2e\n",
                n_eval, h, t_serial, t_par, t_serial / t_par, worst);
}

} // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());
    bench_knn(2000, 32, 45);
    bench_knn(5000, 32, 45);
    bench_push(3000, 16, 20);
    bench_covariance(2000, 64, 250);
    return 0;
}
