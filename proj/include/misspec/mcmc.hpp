#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "misspec/rng.hpp"

namespace misspec {

// Unconstrained-space target. Returns the sampler's log-density; the
// optional out-parameter reports the value stored in the trace (the
// constrained-space log-posterior when a transform is in play, otherwise the
// same number).
using Target = std::function<double(const Eigen::VectorXd&, double*)>;

inline Target plain_target(const std::function<double(const Eigen::VectorXd&)>& f) {
    return [f](const Eigen::VectorXd& y, double* report) {
        double v = f(y);
        if (report) *report = v;
        return v;
    };
}

struct McmcSettings {
    long iters = 40000;
    int chains = 4;
    std::uint64_t seed = 1;
    double burnin_frac = 0.5;
    int thin = 10;
    double target_accept = 0.234;
    double gamma_exponent = 0.66;
    long stuck_limit = 10000;
    double init_jitter = 0.01;  // start-point spread in unconstrained space
    int max_threads = 0;        // 0 = hardware concurrency
    bool adapt = true;          // false = plain random walk at the initial scale
    Eigen::MatrixXd init_cov;   // starting proposal covariance; empty = identity
    long init_cov_weight = 0;   // pseudo-observations credited to init_cov

    void validate() const {
        if (iters < 10) throw std::invalid_argument("iters too small");
        if (chains < 1) throw std::invalid_argument("need at least one chain");
        if (!(burnin_frac >= 0 && burnin_frac < 1)) throw std::invalid_argument("burnin_frac in [0,1)");
        if (thin < 1) throw std::invalid_argument("thin must be >= 1");
        if (!(target_accept > 0 && target_accept < 1)) throw std::invalid_argument("bad target_accept");
        if (!(gamma_exponent > 0.5 && gamma_exponent <= 1)) throw std::invalid_argument("bad gamma_exponent");
        if (init_cov_weight < 0) throw std::invalid_argument("init_cov_weight must be >= 0");
    }
};

// One chain's post-burn-in, thinned output. Draws live in the sampler's
// (unconstrained) space; callers map them back through their layout.
struct ChainResult {
    Eigen::MatrixXd draws;       // stored draws, one per row
    std::vector<double> lp;      // reported log-posterior per stored draw
    double acceptance = 0.0;     // acceptance fraction over post-burn-in iterations
    double lambda = 0.0;         // adapted log proposal scale
    Eigen::MatrixXd prop_cov;    // adapted proposal covariance
    long iters = 0;
    long burnin = 0;
    int thin = 1;

    long map_index() const {
        if (lp.empty()) throw std::runtime_error("empty chain");
        return long(std::max_element(lp.begin(), lp.end()) - lp.begin());
    }
};

// Adaptive-scaling-within-adaptive-Metropolis random walk: the proposal is
// x + exp(lambda) L z with L the Cholesky factor of the running empirical
// covariance, lambda steered toward a 0.234 acceptance rate, both with
// diminishing weight gamma_n = (n+1)^(-gamma_exponent). Covariance adaptation
// engages once 2*dim samples have been seen (immediately when init_cov seeds
// the recursion); the factor refreshes every 25 iterations (stale factors are
// still valid proposals).
inline ChainResult run_chain(const Target& target, const Eigen::VectorXd& x0,
                             const McmcSettings& settings, int chain_index = 0) {
    settings.validate();
    const int d = int(x0.size());
    if (d < 1) throw std::invalid_argument("empty initial point");
    Rng rng = Rng::stream(settings.seed, std::uint64_t(chain_index));

    Eigen::VectorXd y = x0;
    double lp = -std::numeric_limits<double>::infinity();
    double lp_report = lp;
    for (int attempt = 0; attempt < 100; ++attempt) {
        lp = target(y, &lp_report);
        if (std::isfinite(lp)) break;
        for (int i = 0; i < d; ++i) y[i] = x0[i] + settings.init_jitter * rng.gauss();
    }
    if (!std::isfinite(lp))
        throw std::runtime_error("chain " + std::to_string(chain_index) +
                                 ": initial point has zero posterior density");
    if (settings.init_jitter > 0) {
        Eigen::VectorXd yj(d);
        for (int trial = 0; trial < 100; ++trial) {
            for (int i = 0; i < d; ++i) yj[i] = y[i] + settings.init_jitter * rng.gauss();
            double lpr = 0.0, lpj = target(yj, &lpr);
            if (std::isfinite(lpj)) {
                y = yj;
                lp = lpj;
                lp_report = lpr;
                break;
            }
        }
    }

    double lambda = std::log(2.38 / std::sqrt(double(d)));
    Eigen::VectorXd mu = y;
    Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd L = Eigen::MatrixXd::Identity(d, d);
    bool cov_active = false;
    if (settings.init_cov.size() > 0) {
        if (settings.init_cov.rows() != d || settings.init_cov.cols() != d)
            throw std::invalid_argument("init_cov must be " + std::to_string(d) + "x" +
                                        std::to_string(d));
        cov = settings.init_cov;
        Eigen::MatrixXd c = cov;
        c.diagonal().array() += 1e-12 * cov.diagonal().maxCoeff() + 1e-16;
        Eigen::LLT<Eigen::MatrixXd> llt(c);
        if (llt.info() != Eigen::Success)
            throw std::invalid_argument("init_cov is not positive definite");
        L = llt.matrixL();
        cov_active = true;
    }

    const long burnin = long(settings.iters * settings.burnin_frac);
    ChainResult out;
    out.iters = settings.iters;
    out.burnin = burnin;
    out.thin = settings.thin;
    const long n_store = (settings.iters - burnin + settings.thin - 1) / settings.thin;
    out.draws.resize(n_store, d);
    out.lp.reserve(n_store);

    Eigen::VectorXd z(d), yprop(d), delta(d);
    long accepted_post = 0, post_iters = 0, consecutive_rejects = 0, stored = 0;

    for (long n = 1; n <= settings.iters; ++n) {
        for (int i = 0; i < d; ++i) z[i] = rng.gauss();
        yprop = y + std::exp(lambda) * (L * z);
        double lpr_prop = 0.0;
        double lp_prop = target(yprop, &lpr_prop);
        double alpha =
            !std::isfinite(lp_prop) ? 0.0 : (lp_prop >= lp ? 1.0 : std::exp(lp_prop - lp));
        if (rng.uniform() < alpha) {
            y = yprop;
            lp = lp_prop;
            lp_report = lpr_prop;
            consecutive_rejects = 0;
            if (n > burnin) ++accepted_post;
        } else if (++consecutive_rejects >= settings.stuck_limit) {
            throw std::runtime_error(
                "chain " + std::to_string(chain_index) + " stuck: " +
                std::to_string(settings.stuck_limit) + " consecutive rejections at iteration " +
                std::to_string(n) + " (log scale " + std::to_string(lambda) + ", log posterior " +
                std::to_string(lp) + ")");
        }
        if (n > burnin) ++post_iters;

        if (settings.adapt) {
            // Index shift keeps gamma_1 < 1: a full-weight first update would
            // replace cov with delta*delta^T, which is exactly zero if the
            // first proposal was rejected, and a zero proposal covariance is
            // an absorbing state.
            double gamma = std::pow(double(n) + 1.0, -settings.gamma_exponent);
            lambda = std::clamp(lambda + gamma * (alpha - settings.target_accept), -30.0, 30.0);
            // The covariance recursion credits init_cov with pseudo-
            // observations so a seeded shape is reweighted, not replaced, by
            // the first few (highly variable) increments.
            double gamma_cov =
                std::pow(double(n + settings.init_cov_weight) + 1.0, -settings.gamma_exponent);
            delta = y - mu;
            mu += gamma_cov * delta;
            cov += gamma_cov * (delta * delta.transpose() - cov);
            if (n >= 2 * d && (!cov_active || n % 25 == 0)) {
                Eigen::MatrixXd c = cov;
                // Absolute floor keeps the factor escapably large even if the
                // recursion has decayed the covariance to numerical dust.
                c.diagonal().array() += 1e-12 * cov.diagonal().maxCoeff() + 1e-16;
                Eigen::LLT<Eigen::MatrixXd> llt(c);
                if (llt.info() == Eigen::Success) {
                    L = llt.matrixL();
                    cov_active = true;
                }
            }
        }

        if (n > burnin && (n - burnin - 1) % settings.thin == 0) {
            out.draws.row(stored++) = y;
            out.lp.push_back(lp_report);
        }
    }
    out.draws.conservativeResize(stored, d);
    out.acceptance = post_iters > 0 ? double(accepted_post) / double(post_iters) : 0.0;
    out.lambda = lambda;
    out.prop_cov = std::exp(2.0 * lambda) * cov;
    return out;
}

inline int thread_cap_from_env() {
    if (const char* env = std::getenv("MISSPEC_THREADS")) {
        int v = std::atoi(env);
        if (v >= 1) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

// Independent chains, optionally in parallel. Each chain gets its own target
// instance (solver workspaces are not shared) and its own generator stream,
// so results do not depend on the thread schedule.
inline std::vector<ChainResult> run_chains(const std::function<Target(int)>& make_target,
                                           const Eigen::VectorXd& x0, const McmcSettings& settings) {
    settings.validate();
    int cap = settings.max_threads > 0 ? settings.max_threads : thread_cap_from_env();
    cap = std::max(1, std::min(cap, settings.chains));

    std::vector<ChainResult> results(settings.chains);
    std::vector<std::exception_ptr> errors(settings.chains);

    if (cap == 1) {
        for (int c = 0; c < settings.chains; ++c) {
            Target t = make_target(c);
            results[c] = run_chain(t, x0, settings, c);
        }
        return results;
    }

    std::vector<std::thread> pool;
    for (int base = 0; base < settings.chains; base += cap) {
        int batch = std::min(cap, settings.chains - base);
        pool.clear();
        for (int j = 0; j < batch; ++j) {
            int c = base + j;
            pool.emplace_back([&, c]() {
                try {
                    Target t = make_target(c);
                    results[c] = run_chain(t, x0, settings, c);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return results;
}

}  // namespace misspec
