#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "misspec/normal.hpp"
#include "misspec/piecewise_linear.hpp"
#include "misspec/rng.hpp"

namespace misspec {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// GP1: prior for the crowding function. Squared-exponential kernel with
// boundary factors pinning the variance to zero at u = 0 and u = 1, mean
// 1 - u (logistic on average), joint Gaussian restricted to the positive
// orthant. Interior nodes u_i = i/(m+1), i = 1..m.
struct Gp1Spec {
    double eta = 0.2;
    double rho = 0.5;
    int m = 10;

    void validate() const {
        if (!(eta > 0) || !(rho > 0) || m < 1)
            throw std::invalid_argument("gp1 spec requires eta > 0, rho > 0, m >= 1");
    }

    std::vector<double> interior_positions() const {
        std::vector<double> u(m);
        for (int i = 1; i <= m; ++i) u[i - 1] = double(i) / (m + 1);
        return u;
    }
};

// GP2: prior for the normalised diffusivity. Latent unit-variance
// squared-exponential process h(t) pushed through the normal CDF gives
// uniform marginals g(t_i); conditioning on h(t_max) = 0 pins
// Dhat(t_max) = 2 g(t_max) = 1. Free nodes are g_0..g_m.
struct Gp2Spec {
    double rho = 2.0;
    int m = 19;
    double t_max = 10.0;

    void validate() const {
        if (!(rho > 0) || m < 1 || !(t_max > 0))
            throw std::invalid_argument("gp2 spec requires rho > 0, m >= 1, t_max > 0");
    }

    std::vector<double> free_positions() const {
        std::vector<double> t(m + 1);
        for (int i = 0; i <= m; ++i) t[i] = t_max * double(i) / (m + 1);
        return t;
    }
};

inline double gp1_kernel(double ui, double uj, double eta, double rho) {
    double d = ui - uj;
    return 16.0 * eta * eta * std::exp(-d * d / (2.0 * rho * rho)) * ui * uj * (1.0 - ui) * (1.0 - uj);
}

// Covariance over the m interior nodes.
inline Eigen::MatrixXd gp1_covariance(const Gp1Spec& spec) {
    spec.validate();
    auto u = spec.interior_positions();
    Eigen::MatrixXd K(spec.m, spec.m);
    for (int i = 0; i < spec.m; ++i)
        for (int j = 0; j <= i; ++j) {
            double k = gp1_kernel(u[i], u[j], spec.eta, spec.rho);
            K(i, j) = k;
            K(j, i) = k;
        }
    return K;
}

inline Eigen::VectorXd gp1_mean(const Gp1Spec& spec) {
    auto u = spec.interior_positions();
    Eigen::VectorXd mu(spec.m);
    for (int i = 0; i < spec.m; ++i) mu[i] = 1.0 - u[i];
    return mu;
}

namespace detail {

// The boundary-pinned kernel is rank-deficient in the limit; a relative
// jitter keeps the factorisation stable.
inline constexpr double kJitterRel = 1e-10;

inline Eigen::LLT<Eigen::MatrixXd> chol_with_jitter(Eigen::MatrixXd cov) {
    double jitter = kJitterRel * cov.diagonal().maxCoeff();
    cov.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("covariance not positive definite after jitter");
    return llt;
}

inline double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                         const Eigen::LLT<Eigen::MatrixXd>& llt) {
    Eigen::VectorXd z = llt.matrixL().solve(x - mean);
    double logdet = 0.0;
    const auto& L = llt.matrixL();
    for (Eigen::Index i = 0; i < x.size(); ++i) logdet += 2.0 * std::log(L(i, i));
    return -0.5 * (z.squaredNorm() + logdet + double(x.size()) * kLog2Pi);
}

}  // namespace detail

// Crowding-function prior with cached factorisation.
class Gp1Prior {
public:
    explicit Gp1Prior(const Gp1Spec& spec)
        : spec_(spec), mean_(gp1_mean(spec)), cov_(gp1_covariance(spec)),
          llt_(detail::chol_with_jitter(cov_)) {}

    const Gp1Spec& spec() const { return spec_; }
    const Eigen::MatrixXd& covariance() const { return cov_; }
    const Eigen::VectorXd& mean() const { return mean_; }

    // Log-density of interior node values: the joint Gaussian restricted to
    // the positive orthant (the orthant normalising constant is
    // hyperparameter-only, so it is omitted).
    double log_density(const Eigen::VectorXd& f_interior) const {
        if (f_interior.size() != spec_.m)
            throw std::invalid_argument("gp1 log-density: expected " + std::to_string(spec_.m) + " interior values");
        for (Eigen::Index i = 0; i < f_interior.size(); ++i)
            if (!(f_interior[i] > 0.0)) return kNegInf;
        return detail::mvn_logpdf(f_interior, mean_, llt_);
    }

    // Rejection sample of the orthant-truncated Gaussian, returned as a
    // crowding function with the fixed boundaries attached.
    PiecewiseLinearFunction sample(Rng& rng, long max_attempts = 1000000) const {
        Eigen::VectorXd z(spec_.m), f(spec_.m);
        for (long attempt = 1; attempt <= max_attempts; ++attempt) {
            for (int i = 0; i < spec_.m; ++i) z[i] = rng.gauss();
            f = mean_ + llt_.matrixL() * z;
            if ((f.array() > 0.0).all()) {
                std::vector<double> interior(f.data(), f.data() + spec_.m);
                return CrowdingGrid(spec_.m).with_interior(interior);
            }
        }
        throw std::runtime_error("gp1 rejection sampling failed after " + std::to_string(max_attempts) +
                                 " attempts (acceptance < " + std::to_string(1.0 / double(max_attempts)) + ")");
    }

private:
    Gp1Spec spec_;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline double gp1_log_prior(const std::vector<double>& f_interior, const Gp1Spec& spec) {
    return Gp1Prior(spec).log_density(Eigen::Map<const Eigen::VectorXd>(f_interior.data(), f_interior.size()));
}

inline PiecewiseLinearFunction gp1_sample(const Gp1Spec& spec, std::uint64_t seed) {
    Rng rng(seed);
    return Gp1Prior(spec).sample(rng);
}

struct LatentConditional {
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;
};

// Latent squared-exponential covariance over a node set (unit marginals).
inline Eigen::MatrixXd gp2_latent_covariance(const std::vector<double>& t, double rho) {
    Eigen::MatrixXd S(t.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j <= i; ++j) {
            double d = t[i] - t[j];
            double v = std::exp(-d * d / (2.0 * rho * rho));
            S(i, j) = v;
            S(j, i) = v;
        }
    return S;
}

// Distribution of h at the free nodes t_0..t_m given h(t_max) = 0
// (g(t_max) = 0.5 maps to the latent value Phi^-1(0.5) = 0).
inline LatentConditional gp2_latent_conditional(const Gp2Spec& spec) {
    spec.validate();
    auto t = spec.free_positions();
    const int n = spec.m + 1;
    std::vector<double> all = t;
    all.push_back(spec.t_max);
    Eigen::MatrixXd S = gp2_latent_covariance(all, spec.rho);

    Eigen::MatrixXd Sff = S.topLeftCorner(n, n);
    Eigen::VectorXd SfB = S.topRightCorner(n, 1);
    double SBB = S(n, n);

    LatentConditional out;
    out.mean = SfB * (0.0 / SBB);  // observed latent value is 0
    out.cov = Sff - (SfB * SfB.transpose()) / SBB;
    return out;
}

// Copula prior for the normalised diffusivity with cached factorisation.
class Gp2Prior {
public:
    explicit Gp2Prior(const Gp2Spec& spec)
        : spec_(spec), cond_(gp2_latent_conditional(spec)),
          llt_(detail::chol_with_jitter(cond_.cov)) {}

    const Gp2Spec& spec() const { return spec_; }
    const LatentConditional& latent() const { return cond_; }

    // Log-density of the free copula values g_0..g_m under the conditioned
    // process: transform to latent space, Gaussian log-density, plus the
    // change-of-variables term.
    double log_density(const Eigen::VectorXd& g) const {
        const int n = spec_.m + 1;
        if (g.size() != n)
            throw std::invalid_argument("gp2 log-density: expected " + std::to_string(n) + " free values");
        Eigen::VectorXd h(n);
        double jac = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!(g[i] > 0.0 && g[i] < 1.0)) return kNegInf;
            h[i] = norm_quantile(g[i]);
            jac -= norm_logpdf(h[i]);
        }
        return detail::mvn_logpdf(h, cond_.mean, llt_) + jac;
    }

    // Sample Dhat = 2 g on [0, t_max] with the final node pinned to 1.
    PiecewiseLinearFunction sample(Rng& rng) const {
        std::vector<double> g = sample_g(rng);
        return DiffusivityGrid(spec_.m, spec_.t_max).with_free_values(g);
    }

    std::vector<double> sample_g(Rng& rng) const {
        const int n = spec_.m + 1;
        Eigen::VectorXd z(n);
        for (int i = 0; i < n; ++i) z[i] = rng.gauss();
        Eigen::VectorXd h = cond_.mean + llt_.matrixL() * z;
        std::vector<double> g(n);
        for (int i = 0; i < n; ++i) g[i] = norm_cdf(h[i]);
        return g;
    }

    // Unconditioned variant: exact Uniform(0,1) marginals at every node.
    std::vector<double> sample_g_unconditioned(Rng& rng) const {
        auto t = spec_.free_positions();
        Eigen::MatrixXd S = gp2_latent_covariance(t, spec_.rho);
        auto llt = detail::chol_with_jitter(S);
        Eigen::VectorXd z(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) z[i] = rng.gauss();
        Eigen::VectorXd h = llt.matrixL() * z;
        std::vector<double> g(t.size());
        for (std::size_t i = 0; i < t.size(); ++i) g[i] = norm_cdf(h[i]);
        return g;
    }

private:
    Gp2Spec spec_;
    LatentConditional cond_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
};

inline double gp2_log_prior(const std::vector<double>& g_free, const Gp2Spec& spec) {
    return Gp2Prior(spec).log_density(Eigen::Map<const Eigen::VectorXd>(g_free.data(), g_free.size()));
}

inline PiecewiseLinearFunction gp2_sample(const Gp2Spec& spec, std::uint64_t seed) {
    Rng rng(seed);
    return Gp2Prior(spec).sample(rng);
}

}  // namespace misspec
