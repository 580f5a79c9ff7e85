#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "misspec/gp_priors.hpp"
#include "misspec/normal.hpp"
#include "misspec/rng.hpp"

using namespace misspec;

TEST(Normal, QuantileCdfRoundTrip) {
    for (int i = 0; i <= 2000; ++i) {
        double lg = -8.0 + 16.0 * i / 2000.0;
        double p = std::min(std::pow(10.0, lg), 1.0 - 1e-8);
        double r = norm_cdf(norm_quantile(p));
        EXPECT_LE(std::abs(r - p) / std::min(p, 1.0 - p), 1e-12) << "p = " << p;
    }
    EXPECT_EQ(norm_quantile(0.5), 0.0);
}

TEST(Gp1, KernelAtCentreIsEtaSquared) {
    EXPECT_DOUBLE_EQ(gp1_kernel(0.5, 0.5, 0.2, 0.5), 0.04);
    EXPECT_DOUBLE_EQ(gp1_kernel(0.5, 0.5, 0.7, 2.0), 0.49);
    // matches the diagonal of the covariance when a node sits at 0.5 (m odd)
    Gp1Spec spec{0.2, 0.5, 9};
    Eigen::MatrixXd K = gp1_covariance(spec);
    EXPECT_DOUBLE_EQ(K(4, 4), 0.04);
}

TEST(Gp1, KernelVanishesAtBoundaries) {
    for (double u : {0.1, 0.5, 0.77}) {
        EXPECT_EQ(gp1_kernel(0.0, u, 0.2, 0.5), 0.0);
        EXPECT_EQ(gp1_kernel(1.0, u, 0.2, 0.5), 0.0);
        EXPECT_EQ(gp1_kernel(u, 0.0, 0.2, 0.5), 0.0);
        EXPECT_EQ(gp1_kernel(u, 1.0, 0.2, 0.5), 0.0);
    }
}

// Entry value frozen from direct formula evaluation in an independent script.
TEST(Gp1, CovarianceEntryOracle) {
    Gp1Spec spec{0.2, 0.5, 10};
    Eigen::MatrixXd K = gp1_covariance(spec);
    EXPECT_NEAR(K(0, 1), 0.0077393291477704769, 1e-15);
    EXPECT_NEAR(K(1, 0), 0.0077393291477704769, 1e-15);
}

TEST(Gp1, CovarianceSymmetricNearlyPsd) {
    Gp1Spec spec{0.2, 0.5, 10};
    Eigen::MatrixXd K = gp1_covariance(spec);
    EXPECT_EQ(K, K.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10 * spec.eta * spec.eta);
}

TEST(Gp1, LogPriorSupportAndShape) {
    Gp1Spec spec{0.2, 0.5, 10};
    std::vector<double> f(10, 0.5);
    f[3] = -0.01;
    EXPECT_EQ(gp1_log_prior(f, spec), kNegInf);
    f[3] = 0.0;
    EXPECT_EQ(gp1_log_prior(f, spec), kNegInf);
    EXPECT_THROW(gp1_log_prior(std::vector<double>(9, 0.5), spec), std::invalid_argument);
}

TEST(Gp1, LogPriorMaximisedAtMean) {
    Gp1Spec spec{0.2, 0.5, 10};
    auto u = spec.interior_positions();
    std::vector<double> mean(10);
    for (int i = 0; i < 10; ++i) mean[i] = 1.0 - u[i];
    double lp_mean = gp1_log_prior(mean, spec);

    Rng rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> f(10);
        for (auto& v : f) v = rng.uniform() * 1.5 + 1e-3;
        EXPECT_LE(gp1_log_prior(f, spec), lp_mean);
    }
    // strictly decreasing along each coordinate away from the mean
    for (int i = 0; i < 10; ++i) {
        double prev = lp_mean;
        for (double step : {0.05, 0.10, 0.20}) {
            auto f = mean;
            f[i] += step;
            double lp = gp1_log_prior(f, spec);
            EXPECT_LT(lp, prev);
            prev = lp;
        }
    }
}

// Two-node case frozen from a brute-force bivariate Gaussian density oracle.
TEST(Gp1, LogPriorTwoNodeOracle) {
    Gp1Spec spec{0.2, 0.5, 2};
    EXPECT_NEAR(gp1_log_prior({0.8, 0.2}, spec), -0.693875527818896, 1e-6);
}

TEST(Gp1, SamplesPositiveAndDegenerateLimit) {
    Gp1Spec spec{0.2, 0.5, 10};
    for (std::uint64_t s = 1; s <= 50; ++s) {
        auto plf = gp1_sample(spec, s);
        for (std::size_t i = 1; i + 1 < plf.size(); ++i) EXPECT_GT(plf.values()[i], 0.0);
        EXPECT_EQ(plf.values().front(), 1.0);
        EXPECT_EQ(plf.values().back(), 0.0);
    }

    Gp1Spec tiny{1e-8, 0.5, 10};
    auto plf = gp1_sample(tiny, 4);
    auto u = tiny.interior_positions();
    for (int i = 0; i < tiny.m; ++i) EXPECT_NEAR(plf.values()[std::size_t(i) + 1], 1.0 - u[i], 1e-6);
}

// Library sampler against an independent in-test rejection sampler built on
// the same covariance but its own Gaussian pipeline.
TEST(Gp1, SampleMeanMatchesIndependentRejectionSampler) {
    Gp1Spec spec{0.2, 0.5, 10};
    Gp1Prior prior(spec);
    const int n = 10000;

    Eigen::VectorXd lib_mean = Eigen::VectorXd::Zero(spec.m);
    Eigen::VectorXd lib_sq = Eigen::VectorXd::Zero(spec.m);
    Rng rng(2024);
    for (int s = 0; s < n; ++s) {
        auto plf = prior.sample(rng);
        for (int i = 0; i < spec.m; ++i) {
            double v = plf.values()[std::size_t(i) + 1];
            lib_mean[i] += v;
            lib_sq[i] += v * v;
        }
    }
    lib_mean /= n;

    Eigen::MatrixXd cov = gp1_covariance(spec);
    cov.diagonal().array() += 1e-10 * cov.diagonal().maxCoeff();
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    ASSERT_EQ(llt.info(), Eigen::Success);
    Eigen::VectorXd mu = gp1_mean(spec);
    Eigen::VectorXd ref_mean = Eigen::VectorXd::Zero(spec.m);
    Rng rng2(999);
    int kept = 0;
    Eigen::VectorXd z(spec.m);
    while (kept < n) {
        for (int i = 0; i < spec.m; ++i) z[i] = rng2.gauss();
        Eigen::VectorXd f = mu + llt.matrixL() * z;
        if ((f.array() > 0.0).all()) {
            ref_mean += f;
            ++kept;
        }
    }
    ref_mean /= n;

    for (int i = 0; i < spec.m; ++i) {
        double var = lib_sq[i] / n - lib_mean[i] * lib_mean[i];
        double se = std::sqrt(2.0 * var / n);  // two independent estimates
        EXPECT_NEAR(lib_mean[i], ref_mean[i], 3.0 * se) << "node " << i;
    }
}

TEST(Gp2, LatentConditionalSingleNodeOracle) {
    Gp2Spec spec{2.0, 1, 10.0};
    auto cond = gp2_latent_conditional(spec);
    ASSERT_EQ(cond.mean.size(), 2);
    EXPECT_EQ(cond.mean[0], 0.0);
    EXPECT_EQ(cond.mean[1], 0.0);
    EXPECT_NEAR(cond.cov(1, 1), 0.998069545863772, 1e-12);
    EXPECT_NEAR(cond.cov(0, 1), 0.04393677, 1e-7);
}

// Conditioning on one coordinate of a unit-variance process has the closed
// form C_ij = k(t_i,t_j) - k(t_i,T) k(t_j,T).
TEST(Gp2, LatentConditionalMatchesClosedForm) {
    Gp2Spec spec{2.0, 19, 10.0};
    auto cond = gp2_latent_conditional(spec);
    auto t = spec.free_positions();
    auto k = [&](double a, double b) {
        return std::exp(-(a - b) * (a - b) / (2.0 * spec.rho * spec.rho));
    };
    for (int i = 0; i <= spec.m; ++i)
        for (int j = 0; j <= spec.m; ++j)
            EXPECT_NEAR(cond.cov(i, j), k(t[i], t[j]) - k(t[i], 10.0) * k(t[j], 10.0), 1e-12);
}

TEST(Gp2, IndependenceLimit) {
    Gp2Spec spec{1e-3, 5, 10.0};
    auto cond = gp2_latent_conditional(spec);
    EXPECT_LT(cond.mean.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((cond.cov - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-12);

    // density constant over (0,1)^n in the independent limit
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> g(6);
        for (auto& v : g) v = 0.02 + 0.96 * rng.uniform();
        EXPECT_NEAR(gp2_log_prior(g, spec), 0.0, 1e-6);
    }
}

TEST(Gp2, LogPriorSupport) {
    Gp2Spec spec{2.0, 19, 10.0};
    std::vector<double> g(20, 0.5);
    g[2] = 1.2;
    EXPECT_EQ(gp2_log_prior(g, spec), kNegInf);
    g[2] = 0.0;
    EXPECT_EQ(gp2_log_prior(g, spec), kNegInf);
    g[2] = 1.0;
    EXPECT_EQ(gp2_log_prior(g, spec), kNegInf);
    EXPECT_THROW(gp2_log_prior(std::vector<double>(19, 0.5), spec), std::invalid_argument);
}

// Frozen from a brute-force density oracle on the 3-free-node case.
TEST(Gp2, LogPriorTwoNodeOracle) {
    Gp2Spec spec{2.0, 2, 10.0};
    EXPECT_NEAR(gp2_log_prior({0.3, 0.6, 0.55}, spec), 0.061212505889397, 1e-6);
}

TEST(Gp2, SampleEndpointAndRange) {
    Gp2Spec spec{2.0, 19, 10.0};
    for (std::uint64_t s = 1; s <= 50; ++s) {
        auto plf = gp2_sample(spec, s);
        EXPECT_EQ(plf.values().back(), 1.0);
        EXPECT_EQ(plf(10.0), 1.0);
        for (double v : plf.values()) {
            EXPECT_GT(v, 0.0);
            EXPECT_LT(v, 2.0);
        }
    }
}

TEST(Gp2, UnconditionedMarginalsUniformKs) {
    Gp2Spec spec{2.0, 19, 10.0};
    Gp2Prior prior(spec);
    const int n = 10000;
    std::vector<double> samples(n);
    Rng rng(31);
    for (int s = 0; s < n; ++s) samples[s] = prior.sample_g_unconditioned(rng)[7];
    std::sort(samples.begin(), samples.end());
    double dmax = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = samples[i];
        dmax = std::max(dmax, std::abs(double(i + 1) / n - u));
        dmax = std::max(dmax, std::abs(u - double(i) / n));
    }
    // Kolmogorov-Smirnov critical value at level 0.01
    EXPECT_LT(dmax, 1.628 / std::sqrt(double(n)));
}

TEST(Gp2, ConditionedSampleCovarianceMatchesAnalytic) {
    Gp2Spec spec{2.0, 3, 10.0};
    Gp2Prior prior(spec);
    const int n = 10000;
    const int d = spec.m + 1;

    Eigen::MatrixXd h(n, d);
    Rng rng(77);
    for (int s = 0; s < n; ++s) {
        auto g = prior.sample_g(rng);
        for (int i = 0; i < d; ++i) h(s, i) = norm_quantile(g[i]);
    }
    Eigen::RowVectorXd mean = h.colwise().mean();
    Eigen::MatrixXd centred = h.rowwise() - mean;
    Eigen::MatrixXd emp = (centred.transpose() * centred) / double(n - 1);

    const Eigen::MatrixXd& C = prior.latent().cov;
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            double se = std::sqrt((C(i, i) * C(j, j) + C(i, j) * C(i, j)) / double(n));
            EXPECT_NEAR(emp(i, j), C(i, j), 5.0 * se) << "entry " << i << "," << j;
        }
}
