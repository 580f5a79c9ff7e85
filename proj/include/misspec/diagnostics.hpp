#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "misspec/mcmc.hpp"
#include "misspec/normal.hpp"
#include "misspec/posterior.hpp"

namespace misspec {

// Equal-tailed percentile with the usual linear interpolation between order
// statistics (h = (n-1) p).
inline double percentile(std::vector<double> xs, double p) {
    if (xs.empty()) throw std::invalid_argument("percentile of empty sample");
    if (!(p >= 0 && p <= 1)) throw std::invalid_argument("percentile level in [0,1]");
    std::sort(xs.begin(), xs.end());
    double h = (double(xs.size()) - 1.0) * p;
    std::size_t lo = std::size_t(std::floor(h));
    if (lo + 1 >= xs.size()) return xs.back();
    double w = h - double(lo);
    return (1.0 - w) * xs[lo] + w * xs[lo + 1];
}

namespace detail {

// Average ranks (ties share the mean rank), 1-based.
inline std::vector<double> average_ranks(const std::vector<double>& x) {
    std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[idx[j + 1]] == x[idx[i]]) ++j;
        double r = 0.5 * double(i + j) + 1.0;  // mean of ranks i+1 .. j+1
        for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
        i = j + 1;
    }
    return rank;
}

// Classic (split-free) potential scale reduction on pre-split sequences.
inline double classic_rhat(const std::vector<std::vector<double>>& seqs) {
    std::size_t m = seqs.size();
    std::size_t n = seqs.front().size();
    double grand = 0.0;
    std::vector<double> means(m), vars(m);
    for (std::size_t c = 0; c < m; ++c) {
        double mean = std::accumulate(seqs[c].begin(), seqs[c].end(), 0.0) / double(n);
        double ss = 0.0;
        for (double v : seqs[c]) ss += (v - mean) * (v - mean);
        means[c] = mean;
        vars[c] = ss / double(n - 1);
        grand += mean;
    }
    grand /= double(m);
    double W = std::accumulate(vars.begin(), vars.end(), 0.0) / double(m);
    double B = 0.0;
    for (double mc : means) B += (mc - grand) * (mc - grand);
    B *= double(n) / double(m - 1);
    if (W <= 0.0) return 1.0;  // constant sequences: converged by convention
    double var_plus = (double(n - 1) / double(n)) * W + B / double(n);
    return std::sqrt(var_plus / W);
}

}  // namespace detail

// Rank-normalised split potential scale reduction: chains are split in half,
// pooled draws are converted to normal scores via average ranks and the
// inverse normal CDF, and the classic diagnostic is applied to the scores.
inline double rank_normalised_split_rhat(const std::vector<std::vector<double>>& chains) {
    if (chains.size() < 1) throw std::invalid_argument("rhat needs at least one chain");
    std::size_t n_min = chains.front().size();
    for (const auto& c : chains) n_min = std::min(n_min, c.size());
    std::size_t half = n_min / 2;
    if (half < 2) throw std::invalid_argument("rhat needs chains of length >= 4");

    std::vector<std::vector<double>> splits;
    for (const auto& c : chains) {
        splits.emplace_back(c.begin(), c.begin() + half);
        splits.emplace_back(c.end() - half, c.end());
    }
    if (splits.size() < 2) throw std::invalid_argument("rhat needs at least two split halves");

    std::vector<double> pooled;
    pooled.reserve(splits.size() * half);
    for (const auto& s : splits) pooled.insert(pooled.end(), s.begin(), s.end());
    std::vector<double> ranks = detail::average_ranks(pooled);
    double S = double(pooled.size());
    std::vector<std::vector<double>> zsplits(splits.size(), std::vector<double>(half));
    for (std::size_t c = 0; c < splits.size(); ++c)
        for (std::size_t i = 0; i < half; ++i)
            zsplits[c][i] = norm_quantile((ranks[c * half + i] - 0.375) / (S + 0.25));
    return detail::classic_rhat(zsplits);
}

// Effective sample size via Geyer's initial-monotone-positive-sequence
// estimator on the pooled autocorrelations of the (split) chains.
inline double effective_sample_size(const std::vector<std::vector<double>>& chains) {
    if (chains.empty()) throw std::invalid_argument("ess needs at least one chain");
    std::size_t n_min = chains.front().size();
    for (const auto& c : chains) n_min = std::min(n_min, c.size());
    if (n_min < 4) throw std::invalid_argument("ess needs chains of length >= 4");
    std::size_t m = chains.size();
    std::size_t n = n_min;

    std::vector<double> means(m), vars(m);
    double W = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += chains[c][i];
        mean /= double(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) ss += (chains[c][i] - mean) * (chains[c][i] - mean);
        means[c] = mean;
        vars[c] = ss / double(n - 1);
        W += vars[c] / double(m);
    }
    double grand = std::accumulate(means.begin(), means.end(), 0.0) / double(m);
    double B_over_n = 0.0;
    if (m > 1) {
        for (double mc : means) B_over_n += (mc - grand) * (mc - grand);
        B_over_n /= double(m - 1);
    }
    double var_plus = (double(n - 1) / double(n)) * W + B_over_n;
    if (var_plus <= 0) return double(m * n);

    std::size_t max_lag = std::min(n - 1, std::size_t(2000));
    std::vector<double> rho(max_lag + 1, 0.0);
    for (std::size_t t = 1; t <= max_lag; ++t) {
        double acov = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            double s = 0.0;
            for (std::size_t i = 0; i + t < n; ++i)
                s += (chains[c][i] - means[c]) * (chains[c][i + t] - means[c]);
            acov += s / double(n);
        }
        acov /= double(m);
        rho[t] = 1.0 - (W - acov) / var_plus;
    }

    // Geyer: sum consecutive-pair autocorrelations while positive, enforcing
    // monotone non-increase.
    double tau = 1.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t + 1 <= max_lag; t += 2) {
        double pair = rho[t] + rho[t + 1];
        if (pair <= 0) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        tau += 2.0 * pair;
    }
    double ess = double(m * n) / tau;
    return std::min(ess, double(m * n));
}

// Pooled posterior report across chains, everything in the caller's
// (constrained) coordinates.
struct FitSummary {
    std::vector<std::string> names;
    Eigen::VectorXd map;                 // stored draw with maximal log-posterior
    double map_lp = 0.0;
    Eigen::VectorXd median;
    Eigen::VectorXd ci_lo, ci_hi;        // equal-tailed 95%
    Eigen::VectorXd rhat;
    Eigen::VectorXd ess;
    std::vector<double> acceptance;      // per chain
    bool converged(double threshold = 1.05) const {
        for (int i = 0; i < rhat.size(); ++i)
            if (!(rhat[i] < threshold)) return false;
        return true;
    }
};

// chains[c].draws are unconstrained sampler output; to_constrained maps a
// draw into reporting space (pass the identity to summarise raw output).
inline FitSummary summarise(const std::vector<ChainResult>& chains,
                            const std::vector<std::string>& names,
                            const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& to_constrained) {
    if (chains.empty()) throw std::invalid_argument("summarise needs at least one chain");
    int d = int(chains.front().draws.cols());
    if (int(names.size()) != d) throw std::invalid_argument("names/draw dimension mismatch");

    FitSummary s;
    s.names = names;
    s.map = Eigen::VectorXd(d);
    s.median = Eigen::VectorXd(d);
    s.ci_lo = Eigen::VectorXd(d);
    s.ci_hi = Eigen::VectorXd(d);
    s.rhat = Eigen::VectorXd(d);
    s.ess = Eigen::VectorXd(d);

    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : chains) {
        s.acceptance.push_back(c.acceptance);
        for (std::size_t i = 0; i < c.lp.size(); ++i)
            if (c.lp[i] > best) {
                best = c.lp[i];
                s.map = to_constrained(c.draws.row(long(i)).transpose());
            }
    }
    s.map_lp = best;

    // Per-coordinate constrained draws, per chain and pooled.
    std::vector<std::vector<std::vector<double>>> per_coord(d);
    for (const auto& c : chains) {
        std::vector<std::vector<double>> cons(d);
        for (int j = 0; j < d; ++j) cons[j].reserve(std::size_t(c.draws.rows()));
        for (long i = 0; i < c.draws.rows(); ++i) {
            Eigen::VectorXd x = to_constrained(c.draws.row(i).transpose());
            for (int j = 0; j < d; ++j) cons[j].push_back(x[j]);
        }
        for (int j = 0; j < d; ++j) per_coord[j].push_back(std::move(cons[j]));
    }

    for (int j = 0; j < d; ++j) {
        std::vector<double> pooled;
        for (const auto& cc : per_coord[j]) pooled.insert(pooled.end(), cc.begin(), cc.end());
        s.median[j] = percentile(pooled, 0.5);
        s.ci_lo[j] = percentile(pooled, 0.025);
        s.ci_hi[j] = percentile(pooled, 0.975);
        s.rhat[j] = rank_normalised_split_rhat(per_coord[j]);
        s.ess[j] = effective_sample_size(per_coord[j]);
    }
    return s;
}

// Per-draw R^2 = V_fit / (V_fit + V_res), where V_fit is the sample variance
// of the model-predicted values across records and V_res the sample variance
// of the residuals. Computed per statistic kind; reported as the mean over
// draws with an equal-tailed 95% interval.
struct R2Summary {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
    long draws = 0;
};

// One R^2 value for a single draw and a single statistic kind, from the
// grouped sufficient statistics.
inline double r2_single(const Posterior& post, const std::vector<double>& pred, Statistic stat) {
    const auto& groups = post.groups();
    long I = 0;
    double pred_sum = 0.0, pred_sumsq = 0.0;
    double res_sum = 0.0, res_sumsq = 0.0;
    for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const ObsGroup& g = groups[gi];
        if (g.stat != stat) continue;
        I += g.n;
        pred_sum += g.n * pred[gi];
        pred_sumsq += g.n * pred[gi] * pred[gi];
        res_sum += g.sum - g.n * pred[gi];
        res_sumsq += g.sumsq - 2.0 * pred[gi] * g.sum + g.n * pred[gi] * pred[gi];
    }
    if (I < 2) throw std::invalid_argument("bayesian_r2: need at least two records per statistic");
    double v_fit = (pred_sumsq - pred_sum * pred_sum / double(I)) / double(I - 1);
    double v_res = (res_sumsq - res_sum * res_sum / double(I)) / double(I - 1);
    return v_fit / (v_fit + v_res);
}

// Bayesian R^2 over posterior draws (constrained space), per statistic kind
// present in the dataset. Draws with failing forward solves are skipped.
inline std::map<Statistic, R2Summary> bayesian_r2(const Posterior& post,
                                                  const std::vector<Eigen::VectorXd>& draws_con) {
    if (draws_con.empty()) throw std::invalid_argument("bayesian_r2: no draws");
    std::vector<Statistic> stats;
    for (const auto& g : post.groups())
        if (std::find(stats.begin(), stats.end(), g.stat) == stats.end()) stats.push_back(g.stat);

    std::map<Statistic, std::vector<double>> values;
    std::vector<double> pred;
    for (const auto& x : draws_con) {
        if (!post.predict(x, pred)) continue;
        for (Statistic st : stats) values[st].push_back(r2_single(post, pred, st));
    }
    std::map<Statistic, R2Summary> out;
    for (Statistic st : stats) {
        auto& v = values[st];
        if (v.empty()) throw std::runtime_error("bayesian_r2: every draw failed the forward solve");
        R2Summary s;
        s.draws = long(v.size());
        s.mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
        s.lo = percentile(v, 0.025);
        s.hi = percentile(v, 0.975);
        out[st] = s;
    }
    return out;
}

}  // namespace misspec
