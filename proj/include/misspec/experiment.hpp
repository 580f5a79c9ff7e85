#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "misspec/dataset.hpp"
#include "misspec/diagnostics.hpp"
#include "misspec/mcmc.hpp"
#include "misspec/posterior.hpp"
#include "misspec/synthdata.hpp"

namespace misspec {

// Fully resolved description of one fit: dataset, model, priors, sampler
// settings, and (for PDE models) the scenario geometry. A sparse user config
// is resolved against the dataset's metadata echo; the resolved form is
// embedded in every output file and round-trips losslessly through JSON.
struct ExperimentConfig {
    std::string dataset;  // CSV path; may be empty for in-memory runs
    std::string group;    // scenario_id within the CSV; empty = sole group
    std::string model = "logistic";
    McmcSettings mcmc{};
    std::map<std::string, std::array<double, 2>> priors;  // scalar boxes
    std::map<std::string, double> init;                   // scalar start values
    std::map<std::string, double> fixed;                  // K, beta for fixed-constant models
    Gp1Spec gp1{};
    Gp2Spec gp2{};
    // PDE geometry.
    double L = 1000.0;
    int grid_n = 201;
    std::string ic = "step";
    double alpha1 = 0.3;
    double alpha2 = 0.7;
    double step_frac = 0.1;
    double t_max = 10.0;
    std::string out;

    nlohmann::json raw = nlohmann::json::object();  // original document, for resolution precedence

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["dataset"] = dataset;
        j["group"] = group;
        j["model"] = model;
        j["mcmc"] = {{"iters", mcmc.iters},
                     {"chains", mcmc.chains},
                     {"seed", mcmc.seed},
                     {"burnin_frac", mcmc.burnin_frac},
                     {"thin", mcmc.thin},
                     {"init_jitter", mcmc.init_jitter},
                     {"max_threads", mcmc.max_threads}};
        j["priors"] = nlohmann::json::object();
        for (const auto& [k, v] : priors) j["priors"][k] = {v[0], v[1]};
        j["init"] = init;
        j["fixed"] = fixed;
        j["gp1"] = {{"eta", gp1.eta}, {"rho", gp1.rho}, {"m", gp1.m}};
        j["gp2"] = {{"rho", gp2.rho}, {"m", gp2.m}};
        j["geometry"] = {{"L", L},           {"grid_n", grid_n},       {"ic", ic},
                         {"alpha1", alpha1}, {"alpha2", alpha2},       {"step_frac", step_frac},
                         {"t_max", t_max}};
        j["out"] = out;
        return j;
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        c.raw = j;
        c.dataset = j.value("dataset", std::string());
        c.group = j.value("group", std::string());
        c.model = j.value("model", std::string("logistic"));
        if (j.contains("mcmc")) {
            const auto& m = j.at("mcmc");
            c.mcmc.iters = m.value("iters", c.mcmc.iters);
            c.mcmc.chains = m.value("chains", c.mcmc.chains);
            c.mcmc.seed = m.value("seed", c.mcmc.seed);
            c.mcmc.burnin_frac = m.value("burnin_frac", c.mcmc.burnin_frac);
            c.mcmc.thin = m.value("thin", c.mcmc.thin);
            c.mcmc.init_jitter = m.value("init_jitter", c.mcmc.init_jitter);
            c.mcmc.max_threads = m.value("max_threads", c.mcmc.max_threads);
        }
        if (j.contains("priors"))
            for (const auto& [k, v] : j.at("priors").items())
                c.priors[k] = {v.at(0).get<double>(), v.at(1).get<double>()};
        if (j.contains("init"))
            for (const auto& [k, v] : j.at("init").items()) c.init[k] = v.get<double>();
        if (j.contains("fixed"))
            for (const auto& [k, v] : j.at("fixed").items()) c.fixed[k] = v.get<double>();
        if (j.contains("gp1")) {
            c.gp1.eta = j.at("gp1").value("eta", c.gp1.eta);
            c.gp1.rho = j.at("gp1").value("rho", c.gp1.rho);
            c.gp1.m = j.at("gp1").value("m", c.gp1.m);
        }
        if (j.contains("gp2")) {
            c.gp2.rho = j.at("gp2").value("rho", c.gp2.rho);
            c.gp2.m = j.at("gp2").value("m", c.gp2.m);
        }
        if (j.contains("geometry")) {
            const auto& g = j.at("geometry");
            c.L = g.value("L", c.L);
            c.grid_n = g.value("grid_n", c.grid_n);
            c.ic = g.value("ic", c.ic);
            c.alpha1 = g.value("alpha1", c.alpha1);
            c.alpha2 = g.value("alpha2", c.alpha2);
            c.step_frac = g.value("step_frac", c.step_frac);
            c.t_max = g.value("t_max", c.t_max);
        }
        c.out = j.value("out", std::string());
        return c;
    }

    static ExperimentConfig load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw std::invalid_argument("cannot read config " + path);
        nlohmann::json j;
        try {
            is >> j;
        } catch (const std::exception& e) {
            throw std::invalid_argument(path + ": " + e.what());
        }
        return from_json(j);
    }

    ModelSpec to_model_spec() const {
        ModelSpec s;
        s.kind = model_kind_from_string(model);
        if (auto it = fixed.find("K"); it != fixed.end()) s.K_fixed = it->second;
        if (auto it = fixed.find("beta"); it != fixed.end()) s.beta_known = it->second;
        s.L = L;
        s.grid_n = grid_n;
        s.ic = ic;
        s.alpha1 = alpha1;
        s.alpha2 = alpha2;
        s.step_frac = step_frac;
        s.t_max = t_max;
        s.gp1 = gp1;
        s.gp2 = gp2;
        s.gp2.t_max = t_max;
        return s;
    }
};

namespace detail {

// Monte-Carlo estimate of the prior covariance in unconstrained coordinates,
// used to seed proposal adaptation for models with function blocks. The
// log/logit-space prior over those blocks is anisotropic enough (condition
// numbers beyond 1e6) that identity-started adaptation spends most of a run
// rediscovering scale structure that is known up front.
inline Eigen::MatrixXd prior_proposal_cov(const ParameterLayout& layout, const ModelSpec& spec,
                                          const std::map<std::string, std::array<double, 2>>& priors) {
    const int d = layout.dim();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    auto names = layout.coordinate_names();
    for (int i = 0; i < layout.scalar_count(); ++i) {
        auto it = priors.find(names[std::size_t(i)]);
        double span = it != priors.end() ? std::log(it->second[1] / it->second[0]) : std::log(1e4);
        cov(i, i) = span * span / 12.0;  // log-uniform box variance
    }

    constexpr int kDraws = 4000;
    auto fill_block = [&](int offset, int n, auto&& draw) {
        Eigen::MatrixXd y(kDraws, n);
        for (int k = 0; k < kDraws; ++k) draw(y.row(k));
        Eigen::RowVectorXd mean = y.colwise().mean();
        y.rowwise() -= mean;
        cov.block(offset, offset, n, n) = (y.transpose() * y) / double(kDraws - 1);
    };

    if (layout.crowding_nodes > 0) {
        Gp1Prior prior(spec.gp1);
        Rng rng = Rng::stream(0xc0571136u, 0);
        fill_block(layout.crowding_offset(), layout.crowding_nodes, [&](auto row) {
            auto vals = prior.sample(rng).values();  // boundaries at front/back
            for (int j = 0; j < layout.crowding_nodes; ++j) row[j] = std::log(vals[std::size_t(j) + 1]);
        });
    }
    if (layout.diffusivity_nodes > 0) {
        Gp2Prior prior(spec.gp2);
        Rng rng = Rng::stream(0xc0571136u, 1);
        fill_block(layout.diffusivity_offset(), layout.diffusivity_nodes, [&](auto row) {
            auto g = prior.sample_g(rng);
            for (int j = 0; j < layout.diffusivity_nodes; ++j)
                row[j] = std::log(g[std::size_t(j)]) - std::log1p(-g[std::size_t(j)]);
        });
    }
    cov.diagonal().array() += 1e-8 * cov.diagonal().maxCoeff();
    return cov;
}

inline double meta_generative(const nlohmann::json& group_meta, const std::string& key,
                              bool* found = nullptr) {
    if (group_meta.contains("generative") && group_meta.at("generative").contains(key)) {
        if (found) *found = true;
        return group_meta.at("generative").at(key).get<double>();
    }
    if (found) *found = false;
    return 0.0;
}

}  // namespace detail

// Fill every unset field from the dataset's metadata echo, then from library
// defaults. Explicit user values (fields present in the original JSON) win.
inline ExperimentConfig resolve_config(ExperimentConfig cfg, const Dataset& full_data) {
    if (cfg.group.empty()) {
        auto ids = full_data.group_ids();
        if (ids.size() != 1)
            throw std::invalid_argument(
                "config must name a group: dataset contains " + std::to_string(ids.size()) +
                " scenario ids");
        cfg.group = *ids.begin();
    }

    Dataset data = full_data.filtered(cfg.group);
    nlohmann::json gmeta = nlohmann::json::object();
    if (full_data.metadata.contains("groups") && full_data.metadata.at("groups").contains(cfg.group))
        gmeta = full_data.metadata.at("groups").at(cfg.group);

    ModelKind kind = model_kind_from_string(cfg.model);

    // Geometry: explicit config > metadata echo > defaults already present.
    const bool raw_geom = cfg.raw.contains("geometry");
    auto geom_unset = [&](const char* key) {
        return !(raw_geom && cfg.raw.at("geometry").contains(key));
    };
    if (gmeta.contains("geometry")) {
        const auto& g = gmeta.at("geometry");
        if (geom_unset("L") && g.contains("L")) cfg.L = g.at("L").get<double>();
        if (geom_unset("grid_n") && g.contains("grid_n")) cfg.grid_n = g.at("grid_n").get<int>();
        if (geom_unset("ic") && g.contains("ic")) cfg.ic = g.at("ic").get<std::string>();
        if (geom_unset("alpha1") && g.contains("alpha1")) cfg.alpha1 = g.at("alpha1").get<double>();
        if (geom_unset("alpha2") && g.contains("alpha2")) cfg.alpha2 = g.at("alpha2").get<double>();
        if (geom_unset("step_frac") && g.contains("step_frac"))
            cfg.step_frac = g.at("step_frac").get<double>();
        if (geom_unset("t_max") && g.contains("t_max")) cfg.t_max = g.at("t_max").get<double>();
    }

    // Fixed constants.
    auto fixed_unset = [&](const char* key) {
        return !(cfg.raw.contains("fixed") && cfg.raw.at("fixed").contains(key));
    };
    bool found = false;
    if (fixed_unset("K")) {
        double v = detail::meta_generative(gmeta, "K", &found);
        if (found) cfg.fixed["K"] = v;
    }
    if (fixed_unset("beta")) {
        double v = detail::meta_generative(gmeta, "beta", &found);
        if (found) cfg.fixed["beta"] = v;
    }

    // Scalar boxes and start values: the model's scalar list depends on
    // whether front records are present.
    bool fronts = false;
    for (const auto& rec : data.records) fronts = fronts || rec.statistic == Statistic::front_location;
    ModelSpec provisional = cfg.to_model_spec();
    for (const std::string& name : provisional.scalar_names(fronts)) {
        bool have_prior = cfg.priors.count(name) > 0;
        bool have_init = cfg.init.count(name) > 0;
        if (have_prior && have_init) continue;
        double truth = detail::meta_generative(gmeta, name, &found);
        if (!found) {
            if (!have_prior)
                throw std::invalid_argument("no prior box for scalar '" + name +
                                            "' and no generative value in dataset metadata");
            continue;  // prior given; start defaults to the box midpoint
        }
        if (!have_prior) cfg.priors[name] = {truth / 100.0, truth * 100.0};
        if (!have_init) cfg.init[name] = truth;
    }

    cfg.gp2.t_max = cfg.t_max;
    (void)kind;
    return cfg;
}

// One fit, end to end, in memory. Chain draws are stored in constrained
// space; the summary, R^2, and plot data all derive from them.
struct FitResult {
    ExperimentConfig config;  // resolved
    std::shared_ptr<Posterior> posterior;
    std::vector<ChainResult> chains;  // constrained draws, lp = constrained log-posterior
    FitSummary summary;
    std::map<Statistic, R2Summary> r2;

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < summary.names.size(); ++i)
            if (summary.names[i] == name) return int(i);
        throw std::invalid_argument("no coordinate named " + name);
    }
    double map_of(const std::string& name) const { return summary.map[index_of(name)]; }
    double median_of(const std::string& name) const { return summary.median[index_of(name)]; }
    double ci_lo(const std::string& name) const { return summary.ci_lo[index_of(name)]; }
    double ci_hi(const std::string& name) const { return summary.ci_hi[index_of(name)]; }
    double rhat_of(const std::string& name) const { return summary.rhat[index_of(name)]; }
    double rhat_max() const { return summary.rhat.maxCoeff(); }
    bool converged() const { return summary.converged(); }

    std::vector<Eigen::VectorXd> pooled_draws(std::size_t max_count = 0) const {
        std::size_t total = 0;
        for (const auto& c : chains) total += std::size_t(c.draws.rows());
        std::size_t step = max_count > 0 && total > max_count ? total / max_count : 1;
        std::vector<Eigen::VectorXd> out;
        out.reserve(total / step + 1);
        std::size_t k = 0;
        for (const auto& c : chains)
            for (long i = 0; i < c.draws.rows(); ++i, ++k)
                if (k % step == 0) out.push_back(c.draws.row(i).transpose());
        return out;
    }
};

// Iteration budgets sized so each model's default run certifies convergence
// (max split R-hat < 1.05) on its reference scenario.
inline long default_iters(const std::string& model) {
    switch (model_kind_from_string(model)) {
        case ModelKind::logistic:
        case ModelKind::known_truth:
        case ModelKind::richards: return 30000;
        case ModelKind::gp_crowding: return 200000;
        case ModelKind::pde_constant_D: return 30000;
        case ModelKind::pde_gp_diffusivity: return 80000;
        case ModelKind::pde_gp_both: return 100000;
    }
    return 40000;
}

inline FitResult run_fit(const ExperimentConfig& cfg_in, const Dataset& full_data) {
    ExperimentConfig cfg = resolve_config(cfg_in, full_data);
    Dataset data = full_data.filtered(cfg.group);

    ModelSpec spec = cfg.to_model_spec();
    std::map<std::string, ScalarBox> boxes;
    for (const auto& [name, box] : cfg.priors) boxes[name] = ScalarBox{box[0], box[1]};

    auto posterior = std::make_shared<Posterior>(data, spec, boxes);
    const ParameterLayout layout = posterior->layout();
    Eigen::VectorXd x0 = posterior->initial_point(cfg.init);
    Eigen::VectorXd y0 = layout.to_unconstrained(x0);

    auto make_target = [posterior](int /*chain*/) -> Target {
        // Each chain owns a copy: Posterior tracks failure diagnostics.
        auto own = std::make_shared<Posterior>(*posterior);
        return [own](const Eigen::VectorXd& y, double* report) {
            return own->log_posterior_unc(y, report);
        };
    };

    McmcSettings mcmc = cfg.mcmc;
    if (layout.crowding_nodes > 0 || layout.diffusivity_nodes > 0) {
        mcmc.init_cov = detail::prior_proposal_cov(layout, spec, cfg.priors);
        mcmc.init_cov_weight = std::max<long>(2000, mcmc.iters / 20);
    }

    FitResult result;
    result.config = cfg;
    result.posterior = posterior;
    result.chains = run_chains(make_target, y0, mcmc);

    // Map chain output to constrained space once, up front.
    for (auto& c : result.chains)
        for (long i = 0; i < c.draws.rows(); ++i)
            c.draws.row(i) = layout.to_constrained(c.draws.row(i).transpose()).transpose();

    result.summary = summarise(result.chains, layout.coordinate_names(),
                               [](const Eigen::VectorXd& x) { return x; });
    result.r2 = bayesian_r2(*posterior, result.pooled_draws(1000));
    return result;
}

inline FitResult run_fit(const ExperimentConfig& cfg) {
    if (cfg.dataset.empty()) throw std::invalid_argument("config has no dataset path");
    Dataset data = Dataset::read_csv(cfg.dataset);
    return run_fit(cfg, data);
}

namespace detail {

inline void write_histogram_csv(const std::string& path, const std::string& comment,
                                std::vector<double> values, int bins = 100) {
    double lo = *std::min_element(values.begin(), values.end());
    double hi = *std::max_element(values.begin(), values.end());
    if (hi <= lo) hi = lo + (lo == 0 ? 1e-12 : std::abs(lo) * 1e-12);
    std::vector<long> count(bins, 0);
    for (double v : values) {
        int b = int((v - lo) / (hi - lo) * bins);
        count[std::clamp(b, 0, bins - 1)] += 1;
    }
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    if (!comment.empty()) os << "# " << comment << '\n';
    os << "bin_lo,bin_hi,count,density\n";
    double width = (hi - lo) / bins;
    for (int b = 0; b < bins; ++b)
        os << format_double(lo + b * width) << ',' << format_double(lo + (b + 1) * width) << ','
           << count[b] << ',' << format_double(double(count[b]) / (double(values.size()) * width))
           << '\n';
}

inline void write_band_csv(const std::string& path, const std::string& comment,
                           const std::string& xname, const std::vector<double>& grid,
                           const std::vector<std::vector<double>>& values_per_draw) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    if (!comment.empty()) os << "# " << comment << '\n';
    os << xname << ",mean,lo,hi\n";
    std::vector<double> col(values_per_draw.size());
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        for (std::size_t d = 0; d < values_per_draw.size(); ++d) col[d] = values_per_draw[d][gi];
        double mean = std::accumulate(col.begin(), col.end(), 0.0) / double(col.size());
        os << format_double(grid[gi]) << ',' << format_double(mean) << ','
           << format_double(percentile(col, 0.025)) << ',' << format_double(percentile(col, 0.975))
           << '\n';
    }
}

}  // namespace detail

// Persist a fit: draws.csv, summary.json, per-scalar histograms, and
// (when present) the inferred-function bands on 101-point grids.
inline void write_fit_outputs(const FitResult& res, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const ParameterLayout& layout = res.posterior->layout();
    auto names = layout.coordinate_names();
    // Resolved provenance, stamped into every file this fit emits.
    const std::string stamp = "seed=" + std::to_string(res.config.mcmc.seed) +
                              " model=" + res.config.model + " group=" + res.config.group;

    {
        std::ofstream os(dir + "/draws.csv");
        if (!os) throw std::runtime_error("cannot write " + dir + "/draws.csv");
        os << "# " << stamp << '\n';
        os << "chain,iter";
        for (const auto& n : names) os << ',' << n;
        os << ",log_posterior\n";
        for (std::size_t c = 0; c < res.chains.size(); ++c) {
            const auto& ch = res.chains[c];
            for (long i = 0; i < ch.draws.rows(); ++i) {
                os << c << ',' << (ch.burnin + 1 + i * ch.thin);
                for (int j = 0; j < ch.draws.cols(); ++j) os << ',' << format_double(ch.draws(i, j));
                os << ',' << format_double(ch.lp[std::size_t(i)]) << '\n';
            }
        }
    }

    {
        nlohmann::json j;
        j["seed"] = res.config.mcmc.seed;
        j["converged"] = res.converged();
        j["map_log_posterior"] = res.summary.map_lp;
        nlohmann::json map, med, ci, rhat, ess;
        for (std::size_t i = 0; i < names.size(); ++i) {
            map[names[i]] = res.summary.map[long(i)];
            med[names[i]] = res.summary.median[long(i)];
            ci[names[i]] = {res.summary.ci_lo[long(i)], res.summary.ci_hi[long(i)]};
            rhat[names[i]] = res.summary.rhat[long(i)];
            ess[names[i]] = res.summary.ess[long(i)];
        }
        j["map"] = map;
        j["medians"] = med;
        j["ci95"] = ci;
        j["rhat"] = rhat;
        j["ess"] = ess;
        j["acceptance"] = res.summary.acceptance;
        nlohmann::json r2 = nlohmann::json::object();
        for (const auto& [stat, s] : res.r2)
            r2[to_string(stat)] = {{"mean", s.mean}, {"lo", s.lo}, {"hi", s.hi}, {"draws", s.draws}};
        j["r2"] = r2;
        j["config_echo"] = res.config.to_json();
        std::ofstream os(dir + "/summary.json");
        if (!os) throw std::runtime_error("cannot write " + dir + "/summary.json");
        os << j.dump(2) << '\n';
    }

    auto pooled = res.pooled_draws();
    for (int i = 0; i < layout.scalar_count(); ++i) {
        std::vector<double> vals(pooled.size());
        for (std::size_t d = 0; d < pooled.size(); ++d) vals[d] = pooled[d][i];
        detail::write_histogram_csv(dir + "/hist_" + names[std::size_t(i)] + ".csv", stamp,
                                    std::move(vals));
    }

    if (layout.crowding_nodes > 0) {
        std::vector<double> grid(101);
        for (int i = 0; i <= 100; ++i) grid[i] = double(i) / 100.0;
        std::vector<std::vector<double>> vals(pooled.size(), std::vector<double>(grid.size()));
        for (std::size_t d = 0; d < pooled.size(); ++d) {
            auto plf = res.posterior->crowding_plf(pooled[d]);
            for (std::size_t gi = 0; gi < grid.size(); ++gi) vals[d][gi] = plf(grid[gi]);
        }
        detail::write_band_csv(dir + "/band_crowding.csv", stamp, "u", grid, vals);
    }

    if (layout.diffusivity_nodes > 0) {
        double t_max = res.posterior->spec().gp2.t_max;
        std::vector<double> grid(101);
        for (int i = 0; i <= 100; ++i) grid[i] = t_max * double(i) / 100.0;
        std::vector<std::vector<double>> vals(pooled.size(), std::vector<double>(grid.size()));
        for (std::size_t d = 0; d < pooled.size(); ++d) {
            auto plf = res.posterior->diffusivity_plf(pooled[d]);
            for (std::size_t gi = 0; gi < grid.size(); ++gi) vals[d][gi] = plf(grid[gi]);
        }
        detail::write_band_csv(dir + "/band_diffusivity.csv", stamp, "t", grid, vals);
    }
}

}  // namespace misspec
