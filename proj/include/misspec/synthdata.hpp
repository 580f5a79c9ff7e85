#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "misspec/dataset.hpp"
#include "misspec/ode_forward.hpp"
#include "misspec/pde_forward.hpp"
#include "misspec/rng.hpp"

namespace misspec {

// Shared generative constants across the synthetic scenarios.
inline constexpr double kTrueR = 1.0;
inline constexpr double kTrueK = 5e-3;
inline constexpr double kTrueSigma = 1e-4;
inline constexpr double kTrueD = 300.0;       // baseline diffusivity, µm²/day
inline constexpr double kDomainL = 1000.0;    // µm
inline constexpr int kGridN = 201;
inline constexpr double kSigmaFront = 0.01 * kDomainL;
inline constexpr int kDefaultReplicates = 5;

inline std::vector<double> default_times() {
    std::vector<double> t(11);
    for (int i = 0; i <= 10; ++i) t[i] = double(i);
    return t;
}

// Hill-type time modulation of the diffusivity, k(t) = t^3/(t^3+3) + 0.1:
// starts near 0.1, half-rise at 3^(1/3) days, normalised to 1 at t = 10.
inline double dhat_hill(double t) {
    auto k = [](double s) { return s * s * s / (s * s * s + 3.0) + 0.1; };
    return k(t) / k(10.0);
}

namespace detail {

inline nlohmann::json ode_group_meta(double r, double K, double u0, double sigma, double beta,
                                     const std::vector<double>& times, int replicates) {
    return nlohmann::json{{"kind", "ode"},
                          {"generative",
                           {{"r", r}, {"K", K}, {"u0", u0}, {"sigma", sigma}, {"beta", beta}}},
                          {"times", times},
                          {"replicates", replicates}};
}

inline nlohmann::json pde_group_meta(double r, double K, double u0, double D, const std::string& ic,
                                     double alpha1, double alpha2, double step_frac,
                                     const std::string& dhat, double sigma1, double sigma2,
                                     const std::vector<double>& times, int replicates) {
    nlohmann::json gen{{"r", r},      {"K", K},      {"u0", u0},     {"D", D},
                       {"sigma1", sigma1}, {"sigma", sigma1}};
    if (sigma2 > 0) gen["sigma2"] = sigma2;
    nlohmann::json j{{"kind", ic == "step" ? "pde_step" : "pde_scratch"},
                     {"generative", gen},
                     {"geometry",
                      {{"L", kDomainL},
                       {"grid_n", kGridN},
                       {"ic", ic},
                       {"t_max", 10.0},
                       {"dhat", dhat}}},
                     {"times", times},
                     {"replicates", replicates}};
    if (ic == "scratch") {
        j["geometry"]["alpha1"] = alpha1;
        j["geometry"]["alpha2"] = alpha2;
    } else {
        j["geometry"]["step_frac"] = step_frac;
    }
    return j;
}

}  // namespace detail

// Richards (beta = 2) growth curves observed at four initial densities; the
// u0 grid is an artifact default echoed in the metadata.
inline Dataset make_fig1(std::uint64_t seed) {
    const double beta = 2.0;
    const std::vector<std::pair<std::string, double>> grid = {
        {"fig1_u0K20", kTrueK / 20.0},
        {"fig1_u0K10", kTrueK / 10.0},
        {"fig1_u0K4", kTrueK / 4.0},
        {"fig1_u0K2", kTrueK / 2.0},
    };
    auto times = default_times();
    Dataset ds;
    ds.metadata = nlohmann::json{{"scenario", "fig1"}, {"seed", seed}, {"groups", nlohmann::json::object()}};
    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const auto& [id, u0] = grid[gi];
        OdeParams p{kTrueR, kTrueK, u0};
        auto u = solve_richards(p, beta, times);
        Rng rng = Rng::stream(seed, gi);
        Dataset part = observe(u, times, kTrueSigma, kDefaultReplicates, rng, id);
        ds.records.insert(ds.records.end(), part.records.begin(), part.records.end());
        ds.metadata["groups"][id] =
            detail::ode_group_meta(kTrueR, kTrueK, u0, kTrueSigma, beta, times, kDefaultReplicates);
    }
    return ds;
}

// Growth-curve data whose ground-truth crowding function is f(u) = 1 - u^2,
// at initial density K/10 (ic 1) or K/2 (ic 2).
inline Dataset make_fig3(int ic, std::uint64_t seed) {
    if (ic != 1 && ic != 2) throw std::invalid_argument("fig3 ic must be 1 or 2");
    const double beta = 2.0;
    const double u0 = ic == 1 ? kTrueK / 10.0 : kTrueK / 2.0;
    const std::string id = "fig3_ic" + std::to_string(ic);
    auto times = default_times();
    OdeParams p{kTrueR, kTrueK, u0};
    auto u = solve_richards(p, beta, times);
    Rng rng = Rng::stream(seed, 0);
    Dataset ds = observe(u, times, kTrueSigma, kDefaultReplicates, rng, id);
    ds.metadata = nlohmann::json{
        {"scenario", id},
        {"seed", seed},
        {"groups",
         {{id, detail::ode_group_meta(kTrueR, kTrueK, u0, kTrueSigma, beta, times, kDefaultReplicates)}}}};
    return ds;
}

namespace detail {

inline Dataset fig4_dataset(int ic, int n_reps, std::uint64_t seed, std::uint64_t stream,
                            const std::string& id) {
    const double alpha1 = ic == 1 ? 0.3 : 0.4;
    const double alpha2 = ic == 1 ? 0.7 : 0.6;
    const double u0 = ic == 1 ? 4e-4 : 3e-4;
    auto times = default_times();
    PdeParams p{kTrueR, kTrueK, kTrueD, kDomainL, kGridN};
    auto ic_field = scratch_ic(p, u0, alpha1, alpha2);
    auto sol = solve_pde(p, ic_field, [](double v) { return 1.0 - v; }, [](double) { return 1.0; },
                         times);
    Rng rng = Rng::stream(seed, stream);
    Dataset ds = observe_summaries(sol, kTrueSigma, 0.0, n_reps, rng, id);
    ds.metadata = nlohmann::json{{"scenario", id}, {"seed", seed}, {"groups", nlohmann::json::object()}};
    ds.metadata["groups"][id] = pde_group_meta(kTrueR, kTrueK, u0, kTrueD, "scratch", alpha1, alpha2,
                                               0.1, "constant", kTrueSigma, 0.0, times, n_reps);
    return ds;
}

}  // namespace detail

// Scratch-assay overall-density data: constant diffusivity modulation,
// logistic crowding. ic 1 clears (0.3L, 0.7L) from density 4e-4; ic 2 clears
// (0.4L, 0.6L) from 3e-4, so both start at the same overall density.
inline Dataset make_fig4(int ic, int n_reps, std::uint64_t seed) {
    if (ic != 1 && ic != 2) throw std::invalid_argument("fig4 ic must be 1 or 2");
    if (n_reps < 1) throw std::invalid_argument("fig4 needs at least one replicate");
    return detail::fig4_dataset(ic, n_reps, seed, 0, "fig4_ic" + std::to_string(ic));
}

// Both scratch initial conditions at a given replicate count, as used for
// the growth-rate recovery table.
inline Dataset make_table1(int n_reps, std::uint64_t seed) {
    if (n_reps < 1) throw std::invalid_argument("table1 needs at least one replicate");
    std::string base = "table1_N" + std::to_string(n_reps);
    Dataset ic1 = detail::fig4_dataset(1, n_reps, seed, 0, base + "_ic1");
    Dataset ic2 = detail::fig4_dataset(2, n_reps, seed, 1, base + "_ic2");
    Dataset ds;
    ds.records = ic1.records;
    ds.records.insert(ds.records.end(), ic2.records.begin(), ic2.records.end());
    ds.metadata = nlohmann::json{{"scenario", base}, {"seed", seed}, {"groups", nlohmann::json::object()}};
    ds.metadata["groups"][base + "_ic1"] = ic1.metadata["groups"][base + "_ic1"];
    ds.metadata["groups"][base + "_ic2"] = ic2.metadata["groups"][base + "_ic2"];
    return ds;
}

// Moving-front data with a time-dependent diffusivity (disturbance phase):
// step initial condition, both overall density and front location observed.
// The initial density behind the front defaults to K/2.
inline Dataset make_fig5(std::uint64_t seed) {
    const double u0 = kTrueK / 2.0;
    const std::string id = "fig5";
    auto times = default_times();
    PdeParams p{kTrueR, kTrueK, kTrueD, kDomainL, kGridN};
    auto ic_field = step_ic(p, u0, 0.1);
    auto sol = solve_pde(p, ic_field, [](double v) { return 1.0 - v; },
                         [](double t) { return dhat_hill(t); }, times);
    Rng rng = Rng::stream(seed, 0);
    Dataset ds = observe_summaries(sol, kTrueSigma, kSigmaFront, kDefaultReplicates, rng, id);
    ds.metadata = nlohmann::json{{"scenario", id}, {"seed", seed}, {"groups", nlohmann::json::object()}};
    ds.metadata["groups"][id] =
        detail::pde_group_meta(kTrueR, kTrueK, u0, kTrueD, "step", 0.0, 0.0, 0.1, "hill", kTrueSigma,
                               kSigmaFront, times, kDefaultReplicates);
    return ds;
}

inline std::vector<std::string> scenario_ids() {
    return {"fig1",     "fig3_ic1",  "fig3_ic2",   "fig4_ic1",   "fig4_ic2",
            "fig5",     "table1_N5", "table1_N50", "table1_N100", "table1_N200"};
}

inline Dataset generate_scenario(const std::string& id, std::uint64_t seed) {
    if (id == "fig1") return make_fig1(seed);
    if (id == "fig3_ic1") return make_fig3(1, seed);
    if (id == "fig3_ic2") return make_fig3(2, seed);
    if (id == "fig4_ic1") return make_fig4(1, kDefaultReplicates, seed);
    if (id == "fig4_ic2") return make_fig4(2, kDefaultReplicates, seed);
    if (id == "fig5") return make_fig5(seed);
    for (int n : {5, 50, 100, 200})
        if (id == "table1_N" + std::to_string(n)) return make_table1(n, seed);
    std::string valid;
    for (const auto& s : scenario_ids()) valid += (valid.empty() ? "" : ", ") + s;
    throw std::invalid_argument("unknown scenario '" + id + "'; valid ids: " + valid);
}

}  // namespace misspec
