#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "misspec/dataset.hpp"
#include "misspec/rng.hpp"

namespace misspec {

// Reaction-diffusion model on [0, L] with no-flux boundaries:
//   du/dt = D Dhat(t) d2u/dx2 + r u f(u/K).
// Dhat is a dimensionless time modulation of the baseline diffusivity D.
struct PdeParams {
    double r;
    double K;
    double D;
    double L;
    int grid_n = 201;

    void validate() const {
        if (!(r >= 0)) throw std::invalid_argument("growth rate r must be >= 0");
        if (!(K > 0)) throw std::invalid_argument("carrying capacity K must be > 0");
        if (!(D >= 0)) throw std::invalid_argument("diffusivity D must be >= 0");
        if (!(L > 0)) throw std::invalid_argument("domain length L must be > 0");
        if (grid_n < 3) throw std::invalid_argument("grid_n must be >= 3");
    }

    double h() const { return L / (grid_n - 1); }

    std::vector<double> grid() const {
        std::vector<double> x(grid_n);
        for (int i = 0; i < grid_n; ++i) x[i] = L * double(i) / (grid_n - 1);
        return x;
    }
};

// Cleared strip (alpha1 L, alpha2 L) at density 0, u0 elsewhere; nodes on the
// strip edges count as occupied.
inline std::vector<double> scratch_ic(const PdeParams& p, double u0, double alpha1, double alpha2) {
    p.validate();
    if (!(u0 > 0 && u0 < p.K)) throw std::invalid_argument("initial density must satisfy 0 < u0 < K");
    if (!(0 < alpha1 && alpha1 < alpha2 && alpha2 < 1))
        throw std::invalid_argument("scratch bounds must satisfy 0 < alpha1 < alpha2 < 1");
    std::vector<double> u(p.grid_n);
    auto x = p.grid();
    for (int i = 0; i < p.grid_n; ++i)
        u[i] = (x[i] > alpha1 * p.L && x[i] < alpha2 * p.L) ? 0.0 : u0;
    return u;
}

// Occupied region x < frac L at density u0, empty ahead of it.
inline std::vector<double> step_ic(const PdeParams& p, double u0, double frac = 0.1) {
    p.validate();
    if (!(u0 > 0 && u0 <= p.K)) throw std::invalid_argument("initial density must satisfy 0 < u0 <= K");
    if (!(0 < frac && frac < 1)) throw std::invalid_argument("step fraction must lie in (0, 1)");
    std::vector<double> u(p.grid_n);
    auto x = p.grid();
    for (int i = 0; i < p.grid_n; ++i) u[i] = (x[i] < frac * p.L) ? u0 : 0.0;
    return u;
}

struct PdeSolution {
    std::vector<double> times;
    std::vector<double> x;
    std::vector<std::vector<double>> u;  // u[k][i] = density at times[k], x[i]
    double L = 0.0;
};

// Method of lines: second-order central differences with reflected ghost
// nodes at both boundaries, integrated with an adaptive explicit stepper.
// The discrete laplacian telescopes to zero under trapezoid weights, so mass
// is conserved to time-integration accuracy when r = 0.
inline PdeSolution solve_pde(const PdeParams& p, const std::vector<double>& ic,
                             const std::function<double(double)>& crowding,
                             const std::function<double(double)>& dhat,
                             const std::vector<double>& times,
                             double rel_tol = 1e-6, double abs_tol_factor = 1e-9) {
    namespace ode = boost::numeric::odeint;
    p.validate();
    if (p.grid_n < 51) throw std::invalid_argument("grid_n must be >= 51");
    if (int(ic.size()) != p.grid_n) throw std::invalid_argument("initial condition/grid size mismatch");

    const int n = p.grid_n;
    const double inv_h2 = 1.0 / (p.h() * p.h());
    using state = std::vector<double>;

    auto rhs = [&](const state& u, state& dudt, double t) {
        double dc = p.D * dhat(t);
        if (!std::isfinite(dc) || dc < 0)
            throw std::runtime_error("diffusivity modulation produced an invalid coefficient");
        dudt[0] = dc * 2.0 * (u[1] - u[0]) * inv_h2;
        for (int i = 1; i + 1 < n; ++i)
            dudt[i] = dc * (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv_h2;
        dudt[n - 1] = dc * 2.0 * (u[n - 2] - u[n - 1]) * inv_h2;
        if (p.r > 0) {
            for (int i = 0; i < n; ++i) {
                double v = std::clamp(u[i] / p.K, 0.0, 1.0);
                dudt[i] += p.r * u[i] * crowding(v);
            }
        }
    };

    std::vector<double> ts = times;
    bool prepend = ts.empty() || ts.front() > 0.0;
    if (prepend) ts.insert(ts.begin(), 0.0);
    for (std::size_t i = 1; i < ts.size(); ++i)
        if (!(ts[i] > ts[i - 1]))
            throw std::invalid_argument("times must be strictly increasing and non-negative");
    if (!(ts.front() >= 0)) throw std::invalid_argument("times must be non-negative");

    PdeSolution sol;
    sol.times = times;
    sol.x = p.grid();
    sol.L = p.L;
    sol.u.reserve(ts.size());

    state u = ic;
    const double neg_floor = -1e-8 * p.K;
    auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<state>>(abs_tol_factor * p.K, rel_tol);
    try {
        ode::integrate_times(stepper, rhs, u, ts.begin(), ts.end(), 1e-6, [&](const state& ui, double t) {
            for (double v : ui)
                if (!(v >= neg_floor))
                    throw std::runtime_error("numeric instability: density below -1e-8 K at t=" +
                                             std::to_string(t));
            sol.u.push_back(ui);
        });
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("PDE integration failed: ") + e.what());
    }
    if (prepend) sol.u.erase(sol.u.begin());
    return sol;
}

// Domain-averaged density (1/L) int u dx by the trapezoid rule on the
// uniform grid.
inline double overall_density(const std::vector<double>& u) {
    if (u.size() < 2) throw std::invalid_argument("need at least two nodes");
    double s = 0.5 * (u.front() + u.back());
    for (std::size_t i = 1; i + 1 < u.size(); ++i) s += u[i];
    return s / double(u.size() - 1);
}

// Leftmost position where the density drops below the absolute threshold,
// linearly interpolated between the bracketing nodes. Everywhere occupied
// maps to L, everywhere below threshold to 0.
inline double front_location(const std::vector<double>& u, const std::vector<double>& x,
                             double threshold = 1e-4) {
    if (u.size() != x.size() || u.size() < 2) throw std::invalid_argument("front: bad grid");
    std::size_t i = 0;
    while (i < u.size() && u[i] >= threshold) ++i;
    if (i == u.size()) return x.back();
    if (i == 0) return x.front();
    double frac = (threshold - u[i - 1]) / (u[i] - u[i - 1]);
    return x[i - 1] + frac * (x[i] - x[i - 1]);
}

// Noisy summary-statistic observations: overall density with noise
// sigma_density, front location with noise sigma_front. An empty front
// series (or sigma_front <= 0) omits front records entirely.
inline Dataset observe_summaries(const std::vector<double>& times, const std::vector<double>& U_series,
                                 const std::vector<double>& F_series, double sigma_density,
                                 double sigma_front, int replicates, Rng& rng,
                                 const std::string& scenario_id) {
    if (!(sigma_density > 0)) throw std::invalid_argument("noise level sigma_density must be > 0");
    if (U_series.size() != times.size()) throw std::invalid_argument("U series/times length mismatch");
    bool fronts = !F_series.empty();
    if (fronts && F_series.size() != times.size())
        throw std::invalid_argument("F series/times length mismatch");
    if (fronts && !(sigma_front > 0))
        throw std::invalid_argument("noise level sigma_front must be > 0 when fronts are observed");
    Dataset ds;
    for (std::size_t k = 0; k < times.size(); ++k)
        for (int rep = 0; rep < replicates; ++rep)
            ds.records.push_back(Record{scenario_id, Statistic::overall_density, times[k], rep,
                                        U_series[k] + sigma_density * rng.gauss()});
    if (fronts)
        for (std::size_t k = 0; k < times.size(); ++k)
            for (int rep = 0; rep < replicates; ++rep)
                ds.records.push_back(Record{scenario_id, Statistic::front_location, times[k], rep,
                                            F_series[k] + sigma_front * rng.gauss()});
    return ds;
}

inline Dataset observe_summaries(const PdeSolution& sol, double sigma_density, double sigma_front,
                                 int replicates, Rng& rng, const std::string& scenario_id) {
    std::vector<double> U(sol.times.size()), F;
    for (std::size_t k = 0; k < sol.times.size(); ++k) U[k] = overall_density(sol.u[k]);
    if (sigma_front > 0) {
        F.resize(sol.times.size());
        for (std::size_t k = 0; k < sol.times.size(); ++k) F[k] = front_location(sol.u[k], sol.x);
    }
    return observe_summaries(sol.times, U, F, sigma_density, sigma_front, replicates, rng, scenario_id);
}

}  // namespace misspec
