#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "misspec/dataset.hpp"
#include "misspec/piecewise_linear.hpp"
#include "misspec/rng.hpp"

namespace misspec {

// Generalised logistic growth du/dt = r u f(u/K): r is the low-density
// per-capita growth rate, K the carrying capacity.
struct OdeParams {
    double r;
    double K;
    double u0;

    void validate() const {
        if (!(r >= 0)) throw std::invalid_argument("growth rate r must be >= 0");
        if (!(K > 0)) throw std::invalid_argument("carrying capacity K must be > 0");
        if (!(u0 > 0 && u0 < K))
            throw std::invalid_argument("initial density must satisfy 0 < u0 < K");
    }
};

// Closed form for f(u/K) = 1 - (u/K)^beta:
//   u(t) = K [1 + ((K/u0)^beta - 1) exp(-r beta t)]^(-1/beta).
inline std::vector<double> solve_richards(const OdeParams& p, double beta,
                                          const std::vector<double>& times) {
    p.validate();
    if (!(beta > 0)) throw std::invalid_argument("richards exponent beta must be > 0");
    std::vector<double> u(times.size());
    double A = std::pow(p.K / p.u0, beta) - 1.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (!(times[i] >= 0)) throw std::invalid_argument("times must be non-negative");
        u[i] = p.K * std::pow(1.0 + A * std::exp(-p.r * beta * times[i]), -1.0 / beta);
    }
    return u;
}

namespace detail {

// One solution band [u_i, u_{i+1}] (in u/K units) where the crowding function
// is the single segment f(v) = a + b v. Within a band the ODE
// dv/dt = r v (a + b v) has the logistic/Bernoulli closed form.
struct Band {
    double t_start;   // time the trajectory enters this band
    double v_start;   // u/K on entry
    double a, b;      // segment intercept/slope
    double t_end;     // exit time (inf for the terminal band)
};

inline double band_value(const Band& band, double r, double dt) {
    if (band.a == 0.0) {
        // dv/dt = r b v^2
        return band.v_start / (1.0 - r * band.b * band.v_start * dt);
    }
    double e = std::exp(band.a * r * dt);
    return band.a * band.v_start * e / (band.a + band.b * band.v_start * (1.0 - e));
}

// Time for the trajectory to rise from v_start to v_end, or +inf when the
// band is never exited (f -> 0 at the top node).
inline double band_crossing_time(const Band& band, double r, double v_end) {
    const double inf = std::numeric_limits<double>::infinity();
    if (band.a == 0.0) {
        if (band.b <= 0.0) return inf;
        return (1.0 / band.v_start - 1.0 / v_end) / (r * band.b);
    }
    double arg = (v_end * (band.a + band.b * band.v_start)) /
                 (band.v_start * (band.a + band.b * v_end));
    if (!(arg > 0.0) || !std::isfinite(arg)) return inf;
    double dt = std::log(arg) / (band.a * r);
    if (!(dt > 0.0)) return inf;
    return dt;
}

}  // namespace detail

// Exact solution for piecewise-linear crowding functions: the trajectory is
// stitched band by band through the grid, with closed-form values inside each
// band and crossing times from inverting the band solution.
inline std::vector<double> solve_piecewise_analytic(const OdeParams& p,
                                                    const PiecewiseLinearFunction& f,
                                                    const std::vector<double>& times) {
    p.validate();
    const auto& pos = f.positions();
    const auto& val = f.values();
    if (pos.front() != 0.0 || pos.back() != 1.0)
        throw std::invalid_argument("crowding function must live on [0, 1]");
    for (std::size_t i = 1; i + 1 < val.size(); ++i)
        if (!(val[i] > 0.0))
            throw std::invalid_argument("crowding function must be positive at interior nodes");

    std::vector<double> u(times.size());
    if (p.r == 0.0) {
        std::fill(u.begin(), u.end(), p.u0);
        return u;
    }

    double v0 = p.u0 / p.K;
    // Starting segment: the band containing v0 (right band when on a node).
    std::size_t seg = std::size_t(std::upper_bound(pos.begin(), pos.end(), v0) - pos.begin()) - 1;
    if (seg >= pos.size() - 1) seg = pos.size() - 2;

    std::vector<detail::Band> bands;
    double t_cur = 0.0, v_cur = v0;
    for (std::size_t s = seg; s + 1 < pos.size(); ++s) {
        detail::Band band;
        band.t_start = t_cur;
        band.v_start = v_cur;
        band.b = (val[s + 1] - val[s]) / (pos[s + 1] - pos[s]);
        band.a = val[s] - band.b * pos[s];
        double dt = detail::band_crossing_time(band, p.r, pos[s + 1]);
        band.t_end = t_cur + dt;
        bands.push_back(band);
        if (!std::isfinite(band.t_end)) break;
        t_cur = band.t_end;
        v_cur = pos[s + 1];
    }
    bands.back().t_end = std::numeric_limits<double>::infinity();

    for (std::size_t i = 0; i < times.size(); ++i) {
        double t = times[i];
        if (!(t >= 0)) throw std::invalid_argument("times must be non-negative");
        // Band with t_start <= t < t_end.
        std::size_t lo = 0, hi = bands.size() - 1;
        while (lo < hi) {
            std::size_t mid = (lo + hi + 1) / 2;
            if (bands[mid].t_start <= t) lo = mid; else hi = mid - 1;
        }
        u[i] = p.K * detail::band_value(bands[lo], p.r, t - bands[lo].t_start);
    }
    return u;
}

// Adaptive numerical integration of du/dt = r u f(u/K); the independent route
// used to validate the analytic solver. The crowding argument is clamped into
// [0,1] so trial steps slightly past the carrying capacity stay evaluable.
inline std::vector<double> solve_numeric(const OdeParams& p,
                                         const std::function<double(double)>& f,
                                         const std::vector<double>& times,
                                         double rel_tol = 1e-8, double abs_tol_factor = 1e-10) {
    namespace ode = boost::numeric::odeint;
    p.validate();
    using state = std::array<double, 1>;

    auto rhs = [&](const state& x, state& dxdt, double) {
        double v = std::clamp(x[0] / p.K, 0.0, 1.0);
        dxdt[0] = p.r * x[0] * f(v);
    };

    std::vector<double> ts = times;
    bool prepend = ts.empty() || ts.front() > 0.0;
    if (prepend) ts.insert(ts.begin(), 0.0);
    for (std::size_t i = 1; i < ts.size(); ++i)
        if (!(ts[i] > ts[i - 1]))
            throw std::invalid_argument("times must be strictly increasing and non-negative");

    std::vector<double> u;
    u.reserve(ts.size());
    state x{p.u0};
    auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<state>>(abs_tol_factor * p.K, rel_tol);
    try {
        ode::integrate_times(stepper, rhs, x, ts.begin(), ts.end(), 1e-4,
                             [&](const state& xi, double) { u.push_back(xi[0]); });
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("ODE integration failed: ") + e.what());
    }
    if (prepend) u.erase(u.begin());
    return u;
}

// Independent additive Gaussian observation noise, replicated per time point.
inline Dataset observe(const std::vector<double>& densities, const std::vector<double>& times,
                       double sigma, int replicates, Rng& rng,
                       const std::string& scenario_id = "ode",
                       Statistic stat = Statistic::density) {
    if (!(sigma > 0)) throw std::invalid_argument("noise level sigma must be > 0");
    if (densities.size() != times.size())
        throw std::invalid_argument("densities/times length mismatch");
    Dataset ds;
    for (std::size_t i = 0; i < times.size(); ++i)
        for (int rep = 0; rep < replicates; ++rep)
            ds.records.push_back(Record{scenario_id, stat, times[i], rep, densities[i] + sigma * rng.gauss()});
    return ds;
}

}  // namespace misspec
