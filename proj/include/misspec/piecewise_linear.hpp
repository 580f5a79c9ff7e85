#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace misspec {

// Piecewise-linear function on a fixed grid: the shared discretisation for
// unknown model terms (crowding function on [0,1], normalised diffusivity on
// [0, t_max]). Immutable after construction; safe to evaluate concurrently.
class PiecewiseLinearFunction {
public:
    PiecewiseLinearFunction(std::vector<double> positions, std::vector<double> values)
        : positions_(std::move(positions)), values_(std::move(values)) {
        if (positions_.size() < 2 || positions_.size() != values_.size())
            throw std::invalid_argument("piecewise-linear function needs matching positions/values, length >= 2");
        for (std::size_t i = 1; i < positions_.size(); ++i)
            if (!(positions_[i] > positions_[i - 1]))
                throw std::invalid_argument("node positions must be strictly increasing");
        for (double v : values_)
            if (!std::isfinite(v)) throw std::invalid_argument("node values must be finite");
    }

    double domain_lo() const { return positions_.front(); }
    double domain_hi() const { return positions_.back(); }
    const std::vector<double>& positions() const { return positions_; }
    const std::vector<double>& values() const { return values_; }
    std::size_t size() const { return positions_.size(); }

    // Exact node value at nodes, linear interpolant between them.
    double operator()(double x) const {
        if (!(x >= domain_lo() && x <= domain_hi()))
            throw std::domain_error("evaluation outside [" + std::to_string(domain_lo()) + ", " +
                                    std::to_string(domain_hi()) + "]: x = " + std::to_string(x));
        auto it = std::upper_bound(positions_.begin(), positions_.end(), x);
        std::size_t seg = (it == positions_.end() ? positions_.size() - 1 : std::size_t(it - positions_.begin())) - 1;
        if (x == positions_[seg]) return values_[seg];
        if (x == positions_[seg + 1]) return values_[seg + 1];
        double w = (x - positions_[seg]) / (positions_[seg + 1] - positions_[seg]);
        return values_[seg] + w * (values_[seg + 1] - values_[seg]);
    }

    // Evaluation with the argument clamped into the domain. The interpolant is
    // continuous, so this only matters for trial points a solver places just
    // outside the domain.
    double eval_clamped(double x) const {
        return operator()(std::clamp(x, domain_lo(), domain_hi()));
    }

    double max_abs_slope() const {
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < positions_.size(); ++i)
            s = std::max(s, std::abs((values_[i + 1] - values_[i]) / (positions_[i + 1] - positions_[i])));
        return s;
    }

private:
    std::vector<double> positions_;
    std::vector<double> values_;
};

// Uniform grid for the crowding function f(u/K) on [0,1] with m interior
// nodes. The boundary values f(0) = 1 and f(1) = 0 are fixed by definition
// and never inferred.
struct CrowdingGrid {
    int m;

    explicit CrowdingGrid(int m_) : m(m_) {
        if (m < 1) throw std::invalid_argument("crowding grid needs m >= 1");
    }

    std::vector<double> positions() const {
        std::vector<double> p(m + 2);
        for (int i = 0; i <= m + 1; ++i) p[i] = double(i) / (m + 1);
        return p;
    }

    static constexpr double boundary_lo = 1.0;  // f(0)
    static constexpr double boundary_hi = 0.0;  // f(1)

    // Attach the fixed boundaries to an interior-node vector.
    PiecewiseLinearFunction with_interior(const std::vector<double>& interior) const {
        if (int(interior.size()) != m)
            throw std::invalid_argument("crowding grid expects " + std::to_string(m) + " interior values");
        std::vector<double> v(m + 2);
        v.front() = boundary_lo;
        std::copy(interior.begin(), interior.end(), v.begin() + 1);
        v.back() = boundary_hi;
        return PiecewiseLinearFunction(positions(), v);
    }
};

// Uniform grid for the normalised diffusivity Dhat(t) on [0, t_max]. Nodes
// t_i = t_max * i/(m+1) for i = 0..m+1; the final node is pinned to
// Dhat(t_max) = 1 (g_{m+1} = 0.5), all earlier nodes g_0..g_m are free.
struct DiffusivityGrid {
    int m;
    double t_max;

    DiffusivityGrid(int m_, double t_max_) : m(m_), t_max(t_max_) {
        if (m < 1) throw std::invalid_argument("diffusivity grid needs m >= 1");
        if (!(t_max > 0)) throw std::invalid_argument("diffusivity grid needs t_max > 0");
    }

    std::vector<double> positions() const {
        std::vector<double> p(m + 2);
        for (int i = 0; i <= m + 1; ++i) p[i] = t_max * double(i) / (m + 1);
        return p;
    }

    int free_nodes() const { return m + 1; }  // g_0..g_m

    static constexpr double boundary_value = 1.0;  // Dhat(t_max) = 2 * 0.5

    // Dhat node values from the free copula values g_0..g_m in (0,1).
    PiecewiseLinearFunction with_free_values(const std::vector<double>& g) const {
        if (int(g.size()) != free_nodes())
            throw std::invalid_argument("diffusivity grid expects " + std::to_string(free_nodes()) + " free values");
        std::vector<double> v(m + 2);
        for (int i = 0; i <= m; ++i) v[i] = 2.0 * g[i];
        v.back() = boundary_value;
        return PiecewiseLinearFunction(positions(), v);
    }
};

namespace detail {

inline PiecewiseLinearFunction discretise(const std::function<double(double)>& fn,
                                          std::vector<double> pos) {
    std::vector<double> v(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) {
        v[i] = fn(pos[i]);
        if (!std::isfinite(v[i]))
            throw std::runtime_error("non-finite function value at node " + std::to_string(pos[i]));
    }
    return PiecewiseLinearFunction(std::move(pos), std::move(v));
}

}  // namespace detail

// Discretise a closed-form function onto a grid; boundary values are
// overwritten by the grid-mandated constants.
inline PiecewiseLinearFunction from_closed_form(const std::function<double(double)>& fn,
                                                const CrowdingGrid& grid) {
    auto plf = detail::discretise(fn, grid.positions());
    std::vector<double> v = plf.values();
    v.front() = CrowdingGrid::boundary_lo;
    v.back() = CrowdingGrid::boundary_hi;
    return PiecewiseLinearFunction(plf.positions(), std::move(v));
}

inline PiecewiseLinearFunction from_closed_form(const std::function<double(double)>& fn,
                                                const DiffusivityGrid& grid) {
    auto plf = detail::discretise(fn, grid.positions());
    std::vector<double> v = plf.values();
    v.back() = DiffusivityGrid::boundary_value;
    return PiecewiseLinearFunction(plf.positions(), std::move(v));
}

}  // namespace misspec
