#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "misspec/dataset.hpp"
#include "misspec/gp_priors.hpp"
#include "misspec/normal.hpp"
#include "misspec/ode_forward.hpp"
#include "misspec/parameters.hpp"
#include "misspec/pde_forward.hpp"
#include "misspec/piecewise_linear.hpp"

namespace misspec {

enum class ModelKind {
    logistic,
    known_truth,
    richards,
    gp_crowding,
    pde_constant_D,
    pde_gp_diffusivity,
    pde_gp_both,
};

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::logistic: return "logistic";
        case ModelKind::known_truth: return "known_truth";
        case ModelKind::richards: return "richards";
        case ModelKind::gp_crowding: return "gp_crowding";
        case ModelKind::pde_constant_D: return "pde_constant_D";
        case ModelKind::pde_gp_diffusivity: return "pde_gp_diffusivity";
        case ModelKind::pde_gp_both: return "pde_gp_both";
    }
    throw std::logic_error("unreachable");
}

inline ModelKind model_kind_from_string(const std::string& s) {
    for (ModelKind k : {ModelKind::logistic, ModelKind::known_truth, ModelKind::richards,
                        ModelKind::gp_crowding, ModelKind::pde_constant_D,
                        ModelKind::pde_gp_diffusivity, ModelKind::pde_gp_both})
        if (to_string(k) == s) return k;
    throw std::invalid_argument("unknown model kind: " + s);
}

inline bool model_is_pde(ModelKind k) {
    return k == ModelKind::pde_constant_D || k == ModelKind::pde_gp_diffusivity ||
           k == ModelKind::pde_gp_both;
}

inline bool model_has_crowding(ModelKind k) {
    return k == ModelKind::gp_crowding || k == ModelKind::pde_gp_both;
}

inline bool model_has_diffusivity(ModelKind k) {
    return k == ModelKind::pde_gp_diffusivity || k == ModelKind::pde_gp_both;
}

// Everything the forward map needs besides the inferred coordinates: fixed
// constants, the PDE scenario geometry, and the GP hyper-parameters.
struct ModelSpec {
    ModelKind kind = ModelKind::logistic;

    double K_fixed = 5e-3;     // carrying capacity, fixed for PDE kinds
    double beta_known = 2.0;   // richards exponent of the known_truth model

    // PDE geometry (ignored by ODE kinds).
    double L = 1000.0;
    int grid_n = 201;
    std::string ic = "step";   // "scratch" | "step"
    double alpha1 = 0.3;
    double alpha2 = 0.7;
    double step_frac = 0.1;

    double t_max = 10.0;       // diffusivity grid endpoint

    Gp1Spec gp1{};
    Gp2Spec gp2{};

    std::vector<std::string> scalar_names(bool fronts_observed) const {
        switch (kind) {
            case ModelKind::logistic:
            case ModelKind::known_truth:
            case ModelKind::gp_crowding:
                return {"r", "K", "u0", "sigma"};
            case ModelKind::richards:
                return {"r", "K", "u0", "beta", "sigma"};
            case ModelKind::pde_constant_D:
            case ModelKind::pde_gp_diffusivity:
            case ModelKind::pde_gp_both:
                if (fronts_observed) return {"r", "u0", "D", "sigma1", "sigma2"};
                return {"r", "u0", "D", "sigma1"};
        }
        throw std::logic_error("unreachable");
    }
};

// Log-uniform prior box for one scalar: uniform on [log lo, log hi].
struct ScalarBox {
    double lo;
    double hi;
};

// One (statistic, time) observation cell with sufficient statistics of its
// replicates; the Gaussian likelihood only needs {n, sum, sumsq} per cell.
struct ObsGroup {
    Statistic stat;
    double time;
    int n = 0;
    double sum = 0.0;
    double sumsq = 0.0;
    int time_index = 0;  // into the pooled sorted unique-time vector
};

// Joint posterior of one model fitted to one dataset. Stateless apart from
// soft-failure diagnostics; chains evaluate their own copies concurrently.
class Posterior {
public:
    Posterior(const Dataset& data, const ModelSpec& spec,
              const std::map<std::string, ScalarBox>& boxes, bool log_scalar_proposals = true)
        : spec_(spec) {
        if (data.records.empty()) throw std::invalid_argument("dataset is empty");
        spec_.gp2.t_max = spec_.t_max;

        bool fronts = false;
        for (const auto& rec : data.records) {
            if (model_is_pde(spec_.kind)) {
                if (rec.statistic == Statistic::density)
                    throw std::invalid_argument("PDE models fit summary statistics, not spatial density records");
                fronts = fronts || rec.statistic == Statistic::front_location;
            } else if (rec.statistic == Statistic::front_location) {
                throw std::invalid_argument("ODE models cannot predict front-location records");
            }
        }

        layout_.scalar_names = spec_.scalar_names(fronts);
        layout_.scalar_transforms.assign(layout_.scalar_names.size(),
                                         log_scalar_proposals ? Transform::log_positive
                                                              : Transform::identity);
        if (model_has_crowding(spec_.kind)) layout_.crowding_nodes = spec_.gp1.m;
        if (model_has_diffusivity(spec_.kind)) layout_.diffusivity_nodes = spec_.gp2.m + 1;
        layout_.validate();

        boxes_.reserve(layout_.scalar_names.size());
        for (const auto& name : layout_.scalar_names) {
            auto it = boxes.find(name);
            if (it == boxes.end())
                throw std::invalid_argument("missing prior box for scalar: " + name);
            if (!(it->second.lo > 0 && it->second.hi > it->second.lo))
                throw std::invalid_argument("prior box for " + name + " must satisfy 0 < lo < hi");
            boxes_.push_back(it->second);
        }

        build_groups(data);

        if (model_has_crowding(spec_.kind)) gp1_ = Gp1Prior(spec_.gp1);
        if (model_has_diffusivity(spec_.kind)) gp2_ = Gp2Prior(spec_.gp2);
    }

    const ParameterLayout& layout() const { return layout_; }
    const ModelSpec& spec() const { return spec_; }
    const std::vector<ObsGroup>& groups() const { return groups_; }
    const std::vector<double>& times() const { return times_; }
    const std::vector<ScalarBox>& boxes() const { return boxes_; }

    // Default starting point in constrained space: scalars at the supplied
    // values (generative values when known), crowding at the discretised
    // logistic 1 - u, diffusivity at the copula median g = 1/2.
    Eigen::VectorXd initial_point(const std::map<std::string, double>& scalar_init) const {
        Eigen::VectorXd x(layout_.dim());
        for (int i = 0; i < layout_.scalar_count(); ++i) {
            auto it = scalar_init.find(layout_.scalar_names[i]);
            if (it != scalar_init.end() && it->second > 0) {
                x[i] = std::clamp(it->second, boxes_[i].lo, boxes_[i].hi);
            } else {
                x[i] = std::sqrt(boxes_[i].lo * boxes_[i].hi);  // box midpoint in log space
            }
        }
        if (layout_.crowding_nodes > 0) {
            auto u = spec_.gp1.interior_positions();
            for (int i = 0; i < layout_.crowding_nodes; ++i)
                x[layout_.crowding_offset() + i] = 1.0 - u[i];
        }
        for (int i = 0; i < layout_.diffusivity_nodes; ++i)
            x[layout_.diffusivity_offset() + i] = 0.5;
        return x;
    }

    // Prior with scalars measured in their log coordinates: 0 inside the box
    // (flat there), -inf outside, plus the GP block densities. This is the
    // natural reference density for the log-uniform scalar priors.
    double log_prior(const Eigen::VectorXd& x) const {
        check_dim(x);
        for (int i = 0; i < layout_.scalar_count(); ++i)
            if (!std::isfinite(x[i]) || x[i] < boxes_[i].lo || x[i] > boxes_[i].hi) return kNegInf;
        double lp = 0.0;
        if (layout_.crowding_nodes > 0)
            lp += gp1_->log_density(x.segment(layout_.crowding_offset(), layout_.crowding_nodes));
        if (layout_.diffusivity_nodes > 0)
            lp += gp2_->log_density(x.segment(layout_.diffusivity_offset(), layout_.diffusivity_nodes));
        return std::isfinite(lp) ? lp : kNegInf;
    }

    // Prior log-density in constrained space (up to normalising constants):
    // log-uniform boxes plus the GP block densities.
    double log_prior_con(const Eigen::VectorXd& x) const {
        check_dim(x);
        double lp = 0.0;
        for (int i = 0; i < layout_.scalar_count(); ++i) {
            double v = x[i];
            if (!std::isfinite(v) || v < boxes_[i].lo || v > boxes_[i].hi) return kNegInf;
            lp -= std::log(v);
        }
        if (layout_.crowding_nodes > 0) {
            double g1 = gp1_->log_density(x.segment(layout_.crowding_offset(), layout_.crowding_nodes));
            if (!std::isfinite(g1)) return kNegInf;
            lp += g1;
        }
        if (layout_.diffusivity_nodes > 0) {
            double g2 = gp2_->log_density(x.segment(layout_.diffusivity_offset(), layout_.diffusivity_nodes));
            if (!std::isfinite(g2)) return kNegInf;
            lp += g2;
        }
        return lp;
    }

    // Model predictions per observation group. Returns false on a soft
    // failure (solver breakdown or out-of-domain parameters); the caller
    // scores the proposal -inf.
    bool predict(const Eigen::VectorXd& x, std::vector<double>& pred) const {
        check_dim(x);
        pred.resize(groups_.size());
        try {
            if (!model_is_pde(spec_.kind)) return predict_ode(x, pred);
            return predict_pde(x, pred);
        } catch (const std::exception& e) {
            note_failure(e.what());
            return false;
        }
    }

    double log_likelihood(const Eigen::VectorXd& x) const {
        std::vector<double> pred;
        if (!predict(x, pred)) return kNegInf;
        double ll = 0.0;
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            const ObsGroup& g = groups_[gi];
            double sigma = x[sigma_index(g.stat)];
            if (!(sigma > 0)) return kNegInf;
            double ss = g.sumsq - 2.0 * pred[gi] * g.sum + g.n * pred[gi] * pred[gi];
            ll += -g.n * std::log(sigma) - 0.5 * g.n * kLog2Pi - 0.5 * ss / (sigma * sigma);
        }
        return std::isfinite(ll) ? ll : kNegInf;
    }

    // Posterior log-density in constrained space (for MAP and reporting).
    double log_posterior_con(const Eigen::VectorXd& x) const {
        double lp = log_prior_con(x);
        if (!std::isfinite(lp)) return kNegInf;
        double ll = log_likelihood(x);
        if (!std::isfinite(ll)) return kNegInf;
        return lp + ll;
    }

    // Sampler target: posterior density in unconstrained space. Also reports
    // the constrained-space value so the trace stores both consistently.
    double log_posterior_unc(const Eigen::VectorXd& y, double* lp_con_out = nullptr) const {
        check_dim(y);
        Eigen::VectorXd x = layout_.to_constrained(y);
        double lp_con = log_posterior_con(x);
        if (lp_con_out) *lp_con_out = lp_con;
        if (!std::isfinite(lp_con)) return kNegInf;
        return lp_con + layout_.log_jacobian(x);
    }

    int sigma_index(Statistic stat) const {
        if (!model_is_pde(spec_.kind)) return layout_.scalar_index("sigma");
        if (stat == Statistic::front_location) return layout_.scalar_index("sigma2");
        return layout_.scalar_index("sigma1");
    }

    long failure_count() const { return failures_; }
    const std::string& last_failure() const { return last_failure_; }

    // Node values of a draw assembled into the evaluable functions.
    PiecewiseLinearFunction crowding_plf(const Eigen::VectorXd& x) const {
        std::vector<double> f(x.data() + layout_.crowding_offset(),
                              x.data() + layout_.crowding_offset() + layout_.crowding_nodes);
        return CrowdingGrid{spec_.gp1.m}.with_interior(f);
    }

    PiecewiseLinearFunction diffusivity_plf(const Eigen::VectorXd& x) const {
        std::vector<double> g(x.data() + layout_.diffusivity_offset(),
                              x.data() + layout_.diffusivity_offset() + layout_.diffusivity_nodes);
        return DiffusivityGrid{spec_.gp2.m, spec_.gp2.t_max}.with_free_values(g);
    }

private:
    void check_dim(const Eigen::VectorXd& v) const {
        if (v.size() != layout_.dim())
            throw std::invalid_argument("parameter vector does not match model layout");
    }

    void build_groups(const Dataset& data) {
        std::map<std::pair<int, double>, ObsGroup> cells;
        for (const auto& rec : data.records) {
            if (!std::isfinite(rec.value) || !std::isfinite(rec.time) || rec.time < 0)
                throw std::invalid_argument("dataset contains a non-finite or negative-time record");
            auto key = std::make_pair(int(rec.statistic), rec.time);
            auto& cell = cells[key];
            cell.stat = rec.statistic;
            cell.time = rec.time;
            cell.n += 1;
            cell.sum += rec.value;
            cell.sumsq += rec.value * rec.value;
        }
        std::vector<double> ts;
        for (const auto& [key, cell] : cells) ts.push_back(cell.time);
        std::sort(ts.begin(), ts.end());
        ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
        times_ = ts;
        for (const auto& [key, cell] : cells) {
            ObsGroup g = cell;
            g.time_index = int(std::lower_bound(times_.begin(), times_.end(), g.time) - times_.begin());
            groups_.push_back(g);
        }
    }

    bool predict_ode(const Eigen::VectorXd& x, std::vector<double>& pred) const {
        OdeParams p{x[layout_.scalar_index("r")], x[layout_.scalar_index("K")],
                    x[layout_.scalar_index("u0")]};
        if (!(p.K > 0 && p.u0 > 0 && p.u0 < p.K)) {
            note_failure("proposal outside ODE domain (need 0 < u0 < K)");
            return false;
        }
        std::vector<double> u;
        switch (spec_.kind) {
            case ModelKind::logistic:
                u = solve_richards(p, 1.0, times_);
                break;
            case ModelKind::known_truth:
                u = solve_richards(p, spec_.beta_known, times_);
                break;
            case ModelKind::richards:
                u = solve_richards(p, x[layout_.scalar_index("beta")], times_);
                break;
            case ModelKind::gp_crowding: {
                auto f = crowding_plf(x);
                u = solve_piecewise_analytic(p, f, times_);
                break;
            }
            default:
                throw std::logic_error("unreachable");
        }
        for (double v : u)
            if (!std::isfinite(v)) {
                note_failure("ODE solution non-finite");
                return false;
            }
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) pred[gi] = u[groups_[gi].time_index];
        return true;
    }

    bool predict_pde(const Eigen::VectorXd& x, std::vector<double>& pred) const {
        double u0 = x[layout_.scalar_index("u0")];
        if (!(u0 > 0 && u0 < spec_.K_fixed)) {
            note_failure("proposal outside PDE domain (need 0 < u0 < K)");
            return false;
        }
        PdeParams p{x[layout_.scalar_index("r")], spec_.K_fixed, x[layout_.scalar_index("D")],
                    spec_.L, spec_.grid_n};

        std::vector<double> ic = spec_.ic == "scratch"
                                     ? scratch_ic(p, u0, spec_.alpha1, spec_.alpha2)
                                     : step_ic(p, u0, spec_.step_frac);

        std::function<double(double)> crow;
        if (model_has_crowding(spec_.kind)) {
            auto f = crowding_plf(x);
            crow = [f](double v) { return f.eval_clamped(v); };
        } else {
            crow = [](double v) { return 1.0 - v; };
        }

        std::function<double(double)> dhat;
        if (model_has_diffusivity(spec_.kind)) {
            auto d = diffusivity_plf(x);
            dhat = [d](double t) { return d.eval_clamped(t); };
        } else {
            dhat = [](double) { return 1.0; };
        }

        PdeSolution sol = solve_pde(p, ic, crow, dhat, times_);

        std::vector<double> U(times_.size()), F;
        for (std::size_t k = 0; k < times_.size(); ++k) U[k] = overall_density(sol.u[k]);
        bool need_fronts = layout_.has_scalar("sigma2");
        if (need_fronts) {
            F.resize(times_.size());
            for (std::size_t k = 0; k < times_.size(); ++k) F[k] = front_location(sol.u[k], sol.x);
        }
        for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
            const ObsGroup& g = groups_[gi];
            pred[gi] = g.stat == Statistic::front_location ? F[g.time_index] : U[g.time_index];
            if (!std::isfinite(pred[gi])) {
                note_failure("PDE summary non-finite");
                return false;
            }
        }
        return true;
    }

    void note_failure(const std::string& what) const {
        failures_ += 1;
        last_failure_ = what;
    }

    ModelSpec spec_;
    ParameterLayout layout_;
    std::vector<ScalarBox> boxes_;
    std::vector<ObsGroup> groups_;
    std::vector<double> times_;
    std::optional<Gp1Prior> gp1_;
    std::optional<Gp2Prior> gp2_;

    mutable long failures_ = 0;
    mutable std::string last_failure_;
};

}  // namespace misspec
