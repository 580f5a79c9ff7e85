#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace misspec {

// Coordinate transforms between constrained model space and the
// unconstrained space the sampler works in. Positive scalars and crowding
// nodes use log; diffusivity nodes (support (0,1)) use logit. identity is
// kept for box-rejection sampling of scalars (used to cross-check that the
// posterior is invariant to the transform choice).
enum class Transform { log_positive, logit_unit, identity };

inline double sigmoid(double y) {
    if (y >= 0) return 1.0 / (1.0 + std::exp(-y));
    double e = std::exp(y);
    return e / (1.0 + e);
}

inline double logit(double x) {
    if (!(x > 0 && x < 1)) throw std::domain_error("logit requires x in (0,1)");
    return std::log(x) - std::log1p(-x);
}

// Flat coordinate layout: named scalars first, then crowding nodes f_1..f_m,
// then diffusivity nodes g_0..g_m. Function blocks are absent when their
// node count is zero.
struct ParameterLayout {
    std::vector<std::string> scalar_names;
    std::vector<Transform> scalar_transforms;  // parallel to scalar_names
    int crowding_nodes = 0;     // m interior f nodes
    int diffusivity_nodes = 0;  // m+1 free g nodes

    void validate() const {
        if (scalar_names.size() != scalar_transforms.size())
            throw std::invalid_argument("scalar names/transforms length mismatch");
        for (Transform t : scalar_transforms)
            if (t == Transform::logit_unit)
                throw std::invalid_argument("scalars are log- or identity-transformed");
        if (crowding_nodes < 0 || diffusivity_nodes < 0)
            throw std::invalid_argument("negative node count");
    }

    int scalar_count() const { return int(scalar_names.size()); }
    int crowding_offset() const { return scalar_count(); }
    int diffusivity_offset() const { return scalar_count() + crowding_nodes; }
    int dim() const { return scalar_count() + crowding_nodes + diffusivity_nodes; }

    int scalar_index(const std::string& name) const {
        for (int i = 0; i < scalar_count(); ++i)
            if (scalar_names[i] == name) return i;
        throw std::invalid_argument("unknown scalar: " + name);
    }

    bool has_scalar(const std::string& name) const {
        for (const auto& s : scalar_names)
            if (s == name) return true;
        return false;
    }

    Transform transform(int i) const {
        if (i < 0 || i >= dim()) throw std::out_of_range("coordinate index");
        if (i < scalar_count()) return scalar_transforms[i];
        if (i < diffusivity_offset()) return Transform::log_positive;
        return Transform::logit_unit;
    }

    std::vector<std::string> coordinate_names() const {
        std::vector<std::string> names = scalar_names;
        for (int i = 1; i <= crowding_nodes; ++i) names.push_back("f_" + std::to_string(i));
        for (int i = 0; i < diffusivity_nodes; ++i) names.push_back("g_" + std::to_string(i));
        return names;
    }

    Eigen::VectorXd to_unconstrained(const Eigen::VectorXd& x) const {
        if (x.size() != dim()) throw std::invalid_argument("parameter vector/layout size mismatch");
        Eigen::VectorXd y(x.size());
        for (int i = 0; i < x.size(); ++i) {
            switch (transform(i)) {
                case Transform::log_positive:
                    if (!(x[i] > 0)) throw std::domain_error("log transform requires positive value");
                    y[i] = std::log(x[i]);
                    break;
                case Transform::logit_unit:
                    y[i] = logit(x[i]);
                    break;
                case Transform::identity:
                    y[i] = x[i];
                    break;
            }
        }
        return y;
    }

    Eigen::VectorXd to_constrained(const Eigen::VectorXd& y) const {
        if (y.size() != dim()) throw std::invalid_argument("parameter vector/layout size mismatch");
        Eigen::VectorXd x(y.size());
        for (int i = 0; i < y.size(); ++i) {
            switch (transform(i)) {
                case Transform::log_positive: x[i] = std::exp(y[i]); break;
                case Transform::logit_unit: x[i] = sigmoid(y[i]); break;
                case Transform::identity: x[i] = y[i]; break;
            }
        }
        return x;
    }

    // log |dx/dy| summed over coordinates, given constrained values x.
    // log transform: log x; logit: log(g(1-g)); identity: 0.
    double log_jacobian(const Eigen::VectorXd& x) const {
        double lj = 0.0;
        for (int i = 0; i < x.size(); ++i) {
            switch (transform(i)) {
                case Transform::log_positive: lj += std::log(x[i]); break;
                case Transform::logit_unit: lj += std::log(x[i]) + std::log1p(-x[i]); break;
                case Transform::identity: break;
            }
        }
        return lj;
    }
};

}  // namespace misspec
