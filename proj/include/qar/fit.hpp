// fit.hpp: bounded least-squares fits of model parameters to traces.
//
// Nelder-Mead in transformed coordinates (log for positive parameters), followed by an
// optional Levenberg-Marquardt polish. Uncertainties come from the Gauss-Newton Hessian.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "qar/errors.hpp"
#include "qar/experiments.hpp"

namespace qar {

struct Observation {
    double x = 0.0;
    double value = 0.0;
    /// Standard deviation; 0 means unknown (unit weight, covariance rescaled by the residual).
    double sigma = 0.0;
};

struct FreeParameter {
    std::string name;
    double initial = 0.0;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();
    bool log_scale = false;
};

/// Model values at the given abscissae for the given parameter values (ordered like the
/// problem's free parameters).
using ForwardModel = std::function<std::vector<double>(std::span<const double> params, std::span<const double> xs)>;

struct FitProblem {
    std::vector<Observation> observed;
    std::vector<FreeParameter> free;
    ForwardModel model;

    void validate() const {
        if (!model) throw ValidationError("fit: forward model is empty");
        if (observed.size() < 2 * free.size()) {
            throw IllPosed("fit: need at least 2 data points per free parameter");
        }
        for (const auto& o : observed) {
            if (!std::isfinite(o.x) || !std::isfinite(o.value) || !(o.sigma >= 0.0)) {
                throw ValidationError("fit: observation is not finite");
            }
        }
        for (const auto& f : free) {
            if (!(f.lower <= f.initial && f.initial <= f.upper)) {
                throw ValidationError("fit: bounds of '" + f.name + "' exclude the initial guess");
            }
            if (f.log_scale && !(f.lower > 0.0)) {
                throw ValidationError("fit: log-scale parameter '" + f.name + "' needs a positive lower bound");
            }
        }
    }
};

struct FitOptions {
    std::size_t max_evaluations = 4000;
    double rel_loss = 1e-10;
    double rel_step = 1e-8;
    bool polish = true;
    /// Extra simplex starts drawn uniformly inside the bounds (finite bounds only).
    unsigned restarts = 0;
    std::uint64_t seed = 0;
};

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> values;
    std::vector<double> uncertainties;
    double loss = 0.0;
    double initial_loss = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
    std::size_t evaluations = 0;
    /// Best loss after each accepted iteration.
    std::vector<double> loss_history;
};

namespace detail {

class FitObjective {
public:
    explicit FitObjective(const FitProblem& p) : problem_(p) {
        // Sorting makes the loss independent of the order the data arrived in.
        obs_ = p.observed;
        std::sort(obs_.begin(), obs_.end(), [](const Observation& a, const Observation& b) {
            return a.x != b.x ? a.x < b.x : (a.value != b.value ? a.value < b.value : a.sigma < b.sigma);
        });
        xs_.reserve(obs_.size());
        for (const auto& o : obs_) xs_.push_back(o.x);
    }

    std::size_t size() const { return obs_.size(); }
    std::size_t dim() const { return problem_.free.size(); }
    bool log_scale(std::size_t k) const { return problem_.free[k].log_scale; }

    double to_internal(std::size_t k, double v) const { return problem_.free[k].log_scale ? std::log(v) : v; }
    double to_external(std::size_t k, double u) const {
        const auto& f = problem_.free[k];
        const double v = f.log_scale ? std::exp(u) : u;
        return std::clamp(v, f.lower, f.upper);
    }
    double lower_internal(std::size_t k) const { return to_internal(k, problem_.free[k].lower); }
    double upper_internal(std::size_t k) const { return to_internal(k, problem_.free[k].upper); }

    Eigen::VectorXd clamp_internal(Eigen::VectorXd u) const {
        for (Eigen::Index k = 0; k < u.size(); ++k) {
            const auto i = static_cast<std::size_t>(k);
            u(k) = std::clamp(u(k), lower_internal(i), upper_internal(i));
        }
        return u;
    }

    std::vector<double> external(const Eigen::VectorXd& u) const {
        std::vector<double> v(dim());
        for (std::size_t k = 0; k < dim(); ++k) v[k] = to_external(k, u(static_cast<Eigen::Index>(k)));
        return v;
    }

    /// Weighted residuals; non-finite model output makes every residual infinite.
    Eigen::VectorXd residuals(std::span<const double> params) {
        ++evaluations;
        const auto y = problem_.model(params, xs_);
        if (y.size() != obs_.size()) throw DimensionMismatch("fit: forward model returned the wrong number of values");
        Eigen::VectorXd r(static_cast<Eigen::Index>(obs_.size()));
        for (std::size_t k = 0; k < obs_.size(); ++k) {
            const double w = obs_[k].sigma > 0.0 ? obs_[k].sigma : 1.0;
            r(static_cast<Eigen::Index>(k)) = (y[k] - obs_[k].value) / w;
        }
        if (!r.allFinite()) r.setConstant(std::numeric_limits<double>::infinity());
        return r;
    }

    double loss(std::span<const double> params) { return residuals(params).squaredNorm(); }
    double loss_internal(const Eigen::VectorXd& u) { return loss(external(u)); }

    bool has_sigma() const {
        return std::all_of(obs_.begin(), obs_.end(), [](const Observation& o) { return o.sigma > 0.0; });
    }

    std::size_t evaluations = 0;

private:
    const FitProblem& problem_;
    std::vector<Observation> obs_;
    std::vector<double> xs_;
};

struct SimplexOutcome {
    Eigen::VectorXd best;
    double loss = 0.0;
    bool converged = false;
};

inline SimplexOutcome nelder_mead(FitObjective& obj, Eigen::VectorXd start, double start_loss, const FitOptions& opt,
                                  std::size_t budget_end, FitResult& trace) {
    const auto n = static_cast<Eigen::Index>(obj.dim());
    std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), start);
    std::vector<double> f(static_cast<std::size_t>(n + 1), start_loss);
    for (Eigen::Index k = 0; k < n; ++k) {
        auto& p = pts[static_cast<std::size_t>(k + 1)];
        const double lo = obj.lower_internal(static_cast<std::size_t>(k));
        const double hi = obj.upper_internal(static_cast<std::size_t>(k));
        double h = 0.2 * std::max(std::abs(start(k)), 1.0);
        if (std::isfinite(lo) && std::isfinite(hi)) h = std::min(h, 0.25 * (hi - lo));
        p(k) += (start(k) + h <= hi) ? h : -h;
        p = obj.clamp_internal(p);
        f[static_cast<std::size_t>(k + 1)] = obj.loss_internal(p);
    }

    std::vector<std::size_t> order(pts.size());
    auto sort_simplex = [&] {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[a] < f[b]; });
        std::vector<Eigen::VectorXd> p2;
        std::vector<double> f2;
        for (auto i : order) {
            p2.push_back(pts[i]);
            f2.push_back(f[i]);
        }
        pts = std::move(p2);
        f = std::move(f2);
    };

    bool converged = false;
    while (obj.evaluations < budget_end) {
        sort_simplex();
        trace.loss_history.push_back(f.front());
        ++trace.iterations;

        double diameter = 0.0;
        for (std::size_t i = 1; i < pts.size(); ++i) {
            const double scale = std::max(pts.front().cwiseAbs().maxCoeff(), 1.0);
            diameter = std::max(diameter, (pts[i] - pts.front()).cwiseAbs().maxCoeff() / scale);
        }
        const double spread = f.back() - f.front();
        if (spread <= opt.rel_loss * std::abs(f.front()) || diameter <= opt.rel_step ||
            f.back() <= std::numeric_limits<double>::min()) {
            converged = true;
            break;
        }

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (Eigen::Index i = 0; i < n; ++i) centroid += pts[static_cast<std::size_t>(i)];
        centroid /= static_cast<double>(n);
        const Eigen::VectorXd& worst = pts.back();

        auto eval = [&](const Eigen::VectorXd& x) { return obj.loss_internal(x); };
        const Eigen::VectorXd xr = obj.clamp_internal(centroid + (centroid - worst));
        const double fr = eval(xr);
        if (fr < f.front()) {
            const Eigen::VectorXd xe = obj.clamp_internal(centroid + 2.0 * (centroid - worst));
            const double fe = eval(xe);
            if (fe < fr) {
                pts.back() = xe;
                f.back() = fe;
            } else {
                pts.back() = xr;
                f.back() = fr;
            }
            continue;
        }
        if (fr < f[f.size() - 2]) {
            pts.back() = xr;
            f.back() = fr;
            continue;
        }
        const bool outside = fr < f.back();
        const Eigen::VectorXd xc =
            outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid)) : Eigen::VectorXd(centroid + 0.5 * (worst - centroid));
        const double fc = eval(xc);
        if (fc < (outside ? fr : f.back())) {
            pts.back() = xc;
            f.back() = fc;
            continue;
        }
        for (std::size_t i = 1; i < pts.size(); ++i) {
            pts[i] = pts.front() + 0.5 * (pts[i] - pts.front());
            f[i] = eval(pts[i]);
        }
    }
    sort_simplex();
    return {pts.front(), f.front(), converged};
}

/// Forward-difference Jacobian of the weighted residuals with respect to internal coordinates.
inline Eigen::MatrixXd jacobian_internal(FitObjective& obj, const Eigen::VectorXd& u, const Eigen::VectorXd& r0) {
    const auto n = u.size();
    Eigen::MatrixXd j(r0.size(), n);
    for (Eigen::Index k = 0; k < n; ++k) {
        Eigen::VectorXd up = u;
        double h = 1e-6 * std::max(std::abs(u(k)), 1.0);
        if (up(k) + h > obj.upper_internal(static_cast<std::size_t>(k))) h = -h;
        up(k) += h;
        j.col(k) = (obj.residuals(obj.external(up)) - r0) / h;
    }
    return j;
}

inline void levenberg_marquardt(FitObjective& obj, Eigen::VectorXd& u, double& loss, std::size_t budget_end,
                                FitResult& trace) {
    double lambda = 1e-3;
    for (int iter = 0; iter < 50 && obj.evaluations < budget_end; ++iter) {
        const Eigen::VectorXd r = obj.residuals(obj.external(u));
        const Eigen::MatrixXd j = jacobian_internal(obj, u, r);
        const Eigen::MatrixXd jtj = j.transpose() * j;
        const Eigen::VectorXd g = j.transpose() * r;
        bool improved = false;
        for (int tries = 0; tries < 10; ++tries) {
            Eigen::MatrixXd a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-30);
            const Eigen::VectorXd step = a.ldlt().solve(-g);
            if (!step.allFinite()) break;
            const Eigen::VectorXd trial = obj.clamp_internal(u + step);
            const double f = obj.loss_internal(trial);
            if (f < loss) {
                const double rel = (loss - f) / std::max(loss, std::numeric_limits<double>::min());
                u = trial;
                loss = f;
                lambda = std::max(lambda / 10.0, 1e-12);
                trace.loss_history.push_back(loss);
                ++trace.iterations;
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) break;
    }
}

/// 1-sigma uncertainties in external units from (J^T J)^-1 with J taken in external units.
inline std::vector<double> uncertainties(FitObjective& obj, const Eigen::VectorXd& u, double loss) {
    const auto n = u.size();
    std::vector<double> out(static_cast<std::size_t>(n), std::numeric_limits<double>::quiet_NaN());
    if (n == 0) return out;
    const Eigen::VectorXd r = obj.residuals(obj.external(u));
    Eigen::MatrixXd j = jacobian_internal(obj, u, r);
    for (Eigen::Index k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        if (obj.log_scale(i)) j.col(k) /= obj.to_external(i, u(k));  // du/dv = 1/v
    }
    const Eigen::MatrixXd jtj = j.transpose() * j;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jtj);
    if (!lu.isInvertible()) return out;
    Eigen::MatrixXd cov = lu.inverse();
    const auto dof = static_cast<double>(obj.size()) - static_cast<double>(n);
    if (!obj.has_sigma() && dof > 0) cov *= loss / dof;
    for (Eigen::Index k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = std::sqrt(std::max(cov(k, k), 0.0));
    return out;
}

inline void require_variance(const FitProblem& p) {
    if (p.free.empty() || p.observed.empty()) return;
    const double first = p.observed.front().value;
    const bool flat = std::all_of(p.observed.begin(), p.observed.end(),
                                  [first](const Observation& o) { return o.value == first; });
    if (flat) throw IllPosed("fit: observed values have zero variance");
}

}  // namespace detail

inline FitResult fit_trace(const FitProblem& problem, const FitOptions& opt = {}) {
    problem.validate();
    detail::require_variance(problem);
    detail::FitObjective obj(problem);

    FitResult res;
    for (const auto& f : problem.free) {
        res.names.push_back(f.name);
        res.values.push_back(f.initial);
    }
    res.initial_loss = obj.loss(res.values);
    if (!std::isfinite(res.initial_loss)) throw ValidationError("fit: forward model is not finite at the initial guess");
    res.loss = res.initial_loss;
    res.loss_history.push_back(res.loss);

    const auto n = static_cast<Eigen::Index>(problem.free.size());
    if (n == 0) {
        res.converged = true;
        res.evaluations = obj.evaluations;
        return res;
    }

    Eigen::VectorXd u0(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        u0(k) = obj.to_internal(static_cast<std::size_t>(k), problem.free[static_cast<std::size_t>(k)].initial);
    }
    const std::size_t budget_end = opt.max_evaluations;

    Eigen::VectorXd best = u0;
    double best_loss = res.initial_loss;
    bool converged = false;
    // A converged simplex is restarted once from its best vertex to guard against collapse.
    for (int pass = 0; pass < 2 && obj.evaluations < budget_end; ++pass) {
        auto out = detail::nelder_mead(obj, best, best_loss, opt, budget_end, res);
        const double before = best_loss;
        if (out.loss <= best_loss) {
            best = out.best;
            best_loss = out.loss;
        }
        converged = out.converged;
        if (!converged || before - best_loss <= opt.rel_loss * std::abs(best_loss)) break;
    }

    std::mt19937_64 rng(opt.seed);
    for (unsigned r = 0; r < opt.restarts && obj.evaluations < budget_end; ++r) {
        Eigen::VectorXd start(n);
        bool finite = true;
        for (Eigen::Index k = 0; k < n; ++k) {
            const double lo = obj.lower_internal(static_cast<std::size_t>(k));
            const double hi = obj.upper_internal(static_cast<std::size_t>(k));
            if (!std::isfinite(lo) || !std::isfinite(hi)) finite = false;
            start(k) = finite ? std::uniform_real_distribution<double>(lo, hi)(rng) : u0(k);
        }
        if (!finite) break;
        const double f0 = obj.loss_internal(start);
        auto out = detail::nelder_mead(obj, start, f0, opt, budget_end, res);
        if (out.loss < best_loss) {
            best = out.best;
            best_loss = out.loss;
            converged = out.converged;
        }
    }

    if (opt.polish && best_loss > 0.0) detail::levenberg_marquardt(obj, best, best_loss, budget_end + 200 * n, res);

    res.values = obj.external(best);
    res.loss = best_loss;
    res.converged = converged;
    res.uncertainties = detail::uncertainties(obj, best, best_loss);
    res.evaluations = obj.evaluations;
    return res;
}

struct ProfilePoint {
    double value = 0.0;
    double loss = 0.0;
};

struct ProfileResult {
    std::string parameter;
    std::vector<ProfilePoint> points;
    /// False when the loss does not change along the grid.
    bool identifiable = true;
};

/// Loss along `grid` for one parameter, re-optimizing the others at each point.
inline ProfileResult profile_loss(const FitProblem& problem, const std::string& parameter,
                                  std::span<const double> grid, const FitOptions& opt = {}) {
    problem.validate();
    const auto it = std::find_if(problem.free.begin(), problem.free.end(),
                                 [&](const FreeParameter& f) { return f.name == parameter; });
    if (it == problem.free.end()) throw ValidationError("profile_loss: '" + parameter + "' is not a free parameter");
    if (grid.empty()) throw ValidationError("profile_loss: grid is empty");
    const auto fixed_index = static_cast<std::size_t>(it - problem.free.begin());

    ProfileResult out;
    out.parameter = parameter;
    for (double g : grid) {
        FitProblem sub;
        sub.observed = problem.observed;
        for (std::size_t k = 0; k < problem.free.size(); ++k) {
            if (k != fixed_index) sub.free.push_back(problem.free[k]);
        }
        const auto& full = problem;
        sub.model = [&full, fixed_index, g](std::span<const double> p, std::span<const double> xs) {
            std::vector<double> all(p.begin(), p.end());
            all.insert(all.begin() + static_cast<std::ptrdiff_t>(fixed_index), g);
            return full.model(all, xs);
        };
        double loss = 0.0;
        if (sub.free.empty()) {
            detail::FitObjective obj(sub);
            loss = obj.loss({});
        } else {
            loss = fit_trace(sub, opt).loss;
        }
        out.points.push_back({g, loss});
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : out.points) {
        lo = std::min(lo, p.loss);
        hi = std::max(hi, p.loss);
    }
    out.identifiable = out.points.size() < 2 || (hi - lo) > 1e-6 * std::max(lo, 1e-12);
    return out;
}

// ---------------------------------------------------------------------------------------
// Binding fit parameters to experiment specs.

/// Names accepted by bind_parameter.
inline const std::vector<std::string>& fit_parameter_names() {
    static const std::vector<std::string> names{"A_hz",     "n_h",       "n_c",       "amplitude",
                                                "gamma1_hz", "gamma2_hz", "t_relax_s", "initial_p1"};
    return names;
}

/// Applies one named value to a spec; `amplitude` is handled by the caller.
inline void bind_parameter(ExperimentSpec& spec, const std::string& name, double v) {
    if (name == "A_hz") {
        spec.params.A = angular(v);
    } else if (name == "n_h") {
        spec.n_h = {v};
    } else if (name == "n_c") {
        spec.n_c = {v};
    } else if (name == "gamma1_hz") {
        spec.params.gamma1 = angular(v);
    } else if (name == "gamma2_hz") {
        spec.params.gamma2 = angular(v);
    } else if (name == "t_relax_s") {
        spec.params.t_relax = v;
    } else if (name == "initial_p1") {
        spec.initial_p1 = std::clamp(v, 0.0, 1.0);
    } else if (name != "amplitude") {
        throw ValidationError("fit: unknown parameter '" + name + "'");
    }
}

/// Forward model p1(t) of a trace experiment with the named parameters free. Drive-rate
/// sweeps are modeled at the drive rate spec.drive.Omega.
inline ForwardModel trace_forward_model(ExperimentSpec base, std::vector<std::string> names) {
    for (const auto& n : names) bind_parameter(base, n, 1.0);  // rejects unknown names early
    return [base = std::move(base), names = std::move(names)](std::span<const double> p, std::span<const double> xs) {
        ExperimentSpec spec = base;
        double amplitude = 1.0;
        for (std::size_t k = 0; k < names.size(); ++k) {
            if (names[k] == "amplitude") amplitude = p[k];
            bind_parameter(spec, names[k], p[k]);
        }
        std::vector<double> y;
        if (spec.kind == ExperimentKind::drive_rate_sweep || spec.kind == ExperimentKind::avoided_crossing_scan) {
            y = simulate_driven(spec, 0.0, 0.0, spec.drive.Omega, xs);
        } else {
            spec.times.assign(xs.begin(), xs.end());
            y = simulate_trace(spec, spec.n_h.front(), spec.n_c.front()).p1;
        }
        for (auto& v : y) v *= amplitude;
        return y;
    };
}

}  // namespace qar
