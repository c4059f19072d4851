#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "dograph/matrix.hpp"
#include "dograph/partition.hpp"
#include "dograph/rng.hpp"

namespace dograph {

struct SimplexWeights {
    std::vector<double> w;

    void validate(double tol = 1e-9) const {
        double sum = 0.0;
        for (double x : w) {
            if (x < 0.0) throw std::invalid_argument("SimplexWeights: negative entry");
            sum += x;
        }
        if (std::abs(sum - 1.0) > tol)
            throw std::invalid_argument("SimplexWeights: entries sum to " + std::to_string(sum));
    }
};

enum class ObjectiveKind { variance, robust_softmax, alignment, uncertainty };

inline const char* objective_name(ObjectiveKind k) {
    switch (k) {
        case ObjectiveKind::variance: return "variance";
        case ObjectiveKind::robust_softmax: return "robust_softmax";
        case ObjectiveKind::alignment: return "alignment";
        case ObjectiveKind::uncertainty: return "uncertainty";
    }
    return "?";
}

inline ObjectiveKind objective_from_name(const std::string& name) {
    if (name == "variance") return ObjectiveKind::variance;
    if (name == "robust_softmax") return ObjectiveKind::robust_softmax;
    if (name == "alignment") return ObjectiveKind::alignment;
    if (name == "uncertainty") return ObjectiveKind::uncertainty;
    throw std::invalid_argument("unknown objective kind: " + name);
}

struct ObjectiveConfig {
    ObjectiveKind kind = ObjectiveKind::uncertainty;
    double lambda = 1.0;        // variance: weight on ||sum w_j g_j||^2
    double tau = 1.0;           // robust_softmax temperature
    double beta = 1.0;          // uncertainty: weight on sum sigma_j^2 w_j
    std::size_t max_iters = 500;
    double tol = 1e-8;
    double cosine_floor = 1e-6;  // alignment clamp on cosines
    bool literal_variance = false;  // unweighted Var_j reading (constant in w)
    std::size_t restarts = 5;       // extra random starts for projected gradient descent

    void validate() const {
        if (lambda < 0.0 || beta < 0.0 || cosine_floor < 0.0)
            throw std::invalid_argument("ObjectiveConfig: lambda, beta, cosine_floor must be >= 0");
        if (!(tau > 0.0)) throw std::invalid_argument("ObjectiveConfig: tau must be positive");
        if (max_iters < 1) throw std::invalid_argument("ObjectiveConfig: max_iters must be >= 1");
        if (!(tol > 0.0)) throw std::invalid_argument("ObjectiveConfig: tol must be positive");
    }
};

enum class SolverStatus { converged, max_iters_reached, fallback_uniform };

inline const char* solver_status_name(SolverStatus s) {
    switch (s) {
        case SolverStatus::converged: return "converged";
        case SolverStatus::max_iters_reached: return "max_iters_reached";
        case SolverStatus::fallback_uniform: return "fallback_uniform";
    }
    return "?";
}

struct SolverResult {
    SimplexWeights weights;
    double objective = 0.0;
    SolverStatus status = SolverStatus::converged;
    std::size_t iterations = 0;
    double duality_gap = 0.0;  // uncertainty solver only
};

// Euclidean projection onto the probability simplex (sort-and-threshold).
inline SimplexWeights project_to_simplex(const std::vector<double>& v) {
    if (v.empty()) throw std::invalid_argument("project_to_simplex: empty vector");
    std::vector<double> u = v;
    std::sort(u.begin(), u.end(), std::greater<double>());
    double cumsum = 0.0, theta = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        cumsum += u[i];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) theta = t;
    }
    SimplexWeights out;
    out.w.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.w[i] = std::max(0.0, v[i] - theta);
    // Exact renormalization guards against rounding drift in the threshold.
    double sum = std::accumulate(out.w.begin(), out.w.end(), 0.0);
    if (sum <= 0.0) {
        std::fill(out.w.begin(), out.w.end(), 1.0 / static_cast<double>(v.size()));
    } else {
        for (double& x : out.w) x /= sum;
    }
    return out;
}

namespace detail {

inline std::vector<double> uniform_weights(std::size_t m) {
    return std::vector<double>(m, 1.0 / static_cast<double>(m));
}

inline std::vector<double> mean_norms(const std::vector<std::vector<double>>& means) {
    std::vector<double> a(means.size());
    for (std::size_t j = 0; j < means.size(); ++j) a[j] = norm2(means[j]);
    return a;
}

// Gram matrix of the domain means, G_jk = <g_j, g_k>.
inline Matrix mean_gram(const std::vector<std::vector<double>>& means) {
    const std::size_t m = means.size();
    Matrix g(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            const double v = dot(means[i], means[j]);
            g(i, j) = v;
            g(j, i) = v;
        }
    return g;
}

// Generic projected gradient descent on the simplex with backtracking.
template <typename F, typename Grad>
SolverResult pgd_simplex(F f, Grad grad, std::size_t m, const ObjectiveConfig& cfg) {
    std::vector<std::vector<double>> starts;
    starts.push_back(uniform_weights(m));
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> e(m, 0.0);
        e[j] = 1.0;
        starts.push_back(std::move(e));
    }
    SeededRng rng(0x5EEDF00DULL);  // fixed: solvers are pure functions of their inputs
    for (std::size_t r = 0; r < cfg.restarts; ++r) {
        std::vector<double> v(m);
        for (double& x : v) x = rng.next_double();
        starts.push_back(project_to_simplex(v).w);
    }

    SolverResult best;
    best.objective = std::numeric_limits<double>::infinity();
    for (const auto& start : starts) {
        std::vector<double> w = start;
        double fw = f(w);
        double step = 1.0;
        std::size_t it = 0;
        bool converged = false;
        for (; it < cfg.max_iters; ++it) {
            const std::vector<double> g = grad(w);
            // Backtracking on the projected step.
            bool moved = false;
            for (int half = 0; half < 60; ++half) {
                std::vector<double> trial(m);
                for (std::size_t j = 0; j < m; ++j) trial[j] = w[j] - step * g[j];
                trial = project_to_simplex(trial).w;
                const double ft = f(trial);
                double move = 0.0;
                for (std::size_t j = 0; j < m; ++j)
                    move = std::max(move, std::abs(trial[j] - w[j]));
                if (ft <= fw - 1e-4 * move * move / std::max(step, 1e-300)) {
                    if (move < cfg.tol) converged = true;
                    w = std::move(trial);
                    fw = ft;
                    moved = true;
                    step *= 1.5;
                    break;
                }
                step *= 0.5;
            }
            if (!moved || converged) {
                converged = true;
                break;
            }
        }
        if (fw < best.objective) {
            best.objective = fw;
            best.weights.w = w;
            best.iterations = it;
            best.status = converged ? SolverStatus::converged : SolverStatus::max_iters_reached;
        }
    }

    // Tie-break toward uniform when it is as good as the best point found.
    const std::vector<double> uni = uniform_weights(m);
    const double fu = f(uni);
    if (fu <= best.objective + 1e-12 * (1.0 + std::abs(best.objective))) {
        best.weights.w = uni;
        best.objective = fu;
        best.status = SolverStatus::converged;
    }
    return best;
}

}  // namespace detail

// Objective value of the w-weighted variance reading:
//   Var_{j~w}[||g_j||] + lambda ||sum_j w_j g_j||^2.
// With literal_variance the first term is the unweighted Var_j (constant in w).
inline double variance_objective(const std::vector<double>& w,
                                 const std::vector<std::vector<double>>& means,
                                 const ObjectiveConfig& cfg) {
    const std::vector<double> a = detail::mean_norms(means);
    const Matrix g = detail::mean_gram(means);
    const std::size_t m = means.size();
    double var;
    if (cfg.literal_variance) {
        double mean_a = 0.0;
        for (double x : a) mean_a += x;
        mean_a /= static_cast<double>(m);
        var = 0.0;
        for (double x : a) var += (x - mean_a) * (x - mean_a);
        var /= static_cast<double>(m);
    } else {
        double e1 = 0.0, e2 = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            e1 += w[j] * a[j];
            e2 += w[j] * a[j] * a[j];
        }
        var = e2 - e1 * e1;
    }
    double quad = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) quad += w[i] * w[j] * g(i, j);
    return var + cfg.lambda * quad;
}

// Projected gradient descent for the variance objective, best of several
// deterministic restarts.
inline SolverResult solve_variance(const std::vector<std::vector<double>>& means,
                                   const ObjectiveConfig& cfg) {
    if (means.empty()) throw std::invalid_argument("solve_variance: no means");
    cfg.validate();
    const std::size_t m = means.size();
    if (m == 1) return {SimplexWeights{{1.0}}, variance_objective({1.0}, means, cfg),
                        SolverStatus::converged, 0, 0.0};

    const std::vector<double> a = detail::mean_norms(means);
    const Matrix g = detail::mean_gram(means);

    auto f = [&](const std::vector<double>& w) { return variance_objective(w, means, cfg); };
    auto grad = [&](const std::vector<double>& w) {
        std::vector<double> out(m, 0.0);
        double e1 = 0.0;
        for (std::size_t j = 0; j < m; ++j) e1 += w[j] * a[j];
        for (std::size_t j = 0; j < m; ++j) {
            double gw = 0.0;
            for (std::size_t i = 0; i < m; ++i) gw += g(j, i) * w[i];
            out[j] = 2.0 * cfg.lambda * gw;
            if (!cfg.literal_variance) out[j] += a[j] * a[j] - 2.0 * e1 * a[j];
        }
        return out;
    };
    return detail::pgd_simplex(f, grad, m, cfg);
}

// Closed-form robust min-max weights: softmax of the mean-gradient norms at
// temperature tau, computed with max subtraction.
inline SolverResult solve_robust_softmax(const std::vector<std::vector<double>>& means,
                                         const ObjectiveConfig& cfg) {
    if (means.empty()) throw std::invalid_argument("solve_robust_softmax: no means");
    cfg.validate();
    const std::vector<double> a = detail::mean_norms(means);
    const double amax = *std::max_element(a.begin(), a.end());
    SolverResult res;
    res.weights.w.resize(a.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        res.weights.w[j] = std::exp((a[j] - amax) / cfg.tau);
        sum += res.weights.w[j];
    }
    for (double& x : res.weights.w) x /= sum;
    res.objective = cfg.tau * (amax / cfg.tau + std::log(sum));  // tau log-sum-exp of a_j / tau
    res.status = SolverStatus::converged;
    return res;
}

// Fixed-point iteration for the alignment objective: w_j proportional to the
// (clamped) cosine between g_j and the current aggregate. Zero-norm means are
// excluded with weight 0; an all-nonpositive cosine profile or a vanishing
// aggregate falls back to uniform and is flagged.
inline SolverResult solve_alignment(const std::vector<std::vector<double>>& means,
                                    const ObjectiveConfig& cfg) {
    if (means.empty()) throw std::invalid_argument("solve_alignment: no means");
    cfg.validate();
    const std::size_t m = means.size();
    const std::vector<double> norms = detail::mean_norms(means);

    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < m; ++j)
        if (norms[j] > 0.0) active.push_back(j);

    SolverResult res;
    res.weights.w.assign(m, 0.0);
    if (active.empty()) {
        res.weights.w = detail::uniform_weights(m);
        res.status = SolverStatus::fallback_uniform;
        return res;
    }

    const std::size_t dim = means.front().size();
    std::vector<double> w(active.size(), 1.0 / static_cast<double>(active.size()));
    std::vector<double> agg(dim);
    SolverStatus status = SolverStatus::max_iters_reached;

    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        ++res.iterations;
        std::fill(agg.begin(), agg.end(), 0.0);
        for (std::size_t ai = 0; ai < active.size(); ++ai)
            for (std::size_t d = 0; d < dim; ++d) agg[d] += w[ai] * means[active[ai]][d];
        const double agg_norm = norm2(agg);
        if (agg_norm == 0.0) {
            status = SolverStatus::fallback_uniform;
            break;
        }
        bool any_positive = false;
        std::vector<double> next(active.size());
        for (std::size_t ai = 0; ai < active.size(); ++ai) {
            const double cosv = dot(means[active[ai]], agg) / (norms[active[ai]] * agg_norm);
            if (cosv > 0.0) any_positive = true;
            next[ai] = std::max(cosv, cfg.cosine_floor);
        }
        if (!any_positive) {
            status = SolverStatus::fallback_uniform;
            break;
        }
        double sum = std::accumulate(next.begin(), next.end(), 0.0);
        for (double& x : next) x /= sum;
        double delta = 0.0;
        for (std::size_t ai = 0; ai < active.size(); ++ai)
            delta = std::max(delta, std::abs(next[ai] - w[ai]));
        w = std::move(next);
        if (delta < cfg.tol) {
            status = SolverStatus::converged;
            break;
        }
    }

    if (status == SolverStatus::fallback_uniform) {
        res.weights.w = detail::uniform_weights(m);
    } else {
        for (std::size_t ai = 0; ai < active.size(); ++ai) res.weights.w[active[ai]] = w[ai];
    }
    res.status = status;

    // Report the negated alignment objective at the returned point.
    std::fill(agg.begin(), agg.end(), 0.0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t d = 0; d < dim; ++d) agg[d] += res.weights.w[j] * means[j][d];
    const double agg_norm = norm2(agg);
    if (agg_norm > 0.0) {
        for (std::size_t j = 0; j < m; ++j)
            if (norms[j] > 0.0)
                res.objective -= res.weights.w[j] * dot(means[j], agg) / (norms[j] * agg_norm);
    }
    return res;
}

// One fixed-point update of the alignment map; exposed so callers can verify
// the returned point is indeed a fixed point.
inline std::vector<double> alignment_update(const std::vector<std::vector<double>>& means,
                                            const std::vector<double>& w,
                                            const ObjectiveConfig& cfg) {
    const std::size_t m = means.size();
    const std::size_t dim = means.front().size();
    const std::vector<double> norms = detail::mean_norms(means);
    std::vector<double> agg(dim, 0.0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t d = 0; d < dim; ++d) agg[d] += w[j] * means[j][d];
    const double agg_norm = norm2(agg);
    std::vector<double> next(m, 0.0);
    if (agg_norm == 0.0) return next;
    double sum = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        if (norms[j] == 0.0) continue;
        next[j] = std::max(dot(means[j], agg) / (norms[j] * agg_norm), cfg.cosine_floor);
        sum += next[j];
    }
    if (sum > 0.0)
        for (double& x : next) x /= sum;
    return next;
}

inline double uncertainty_objective(const std::vector<double>& w,
                                    const std::vector<std::vector<double>>& means,
                                    const std::vector<double>& sigmas,
                                    const ObjectiveConfig& cfg) {
    const Matrix g = detail::mean_gram(means);
    double quad = 0.0, lin = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        lin += sigmas[i] * w[i];
        for (std::size_t j = 0; j < w.size(); ++j) quad += w[i] * w[j] * g(i, j);
    }
    return quad + cfg.beta * lin;
}

// Away-step Frank-Wolfe with exact line search for the convex quadratic
//   ||sum_j w_j g_j||^2 + beta sum_j sigma_j^2 w_j
// over the simplex. Away steps avoid the sublinear zigzag of plain
// Frank-Wolfe so the duality gap reaches tol on small instances.
inline SolverResult solve_uncertainty(const std::vector<std::vector<double>>& means,
                                      const std::vector<double>& sigmas,
                                      const ObjectiveConfig& cfg) {
    if (means.empty()) throw std::invalid_argument("solve_uncertainty: no means");
    if (sigmas.size() != means.size())
        throw std::invalid_argument("solve_uncertainty: sigmas length mismatch");
    for (double s : sigmas)
        if (s < 0.0) throw std::invalid_argument("solve_uncertainty: sigma^2 must be >= 0");
    cfg.validate();

    const std::size_t m = means.size();
    const Matrix g = detail::mean_gram(means);

    SolverResult res;
    std::vector<double> w = detail::uniform_weights(m);
    std::vector<double> grad(m);
    double gap = 0.0;
    SolverStatus status = SolverStatus::max_iters_reached;

    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        ++res.iterations;
        for (std::size_t j = 0; j < m; ++j) {
            double gw = 0.0;
            for (std::size_t i = 0; i < m; ++i) gw += g(j, i) * w[i];
            grad[j] = 2.0 * gw + cfg.beta * sigmas[j];
        }
        std::size_t fw_j = 0, away_j = 0;
        bool have_away = false;
        for (std::size_t j = 0; j < m; ++j) {
            if (grad[j] < grad[fw_j]) fw_j = j;
            if (w[j] > 0.0 && (!have_away || grad[j] > grad[away_j])) {
                away_j = j;
                have_away = true;
            }
        }
        double gdotw = 0.0;
        for (std::size_t j = 0; j < m; ++j) gdotw += grad[j] * w[j];
        gap = gdotw - grad[fw_j];
        if (gap <= cfg.tol) {
            status = SolverStatus::converged;
            break;
        }

        const double away_gap = grad[away_j] - gdotw;
        std::vector<double> dir(m);
        double gamma_max;
        if (gap >= away_gap) {
            for (std::size_t j = 0; j < m; ++j) dir[j] = (j == fw_j ? 1.0 : 0.0) - w[j];
            gamma_max = 1.0;
        } else {
            for (std::size_t j = 0; j < m; ++j) dir[j] = w[j] - (j == away_j ? 1.0 : 0.0);
            gamma_max = w[away_j] / (1.0 - w[away_j] + 1e-300);
        }

        double ddotg = 0.0, dgd = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            ddotg += grad[i] * dir[i];
            double gd = 0.0;
            for (std::size_t j = 0; j < m; ++j) gd += g(i, j) * dir[j];
            dgd += dir[i] * gd;
        }
        double gamma = gamma_max;
        if (dgd > 0.0) gamma = std::min(gamma_max, -ddotg / (2.0 * dgd));
        if (gamma <= 0.0) {
            status = SolverStatus::converged;  // no descent available within the face
            break;
        }
        for (std::size_t j = 0; j < m; ++j) w[j] = std::max(0.0, w[j] + gamma * dir[j]);
        double sum = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& x : w) x /= sum;
    }

    res.weights.w = w;
    res.duality_gap = gap;
    res.status = status;
    res.objective = uncertainty_objective(w, means, sigmas, cfg);

    const std::vector<double> uni = detail::uniform_weights(m);
    const double fu = uncertainty_objective(uni, means, sigmas, cfg);
    if (fu <= res.objective + 1e-12 * (1.0 + std::abs(res.objective))) {
        res.weights.w = uni;
        res.objective = fu;
    }
    return res;
}

// Dispatcher used by the training loop: domain means are the projected
// cluster centroids by default, or the full-dimension means on request.
inline SolverResult optimize_weights(const DomainPartition& partition, const ObjectiveConfig& cfg,
                                     bool use_full_means = false) {
    const auto& means = use_full_means ? partition.full_means : partition.projected_centroids;
    if (means.empty()) throw std::invalid_argument("optimize_weights: empty partition");
    if (means.size() == 1) {
        SolverResult res;
        res.weights.w = {1.0};
        res.status = SolverStatus::converged;
        switch (cfg.kind) {
            case ObjectiveKind::variance:
                res.objective = variance_objective({1.0}, means, cfg);
                break;
            case ObjectiveKind::uncertainty:
                res.objective = uncertainty_objective({1.0}, means, partition.intra_variance, cfg);
                break;
            default:
                break;
        }
        return res;
    }
    switch (cfg.kind) {
        case ObjectiveKind::variance: return solve_variance(means, cfg);
        case ObjectiveKind::robust_softmax: return solve_robust_softmax(means, cfg);
        case ObjectiveKind::alignment: return solve_alignment(means, cfg);
        case ObjectiveKind::uncertainty:
            return solve_uncertainty(means, partition.intra_variance, cfg);
    }
    throw std::invalid_argument("optimize_weights: unknown objective kind");
}

}  // namespace dograph
