#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dograph/linalg.hpp"
#include "dograph/matrix.hpp"
#include "dograph/model.hpp"
#include "dograph/rng.hpp"

namespace dograph {

struct ProjectionConfig {
    std::size_t input_dim = 0;
    std::size_t target_dim = 512;
    std::uint64_t seed = 0;
    double epsilon = 0.3;  // only the JL verification harness uses this

    void validate() const {
        if (target_dim < 1 || target_dim > input_dim)
            throw std::invalid_argument("ProjectionConfig: need 1 <= target_dim <= input_dim");
        if (!(epsilon > 0.0 && epsilon < 1.0))
            throw std::invalid_argument("ProjectionConfig: epsilon must lie in (0,1)");
    }
};

// Dense Gaussian random map R in R^{d x k} with entries N(0, 1/k);
// regenerable bit-exactly from its config seed.
class Projector {
public:
    static Projector create(const ProjectionConfig& cfg) {
        cfg.validate();
        SeededRng rng(cfg.seed);
        return Projector(cfg, gaussian_matrix(rng, cfg.input_dim, cfg.target_dim,
                                              1.0 / static_cast<double>(cfg.target_dim)));
    }

    const ProjectionConfig& config() const { return cfg_; }
    const Matrix& matrix() const { return r_; }

    // R^T g
    std::vector<double> project(std::span<const double> g) const {
        if (g.size() != cfg_.input_dim)
            throw std::invalid_argument("project: vector length " + std::to_string(g.size()) +
                                        " does not match input_dim " +
                                        std::to_string(cfg_.input_dim));
        std::vector<double> out(cfg_.target_dim, 0.0);
        const double* r = r_.data().data();
        for (std::size_t i = 0; i < cfg_.input_dim; ++i) {
            const double gi = g[i];
            const double* row = r + i * cfg_.target_dim;
            for (std::size_t j = 0; j < cfg_.target_dim; ++j) out[j] += gi * row[j];
        }
        return out;
    }

private:
    Projector(ProjectionConfig cfg, Matrix r) : cfg_(cfg), r_(std::move(r)) {}
    ProjectionConfig cfg_;
    Matrix r_;
};

// Gradient-induced kernel k_b(s, s') = <g_b(s), g_b(s')>.
inline double gradient_kernel(const GradientRecord& a, const GradientRecord& b, GradBlock block) {
    return dot(a.view(block), b.view(block));
}

enum class MmdEstimator { VStatistic, UStatistic };

// Squared maximum mean discrepancy between the empirical measures of two
// gradient batches under the gradient-induced kernel. The V-statistic keeps
// i = j terms and satisfies the mean-difference identity exactly; the
// U-statistic drops them (unbiased, not used by the identity check).
inline double mmd_squared(const std::vector<GradientRecord>& samples_1,
                          const std::vector<GradientRecord>& samples_2, GradBlock block,
                          MmdEstimator estimator = MmdEstimator::VStatistic) {
    if (samples_1.empty() || samples_2.empty())
        throw std::invalid_argument("mmd_squared: empty sample list");
    const double n1 = static_cast<double>(samples_1.size());
    const double n2 = static_cast<double>(samples_2.size());

    KahanSum s11, s22, s12;
    double magnitude = 0.0;
    for (std::size_t i = 0; i < samples_1.size(); ++i)
        for (std::size_t j = 0; j < samples_1.size(); ++j) {
            if (estimator == MmdEstimator::UStatistic && i == j) continue;
            const double k = gradient_kernel(samples_1[i], samples_1[j], block);
            s11.add(k);
            magnitude = std::max(magnitude, std::abs(k));
        }
    for (std::size_t i = 0; i < samples_2.size(); ++i)
        for (std::size_t j = 0; j < samples_2.size(); ++j) {
            if (estimator == MmdEstimator::UStatistic && i == j) continue;
            const double k = gradient_kernel(samples_2[i], samples_2[j], block);
            s22.add(k);
            magnitude = std::max(magnitude, std::abs(k));
        }
    for (const auto& a : samples_1)
        for (const auto& b : samples_2) {
            const double k = gradient_kernel(a, b, block);
            s12.add(k);
            magnitude = std::max(magnitude, std::abs(k));
        }

    double value;
    if (estimator == MmdEstimator::VStatistic) {
        value = s11.value() / (n1 * n1) + s22.value() / (n2 * n2) -
                2.0 * s12.value() / (n1 * n2);
    } else {
        const double d1 = n1 > 1.0 ? n1 * (n1 - 1.0) : 1.0;
        const double d2 = n2 > 1.0 ? n2 * (n2 - 1.0) : 1.0;
        value = s11.value() / d1 + s22.value() / d2 - 2.0 * s12.value() / (n1 * n2);
        return value;  // the unbiased estimator is legitimately signed
    }

    if (value < 0.0) {
        if (value < -1e-10 * std::max(1.0, magnitude))
            throw std::runtime_error("mmd_squared: V-statistic negative beyond tolerance: " +
                                     std::to_string(value));
        value = 0.0;
    }
    return value;
}

struct TheoremReport {
    GradBlock block = GradBlock::Flat;
    double lhs = 0.0;               // || mean g_b(P1) - mean g_b(P2) ||^2
    double rhs = 0.0;               // V-statistic MMD^2
    double rel_discrepancy = 0.0;

    std::string to_json() const {
        return std::string("{\"block\":\"") + block_name(block) + "\",\"lhs\":" +
               std::to_string(lhs) + ",\"rhs\":" + std::to_string(rhs) +
               ",\"rel_discrepancy\":" + std::to_string(rel_discrepancy) + "}";
    }
};

// Checks the identity ||mean gradient difference||^2 = MMD^2 for the two
// empirical measures; an algebraic identity, so the discrepancy is numerical
// noise only.
inline TheoremReport verify_theorem(const std::vector<GradientRecord>& samples_1,
                                    const std::vector<GradientRecord>& samples_2,
                                    GradBlock block) {
    if (samples_1.empty() || samples_2.empty())
        throw std::invalid_argument("verify_theorem: empty sample list");
    const std::size_t dim = samples_1.front().view(block).size();

    auto mean_of = [&](const std::vector<GradientRecord>& samples) {
        std::vector<double> m(dim, 0.0);
        for (const auto& rec : samples) {
            const auto v = rec.view(block);
            if (v.size() != dim)
                throw std::invalid_argument("verify_theorem: inconsistent gradient dims");
            for (std::size_t i = 0; i < dim; ++i) m[i] += v[i];
        }
        for (double& x : m) x /= static_cast<double>(samples.size());
        return m;
    };

    const std::vector<double> m1 = mean_of(samples_1);
    const std::vector<double> m2 = mean_of(samples_2);
    KahanSum lhs;
    for (std::size_t i = 0; i < dim; ++i) {
        const double d = m1[i] - m2[i];
        lhs.add(d * d);
    }

    TheoremReport rep;
    rep.block = block;
    rep.lhs = lhs.value();
    rep.rhs = mmd_squared(samples_1, samples_2, block, MmdEstimator::VStatistic);
    const double denom = std::max(rep.lhs, rep.rhs);
    rep.rel_discrepancy = denom > 1e-300 ? std::abs(rep.lhs - rep.rhs) / denom : 0.0;
    return rep;
}

struct GramMatrix {
    Matrix values;
    GradBlock block = GradBlock::Flat;
};

inline GramMatrix gram_matrix(const std::vector<GradientRecord>& samples, GradBlock block) {
    if (samples.empty()) throw std::invalid_argument("gram_matrix: empty sample list");
    const std::size_t n = samples.size();
    GramMatrix g{Matrix(n, n), block};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            const double k = gradient_kernel(samples[i], samples[j], block);
            g.values(i, j) = k;
            g.values(j, i) = k;
        }
    return g;
}

// Min/max eigenvalue summary used by the PSD invariant checks.
struct GramSpectrum {
    double min_eig = 0.0;
    double max_eig = 0.0;
};

inline GramSpectrum gram_spectrum(const GramMatrix& g) {
    const std::vector<double> eig = jacobi_eigenvalues(g.values);
    return {eig.front(), eig.back()};
}

}  // namespace dograph
