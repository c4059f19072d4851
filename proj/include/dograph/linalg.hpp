#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dograph/matrix.hpp"

namespace dograph {

namespace detail {

// Leading eigenvector of a symmetric PSD matrix by power iteration.
// Deterministic start vector; convergence on direction change.
inline std::vector<double> power_iteration(const Matrix& c, double tol,
                                           std::size_t max_iters, double* eigenvalue) {
    const std::size_t d = c.rows();
    std::vector<double> v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = 1.0 + 1e-3 * static_cast<double>(i);
    double nrm = norm2(v);
    for (double& x : v) x /= nrm;

    std::vector<double> w(d);
    double lambda = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += c(i, j) * v[j];
            w[i] = s;
        }
        lambda = dot(w, v);
        nrm = norm2(w);
        if (nrm == 0.0) break;  // v is in the null space; keep current direction
        double diff = 0.0;
        const double sign = (lambda >= 0.0) ? 1.0 : -1.0;
        for (std::size_t i = 0; i < d; ++i) {
            w[i] /= nrm;
            diff = std::max(diff, std::abs(w[i] - sign * v[i]));
        }
        v = w;
        if (diff < tol) break;
    }
    if (eigenvalue) *eigenvalue = lambda;
    return v;
}

}  // namespace detail

// Projection of mean-centered points onto their top-2 principal components,
// computed by power iteration with deflation. Component sign is fixed so the
// largest-magnitude loading is positive. Throws if all points coincide.
inline Matrix pca_2d(const Matrix& points, double tol = 1e-10, std::size_t max_iters = 1000) {
    const std::size_t n = points.rows(), d = points.cols();
    if (n < 2 || d < 2)
        throw std::invalid_argument("pca_2d: need at least 2 points of dimension >= 2, got " +
                                    points.shape_string());

    Matrix centered = points;
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += centered(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) centered(i, j) -= mean;
    }

    Matrix cov(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            double s = 0.0;
            for (std::size_t r = 0; r < n; ++r) s += centered(r, i) * centered(r, j);
            s /= static_cast<double>(n);
            cov(i, j) = s;
            cov(j, i) = s;
        }

    const double cov_scale = max_abs(cov);
    if (cov_scale == 0.0)
        throw std::invalid_argument("pca_2d: rank-deficient input (all points identical)");

    double lambda1 = 0.0;
    std::vector<double> v1 = detail::power_iteration(cov, tol, max_iters, &lambda1);

    Matrix deflated = cov;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) deflated(i, j) -= lambda1 * v1[i] * v1[j];

    std::vector<double> v2;
    if (max_abs(deflated) <= 1e-14 * cov_scale) {
        // Points lie on a line; pick a deterministic unit vector orthogonal to v1.
        std::size_t k = 0;
        for (std::size_t i = 1; i < d; ++i)
            if (std::abs(v1[i]) < std::abs(v1[k])) k = i;
        v2.assign(d, 0.0);
        v2[k] = 1.0;
        const double p = dot(v2, v1);
        for (std::size_t i = 0; i < d; ++i) v2[i] -= p * v1[i];
        const double nrm = norm2(v2);
        for (double& x : v2) x /= nrm;
    } else {
        v2 = detail::power_iteration(deflated, tol, max_iters, nullptr);
        // Re-orthogonalize against v1 to remove residual leakage.
        const double p = dot(v2, v1);
        for (std::size_t i = 0; i < d; ++i) v2[i] -= p * v1[i];
        const double nrm = norm2(v2);
        if (nrm > 0.0)
            for (double& x : v2) x /= nrm;
    }

    auto fix_sign = [d](std::vector<double>& v) {
        std::size_t k = 0;
        for (std::size_t i = 1; i < d; ++i)
            if (std::abs(v[i]) > std::abs(v[k])) k = i;
        if (v[k] < 0.0)
            for (double& x : v) x = -x;
    };
    fix_sign(v1);
    fix_sign(v2);

    Matrix out(n, 2);
    for (std::size_t i = 0; i < n; ++i) {
        out(i, 0) = dot(centered.row(i), std::span<const double>(v1));
        out(i, 1) = dot(centered.row(i), std::span<const double>(v2));
    }
    return out;
}

// All eigenvalues of a symmetric matrix by the cyclic Jacobi method,
// returned in ascending order. Intended for the small Gram matrices this
// project produces (n up to a few hundred).
inline std::vector<double> jacobi_eigenvalues(const Matrix& sym, std::size_t max_sweeps = 64) {
    const std::size_t n = sym.rows();
    if (n != sym.cols())
        throw std::invalid_argument("jacobi_eigenvalues: matrix not square: " +
                                    sym.shape_string());
    Matrix a = sym;

    for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
        if (off <= 1e-30 * std::max(1.0, max_abs(a) * max_abs(a))) break;

        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

}  // namespace dograph
