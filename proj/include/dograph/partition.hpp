#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "dograph/geometry.hpp"
#include "dograph/io.hpp"
#include "dograph/linalg.hpp"
#include "dograph/model.hpp"
#include "dograph/rng.hpp"

namespace dograph {

struct KMeansResult {
    std::vector<std::size_t> assignments;
    std::vector<std::vector<double>> centroids;
    double inertia = 0.0;
    std::size_t iterations = 0;
};

namespace detail {

inline double nearest_centroid(std::span<const double> p,
                               const std::vector<std::vector<double>>& centroids,
                               std::size_t* index) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_i = 0;
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < best) {
            best = d;
            best_i = c;
        }
    }
    if (index) *index = best_i;
    return best;
}

// k-means++ seeding: first centroid uniform, the rest sampled with
// probability proportional to the squared distance to the nearest chosen one.
inline std::vector<std::vector<double>> kmeans_pp_init(
    const std::vector<std::vector<double>>& points, std::size_t m, SeededRng& rng) {
    std::vector<std::vector<double>> centroids;
    centroids.push_back(points[rng.next_below(points.size())]);
    std::vector<double> d2(points.size());
    while (centroids.size() < m) {
        double total = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            d2[i] = nearest_centroid(points[i], centroids, nullptr);
            total += d2[i];
        }
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.next_below(points.size());  // all points coincide with a centroid
        } else {
            const double u = rng.next_double() * total;
            double acc = 0.0;
            pick = points.size() - 1;
            for (std::size_t i = 0; i < points.size(); ++i) {
                acc += d2[i];
                if (u < acc) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

}  // namespace detail

// Lloyd iterations with k-means++ seeding. Empty clusters are re-seeded to
// the point farthest from its assigned centroid (among clusters that can
// spare a point). Inertia is checked to be non-increasing every iteration.
inline KMeansResult kmeans(const std::vector<std::vector<double>>& points, std::size_t m,
                           SeededRng& rng, std::size_t max_iters = 100, double tol = 1e-10) {
    if (points.empty()) throw std::invalid_argument("kmeans: no points");
    if (m < 1) throw std::invalid_argument("kmeans: m must be >= 1");
    if (m > points.size())
        throw std::invalid_argument("kmeans: m = " + std::to_string(m) + " exceeds point count " +
                                    std::to_string(points.size()));

    KMeansResult res;
    res.centroids = detail::kmeans_pp_init(points, m, rng);
    res.assignments.assign(points.size(), 0);
    const std::size_t dim = points.front().size();
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        ++res.iterations;

        std::vector<std::size_t> sizes(m, 0);
        for (std::size_t i = 0; i < points.size(); ++i) {
            detail::nearest_centroid(points[i], res.centroids, &res.assignments[i]);
            ++sizes[res.assignments[i]];
        }

        for (std::size_t c = 0; c < m; ++c) {
            if (sizes[c] != 0) continue;
            double far = -1.0;
            std::size_t far_i = points.size();
            for (std::size_t i = 0; i < points.size(); ++i) {
                if (sizes[res.assignments[i]] < 2) continue;
                const double d = squared_distance(points[i], res.centroids[res.assignments[i]]);
                if (d > far) {
                    far = d;
                    far_i = i;
                }
            }
            if (far_i == points.size()) continue;  // all donor clusters are singletons
            --sizes[res.assignments[far_i]];
            res.assignments[far_i] = c;
            ++sizes[c];
        }

        std::vector<std::vector<double>> next(m, std::vector<double>(dim, 0.0));
        for (std::size_t i = 0; i < points.size(); ++i) {
            auto& ctr = next[res.assignments[i]];
            for (std::size_t j = 0; j < dim; ++j) ctr[j] += points[i][j];
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            if (sizes[c] == 0) continue;  // unreachable after repair unless degenerate
            for (std::size_t j = 0; j < dim; ++j) next[c][j] /= static_cast<double>(sizes[c]);
            shift = std::max(shift, std::sqrt(squared_distance(next[c], res.centroids[c])));
            res.centroids[c] = next[c];
        }

        res.inertia = 0.0;
        for (std::size_t i = 0; i < points.size(); ++i)
            res.inertia += squared_distance(points[i], res.centroids[res.assignments[i]]);
        if (res.inertia > prev_inertia + 1e-9 * std::max(1.0, prev_inertia))
            throw std::logic_error("kmeans: inertia increased across an iteration");
        prev_inertia = res.inertia;

        if (shift < tol) break;
    }
    return res;
}

// Model-centric partition of one gradient batch: cluster assignments over the
// projected flat gradients, per-cluster projected centroids, per-cluster
// full-dimension mean gradients, sizes, and intra-cluster variance of squared
// distances sigma_j^2.
struct DomainPartition {
    std::vector<std::size_t> assignments;
    std::vector<std::vector<double>> projected_centroids;
    std::vector<std::vector<double>> full_means;
    std::vector<std::size_t> sizes;
    std::vector<double> intra_variance;
    std::size_t cluster_count() const { return sizes.size(); }
};

// sigma_j^2 is computed on projected gradients by default (matching the
// clustering space); sigma_full_dim switches to the full-dimension gradients.
// Clustering runs on the flat concatenated gradient unless a single block is
// selected via cluster_block; full_means always cover the flat gradient.
inline DomainPartition build_partition(const std::vector<GradientRecord>& records,
                                       const Projector& projector, std::size_t m, SeededRng& rng,
                                       std::size_t max_iters = 100, double tol = 1e-10,
                                       bool sigma_full_dim = false,
                                       GradBlock cluster_block = GradBlock::Flat) {
    if (records.empty()) throw std::invalid_argument("build_partition: no gradient records");

    std::vector<std::vector<double>> projected;
    projected.reserve(records.size());
    for (const auto& rec : records) projected.push_back(projector.project(rec.view(cluster_block)));

    const KMeansResult km = kmeans(projected, m, rng, max_iters, tol);

    DomainPartition part;
    part.assignments = km.assignments;
    part.sizes.assign(m, 0);
    for (std::size_t a : km.assignments) ++part.sizes[a];

    const std::size_t kdim = projected.front().size();
    const std::size_t full_dim = records.front().view(GradBlock::Flat).size();
    part.projected_centroids.assign(m, std::vector<double>(kdim, 0.0));
    part.full_means.assign(m, std::vector<double>(full_dim, 0.0));
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::size_t c = km.assignments[i];
        for (std::size_t j = 0; j < kdim; ++j) part.projected_centroids[c][j] += projected[i][j];
        const auto flat = records[i].view(GradBlock::Flat);
        for (std::size_t j = 0; j < full_dim; ++j) part.full_means[c][j] += flat[j];
    }
    for (std::size_t c = 0; c < m; ++c) {
        if (part.sizes[c] == 0) continue;
        const double nc = static_cast<double>(part.sizes[c]);
        for (double& x : part.projected_centroids[c]) x /= nc;
        for (double& x : part.full_means[c]) x /= nc;
    }

    // sigma_j^2 = Var over the cluster of the squared distance to its mean.
    part.intra_variance.assign(m, 0.0);
    std::vector<double> sum(m, 0.0), sumsq(m, 0.0);
    for (std::size_t i = 0; i < records.size(); ++i) {
        const std::size_t c = km.assignments[i];
        const double d2 = sigma_full_dim
                              ? squared_distance(records[i].view(GradBlock::Flat), part.full_means[c])
                              : squared_distance(projected[i], part.projected_centroids[c]);
        sum[c] += d2;
        sumsq[c] += d2 * d2;
    }
    for (std::size_t c = 0; c < m; ++c) {
        if (part.sizes[c] == 0) continue;
        const double nc = static_cast<double>(part.sizes[c]);
        const double mean = sum[c] / nc;
        part.intra_variance[c] = std::max(0.0, sumsq[c] / nc - mean * mean);
    }
    return part;
}

// Mean silhouette coefficient of the given labels over the points. Labels
// with a single member score 0 for that point; coincident points with zero
// spread also score 0.
inline double label_separation(const std::vector<std::vector<double>>& points,
                               const std::vector<int>& labels) {
    if (points.size() != labels.size())
        throw std::invalid_argument("label_separation: points/labels length mismatch");
    std::vector<int> distinct = labels;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2)
        throw std::invalid_argument("label_separation: need at least 2 distinct labels");

    const std::size_t n = points.size();
    auto label_index = [&](int lab) {
        return static_cast<std::size_t>(
            std::lower_bound(distinct.begin(), distinct.end(), lab) - distinct.begin());
    };

    std::vector<std::size_t> counts(distinct.size(), 0);
    for (int lab : labels) ++counts[label_index(lab)];

    double total = 0.0;
    std::vector<double> mean_dist(distinct.size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t li = label_index(labels[i]);
        if (counts[li] == 1) continue;  // silhouette of a singleton label is 0
        std::fill(mean_dist.begin(), mean_dist.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            mean_dist[label_index(labels[j])] +=
                std::sqrt(squared_distance(points[i], points[j]));
        }
        double a = 0.0, b = std::numeric_limits<double>::infinity();
        for (std::size_t l = 0; l < distinct.size(); ++l) {
            if (counts[l] == 0) continue;
            if (l == li) {
                a = mean_dist[l] / static_cast<double>(counts[l] - 1);
            } else {
                b = std::min(b, mean_dist[l] / static_cast<double>(counts[l]));
            }
        }
        const double denom = std::max(a, b);
        total += denom > 0.0 ? (b - a) / denom : 0.0;
    }
    return total / static_cast<double>(n);
}

// Partition export: one row per sample with its human label, cluster, and
// 2-D PCA coordinates of the projected gradient.
inline void write_partition_csv(const std::filesystem::path& path, const DomainPartition& part,
                                const std::vector<std::vector<double>>& projected,
                                const std::vector<int>& human_labels) {
    if (projected.size() != part.assignments.size() ||
        human_labels.size() != part.assignments.size())
        throw std::invalid_argument("write_partition_csv: length mismatch");
    Matrix pts(projected.size(), projected.front().size());
    for (std::size_t i = 0; i < projected.size(); ++i)
        std::copy(projected[i].begin(), projected[i].end(), pts.row(i).begin());
    const Matrix pc = pca_2d(pts);

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write partition csv: " + path.string());
    os << "sample_index,human_domain,cluster,pc1,pc2\n";
    for (std::size_t i = 0; i < projected.size(); ++i)
        os << i << "," << human_labels[i] << "," << part.assignments[i] << ","
           << io::fmt_double(pc(i, 0)) << "," << io::fmt_double(pc(i, 1)) << "\n";
}

}  // namespace dograph
