#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "dograph/partition.hpp"
#include "oracles.hpp"

using namespace dograph;

namespace {

// Two well-separated blobs around (+c, 0, ...) and (-c, 0, ...).
std::pair<std::vector<std::vector<double>>, std::vector<int>> two_blobs(
    std::size_t per_blob, std::size_t dim, double center, std::uint64_t seed) {
    SeededRng rng(seed);
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int blob = 0; blob < 2; ++blob) {
        for (std::size_t i = 0; i < per_blob; ++i) {
            std::vector<double> p(dim);
            for (double& x : p) x = rng.next_gaussian();
            p[0] += blob == 0 ? center : -center;
            pts.push_back(std::move(p));
            labels.push_back(blob);
        }
    }
    return {pts, labels};
}

GradientRecord record_from_flat(const std::vector<double>& flat, int domain) {
    const std::size_t per = flat.size() / 5;
    GradientRecord rec;
    Matrix* blocks[5] = {&rec.g_v, &rec.g_q, &rec.g_k, &rec.g_o, &rec.g_w};
    for (std::size_t b = 0; b < 5; ++b) {
        *blocks[b] = Matrix(1, per);
        for (std::size_t i = 0; i < per; ++i) (*blocks[b])(0, i) = flat[b * per + i];
    }
    rec.assemble_flat();
    rec.human_domain = domain;
    return rec;
}

}  // namespace

TEST_CASE("kmeans with m equal to the point count gives singleton clusters") {
    SeededRng rng(1);
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 6; ++i) pts.push_back({static_cast<double>(3 * i), 1.0});
    const KMeansResult res = kmeans(pts, pts.size(), rng);
    REQUIRE(res.inertia == 0.0);
    std::vector<bool> used(pts.size(), false);
    for (std::size_t a : res.assignments) {
        REQUIRE(!used[a]);
        used[a] = true;
    }
}

TEST_CASE("kmeans separates two far blobs exactly") {
    const auto [pts, labels] = two_blobs(30, 4, 10.0, 2);
    SeededRng rng(3);
    const KMeansResult res = kmeans(pts, 2, rng);
    REQUIRE(oracle::adjusted_rand_index(res.assignments, labels) == 1.0);
}

TEST_CASE("kmeans terminates on identical points") {
    std::vector<std::vector<double>> pts(8, std::vector<double>{1.0, 2.0});
    SeededRng rng(4);
    const KMeansResult res = kmeans(pts, 2, rng);
    REQUIRE(res.inertia == 0.0);
    REQUIRE(res.assignments.size() == 8);
}

TEST_CASE("kmeans rejects m larger than the point count") {
    std::vector<std::vector<double>> pts(3, std::vector<double>{0.0});
    SeededRng rng(5);
    REQUIRE_THROWS_AS(kmeans(pts, 4, rng), std::invalid_argument);
    REQUIRE_THROWS_AS(kmeans(pts, 0, rng), std::invalid_argument);
}

TEST_CASE("kmeans is deterministic in the seed") {
    const auto [pts, labels] = two_blobs(20, 3, 2.0, 6);
    SeededRng a(7), b(7);
    const KMeansResult ra = kmeans(pts, 4, a);
    const KMeansResult rb = kmeans(pts, 4, b);
    REQUIRE(ra.assignments == rb.assignments);
    for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t j = 0; j < 3; ++j)
            REQUIRE(ra.centroids[c][j] == rb.centroids[c][j]);
}

TEST_CASE("build_partition with one cluster reproduces the batch mean exactly") {
    SeededRng rng(8);
    std::vector<GradientRecord> records;
    const std::size_t dim = 20;
    for (int i = 0; i < 7; ++i) {
        std::vector<double> flat(dim);
        for (double& x : flat) x = rng.next_gaussian();
        records.push_back(record_from_flat(flat, 0));
    }
    ProjectionConfig pc;
    pc.input_dim = dim;
    pc.target_dim = 6;
    pc.seed = 9;
    const Projector proj = Projector::create(pc);
    SeededRng km(10);
    const DomainPartition part = build_partition(records, proj, 1, km);

    REQUIRE(part.sizes == std::vector<std::size_t>{7});
    std::vector<double> mean(dim, 0.0);
    for (const auto& r : records)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += r.flat[i];
    for (double& x : mean) x /= 7.0;
    for (std::size_t i = 0; i < dim; ++i) REQUIRE(part.full_means[0][i] == mean[i]);
}

TEST_CASE("build_partition separates planted gradient populations") {
    // two synthetic populations far apart in flat-gradient space
    const std::size_t dim = 40;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SeededRng rng(100 + seed);
        std::vector<GradientRecord> records;
        std::vector<int> truth;
        for (int pop = 0; pop < 2; ++pop)
            for (int i = 0; i < 16; ++i) {
                std::vector<double> flat(dim);
                for (double& x : flat) x = rng.next_gaussian();
                flat[1] += pop == 0 ? 12.0 : -12.0;
                records.push_back(record_from_flat(flat, pop));
                truth.push_back(pop);
            }
        ProjectionConfig pc;
        pc.input_dim = dim;
        pc.target_dim = 10;
        pc.seed = 200 + seed;
        const Projector proj = Projector::create(pc);
        SeededRng km(300 + seed);
        const DomainPartition part = build_partition(records, proj, 2, km);
        REQUIRE(oracle::adjusted_rand_index(part.assignments, truth) >= 0.95);
    }
}

TEST_CASE("partition invariants: sizes and weighted means") {
    SeededRng rng(11);
    std::vector<GradientRecord> records;
    const std::size_t dim = 30;
    for (int i = 0; i < 24; ++i) {
        std::vector<double> flat(dim);
        for (double& x : flat) x = rng.next_gaussian();
        records.push_back(record_from_flat(flat, i % 3));
    }
    ProjectionConfig pc;
    pc.input_dim = dim;
    pc.target_dim = 8;
    pc.seed = 12;
    const Projector proj = Projector::create(pc);
    SeededRng km(13);
    const DomainPartition part = build_partition(records, proj, 4, km);

    std::size_t total = 0;
    for (std::size_t s : part.sizes) total += s;
    REQUIRE(total == records.size());

    // sum_j (sizes_j / N) full_means_j equals the batch mean
    std::vector<double> weighted(dim, 0.0), mean(dim, 0.0);
    for (std::size_t j = 0; j < part.cluster_count(); ++j)
        for (std::size_t i = 0; i < dim; ++i)
            weighted[i] += part.full_means[j][i] * static_cast<double>(part.sizes[j]) /
                           static_cast<double>(records.size());
    for (const auto& r : records)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += r.flat[i] / records.size();
    for (std::size_t i = 0; i < dim; ++i)
        REQUIRE(weighted[i] == Catch::Approx(mean[i]).margin(1e-10));

    for (double v : part.intra_variance) REQUIRE(v >= 0.0);
}

TEST_CASE("sigma is zero for singleton clusters") {
    SeededRng rng(14);
    std::vector<GradientRecord> records;
    const std::size_t dim = 10;
    for (int i = 0; i < 3; ++i) {
        std::vector<double> flat(dim);
        for (double& x : flat) x = rng.next_gaussian();
        records.push_back(record_from_flat(flat, i));
    }
    ProjectionConfig pc;
    pc.input_dim = dim;
    pc.target_dim = 4;
    pc.seed = 15;
    const Projector proj = Projector::create(pc);
    SeededRng km(16);
    const DomainPartition part = build_partition(records, proj, 3, km);
    for (std::size_t j = 0; j < 3; ++j) {
        REQUIRE(part.sizes[j] == 1);
        REQUIRE(part.intra_variance[j] == 0.0);
    }
}

TEST_CASE("build_partition is deterministic") {
    SeededRng rng(17);
    std::vector<GradientRecord> records;
    const std::size_t dim = 20;
    for (int i = 0; i < 12; ++i) {
        std::vector<double> flat(dim);
        for (double& x : flat) x = rng.next_gaussian();
        records.push_back(record_from_flat(flat, 0));
    }
    ProjectionConfig pc;
    pc.input_dim = dim;
    pc.target_dim = 5;
    pc.seed = 18;
    const Projector proj = Projector::create(pc);
    SeededRng km1(19), km2(19);
    const DomainPartition a = build_partition(records, proj, 3, km1);
    const DomainPartition b = build_partition(records, proj, 3, km2);
    REQUIRE(a.assignments == b.assignments);
    for (std::size_t j = 0; j < 3; ++j) REQUIRE(a.intra_variance[j] == b.intra_variance[j]);
}

TEST_CASE("silhouette of separated clouds is high") {
    const auto [pts, labels] = two_blobs(25, 3, 10.0, 20);
    REQUIRE(label_separation(pts, labels) > 0.8);
}

TEST_CASE("silhouette of random labels on one cloud is near zero") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SeededRng rng(30 + seed);
        std::vector<std::vector<double>> pts;
        std::vector<int> labels;
        for (int i = 0; i < 60; ++i) {
            std::vector<double> p(4);
            for (double& x : p) x = rng.next_gaussian();
            pts.push_back(std::move(p));
            labels.push_back(static_cast<int>(rng.next_below(2)));
        }
        REQUIRE(std::abs(label_separation(pts, labels)) < 0.1);
    }
}

TEST_CASE("silhouette handles coincident points with different labels") {
    std::vector<std::vector<double>> pts(6, std::vector<double>{1.0, 1.0});
    const std::vector<int> labels = {0, 1, 0, 1, 0, 1};
    const double s = label_separation(pts, labels);
    REQUIRE(s >= -1.0);
    REQUIRE(s <= 1.0);
}

TEST_CASE("silhouette needs two labels") {
    std::vector<std::vector<double>> pts(4, std::vector<double>{0.0});
    REQUIRE_THROWS_AS(label_separation(pts, std::vector<int>(4, 7)), std::invalid_argument);
}

TEST_CASE("partition csv export has one row per sample") {
    const auto [pts, labels] = two_blobs(10, 5, 6.0, 40);
    std::vector<GradientRecord> records;
    for (std::size_t i = 0; i < pts.size(); ++i) records.push_back(record_from_flat(pts[i], labels[i]));
    ProjectionConfig pc;
    pc.input_dim = 5;
    pc.target_dim = 3;
    pc.seed = 41;
    const Projector proj = Projector::create(pc);
    SeededRng km(42);
    const DomainPartition part = build_partition(records, proj, 2, km);
    std::vector<std::vector<double>> projected;
    for (const auto& r : records) projected.push_back(proj.project(r.view(GradBlock::Flat)));

    const auto path = std::filesystem::temp_directory_path() / "dograph_test_partition.csv";
    write_partition_csv(path, part, projected, labels);
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    REQUIRE(line == "sample_index,human_domain,cluster,pc1,pc2");
    std::size_t rows = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == records.size());
    std::filesystem::remove(path);
}
