#pragma once

// Shared generators and independent oracles for the test suites. The oracles
// deliberately avoid the library's own helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include <gwap/gwap.hpp>

namespace gwap::test {

inline std::filesystem::path fixture(const std::string& name) {
    return std::filesystem::path(GWAP_FIXTURE_DIR) / name;
}

/// Fresh empty directory under the system temp dir, unique per call.
inline std::filesystem::path scratch_dir(const std::string& tag) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path() /
               ("gwap_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline Roi random_rect(Rng& rng, std::int64_t grid, std::vector<TagId> tags = {}) {
    std::uniform_int_distribution<std::int64_t> pos(0, grid - 1);
    const auto x = pos(rng);
    const auto y = pos(rng);
    const auto w = std::uniform_int_distribution<std::int64_t>(1, grid - x)(rng);
    const auto h = std::uniform_int_distribution<std::int64_t>(1, grid - y)(rng);
    return Roi(x, y, w, h, std::move(tags));
}

inline std::vector<TagId> letters(int n) {
    std::vector<TagId> v;
    for (int i = 0; i < n; ++i) v.push_back("g" + std::to_string(i + 1));
    return v;
}

inline std::vector<TagId> random_subset(const std::vector<TagId>& vocab, Rng& rng, bool nonempty) {
    std::vector<TagId> out;
    std::bernoulli_distribution coin(0.5);
    for (const auto& t : vocab) {
        if (coin(rng)) out.push_back(t);
    }
    if (nonempty && out.empty()) {
        out.push_back(vocab[std::uniform_int_distribution<std::size_t>(0, vocab.size() - 1)(rng)]);
    }
    return out;
}

// Pixel-by-pixel shared area.
inline std::int64_t pixel_overlap(const Roi& a, const Roi& b) {
    std::int64_t n = 0;
    for (auto y = a.y(); y < a.bottom(); ++y) {
        for (auto x = a.x(); x < a.right(); ++x) {
            if (x >= b.x() && x < b.right() && y >= b.y() && y < b.bottom()) ++n;
        }
    }
    return n;
}

// The weighted covariance exactly as printed: centring term (1/n) sum w x.
inline double scalar_cov(const std::vector<double>& x, const std::vector<double>& y,
                         const std::vector<double>& w) {
    const double n = static_cast<double>(w.size());
    double wx = 0, wy = 0, ws = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        wx += w[i] * x[i];
        wy += w[i] * y[i];
        ws += w[i];
    }
    const double mx = wx / n;
    const double my = wy / n;
    double acc = 0;
    for (std::size_t i = 0; i < w.size(); ++i) acc += w[i] * (x[i] - mx) * (y[i] - my);
    return acc / ws;
}

inline Matrix random_stochastic(Rng& rng, std::size_t n, double lo = 0.01) {
    std::uniform_real_distribution<double> u(lo, 1.0);
    Matrix m(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < n; ++c) s += (m(r, c) = u(rng));
        for (std::size_t c = 0; c < n; ++c) m(r, c) /= s;
    }
    return m;
}

/// Stationary vector of a row-stochastic matrix from a full dense
/// eigendecomposition of A^T: the eigenvector whose eigenvalue is closest
/// to 1, made positive and L1-normalized.
inline std::vector<double> eigen_stationary(const Matrix& a) {
    const auto n = static_cast<Eigen::Index>(a.rows());
    Eigen::MatrixXd at(n, n);
    for (Eigen::Index r = 0; r < n; ++r) {
        for (Eigen::Index c = 0; c < n; ++c) at(c, r) = a(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
    }
    Eigen::EigenSolver<Eigen::MatrixXd> es(at);
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < n; ++i) {
        if (std::abs(es.eigenvalues()[i] - 1.0) < std::abs(es.eigenvalues()[best] - 1.0)) best = i;
    }
    Eigen::VectorXd v = es.eigenvectors().col(best).real();
    const double s = v.sum();
    std::vector<double> out(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = v[i] / s;
    return out;
}

inline double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

/// Random annotation set for one image: `players` players with 1..max_rois
/// ROIs each on a grid, tags from `vocab`.
inline std::vector<PlayerAnnotation> random_players(Rng& rng, int players, int max_rois,
                                                    const std::vector<TagId>& vocab,
                                                    std::int64_t grid = 64) {
    std::vector<PlayerAnnotation> out;
    for (int p = 0; p < players; ++p) {
        PlayerAnnotation a{"p" + std::to_string(p), "img", {}};
        const int m = std::uniform_int_distribution<int>(1, max_rois)(rng);
        for (int i = 0; i < m; ++i) a.rois.push_back(random_rect(rng, grid, random_subset(vocab, rng, true)));
        out.push_back(std::move(a));
    }
    return out;
}

inline TagRegistry registry_with_counts(const std::vector<TagId>& tags,
                                        const std::vector<std::uint64_t>& counts) {
    TagRegistry reg(tags);
    for (std::size_t i = 0; i < tags.size(); ++i) reg.add_count(tags[i], counts[i]);
    return reg;
}

} // namespace gwap::test
