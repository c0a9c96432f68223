#pragma once

// Player rating graph: pairwise ROI agreement between players on one image,
// normalized into a stochastic matrix whose stationary vector gives each
// player's trust value.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <unordered_set>
#include <vector>

#include "error.hpp"
#include "geometry.hpp"
#include "matrix.hpp"
#include "tags.hpp"

namespace gwap {

using PlayerId = std::string;
using ImageId = std::string;

/// All ROIs one player drew on one image.
struct PlayerAnnotation {
    PlayerId player;
    ImageId image;
    std::vector<Roi> rois;

    friend bool operator==(const PlayerAnnotation&, const PlayerAnnotation&) = default;
};

enum class TrustSolver {
    direct, ///< GTH elimination, then one verification step
    power,  ///< power iteration from the uniform vector
};

inline std::string_view to_string(TrustSolver s) {
    return s == TrustSolver::direct ? "direct" : "power";
}

inline TrustSolver parse_trust_solver(std::string_view s) {
    if (s == "direct") return TrustSolver::direct;
    if (s == "power") return TrustSolver::power;
    throw InvalidArgument("unknown trust solver '" + std::string(s) + "' (expected direct|power)");
}

struct RatingParams {
    double tolerance = 1e-10;
    int max_iterations = 10000;
    double smoothing = 1e-9;
    TrustSolver solver = TrustSolver::direct;
    /// Slack on the "trust >= trusted mean" test so that players whose trust
    /// values differ only by rounding count as tied.
    double tie_tolerance = 1e-12;
};

struct PlayerRatingGraph {
    ImageId image;
    std::vector<PlayerId> players;
    Matrix raw;        ///< edge weights before smoothing
    Matrix normalized; ///< smoothed, row-stochastic
    double smoothing = 0.0;

    std::size_t size() const noexcept { return players.size(); }
};

struct TrustResult {
    std::vector<double> trust;
    double spectral_radius = 0.0;
    int iterations = 0;
    double residual = 0.0;
    TrustSolver solver = TrustSolver::power;
};

/// |p ∩ q| / |p|. Not symmetric.
inline double prmr(const Roi& p, const Roi& q) noexcept {
    return static_cast<double>(intersection_area(p, q)) / static_cast<double>(roi_area(p));
}

/// Weighted covariance with the centering term (1/n) * sum_i w_i x_i.
///
/// NOTE: this is deliberately not the conventional weighted mean
/// sum_i w_i x_i / sum_i w_i; the range arguments for PITC are built on
/// this form.
inline double weighted_cov(std::span<const double> x, std::span<const double> y,
                           std::span<const double> w) {
    const std::size_t n = w.size();
    if (x.size() != n || y.size() != n) {
        throw InvalidArgument("weighted_cov: dimension mismatch");
    }
    if (n == 0) throw InvalidArgument("weighted_cov: empty vectors");
    double wsum = 0.0;
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wsum += w[i];
        mx += w[i] * x[i];
        my += w[i] * y[i];
    }
    if (!(wsum > 0.0)) throw InvalidArgument("weighted_cov: total weight must be positive");
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += w[i] * (x[i] - mx) * (y[i] - my);
    return acc / wsum;
}

inline constexpr double kPitcDegenerate = 1e-12;

/// Cov(Tp, Tq; w) / Cov(Tp, Tp; w), clamped to [-1, 1]. Returns 0 when the
/// denominator vanishes (constant tag vector, empty vocabulary, zero weights).
inline double pitc(const TagVector& tp, const TagVector& tq, const WeightVector& w) {
    if (tp.size() != tq.size() || tp.size() != w.size()) {
        throw InvalidArgument("pitc: dimension mismatch");
    }
    if (w.size() == 0 || !(w.sum() > 0.0)) return 0.0;
    const double den = weighted_cov(tp.components, tp.components, w.components);
    if (std::abs(den) < kPitcDegenerate) return 0.0;
    const double num = weighted_cov(tp.components, tq.components, w.components);
    return std::clamp(num / den, -1.0, 1.0);
}

/// w_{p,q} = sum_j sum_i PRMR(p_i, q_j) * (PITC(p_i, q_j) + 2).
/// Bounded by [0, 3mn]; tags outside `ctx.tags` raise UnknownTagError.
inline double edge_weight(const PlayerAnnotation& p, const PlayerAnnotation& q,
                          const ImageTagContext& ctx) {
    std::vector<TagVector> tp;
    std::vector<TagVector> tq;
    tp.reserve(p.rois.size());
    tq.reserve(q.rois.size());
    for (const auto& r : p.rois) tp.push_back(tag_vector(r.tags(), ctx.tags));
    for (const auto& r : q.rois) tq.push_back(tag_vector(r.tags(), ctx.tags));
    double w = 0.0;
    for (std::size_t j = 0; j < q.rois.size(); ++j) {
        for (std::size_t i = 0; i < p.rois.size(); ++i) {
            const double overlap = prmr(p.rois[i], q.rois[j]);
            if (overlap == 0.0) continue;
            w += overlap * (pitc(tp[i], tq[j], ctx.weights) + 2.0);
        }
    }
    return w;
}

/// Row-normalizes `raw + smoothing` into a stochastic matrix.
inline Matrix normalize_rows(const Matrix& raw, double smoothing) {
    Matrix a(raw.rows(), raw.cols());
    for (std::size_t r = 0; r < raw.rows(); ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < raw.cols(); ++c) s += raw(r, c) + smoothing;
        if (!(s > 0.0) || !std::isfinite(s)) {
            throw InvalidArgument("row " + std::to_string(r) + " has no positive weight");
        }
        for (std::size_t c = 0; c < raw.cols(); ++c) a(r, c) = (raw(r, c) + smoothing) / s;
    }
    return a;
}

/// Builds the rating graph of one image. Every annotation must belong to a
/// distinct player, carry at least one ROI, and refer to the same image.
inline PlayerRatingGraph build_adjacency(std::span<const PlayerAnnotation> annotations,
                                         const ImageTagContext& ctx, double smoothing) {
    if (annotations.size() < 2) {
        throw InvalidArgument("rating graph needs at least two players, got " +
                              std::to_string(annotations.size()));
    }
    if (!(smoothing > 0.0) || !std::isfinite(smoothing)) {
        throw InvalidArgument("smoothing must be positive and finite");
    }
    PlayerRatingGraph g;
    g.image = annotations.front().image;
    g.smoothing = smoothing;
    std::unordered_set<PlayerId> seen;
    for (const auto& a : annotations) {
        if (a.image != g.image) {
            throw InvalidArgument("annotations span images '" + g.image + "' and '" + a.image + "'");
        }
        if (a.rois.empty()) {
            throw InvalidArgument("player '" + a.player + "' has no ROIs on image '" + a.image + "'");
        }
        if (!seen.insert(a.player).second) {
            throw InvalidArgument("player '" + a.player + "' appears twice");
        }
        g.players.push_back(a.player);
    }
    const std::size_t n = annotations.size();
    g.raw = Matrix(n, n);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            g.raw(p, q) = edge_weight(annotations[p], annotations[q], ctx);
        }
    }
    g.normalized = normalize_rows(g.raw, smoothing);
    return g;
}

namespace detail {

// y = A^T x
inline std::vector<double> transpose_times(const Matrix& a, std::span<const double> x) {
    std::vector<double> y(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) y[c] += a(r, c) * x[r];
    }
    return y;
}

inline double l1(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s;
}

// ||A^T x - rho x||_1 with rho = ||A^T x||_1 / ||x||_1.
inline std::pair<double, double> eigen_residual(const Matrix& a, std::span<const double> x) {
    const auto y = transpose_times(a, x);
    const double rho = l1(y) / l1(x);
    double r = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) r += std::abs(y[i] - rho * x[i]);
    return {rho, r};
}

inline void check_square(const Matrix& a) {
    if (a.rows() == 0 || a.rows() != a.cols()) {
        throw InvalidArgument("trust solver needs a non-empty square matrix");
    }
}

} // namespace detail

/// Stationary vector of the row-stochastic matrix `a` (Perron vector of A^T)
/// by power iteration from the uniform vector, L1-normalized every step.
/// Stops once ||A^T x - rho x||_1 <= tol.
inline TrustResult perron_vector(const Matrix& a, double tol, int max_iter) {
    detail::check_square(a);
    if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
    if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
    const std::size_t n = a.rows();
    std::vector<double> x(n, 1.0 / static_cast<double>(n));
    double residual = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        auto y = detail::transpose_times(a, x);
        const double norm_y = detail::l1(y);
        const double rho = norm_y / detail::l1(x);
        residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) residual += std::abs(y[i] - rho * x[i]);
        if (residual <= tol) {
            return TrustResult{std::move(x), rho, it, residual, TrustSolver::power};
        }
        for (auto& v : y) v /= norm_y;
        x = std::move(y);
    }
    throw NonConvergenceError(max_iter, residual);
}

inline TrustResult perron_vector(const PlayerRatingGraph& g, double tol = 1e-10,
                                 int max_iter = 10000) {
    return perron_vector(g.normalized, tol, max_iter);
}

/// Stationary vector of an irreducible row-stochastic matrix by
/// Grassmann-Taksar-Heyman elimination. Subtraction-free, so it stays
/// accurate on nearly decoupled graphs where power iteration stalls.
inline std::vector<double> stationary_distribution(const Matrix& stochastic) {
    detail::check_square(stochastic);
    Matrix a = stochastic;
    const std::size_t n = a.rows();
    for (std::size_t k = n - 1; k > 0; --k) {
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) s += a(k, j);
        if (!(s > 0.0)) throw InvalidArgument("matrix is reducible; no unique stationary vector");
        for (std::size_t i = 0; i < k; ++i) a(i, k) /= s;
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) a(i, j) += a(i, k) * a(k, j);
        }
    }
    std::vector<double> pi(n, 0.0);
    pi[0] = 1.0;
    for (std::size_t j = 1; j < n; ++j) {
        for (std::size_t i = 0; i < j; ++i) pi[j] += pi[i] * a(i, j);
    }
    const double total = detail::l1(pi);
    for (auto& v : pi) v /= total;
    return pi;
}

/// Trust values of every player in `g` using the configured solver.
inline TrustResult solve_trust(const PlayerRatingGraph& g, const RatingParams& params) {
    if (params.solver == TrustSolver::power) {
        return perron_vector(g.normalized, params.tolerance, params.max_iterations);
    }
    TrustResult r;
    r.trust = stationary_distribution(g.normalized);
    std::tie(r.spectral_radius, r.residual) = detail::eigen_residual(g.normalized, r.trust);
    r.iterations = 0;
    r.solver = TrustSolver::direct;
    if (r.residual > params.tolerance) throw NonConvergenceError(0, r.residual);
    return r;
}

} // namespace gwap
