#pragma once

// Synthetic evaluation of malicious player detection.
//
// Honest players redraw a trusted annotation with Gaussian endpoint scatter
// and keep a random subset of its tags; malicious players draw uniformly
// random rectangles with random tags. Detection is scored with ROC curves in
// which the malicious class is the positive class.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "detection.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "random.hpp"
#include "rating.hpp"
#include "tags.hpp"
#include "taskgen.hpp"

namespace gwap {

/// Gaussian scatter added independently to x, y, height and width.
/// With `relative` set, sigma is a fraction of the ROI's mean side length.
struct NoiseModel {
    double sigma = 0.0;
    bool relative = false;

    double sigma_for(const Roi& r) const {
        return relative ? sigma * 0.5 * static_cast<double>(r.width() + r.height()) : sigma;
    }
};

/// Zero-mean Gaussian MLE: sqrt(sum e^2 / N).
inline double estimate_sigma_mle(std::span<const double> samples) {
    if (samples.size() < 2) throw InvalidArgument("sigma estimate needs at least two samples");
    double ss = 0.0;
    for (double e : samples) ss += e * e;
    return std::sqrt(ss / static_cast<double>(samples.size()));
}

/// Per-coordinate deviations (x, y, height, width) of `drawn` from `reference`,
/// divided by the reference side length when `relative` is set.
inline void append_deviations(const Roi& reference, const Roi& drawn, bool relative,
                              std::vector<double>& out) {
    const double scale =
        relative ? 0.5 * static_cast<double>(reference.width() + reference.height()) : 1.0;
    out.push_back(static_cast<double>(drawn.x() - reference.x()) / scale);
    out.push_back(static_cast<double>(drawn.y() - reference.y()) / scale);
    out.push_back(static_cast<double>(drawn.height() - reference.height()) / scale);
    out.push_back(static_cast<double>(drawn.width() - reference.width()) / scale);
}

struct HonestModel {
    NoiseModel noise;
    double tag_keep = 0.8; ///< probability of keeping each trusted tag
};

/// Redraws `r` with scatter; width and height never drop below one pixel.
inline Roi perturb_roi(const Roi& r, const NoiseModel& noise, double tag_keep, Rng& rng) {
    const double sigma = noise.sigma_for(r);
    auto jitter = [&](std::int64_t v) {
        if (sigma <= 0.0) return v;
        std::normal_distribution<double> eps(0.0, sigma);
        return static_cast<std::int64_t>(std::llround(static_cast<double>(v) + eps(rng)));
    };
    const auto x = jitter(r.x());
    const auto y = jitter(r.y());
    const auto h = std::max<std::int64_t>(1, jitter(r.height()));
    const auto w = std::max<std::int64_t>(1, jitter(r.width()));
    std::vector<TagId> tags;
    if (tag_keep >= 1.0) {
        tags = r.tags();
    } else {
        std::bernoulli_distribution keep(std::clamp(tag_keep, 0.0, 1.0));
        for (const auto& t : r.tags()) {
            if (keep(rng)) tags.push_back(t);
        }
        if (tags.empty() && !r.tags().empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, r.tags().size() - 1);
            tags.push_back(r.tags()[pick(rng)]);
        }
    }
    return Roi(x, y, w, h, std::move(tags));
}

/// Honest player: for each image, picks one trusted annotation at random and
/// redraws all of its ROIs.
inline std::vector<PlayerAnnotation> synth_honest_player(
    const PlayerId& player, std::span<const ImageId> images,
    std::span<const PlayerAnnotation> trusted_results, const HonestModel& model,
    std::uint64_t seed) {
    if (model.noise.sigma < 0.0) throw InvalidArgument("noise sigma must be non-negative");
    std::unordered_map<ImageId, std::vector<const PlayerAnnotation*>> by_image;
    for (const auto& a : trusted_results) by_image[a.image].push_back(&a);
    Rng rng(seed);
    std::vector<PlayerAnnotation> out;
    for (const auto& image : images) {
        auto it = by_image.find(image);
        if (it == by_image.end()) {
            throw InvalidArgument("no trusted result for image '" + image + "'");
        }
        const auto& candidates = it->second;
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        const auto* ref = candidates.size() == 1 ? candidates.front() : candidates[pick(rng)];
        PlayerAnnotation a{player, image, {}};
        for (const auto& r : ref->rois) a.rois.push_back(perturb_roi(r, model.noise, model.tag_keep, rng));
        out.push_back(std::move(a));
    }
    return out;
}

struct SimImage {
    ImageId image;
    ImageSize size;
};

struct MaliciousModel {
    int min_rois = 1;
    int max_rois = 3;
    int min_tags = 1;
    int max_tags = 3;
    /// Side-length range for the ROIs. 0 means both edge pairs are drawn
    /// uniformly over the image instead, which gives large boxes (mean side
    /// a third of the image).
    std::int64_t min_side = 0;
    std::int64_t max_side = 0;
};

/// Uniform rectangle inside `size`: both edge pairs drawn uniformly.
inline Roi random_roi(ImageSize size, std::vector<TagId> tags, Rng& rng) {
    auto span_1d = [&](std::int64_t extent) {
        std::uniform_int_distribution<std::int64_t> d(0, extent);
        std::int64_t a = d(rng);
        std::int64_t b = d(rng);
        while (a == b) b = d(rng);
        return std::pair{std::min(a, b), std::max(a, b)};
    };
    const auto [x0, x1] = span_1d(size.width);
    const auto [y0, y1] = span_1d(size.height);
    return Roi(x0, y0, x1 - x0, y1 - y0, std::move(tags));
}

/// Uniformly placed rectangle with sides uniform in [min_side, max_side],
/// capped at the image size.
inline Roi random_roi(ImageSize size, std::int64_t min_side, std::int64_t max_side,
                      std::vector<TagId> tags, Rng& rng) {
    std::uniform_int_distribution<std::int64_t> side(min_side, std::max(min_side, max_side));
    const auto w = std::min(side(rng), size.width);
    const auto h = std::min(side(rng), size.height);
    const auto x = std::uniform_int_distribution<std::int64_t>(0, size.width - w)(rng);
    const auto y = std::uniform_int_distribution<std::int64_t>(0, size.height - h)(rng);
    return Roi(x, y, w, h, std::move(tags));
}

inline std::vector<TagId> random_tags(const std::vector<TagId>& vocab, int lo, int hi, Rng& rng) {
    const int k = std::min<int>(static_cast<int>(vocab.size()),
                                std::uniform_int_distribution<int>(lo, hi)(rng));
    std::vector<TagId> tags;
    std::sample(vocab.begin(), vocab.end(), std::back_inserter(tags), k, rng);
    return tags;
}

inline std::vector<PlayerAnnotation> synth_malicious_player(const PlayerId& player,
                                                            std::span<const SimImage> images,
                                                            const std::vector<TagId>& vocab,
                                                            const MaliciousModel& model,
                                                            std::uint64_t seed) {
    if (model.min_rois < 1 || model.max_rois < model.min_rois) {
        throw InvalidArgument("malicious ROI count range is invalid");
    }
    if (model.min_tags < 0 || model.max_tags < model.min_tags) {
        throw InvalidArgument("malicious tag count range is invalid");
    }
    if (model.max_side > 0 && (model.min_side < 1 || model.max_side < model.min_side)) {
        throw InvalidArgument("malicious side range is invalid");
    }
    Rng rng(seed);
    std::vector<PlayerAnnotation> out;
    for (const auto& im : images) {
        if (im.size.width <= 0 || im.size.height <= 0) {
            throw InvalidArgument("image '" + im.image + "' has no area");
        }
        PlayerAnnotation a{player, im.image, {}};
        const int k = std::uniform_int_distribution<int>(model.min_rois, model.max_rois)(rng);
        for (int i = 0; i < k; ++i) {
            auto tags = random_tags(vocab, model.min_tags, model.max_tags, rng);
            a.rois.push_back(model.max_side > 0
                                 ? random_roi(im.size, model.min_side, model.max_side, std::move(tags), rng)
                                 : random_roi(im.size, std::move(tags), rng));
        }
        out.push_back(std::move(a));
    }
    return out;
}

// ---------------------------------------------------------------------------
// ROC

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double parameter = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points; ///< sorted by FPR, from (0,0) to (1,1)
    double auc = 0.0;
};

inline double auc_trapezoid(std::span<const RocPoint> pts) {
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        area += (pts[i].fpr - pts[i - 1].fpr) * 0.5 * (pts[i].tpr + pts[i - 1].tpr);
    }
    return std::clamp(area, 0.0, 1.0);
}

namespace detail {

inline std::pair<double, double> class_sizes(const std::vector<bool>& malicious) {
    const auto pos = std::count(malicious.begin(), malicious.end(), true);
    const auto neg = static_cast<std::ptrdiff_t>(malicious.size()) - pos;
    if (pos == 0 || neg == 0) throw InvalidArgument("ROC needs both honest and malicious players");
    return {static_cast<double>(pos), static_cast<double>(neg)};
}

inline RocResult finish_roc(std::vector<RocPoint> pts) {
    std::stable_sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
    });
    RocResult r;
    r.points = std::move(pts);
    r.auc = auc_trapezoid(r.points);
    return r;
}

} // namespace detail

/// ROC of the acceptance threshold sweep theta = 0..n+1. A player is flagged
/// malicious when its pass counter is below theta, so theta = 0 flags nobody
/// and theta = n+1 flags everybody.
inline RocResult roc_from_counters(std::span<const int> counters, const std::vector<bool>& malicious,
                                   int n) {
    if (counters.size() != malicious.size()) throw InvalidArgument("ROC: size mismatch");
    const auto [pos, neg] = detail::class_sizes(malicious);
    std::vector<RocPoint> pts;
    for (int theta = 0; theta <= n + 1; ++theta) {
        double tp = 0.0;
        double fp = 0.0;
        for (std::size_t i = 0; i < counters.size(); ++i) {
            if (counters[i] < theta) (malicious[i] ? tp : fp) += 1.0;
        }
        pts.push_back({fp / neg, tp / pos, static_cast<double>(theta)});
    }
    return detail::finish_roc(std::move(pts));
}

/// ROC of a continuous score where lower means more suspicious. Sweeps the
/// cut "score <= s" over every distinct score plus the empty cut.
inline RocResult roc_from_scores(std::span<const double> scores,
                                 const std::vector<bool>& malicious) {
    if (scores.size() != malicious.size()) throw InvalidArgument("ROC: size mismatch");
    const auto [pos, neg] = detail::class_sizes(malicious);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::vector<RocPoint> pts{{0.0, 0.0, -std::numeric_limits<double>::infinity()}};
    double tp = 0.0;
    double fp = 0.0;
    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        for (; k < order.size() && scores[order[k]] == s; ++k) {
            (malicious[order[k]] ? tp : fp) += 1.0;
        }
        pts.push_back({fp / neg, tp / pos, s});
    }
    return detail::finish_roc(std::move(pts));
}

/// Detection outcome of one simulated player.
struct PlayerOutcome {
    PlayerId player;
    bool malicious = false;
    std::vector<ImageAssessment> images;
    int counter = 0;
    double mean_margin = 0.0; ///< mean (trust - trusted mean); -1 on images with no ROI
};

inline double mean_margin(std::span<const ImageAssessment> images) {
    if (images.empty()) return 0.0;
    double s = 0.0;
    for (const auto& a : images) s += a.participated ? a.margin() : -1.0;
    return s / static_cast<double>(images.size());
}

/// Threshold-sweep ROC over a labelled population.
inline RocResult roc_curve(std::span<const PlayerOutcome> population, int n) {
    std::vector<int> counters;
    std::vector<bool> labels;
    for (const auto& p : population) {
        counters.push_back(p.counter);
        labels.push_back(p.malicious);
    }
    return roc_from_counters(counters, labels, n);
}

// ---------------------------------------------------------------------------
// End-to-end simulation

inline std::vector<TagId> default_sim_vocabulary() {
    return {"burning building", "explosion",   "flooded area", "collapsed building",
            "smoke",            "blocked road", "landslide",    "debris"};
}

struct SimulationConfig {
    int honest = 100;
    int malicious = 100;
    int n = 5;       ///< tagged images per task (tasks hold 2n images)
    int trusted = 5; ///< size of the trusted group
    ImageSize image{256, 256};
    NoiseModel noise{0.05, true};
    double tag_keep = 0.8;
    /// Honest players use the sigma estimated from the trusted group.
    bool use_estimated_sigma = true;
    int min_scene_rois = 1;
    int max_scene_rois = 3;
    std::int64_t min_side = 24;
    std::int64_t max_side = 72;
    int max_scene_tags = 3;
    /// Random boxes at the scene's ROI scale, placed anywhere.
    MaliciousModel malicious_model{1, 3, 1, 3, 24, 72};
    std::vector<TagId> vocabulary = default_sim_vocabulary();
    RatingParams rating;
    int shuffle_rounds = 200; ///< label permutations averaged for the baseline
    std::uint64_t seed = 1;
};

struct SimulationResult {
    double sigma_mle = 0.0;
    double sigma_used = 0.0;
    RocResult threshold_roc;
    RocResult margin_roc;
    double shuffled_auc = 0.0;
    std::vector<PlayerOutcome> players;
};

namespace detail {

enum Stream : std::uint64_t {
    kScene = 1,
    kShuffle = 2,
    kTrusted = 1'000,
    kHonest = 1'000'000,
    kMalicious = 2'000'000,
    kTask = 3'000'000,
};

inline Roi scene_roi(const SimulationConfig& cfg, Rng& rng) {
    std::uniform_int_distribution<std::int64_t> side(cfg.min_side,
                                                     std::max(cfg.min_side, cfg.max_side));
    const auto w = std::min(side(rng), cfg.image.width);
    const auto h = std::min(side(rng), cfg.image.height);
    std::uniform_int_distribution<std::int64_t> px(0, cfg.image.width - w);
    std::uniform_int_distribution<std::int64_t> py(0, cfg.image.height - h);
    const auto x = px(rng);
    const auto y = py(rng);
    return Roi(x, y, w, h, random_tags(cfg.vocabulary, 1, cfg.max_scene_tags, rng));
}

inline void clamp_all(std::vector<PlayerAnnotation>& annotations, ImageSize size) {
    for (auto& a : annotations) {
        std::vector<Roi> kept;
        for (const auto& r : a.rois) {
            if (auto c = clamp_to_image(r, size); c.roi) kept.push_back(std::move(*c.roi));
        }
        a.rois = std::move(kept);
    }
}

} // namespace detail

inline void validate(const SimulationConfig& cfg) {
    if (cfg.honest < 1 || cfg.malicious < 1) throw InvalidArgument("need honest and malicious players");
    if (cfg.n < 1) throw InvalidArgument("n must be at least 1");
    if (cfg.trusted < 1) throw InvalidArgument("trusted group must have at least one member");
    if (cfg.image.width < 2 || cfg.image.height < 2) throw InvalidArgument("image too small");
    if (cfg.noise.sigma < 0.0) throw InvalidArgument("noise sigma must be non-negative");
    if (cfg.tag_keep < 0.0 || cfg.tag_keep > 1.0) throw InvalidArgument("tag_keep must lie in [0,1]");
    if (cfg.min_scene_rois < 1 || cfg.max_scene_rois < cfg.min_scene_rois) {
        throw InvalidArgument("scene ROI count range is invalid");
    }
    if (cfg.shuffle_rounds < 1) throw InvalidArgument("shuffle_rounds must be at least 1");
    if (cfg.min_side < 1) throw InvalidArgument("min_side must be positive");
    if (cfg.vocabulary.empty()) throw InvalidArgument("simulation vocabulary is empty");
}

/// Builds a scene of n tagged and n fresh images, a trusted group that
/// annotated the tagged ones, then rates every synthetic player.
inline SimulationResult run_simulation(const SimulationConfig& cfg) {
    validate(cfg);
    Rng scene_rng(stream_seed(cfg.seed, detail::kScene));

    std::vector<ImageId> tagged;
    std::vector<ImageId> fresh;
    std::vector<SimImage> tagged_images;
    for (int i = 0; i < cfg.n; ++i) {
        tagged.push_back(random_uuid(scene_rng));
        tagged_images.push_back({tagged.back(), cfg.image});
    }
    for (int i = 0; i < cfg.n; ++i) fresh.push_back(random_uuid(scene_rng));

    // ground truth the trusted group and honest players scatter around
    std::vector<PlayerAnnotation> reference;
    for (const auto& image : tagged) {
        PlayerAnnotation a{"reference", image, {}};
        const int k =
            std::uniform_int_distribution<int>(cfg.min_scene_rois, cfg.max_scene_rois)(scene_rng);
        for (int i = 0; i < k; ++i) a.rois.push_back(detail::scene_roi(cfg, scene_rng));
        reference.push_back(std::move(a));
    }

    std::vector<PlayerId> trusted;
    std::vector<PlayerAnnotation> trusted_annotations;
    std::vector<double> deviations;
    const HonestModel trusted_model{cfg.noise, cfg.tag_keep};
    for (int t = 0; t < cfg.trusted; ++t) {
        trusted.push_back("trusted-" + std::to_string(t));
        auto ann = synth_honest_player(trusted.back(), tagged, reference, trusted_model,
                                       stream_seed(cfg.seed, detail::kTrusted + t));
        for (std::size_t k = 0; k < ann.size(); ++k) {
            for (std::size_t i = 0; i < ann[k].rois.size(); ++i) {
                append_deviations(reference[k].rois[i], ann[k].rois[i], cfg.noise.relative,
                                  deviations);
            }
        }
        detail::clamp_all(ann, cfg.image);
        trusted_annotations.insert(trusted_annotations.end(), ann.begin(), ann.end());
    }

    SimulationResult result;
    result.sigma_mle = deviations.size() >= 2 ? estimate_sigma_mle(deviations) : 0.0;
    result.sigma_used = cfg.use_estimated_sigma ? result.sigma_mle : cfg.noise.sigma;

    const auto registry = init_trusted_group(trusted_annotations, cfg.vocabulary).registry;
    const HonestModel honest_model{{result.sigma_used, cfg.noise.relative}, cfg.tag_keep};

    auto rate = [&](const PlayerId& id, std::vector<PlayerAnnotation> ann, bool malicious,
                    std::uint64_t task_seed) {
        detail::clamp_all(ann, cfg.image);
        const auto task = generate_task(tagged, fresh, static_cast<std::size_t>(cfg.n), id, task_seed);
        PlayerOutcome out;
        out.player = id;
        out.malicious = malicious;
        out.images = assess_tagged_images(project_known_tags(ann, registry), trusted, task,
                                          trusted_annotations, registry, cfg.rating);
        out.counter = static_cast<int>(std::count_if(out.images.begin(), out.images.end(),
                                                     [](const auto& a) { return a.passed; }));
        out.mean_margin = mean_margin(out.images);
        return out;
    };

    for (int i = 0; i < cfg.honest; ++i) {
        const PlayerId id = "honest-" + std::to_string(i);
        auto ann = synth_honest_player(id, tagged, reference, honest_model,
                                       stream_seed(cfg.seed, detail::kHonest + i));
        result.players.push_back(
            rate(id, std::move(ann), false, stream_seed(cfg.seed, detail::kTask + i)));
    }
    for (int i = 0; i < cfg.malicious; ++i) {
        const PlayerId id = "malicious-" + std::to_string(i);
        auto ann = synth_malicious_player(id, tagged_images, registry.tags(), cfg.malicious_model,
                                          stream_seed(cfg.seed, detail::kMalicious + i));
        result.players.push_back(rate(id, std::move(ann), true,
                                      stream_seed(cfg.seed, detail::kTask + cfg.honest + i)));
    }

    std::vector<int> counters;
    std::vector<double> margins;
    std::vector<bool> labels;
    for (const auto& p : result.players) {
        counters.push_back(p.counter);
        margins.push_back(p.mean_margin);
        labels.push_back(p.malicious);
    }
    result.threshold_roc = roc_from_counters(counters, labels, cfg.n);
    result.margin_roc = roc_from_scores(margins, labels);

    // chance baseline: mean AUC over label permutations
    Rng shuffle_rng(stream_seed(cfg.seed, detail::kShuffle));
    auto shuffled = labels;
    double total = 0.0;
    for (int k = 0; k < cfg.shuffle_rounds; ++k) {
        std::shuffle(shuffled.begin(), shuffled.end(), shuffle_rng);
        total += roc_from_counters(counters, shuffled, cfg.n).auc;
    }
    result.shuffled_auc = total / static_cast<double>(cfg.shuffle_rounds);
    return result;
}

} // namespace gwap
