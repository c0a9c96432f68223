#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "rating.hpp"
#include "tags.hpp"
#include "taskgen.hpp"

namespace gwap {

/// Outcome of rating the new player on one tagged image.
struct ImageAssessment {
    ImageId image;
    bool passed = false;
    bool participated = false; ///< false when the player drew no ROI here
    double trust = 0.0;
    double trusted_mean = 0.0;
    std::size_t trusted_count = 0;

    double margin() const noexcept { return trust - trusted_mean; }
};

struct DetectionVerdict {
    bool reliable = false;
    std::vector<ImageAssessment> images;
    int counter = 0;
    int threshold = 0;
};

inline nlohmann::ordered_json to_json(const DetectionVerdict& v, const PlayerId& player) {
    nlohmann::ordered_json j;
    j["player_id"] = player;
    j["reliable"] = v.reliable;
    j["counter"] = v.counter;
    j["threshold"] = v.threshold;
    j["images"] = nlohmann::ordered_json::array();
    for (const auto& im : v.images) {
        j["images"].push_back({{"image_id", im.image},
                               {"passed", im.passed},
                               {"participated", im.participated},
                               {"trust", im.trust},
                               {"trusted_mean", im.trusted_mean},
                               {"trusted_count", im.trusted_count}});
    }
    return j;
}

/// Drops tags the registry does not know yet; ROIs are kept.
inline std::vector<PlayerAnnotation> project_known_tags(std::span<const PlayerAnnotation> annotations,
                                                        const TagRegistry& registry) {
    std::vector<PlayerAnnotation> out;
    out.reserve(annotations.size());
    for (const auto& a : annotations) {
        PlayerAnnotation p{a.player, a.image, {}};
        for (const auto& r : a.rois) {
            std::vector<TagId> known;
            for (const auto& t : r.tags()) {
                if (registry.contains(t)) known.push_back(t);
            }
            p.rois.push_back(r.with_tags(std::move(known)));
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// Rates the new player on every tagged image of `task` against the trusted
/// players who annotated it. The new player's annotations must already be
/// restricted to known tags.
inline std::vector<ImageAssessment> assess_tagged_images(
    std::span<const PlayerAnnotation> new_player, std::span<const PlayerId> trusted,
    const PlayerTask& task, std::span<const PlayerAnnotation> trusted_annotations,
    const TagRegistry& registry, const RatingParams& params) {
    if (trusted.empty()) throw InvalidArgument("trusted group must not be empty");
    const std::unordered_set<PlayerId> trusted_set(trusted.begin(), trusted.end());
    const PlayerId& player = task.player;
    if (trusted_set.contains(player)) {
        throw InvalidArgument("player '" + player + "' is already trusted");
    }

    std::unordered_map<ImageId, const PlayerAnnotation*> mine;
    for (const auto& a : new_player) {
        if (a.player != player) {
            throw InvalidArgument("annotation by '" + a.player + "' passed as the new player's");
        }
        mine[a.image] = &a;
    }

    std::vector<ImageAssessment> out;
    for (const auto& image : task.tagged_images()) {
        std::vector<PlayerAnnotation> members;
        for (const auto& a : trusted_annotations) {
            if (a.image == image && !a.rois.empty() && trusted_set.contains(a.player)) {
                members.push_back(a);
            }
        }
        if (members.empty()) {
            throw ConfigurationError("tagged image '" + image + "' has no trusted annotations");
        }
        ImageAssessment as;
        as.image = image;
        as.trusted_count = members.size();
        auto it = mine.find(image);
        if (it == mine.end() || it->second->rois.empty()) {
            out.push_back(as); // no ROI on this image: automatic fail
            continue;
        }
        as.participated = true;
        members.insert(members.begin(), *it->second);

        std::vector<TagId> tags;
        for (const auto& m : members) {
            for (const auto& r : m.rois) tags.insert(tags.end(), r.tags().begin(), r.tags().end());
        }
        const auto ctx = registry.image_context(tags);
        const auto graph = build_adjacency(members, ctx, params.smoothing);
        const auto result = solve_trust(graph, params);

        double sum = 0.0;
        for (std::size_t i = 1; i < result.trust.size(); ++i) sum += result.trust[i];
        as.trust = result.trust.front();
        as.trusted_mean = sum / static_cast<double>(result.trust.size() - 1);
        as.passed = as.trust >= as.trusted_mean - params.tie_tolerance;
        out.push_back(as);
    }
    return out;
}

/// Counts passed images; reliable iff the count reaches `threshold`.
/// Any threshold is accepted here so that ROC sweeps can use 0 and n+1.
inline DetectionVerdict apply_threshold(std::vector<ImageAssessment> images, int threshold) {
    DetectionVerdict v;
    v.images = std::move(images);
    v.threshold = threshold;
    v.counter = static_cast<int>(
        std::count_if(v.images.begin(), v.images.end(), [](const auto& a) { return a.passed; }));
    v.reliable = v.counter >= threshold;
    return v;
}

/// Malicious player detection over one task round.
inline DetectionVerdict detect_malicious(std::span<const PlayerAnnotation> new_player,
                                         std::span<const PlayerId> trusted, const PlayerTask& task,
                                         int threshold,
                                         std::span<const PlayerAnnotation> trusted_annotations,
                                         const TagRegistry& registry,
                                         const RatingParams& params = {}) {
    const int n = static_cast<int>(task.tagged_images().size());
    if (n == 0) throw InvalidArgument("task has no tagged images");
    if (threshold < 1 || threshold > n) {
        throw InvalidArgument("acceptance threshold must lie in [1, " + std::to_string(n) +
                              "], got " + std::to_string(threshold));
    }
    return apply_threshold(
        assess_tagged_images(new_player, trusted, task, trusted_annotations, registry, params),
        threshold);
}

enum class NewTagCase { none, only_new, mixed };

inline const char* to_string(NewTagCase c) {
    switch (c) {
    case NewTagCase::none: return "none";
    case NewTagCase::only_new: return "only_new";
    case NewTagCase::mixed: return "mixed";
    }
    return "?";
}

inline NewTagCase classify_new_tags(std::span<const PlayerAnnotation> annotations,
                                    const TagRegistry& registry) {
    bool any_known = false;
    bool any_new = false;
    for (const auto& a : annotations) {
        for (const auto& r : a.rois) {
            for (const auto& t : r.tags()) (registry.contains(t) ? any_known : any_new) = true;
        }
    }
    if (!any_new) return NewTagCase::none;
    return any_known ? NewTagCase::mixed : NewTagCase::only_new;
}

struct MergeOutcome {
    NewTagCase kind = NewTagCase::none;
    bool reliable = false;
    bool dropped = false;
    std::vector<TagId> added; ///< new vocabulary entries, in insertion order
};

/// Applies the new-tag policy after detection ran on known tags only.
/// Reliable players with mixed tags extend the vocabulary (count 0; counts
/// are added when the results are promoted). Players with only new tags, and
/// unreliable players, are dropped.
inline MergeOutcome merge_new_tags(const DetectionVerdict& verdict,
                                   std::span<const PlayerAnnotation> annotations,
                                   TagRegistry& registry) {
    MergeOutcome out;
    out.kind = classify_new_tags(annotations, registry);
    out.reliable = verdict.reliable && out.kind != NewTagCase::only_new;
    out.dropped = !out.reliable;
    if (out.kind == NewTagCase::mixed && out.reliable) {
        for (const auto& a : annotations) {
            for (const auto& r : a.rois) {
                for (const auto& t : r.tags()) {
                    if (!registry.contains(t)) {
                        registry.add(t);
                        out.added.push_back(t);
                    }
                }
            }
        }
    }
    return out;
}

struct RatingOutcome {
    DetectionVerdict verdict;
    MergeOutcome merge;
};

/// Full rating round for one player: new-tag triage, detection on the
/// known-tag projection, then vocabulary merge.
inline RatingOutcome rate_player(std::span<const PlayerAnnotation> new_player,
                                 std::span<const PlayerId> trusted, const PlayerTask& task,
                                 int threshold, std::span<const PlayerAnnotation> trusted_annotations,
                                 TagRegistry& registry, const RatingParams& params = {}) {
    RatingOutcome out;
    if (classify_new_tags(new_player, registry) == NewTagCase::only_new) {
        std::vector<ImageAssessment> failed;
        for (const auto& image : task.tagged_images()) failed.push_back({image});
        out.verdict = apply_threshold(std::move(failed), threshold);
        out.verdict.reliable = false;
    } else {
        const auto projected = project_known_tags(new_player, registry);
        out.verdict = detect_malicious(projected, trusted, task, threshold, trusted_annotations,
                                       registry, params);
    }
    out.merge = merge_new_tags(out.verdict, new_player, registry);
    out.verdict.reliable = out.merge.reliable;
    return out;
}

} // namespace gwap
