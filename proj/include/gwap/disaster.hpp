#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "geometry.hpp"
#include "rating.hpp"
#include "tags.hpp"

namespace gwap {

/// One image of a monitored region with its reliable ROIs.
struct RegionImage {
    ImageId image;
    ImageSize size;
    std::vector<Roi> rois;
};

struct TagContribution {
    TagId tag;
    double weight = 0.0;         ///< p(g)
    std::int64_t roi_area = 0;   ///< accumulated area of ROIs carrying the tag
    double area_ratio = 0.0;     ///< roi_area / region area, capped at 1
    double contribution = 0.0;   ///< weight * area_ratio
};

struct RegionReport {
    std::string region_id;
    std::vector<ImageId> images;
    double delta = 0.0;
    std::vector<TagContribution> breakdown; ///< system vocabulary order
    std::string evaluated_at;
};

/// Weighted ROI-area coverage of a region:
///   delta = sum_g p(g) * min(1, sum_{ROI tagged g} |ROI| / sum_i |image_i|).
/// Overlapping ROIs are accumulated, not merged.
inline RegionReport disaster_level(const std::string& region_id,
                                   std::span<const RegionImage> images,
                                   const TagRegistry& registry, std::string evaluated_at) {
    if (images.empty()) throw InvalidArgument("region '" + region_id + "' has no images");
    std::int64_t total_area = 0;
    std::map<std::size_t, std::int64_t> area_by_tag; // keyed by vocabulary index
    RegionReport report;
    report.region_id = region_id;
    report.evaluated_at = std::move(evaluated_at);
    for (const auto& im : images) {
        if (im.size.width < 0 || im.size.height < 0) {
            throw InvalidArgument("image '" + im.image + "' has negative dimensions");
        }
        total_area += im.size.width * im.size.height;
        report.images.push_back(im.image);
        for (const auto& r : im.rois) {
            for (const auto& t : r.tags()) area_by_tag[registry.index_of(t)] += roi_area(r);
        }
    }
    if (total_area <= 0) throw InvalidArgument("region '" + region_id + "' has zero total area");
    if (area_by_tag.empty()) return report;

    const auto weights = registry.system_weights();
    double delta = 0.0;
    for (const auto& [idx, area] : area_by_tag) {
        TagContribution c;
        c.tag = registry.tags()[idx];
        c.weight = weights[idx];
        c.roi_area = area;
        c.area_ratio =
            std::min(1.0, static_cast<double>(area) / static_cast<double>(total_area));
        c.contribution = c.weight * c.area_ratio;
        delta += c.contribution;
        report.breakdown.push_back(std::move(c));
    }
    report.delta = std::clamp(delta, 0.0, 1.0);
    return report;
}

inline nlohmann::ordered_json to_json(const RegionReport& r) {
    nlohmann::ordered_json j;
    j["region_id"] = r.region_id;
    j["delta"] = r.delta;
    j["images"] = r.images;
    j["breakdown"] = nlohmann::ordered_json::array();
    for (const auto& c : r.breakdown) {
        j["breakdown"].push_back({{"tag", c.tag},
                                  {"weight", c.weight},
                                  {"roi_area", c.roi_area},
                                  {"area_ratio", c.area_ratio},
                                  {"contribution", c.contribution}});
    }
    j["timestamp"] = r.evaluated_at;
    return j;
}

} // namespace gwap
