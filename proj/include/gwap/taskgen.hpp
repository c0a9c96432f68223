#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "geometry.hpp"
#include "random.hpp"
#include "rating.hpp"
#include "tags.hpp"

namespace gwap {

enum class TileLayer { base, half_shifted };

inline const char* to_string(TileLayer l) { return l == TileLayer::base ? "base" : "half_shifted"; }

struct Tile {
    std::string id;
    std::string region_id;
    std::int64_t x = 0;
    std::int64_t y = 0;
    std::int64_t width = 0;
    std::int64_t height = 0;
    TileLayer layer = TileLayer::base;
};

inline nlohmann::ordered_json to_json(const Tile& t) {
    return {{"tile_id", t.id},   {"region_id", t.region_id}, {"x", t.x},
            {"y", t.y},          {"width", t.width},         {"height", t.height},
            {"layer", to_string(t.layer)}};
}

namespace detail {

// Start offsets of the shifted layer along one axis: one cell centred on
// every interior seam, or a single unshifted cell when the axis has no seam.
inline std::vector<std::int64_t> shifted_starts(std::int64_t extent, std::int64_t tile) {
    const std::int64_t cells = (extent + tile - 1) / tile;
    if (cells < 2) return {0};
    std::vector<std::int64_t> out;
    for (std::int64_t i = 1; i < cells; ++i) out.push_back(i * tile - tile / 2);
    return out;
}

} // namespace detail

/// Cuts a region into a base grid plus a half-shifted layer.
///
/// The base grid partitions the region exactly (the last row/column is
/// cropped when the tile size does not divide the region). The shifted layer
/// is offset by (tile_w/2, tile_h/2) and covers every interior seam; its
/// tiles are cropped at the region border rather than hanging past it.
/// Tiles larger than the region degrade to a single region-sized tile.
inline std::vector<Tile> tile_region(const std::string& region_id, ImageSize region,
                                     std::int64_t tile_w, std::int64_t tile_h, Rng& rng) {
    if (region.width <= 0 || region.height <= 0) {
        throw InvalidArgument("region must have positive dimensions");
    }
    if (tile_w <= 0 || tile_h <= 0) throw InvalidArgument("tile dimensions must be positive");
    tile_w = std::min(tile_w, region.width);
    tile_h = std::min(tile_h, region.height);

    std::vector<Tile> tiles;
    for (std::int64_t y = 0; y < region.height; y += tile_h) {
        for (std::int64_t x = 0; x < region.width; x += tile_w) {
            tiles.push_back(Tile{random_uuid(rng), region_id, x, y,
                                 std::min(tile_w, region.width - x),
                                 std::min(tile_h, region.height - y), TileLayer::base});
        }
    }
    const bool seams_x = tile_w < region.width;
    const bool seams_y = tile_h < region.height;
    // shifted tiles need a proper half offset to put a seam strictly inside
    if ((!seams_x && !seams_y) || (seams_x && tile_w < 2) || (seams_y && tile_h < 2)) {
        return tiles;
    }
    for (std::int64_t y : detail::shifted_starts(region.height, tile_h)) {
        for (std::int64_t x : detail::shifted_starts(region.width, tile_w)) {
            tiles.push_back(Tile{random_uuid(rng), region_id, x, y,
                                 std::min(tile_w, region.width - x),
                                 std::min(tile_h, region.height - y), TileLayer::half_shifted});
        }
    }
    return tiles;
}

enum class ImageProvenance { tagged, fresh };

struct TaskImage {
    ImageId image;
    ImageProvenance provenance = ImageProvenance::fresh;

    friend bool operator==(const TaskImage&, const TaskImage&) = default;
};

/// 2n images in random order: n already reliably tagged, n fresh.
struct PlayerTask {
    std::string task_id;
    PlayerId player;
    std::vector<TaskImage> images;

    std::vector<ImageId> tagged_images() const { return select(ImageProvenance::tagged); }
    std::vector<ImageId> fresh_images() const { return select(ImageProvenance::fresh); }

    /// Payload handed to the game client; provenance stays server-side.
    nlohmann::ordered_json to_player_json() const {
        nlohmann::ordered_json j;
        j["task_id"] = task_id;
        j["player_id"] = player;
        j["images"] = nlohmann::ordered_json::array();
        for (const auto& im : images) j["images"].push_back({{"image_id", im.image}});
        return j;
    }

    nlohmann::ordered_json to_server_json() const {
        nlohmann::ordered_json j = to_player_json();
        for (std::size_t i = 0; i < images.size(); ++i) {
            j["images"][i]["provenance"] =
                images[i].provenance == ImageProvenance::tagged ? "tagged" : "fresh";
        }
        return j;
    }

    static PlayerTask from_server_json(const nlohmann::ordered_json& j) {
        if (!j.is_object()) throw SchemaError("$", "task must be an object");
        for (const char* key : {"task_id", "player_id"}) {
            if (!j.contains(key) || !j[key].is_string()) throw SchemaError(key, "missing or not a string");
        }
        if (!j.contains("images") || !j["images"].is_array()) {
            throw SchemaError("images", "missing or not an array");
        }
        PlayerTask t;
        t.task_id = j["task_id"].get<std::string>();
        t.player = j["player_id"].get<std::string>();
        for (std::size_t i = 0; i < j["images"].size(); ++i) {
            const auto& e = j["images"][i];
            const std::string path = "images[" + std::to_string(i) + "]";
            if (!e.is_object() || !e.contains("image_id") || !e["image_id"].is_string()) {
                throw SchemaError(path + ".image_id", "missing or not a string");
            }
            if (!e.contains("provenance") || !e["provenance"].is_string()) {
                throw SchemaError(path + ".provenance", "missing or not a string");
            }
            const auto prov = e["provenance"].get<std::string>();
            if (prov != "tagged" && prov != "fresh") {
                throw SchemaError(path + ".provenance", "expected \"tagged\" or \"fresh\"");
            }
            t.images.push_back({e["image_id"].get<std::string>(),
                                prov == "tagged" ? ImageProvenance::tagged : ImageProvenance::fresh});
        }
        return t;
    }

    friend bool operator==(const PlayerTask&, const PlayerTask&) = default;

private:
    std::vector<ImageId> select(ImageProvenance p) const {
        std::vector<ImageId> out;
        for (const auto& im : images) {
            if (im.provenance == p) out.push_back(im.image);
        }
        return out;
    }
};

/// Samples n tagged and n fresh images without replacement and shuffles
/// them. Fresh candidates that also appear in the tagged pool are ignored.
inline PlayerTask generate_task(std::span<const ImageId> tagged_pool,
                                std::span<const ImageId> fresh_pool, std::size_t n,
                                const PlayerId& player, std::uint64_t seed) {
    if (n == 0) throw InvalidArgument("task half-size n must be at least 1");
    std::vector<ImageId> tagged;
    std::unordered_set<ImageId> seen;
    for (const auto& id : tagged_pool) {
        if (seen.insert(id).second) tagged.push_back(id);
    }
    std::vector<ImageId> fresh;
    for (const auto& id : fresh_pool) {
        if (seen.insert(id).second) fresh.push_back(id);
    }
    if (tagged.size() < n) throw PoolExhaustedError("tagged (ResultDB)", tagged.size(), n);
    if (fresh.size() < n) throw PoolExhaustedError("fresh", fresh.size(), n);

    Rng rng(seed);
    PlayerTask task;
    task.task_id = random_uuid(rng);
    task.player = player;
    std::shuffle(tagged.begin(), tagged.end(), rng);
    std::shuffle(fresh.begin(), fresh.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
        task.images.push_back({tagged[i], ImageProvenance::tagged});
        task.images.push_back({fresh[i], ImageProvenance::fresh});
    }
    std::shuffle(task.images.begin(), task.images.end(), rng);
    return task;
}

struct BootstrapState {
    std::vector<PlayerId> trusted;            ///< in order of first appearance
    std::map<PlayerId, double> initial_trust; ///< 1/n each
    TagRegistry registry;                     ///< predefined tags plus seed counts
    std::vector<PlayerAnnotation> reliable;   ///< seed annotations promoted as-is
};

/// Cold start: every seed player is trusted, the vocabulary starts from the
/// predefined tag list and counts the seed ROIs.
inline BootstrapState init_trusted_group(std::span<const PlayerAnnotation> seeds,
                                         const std::vector<TagId>& predefined_tags) {
    if (predefined_tags.empty()) throw InvalidArgument("predefined tag list must not be empty");
    if (seeds.empty()) throw InvalidArgument("cold start needs at least one seed player");
    BootstrapState st;
    st.registry = TagRegistry(predefined_tags);
    std::unordered_set<PlayerId> seen;
    for (const auto& a : seeds) {
        if (a.player.empty()) throw InvalidArgument("seed annotation without player id");
        if (seen.insert(a.player).second) st.trusted.push_back(a.player);
        st.registry.count_rois(a.rois);
        st.reliable.push_back(a);
    }
    const double share = 1.0 / static_cast<double>(st.trusted.size());
    for (const auto& p : st.trusted) st.initial_trust[p] = share;
    return st;
}

} // namespace gwap
