#pragma once

// PlayerDB / ResultDB documents and the image manifest.
//
// Each database is a single JSON array on disk. Field names and their order
// follow the published document layouts (see schemas/); unknown fields are
// rejected so that load/save round-trips are exact.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include <json.hpp>

#include "detection.hpp"
#include "disaster.hpp"
#include "error.hpp"
#include "geometry.hpp"
#include "rating.hpp"
#include "tags.hpp"

namespace gwap {

using ordered_json = nlohmann::ordered_json;

struct TaskEntry {
    ImageId image_id;
    std::string image_at; ///< "YYYY-MM-DD HH:MM:SS"
    std::optional<bool> reliable;
    std::vector<Roi> rois;

    friend bool operator==(const TaskEntry&, const TaskEntry&) = default;
};

struct PlayerRecord {
    PlayerId player_id;
    std::vector<TaskEntry> tasks;

    const TaskEntry* find_task(const ImageId& image) const {
        for (const auto& t : tasks) {
            if (t.image_id == image) return &t;
        }
        return nullptr;
    }

    friend bool operator==(const PlayerRecord&, const PlayerRecord&) = default;
};

struct HistoryEntry {
    ImageId image_id;
    std::string image_at;
    std::vector<Roi> rois;

    friend bool operator==(const HistoryEntry&, const HistoryEntry&) = default;
};

struct ResultRecord {
    std::string region_id;
    std::vector<HistoryEntry> history;

    friend bool operator==(const ResultRecord&, const ResultRecord&) = default;
};

struct ImageInfo {
    ImageId image_id;
    std::string region_id;
    std::string image_at;
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::string path;

    ImageSize size() const noexcept { return {width, height}; }
    friend bool operator==(const ImageInfo&, const ImageInfo&) = default;
};

namespace detail {

inline std::string join_path(const std::string& prefix, const std::string& key) {
    return prefix.empty() ? key : prefix + "." + key;
}

inline std::string index_path(const std::string& prefix, std::size_t i) {
    return prefix + "[" + std::to_string(i) + "]";
}

inline void require_object(const ordered_json& j, const std::string& path,
                           std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw SchemaError(path.empty() ? "$" : path, "expected an object");
    for (const auto& item : j.items()) {
        if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
                return item.key() == a;
            }) == allowed.end()) {
            throw SchemaError(join_path(path, item.key()), "unknown field");
        }
    }
}

inline const ordered_json& field(const ordered_json& j, const std::string& path, const char* key) {
    if (!j.contains(key)) throw SchemaError(join_path(path, key), "missing required field");
    return j[key];
}

inline std::string string_field(const ordered_json& j, const std::string& path, const char* key) {
    const auto& v = field(j, path, key);
    if (!v.is_string()) throw SchemaError(join_path(path, key), "expected a string");
    return v.get<std::string>();
}

inline std::int64_t int_field(const ordered_json& j, const std::string& path, const char* key) {
    const auto& v = field(j, path, key);
    if (!v.is_number_integer()) throw SchemaError(join_path(path, key), "expected an integer");
    return v.get<std::int64_t>();
}

inline const ordered_json& array_field(const ordered_json& j, const std::string& path,
                                       const char* key) {
    const auto& v = field(j, path, key);
    if (!v.is_array()) throw SchemaError(join_path(path, key), "expected an array");
    return v;
}

inline bool is_timestamp(const std::string& s) {
    static constexpr const char* pattern = "dddd-dd-dd dd:dd:dd";
    if (s.size() != 19) return false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const bool digit = std::isdigit(static_cast<unsigned char>(s[i])) != 0;
        if (pattern[i] == 'd' ? !digit : s[i] != pattern[i]) return false;
    }
    return true;
}

inline std::string timestamp_field(const ordered_json& j, const std::string& path,
                                   const char* key) {
    auto s = string_field(j, path, key);
    if (!is_timestamp(s)) {
        throw SchemaError(join_path(path, key), "expected \"YYYY-MM-DD HH:MM:SS\"");
    }
    return s;
}

inline std::string id_field(const ordered_json& j, const std::string& path, const char* key) {
    auto s = string_field(j, path, key);
    if (s.empty()) throw SchemaError(join_path(path, key), "must not be empty");
    return s;
}

inline Roi roi_from_json(const ordered_json& j, const std::string& path) {
    require_object(j, path, {"x", "y", "height", "width", "tags"});
    const auto x = int_field(j, path, "x");
    const auto y = int_field(j, path, "y");
    const auto h = int_field(j, path, "height");
    const auto w = int_field(j, path, "width");
    if (h <= 0) throw SchemaError(join_path(path, "height"), "must be positive");
    if (w <= 0) throw SchemaError(join_path(path, "width"), "must be positive");
    const auto& tj = array_field(j, path, "tags");
    std::vector<TagId> tags;
    const auto tpath = join_path(path, "tags");
    for (std::size_t i = 0; i < tj.size(); ++i) {
        if (!tj[i].is_string() || tj[i].get<std::string>().empty()) {
            throw SchemaError(index_path(tpath, i), "expected a non-empty string");
        }
        auto t = tj[i].get<std::string>();
        if (std::find(tags.begin(), tags.end(), t) != tags.end()) {
            throw SchemaError(index_path(tpath, i), "duplicate tag '" + t + "'");
        }
        tags.push_back(std::move(t));
    }
    return Roi(x, y, w, h, std::move(tags));
}

inline ordered_json roi_to_json(const Roi& r) {
    return {{"x", r.x()},
            {"y", r.y()},
            {"height", r.height()},
            {"width", r.width()},
            {"tags", r.tags()}};
}

inline std::vector<Roi> rois_from_json(const ordered_json& j, const std::string& path) {
    const auto& arr = array_field(j, path, "ROIs");
    std::vector<Roi> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(roi_from_json(arr[i], index_path(join_path(path, "ROIs"), i)));
    }
    return out;
}

inline ordered_json rois_to_json(const std::vector<Roi>& rois) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : rois) arr.push_back(roi_to_json(r));
    return arr;
}

inline const ordered_json& top_array(const ordered_json& j) {
    if (!j.is_array()) throw SchemaError("$", "expected a top-level array");
    return j;
}

inline ordered_json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open '" + path.string() + "'");
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("$", "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

} // namespace detail

/// Writes `doc` to a temporary sibling and renames it over `path`.
inline void write_json_atomic(const std::filesystem::path& path, const ordered_json& doc) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << doc.dump(2) << '\n';
        if (!out) throw Error("failed writing '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

inline PlayerRecord player_record_from_json(const ordered_json& j, const std::string& path = "") {
    detail::require_object(j, path, {"player_id", "tasks"});
    PlayerRecord rec;
    rec.player_id = detail::id_field(j, path, "player_id");
    const auto& tasks = detail::array_field(j, path, "tasks");
    std::unordered_set<ImageId> images;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const auto tpath = detail::index_path(detail::join_path(path, "tasks"), i);
        const auto& t = tasks[i];
        detail::require_object(t, tpath, {"image_id", "image_at", "reliable", "ROIs"});
        TaskEntry e;
        e.image_id = detail::id_field(t, tpath, "image_id");
        if (!images.insert(e.image_id).second) {
            throw SchemaError(detail::join_path(tpath, "image_id"),
                              "image '" + e.image_id + "' listed twice");
        }
        e.image_at = detail::timestamp_field(t, tpath, "image_at");
        if (t.contains("reliable")) {
            if (!t["reliable"].is_boolean()) {
                throw SchemaError(detail::join_path(tpath, "reliable"), "expected a boolean");
            }
            e.reliable = t["reliable"].get<bool>();
        }
        e.rois = detail::rois_from_json(t, tpath);
        rec.tasks.push_back(std::move(e));
    }
    return rec;
}

inline ordered_json to_json(const PlayerRecord& rec) {
    ordered_json j;
    j["player_id"] = rec.player_id;
    j["tasks"] = ordered_json::array();
    for (const auto& t : rec.tasks) {
        ordered_json e;
        e["image_id"] = t.image_id;
        e["image_at"] = t.image_at;
        if (t.reliable) e["reliable"] = *t.reliable;
        e["ROIs"] = detail::rois_to_json(t.rois);
        j["tasks"].push_back(std::move(e));
    }
    return j;
}

inline ResultRecord result_record_from_json(const ordered_json& j, const std::string& path = "") {
    detail::require_object(j, path, {"region_id", "history"});
    ResultRecord rec;
    rec.region_id = detail::id_field(j, path, "region_id");
    const auto& hist = detail::array_field(j, path, "history");
    for (std::size_t i = 0; i < hist.size(); ++i) {
        const auto hpath = detail::index_path(detail::join_path(path, "history"), i);
        detail::require_object(hist[i], hpath, {"image_id", "image_at", "ROIs"});
        HistoryEntry e;
        e.image_id = detail::id_field(hist[i], hpath, "image_id");
        e.image_at = detail::timestamp_field(hist[i], hpath, "image_at");
        e.rois = detail::rois_from_json(hist[i], hpath);
        rec.history.push_back(std::move(e));
    }
    return rec;
}

inline ordered_json to_json(const ResultRecord& rec) {
    ordered_json j;
    j["region_id"] = rec.region_id;
    j["history"] = ordered_json::array();
    for (const auto& h : rec.history) {
        ordered_json e;
        e["image_id"] = h.image_id;
        e["image_at"] = h.image_at;
        e["ROIs"] = detail::rois_to_json(h.rois);
        j["history"].push_back(std::move(e));
    }
    return j;
}

class PlayerDb {
public:
    /// Appends `rec`, or replaces the stored record with the same player id.
    void persist(PlayerRecord rec) {
        // validate by round-tripping through the schema check
        rec = player_record_from_json(gwap::to_json(rec));
        for (auto& r : records_) {
            if (r.player_id == rec.player_id) {
                r = std::move(rec);
                return;
            }
        }
        records_.push_back(std::move(rec));
    }

    /// Parses and stores a single record document.
    void persist(const ordered_json& doc) { persist(player_record_from_json(doc)); }

    const PlayerRecord* find(const PlayerId& id) const {
        for (const auto& r : records_) {
            if (r.player_id == id) return &r;
        }
        return nullptr;
    }

    PlayerRecord* find(const PlayerId& id) {
        return const_cast<PlayerRecord*>(std::as_const(*this).find(id));
    }

    const std::vector<PlayerRecord>& records() const noexcept { return records_; }

    /// Players with at least one task marked reliable.
    std::vector<PlayerId> trusted_players() const {
        std::vector<PlayerId> out;
        for (const auto& r : records_) {
            if (std::any_of(r.tasks.begin(), r.tasks.end(),
                            [](const TaskEntry& t) { return t.reliable.value_or(false); })) {
                out.push_back(r.player_id);
            }
        }
        return out;
    }

    std::vector<PlayerAnnotation> annotations(const PlayerId& id) const {
        std::vector<PlayerAnnotation> out;
        if (const auto* r = find(id)) {
            for (const auto& t : r->tasks) out.push_back({id, t.image_id, t.rois});
        }
        return out;
    }

    /// Every task marked reliable, across all players.
    std::vector<PlayerAnnotation> reliable_annotations() const {
        std::vector<PlayerAnnotation> out;
        for (const auto& r : records_) {
            for (const auto& t : r.tasks) {
                if (t.reliable.value_or(false)) out.push_back({r.player_id, t.image_id, t.rois});
            }
        }
        return out;
    }

    ordered_json to_json() const {
        ordered_json arr = ordered_json::array();
        for (const auto& r : records_) arr.push_back(gwap::to_json(r));
        return arr;
    }

    static PlayerDb from_json(const ordered_json& j) {
        const auto& arr = detail::top_array(j);
        PlayerDb db;
        std::unordered_set<PlayerId> ids;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            auto rec = player_record_from_json(arr[i], detail::index_path("", i));
            if (!ids.insert(rec.player_id).second) {
                throw SchemaError(detail::index_path("", i) + ".player_id",
                                  "duplicate player '" + rec.player_id + "'");
            }
            db.records_.push_back(std::move(rec));
        }
        return db;
    }

    static PlayerDb load(const std::filesystem::path& path) {
        return from_json(detail::read_json_file(path));
    }

    void save(const std::filesystem::path& path) const { write_json_atomic(path, to_json()); }

    friend bool operator==(const PlayerDb&, const PlayerDb&) = default;

private:
    std::vector<PlayerRecord> records_;
};

class ResultDb {
public:
    const ResultRecord* find(const std::string& region) const {
        for (const auto& r : records_) {
            if (r.region_id == region) return &r;
        }
        return nullptr;
    }

    void append(const std::string& region, HistoryEntry entry) {
        for (auto& r : records_) {
            if (r.region_id == region) {
                r.history.push_back(std::move(entry));
                return;
            }
        }
        records_.push_back({region, {std::move(entry)}});
    }

    const std::vector<ResultRecord>& records() const noexcept { return records_; }

    /// Images with at least one reliable ROI, in order of first appearance.
    std::vector<ImageId> tagged_images() const {
        std::vector<ImageId> out;
        std::unordered_set<ImageId> seen;
        for (const auto& r : records_) {
            for (const auto& h : r.history) {
                if (!h.rois.empty() && seen.insert(h.image_id).second) out.push_back(h.image_id);
            }
        }
        return out;
    }

    /// Images with any history entry, tagged or not.
    std::unordered_set<ImageId> known_images() const {
        std::unordered_set<ImageId> out;
        for (const auto& r : records_) {
            for (const auto& h : r.history) out.insert(h.image_id);
        }
        return out;
    }

    ordered_json to_json() const {
        ordered_json arr = ordered_json::array();
        for (const auto& r : records_) arr.push_back(gwap::to_json(r));
        return arr;
    }

    static ResultDb from_json(const ordered_json& j) {
        const auto& arr = detail::top_array(j);
        ResultDb db;
        std::unordered_set<std::string> ids;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            auto rec = result_record_from_json(arr[i], detail::index_path("", i));
            if (!ids.insert(rec.region_id).second) {
                throw SchemaError(detail::index_path("", i) + ".region_id",
                                  "duplicate region '" + rec.region_id + "'");
            }
            db.records_.push_back(std::move(rec));
        }
        return db;
    }

    static ResultDb load(const std::filesystem::path& path) {
        return from_json(detail::read_json_file(path));
    }

    void save(const std::filesystem::path& path) const { write_json_atomic(path, to_json()); }

    friend bool operator==(const ResultDb&, const ResultDb&) = default;

private:
    std::vector<ResultRecord> records_;
};

/// Image inventory: which region each image tile belongs to and its size.
class Manifest {
public:
    Manifest() = default;
    explicit Manifest(std::vector<ImageInfo> images) {
        for (auto& im : images) add(std::move(im));
    }

    void add(ImageInfo info) {
        if (info.image_id.empty()) throw InvalidArgument("manifest image id must not be empty");
        if (info.width <= 0 || info.height <= 0) {
            throw InvalidArgument("image '" + info.image_id + "' must have positive dimensions");
        }
        if (!index_.emplace(info.image_id, images_.size()).second) {
            throw InvalidArgument("image '" + info.image_id + "' listed twice in manifest");
        }
        images_.push_back(std::move(info));
    }

    const ImageInfo* find(const ImageId& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &images_[it->second];
    }

    const std::vector<ImageInfo>& images() const noexcept { return images_; }

    std::vector<const ImageInfo*> region(const std::string& region_id) const {
        std::vector<const ImageInfo*> out;
        for (const auto& im : images_) {
            if (im.region_id == region_id) out.push_back(&im);
        }
        return out;
    }

    ordered_json to_json() const {
        ordered_json arr = ordered_json::array();
        for (const auto& im : images_) {
            arr.push_back({{"image_id", im.image_id},
                           {"region_id", im.region_id},
                           {"image_at", im.image_at},
                           {"width", im.width},
                           {"height", im.height},
                           {"path", im.path}});
        }
        return arr;
    }

    static Manifest from_json(const ordered_json& j) {
        const auto& arr = detail::top_array(j);
        Manifest m;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto path = detail::index_path("", i);
            detail::require_object(arr[i], path,
                                   {"image_id", "region_id", "image_at", "width", "height", "path"});
            ImageInfo info;
            info.image_id = detail::id_field(arr[i], path, "image_id");
            info.region_id = detail::id_field(arr[i], path, "region_id");
            info.image_at = detail::timestamp_field(arr[i], path, "image_at");
            info.width = detail::int_field(arr[i], path, "width");
            info.height = detail::int_field(arr[i], path, "height");
            if (info.width <= 0) throw SchemaError(path + ".width", "must be positive");
            if (info.height <= 0) throw SchemaError(path + ".height", "must be positive");
            info.path = detail::string_field(arr[i], path, "path");
            if (m.find(info.image_id)) {
                throw SchemaError(path + ".image_id", "duplicate image '" + info.image_id + "'");
            }
            m.add(std::move(info));
        }
        return m;
    }

    static Manifest load(const std::filesystem::path& path) {
        return from_json(detail::read_json_file(path));
    }

    void save(const std::filesystem::path& path) const { write_json_atomic(path, to_json()); }

private:
    std::vector<ImageInfo> images_;
    std::unordered_map<ImageId, std::size_t> index_;
};

/// Clamps every ROI to its image bounds; ROIs entirely outside are dropped.
/// Returns one human-readable warning per changed ROI.
inline std::vector<std::string> clamp_to_manifest(std::vector<PlayerAnnotation>& annotations,
                                                  const Manifest& manifest) {
    std::vector<std::string> warnings;
    for (auto& a : annotations) {
        const auto* info = manifest.find(a.image);
        if (!info) continue;
        std::vector<Roi> kept;
        for (std::size_t i = 0; i < a.rois.size(); ++i) {
            auto res = clamp_to_image(a.rois[i], info->size());
            if (res.clamped) {
                warnings.push_back("player '" + a.player + "' image '" + a.image + "' ROI " +
                                   std::to_string(i) +
                                   (res.roi ? " clamped to image bounds" : " outside image, dropped"));
            }
            if (res.roi) kept.push_back(std::move(*res.roi));
        }
        a.rois = std::move(kept);
    }
    return warnings;
}

struct PromotionSummary {
    std::size_t tasks_stamped = 0;
    std::size_t history_added = 0;
    std::vector<ImageId> first_time_images; ///< images with no prior ResultDB history
};

/// Stamps the verdict on the player's tasks for `round_images` and, when the
/// verdict is reliable, copies those annotations into ResultDB and counts
/// their tags. Tasks already marked reliable are skipped, so repeating a
/// promotion changes nothing. A reliable task is never demoted.
inline PromotionSummary promote_reliable(bool reliable, const PlayerId& player,
                                         std::span<const ImageId> round_images, PlayerDb& players,
                                         ResultDb& results, const Manifest& manifest,
                                         TagRegistry& registry) {
    auto* rec = players.find(player);
    if (!rec) throw InvalidArgument("unknown player '" + player + "'");
    std::vector<TaskEntry*> round;
    for (auto& t : rec->tasks) {
        if (std::find(round_images.begin(), round_images.end(), t.image_id) != round_images.end()) {
            round.push_back(&t);
        }
    }
    if (reliable) {
        for (const auto* t : round) {
            if (!t->reliable.value_or(false) && !manifest.find(t->image_id)) {
                throw ConfigurationError("image '" + t->image_id + "' has no region in the manifest");
            }
        }
    }
    PromotionSummary summary;
    const auto known = results.known_images();
    for (auto* t : round) {
        if (t->reliable.value_or(false)) continue;
        ++summary.tasks_stamped;
        t->reliable = reliable;
        if (!reliable) continue;
        if (!known.contains(t->image_id)) summary.first_time_images.push_back(t->image_id);
        results.append(manifest.find(t->image_id)->region_id, {t->image_id, t->image_at, t->rois});
        registry.count_rois(t->rois);
        ++summary.history_added;
    }
    return summary;
}

inline PromotionSummary promote_reliable(const DetectionVerdict& verdict, const PlayerId& player,
                                         std::span<const ImageId> round_images, PlayerDb& players,
                                         ResultDb& results, const Manifest& manifest,
                                         TagRegistry& registry) {
    return promote_reliable(verdict.reliable, player, round_images, players, results, manifest,
                            registry);
}

/// ResultDB history of a region joined with manifest sizes, ready for the
/// disaster evaluation.
inline std::vector<RegionImage> region_images(const std::string& region_id,
                                              const ResultDb& results, const Manifest& manifest) {
    std::vector<RegionImage> out;
    std::unordered_map<ImageId, std::size_t> slot;
    for (const auto* info : manifest.region(region_id)) {
        slot[info->image_id] = out.size();
        out.push_back({info->image_id, info->size(), {}});
    }
    if (const auto* rec = results.find(region_id)) {
        for (const auto& h : rec->history) {
            auto it = slot.find(h.image_id);
            if (it == slot.end()) {
                throw ConfigurationError("image '" + h.image_id + "' of region '" + region_id +
                                         "' is missing from the manifest");
            }
            auto& dst = out[it->second].rois;
            dst.insert(dst.end(), h.rois.begin(), h.rois.end());
        }
    }
    if (out.empty()) throw InvalidArgument("unknown region '" + region_id + "'");
    return out;
}

} // namespace gwap
