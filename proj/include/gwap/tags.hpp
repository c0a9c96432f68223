#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "geometry.hpp"

namespace gwap {

/// One-hot indicator of an ROI's tags over an ordered vocabulary.
struct TagVector {
    std::vector<double> components;

    std::size_t size() const noexcept { return components.size(); }
    friend bool operator==(const TagVector&, const TagVector&) = default;
};

/// Tag weights p(g), one per vocabulary entry (system vector) or per image
/// tag (image vector).
struct WeightVector {
    std::vector<double> components;

    std::size_t size() const noexcept { return components.size(); }
    double operator[](std::size_t i) const { return components[i]; }
    double sum() const noexcept {
        return std::accumulate(components.begin(), components.end(), 0.0);
    }
};

/// Tag vocabulary of one image together with its image weight vector.
struct ImageTagContext {
    std::vector<TagId> tags;
    WeightVector weights;
};

inline TagVector tag_vector(const std::vector<TagId>& selected, std::span<const TagId> vocab) {
    TagVector out{std::vector<double>(vocab.size(), 0.0)};
    for (const auto& tag : selected) {
        bool found = false;
        for (std::size_t l = 0; l < vocab.size(); ++l) {
            if (vocab[l] == tag) {
                out.components[l] = 1.0;
                found = true;
                break;
            }
        }
        if (!found) throw UnknownTagError(tag);
    }
    return out;
}

/// p(g_i) = |g_i| / sum_j |g_j|.
inline WeightVector system_weight_vector(std::span<const std::uint64_t> counts) {
    if (counts.empty()) throw InvalidArgument("system weight vector needs at least one tag");
    std::uint64_t total = 0;
    for (auto c : counts) total += c;
    if (total == 0) throw InvalidArgument("system weight vector needs a positive total tag count");
    WeightVector w;
    w.components.reserve(counts.size());
    for (auto c : counts) {
        w.components.push_back(static_cast<double>(c) / static_cast<double>(total));
    }
    return w;
}

/// Projects `system` (ordered like `vocab`) onto `image_tags`, keeping the
/// order of `image_tags`.
inline WeightVector image_weight_vector(const WeightVector& system, std::span<const TagId> vocab,
                                        std::span<const TagId> image_tags) {
    if (system.size() != vocab.size()) {
        throw InvalidArgument("system weight vector and vocabulary differ in size");
    }
    WeightVector w;
    w.components.reserve(image_tags.size());
    for (std::size_t i = 0; i < image_tags.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (image_tags[i] == image_tags[j]) {
                throw InvalidArgument("duplicate image tag '" + image_tags[i] + "'");
            }
        }
        std::size_t idx = vocab.size();
        for (std::size_t l = 0; l < vocab.size(); ++l) {
            if (vocab[l] == image_tags[i]) {
                idx = l;
                break;
            }
        }
        if (idx == vocab.size()) throw UnknownTagError(image_tags[i]);
        w.components.push_back(system[idx]);
    }
    return w;
}

/// Tag vocabulary in order of first appearance plus system-wide occurrence
/// counts over reliable ROIs.
class TagRegistry {
public:
    static constexpr int kFormatVersion = 1;

    TagRegistry() = default;

    explicit TagRegistry(const std::vector<TagId>& predefined) {
        for (const auto& t : predefined) add(t);
    }

    /// Registers `tag` with count 0 if absent; returns its index.
    std::size_t add(const TagId& tag) {
        if (tag.empty()) throw InvalidArgument("tag id must be non-empty");
        auto [it, inserted] = index_.try_emplace(tag, tags_.size());
        if (inserted) {
            tags_.push_back(tag);
            counts_.push_back(0);
        }
        return it->second;
    }

    bool contains(const TagId& tag) const { return index_.contains(tag); }

    std::size_t index_of(const TagId& tag) const {
        auto it = index_.find(tag);
        if (it == index_.end()) throw UnknownTagError(tag);
        return it->second;
    }

    std::uint64_t count(const TagId& tag) const { return counts_[index_of(tag)]; }

    /// Adds `n` occurrences of `tag`, registering it first if necessary.
    void add_count(const TagId& tag, std::uint64_t n = 1) { counts_[add(tag)] += n; }

    /// Counts every tag on every ROI.
    void count_rois(std::span<const Roi> rois) {
        for (const auto& r : rois) {
            for (const auto& t : r.tags()) add_count(t);
        }
    }

    std::size_t size() const noexcept { return tags_.size(); }
    bool empty() const noexcept { return tags_.empty(); }
    const std::vector<TagId>& tags() const noexcept { return tags_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    WeightVector system_weights() const { return system_weight_vector(counts_); }

    WeightVector image_weights(std::span<const TagId> image_tags) const {
        return image_weight_vector(system_weights(), tags_, image_tags);
    }

    /// Image vocabulary ordered like the system vocabulary, with weights.
    /// Every tag must already be registered.
    ImageTagContext image_context(const std::vector<TagId>& tags_on_image) const {
        std::vector<std::size_t> idx;
        idx.reserve(tags_on_image.size());
        for (const auto& t : tags_on_image) idx.push_back(index_of(t));
        std::sort(idx.begin(), idx.end());
        idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
        ImageTagContext ctx;
        for (auto i : idx) ctx.tags.push_back(tags_[i]);
        if (!ctx.tags.empty()) ctx.weights = image_weights(ctx.tags);
        return ctx;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["version"] = kFormatVersion;
        j["tags"] = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < tags_.size(); ++i) {
            j["tags"].push_back({{"tag", tags_[i]}, {"count", counts_[i]}});
        }
        return j;
    }

    static TagRegistry from_json(const nlohmann::ordered_json& j) {
        if (!j.is_object()) throw SchemaError("$", "vocabulary document must be an object");
        if (!j.contains("version") || !j["version"].is_number_integer()) {
            throw SchemaError("version", "missing or not an integer");
        }
        if (j["version"].get<int>() != kFormatVersion) {
            throw SchemaError("version", "unsupported vocabulary version " + j["version"].dump());
        }
        if (!j.contains("tags") || !j["tags"].is_array()) {
            throw SchemaError("tags", "missing or not an array");
        }
        TagRegistry reg;
        for (std::size_t i = 0; i < j["tags"].size(); ++i) {
            const auto& e = j["tags"][i];
            const std::string path = "tags[" + std::to_string(i) + "]";
            if (!e.is_object() || !e.contains("tag") || !e["tag"].is_string() ||
                e["tag"].get<std::string>().empty()) {
                throw SchemaError(path + ".tag", "missing or not a non-empty string");
            }
            if (!e.contains("count") || !e["count"].is_number_unsigned()) {
                throw SchemaError(path + ".count", "missing or not a non-negative integer");
            }
            const auto tag = e["tag"].get<std::string>();
            if (reg.contains(tag)) throw SchemaError(path + ".tag", "duplicate tag '" + tag + "'");
            reg.add_count(tag, e["count"].get<std::uint64_t>());
        }
        return reg;
    }

    friend bool operator==(const TagRegistry& a, const TagRegistry& b) {
        return a.tags_ == b.tags_ && a.counts_ == b.counts_;
    }

private:
    std::vector<TagId> tags_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<TagId, std::size_t> index_;
};

} // namespace gwap
