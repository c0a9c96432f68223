#pragma once

// Run configuration shared by every CLI subcommand.
//
// File format: one `key = value` pair per line, `#` starts a comment, blank
// lines are ignored, unknown keys are errors. Keys:
//
//   playerdb, resultdb, manifest, vocabulary   file paths
//   tolerance        solver residual tolerance          (0, 1)        1e-10
//   max_iterations   power-iteration cap                >= 1          10000
//   smoothing        added to every raw edge weight     > 0           1e-9
//   solver           direct | power                                   direct
//   tie_tolerance    slack on "trust >= trusted mean"   >= 0          1e-12
//   theta_accept     images a player must pass          >= 1          n of the task
//   n                tagged images per task             >= 1          5
//   sigma_noise      simulation scatter                 >= 0          0.05
//   sigma_relative   sigma is a fraction of ROI side    true|false    true
//   tag_keep         honest tag keep probability        [0, 1]        0.8
//   honest, malicious, trusted   simulation population  >= 1          100, 100, 5
//   malicious_boxes  scene | image: random ROI size model  scene
//   tile_width, tile_height      tiling                 >= 1          256, 256
//   seed             RNG seed (required by simulate)    uint64        unset

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "error.hpp"
#include "rating.hpp"

namespace gwap {

struct RunConfig {
    std::string playerdb = "playerdb.json";
    std::string resultdb = "resultdb.json";
    std::string manifest = "manifest.json";
    std::string vocabulary = "vocabulary.json";

    RatingParams rating;
    std::optional<int> theta_accept;
    int n = 5;

    double sigma_noise = 0.05;
    bool sigma_relative = true;
    double tag_keep = 0.8;
    int honest = 100;
    int malicious = 100;
    int trusted = 5;
    bool malicious_image_boxes = false;

    std::int64_t tile_width = 256;
    std::int64_t tile_height = 256;

    std::optional<std::uint64_t> seed;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw InvalidArgument("config key '" + std::string(key) + "': cannot parse '" +
                              std::string(text) + "'");
    }
    return value;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw InvalidArgument("config key '" + std::string(key) + "': expected true or false");
}

} // namespace detail

/// Assigns one key. Shared by the file parser and command-line overrides.
inline void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
    using detail::parse_number;
    if (key == "playerdb") cfg.playerdb = value;
    else if (key == "resultdb") cfg.resultdb = value;
    else if (key == "manifest") cfg.manifest = value;
    else if (key == "vocabulary") cfg.vocabulary = value;
    else if (key == "tolerance") cfg.rating.tolerance = parse_number<double>(key, value);
    else if (key == "max_iterations") cfg.rating.max_iterations = parse_number<int>(key, value);
    else if (key == "smoothing") cfg.rating.smoothing = parse_number<double>(key, value);
    else if (key == "solver") cfg.rating.solver = parse_trust_solver(value);
    else if (key == "tie_tolerance") cfg.rating.tie_tolerance = parse_number<double>(key, value);
    else if (key == "theta_accept") cfg.theta_accept = parse_number<int>(key, value);
    else if (key == "n") cfg.n = parse_number<int>(key, value);
    else if (key == "sigma_noise") cfg.sigma_noise = parse_number<double>(key, value);
    else if (key == "sigma_relative") cfg.sigma_relative = detail::parse_bool(key, value);
    else if (key == "tag_keep") cfg.tag_keep = parse_number<double>(key, value);
    else if (key == "honest") cfg.honest = parse_number<int>(key, value);
    else if (key == "malicious") cfg.malicious = parse_number<int>(key, value);
    else if (key == "trusted") cfg.trusted = parse_number<int>(key, value);
    else if (key == "malicious_boxes") {
        if (value != "scene" && value != "image") {
            throw InvalidArgument("config key 'malicious_boxes': expected scene or image");
        }
        cfg.malicious_image_boxes = value == "image";
    }
    else if (key == "tile_width") cfg.tile_width = parse_number<std::int64_t>(key, value);
    else if (key == "tile_height") cfg.tile_height = parse_number<std::int64_t>(key, value);
    else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
    else throw InvalidArgument("unknown config key '" + std::string(key) + "'");
}

inline RunConfig parse_config(std::istream& in, RunConfig cfg = {}) {
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view view(line);
        if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
        view = detail::trim(view);
        if (view.empty()) continue;
        const auto eq = view.find('=');
        if (eq == std::string_view::npos) {
            throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const auto key = detail::trim(view.substr(0, eq));
        const auto value = detail::trim(view.substr(eq + 1));
        try {
            set_config_value(cfg, key, value);
        } catch (const InvalidArgument& e) {
            throw InvalidArgument("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path, RunConfig cfg = {}) {
    std::ifstream in(path);
    if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
    return parse_config(in, std::move(cfg));
}

inline void validate(const RunConfig& cfg) {
    const auto& r = cfg.rating;
    if (!(r.tolerance > 0.0 && r.tolerance < 1.0)) throw InvalidArgument("tolerance must lie in (0, 1)");
    if (r.max_iterations < 1) throw InvalidArgument("max_iterations must be at least 1");
    if (!(r.smoothing > 0.0)) throw InvalidArgument("smoothing must be positive");
    if (!(r.tie_tolerance >= 0.0)) throw InvalidArgument("tie_tolerance must be non-negative");
    if (cfg.theta_accept && *cfg.theta_accept < 1) throw InvalidArgument("theta_accept must be at least 1");
    if (cfg.n < 1) throw InvalidArgument("n must be at least 1");
    if (!(cfg.sigma_noise >= 0.0)) throw InvalidArgument("sigma_noise must be non-negative");
    if (!(cfg.tag_keep >= 0.0 && cfg.tag_keep <= 1.0)) throw InvalidArgument("tag_keep must lie in [0, 1]");
    if (cfg.honest < 1 || cfg.malicious < 1 || cfg.trusted < 1) {
        throw InvalidArgument("population sizes must be at least 1");
    }
    if (cfg.tile_width < 1 || cfg.tile_height < 1) throw InvalidArgument("tile sizes must be positive");
}

} // namespace gwap
