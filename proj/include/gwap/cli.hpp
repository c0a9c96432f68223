#pragma once

// Command-line front end. `run_cli` is the whole program; tools/gwap.cpp
// only forwards argv to it so that tests can drive every subcommand
// in-process.

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "detection.hpp"
#include "disaster.hpp"
#include "error.hpp"
#include "random.hpp"
#include "simulate.hpp"
#include "store.hpp"
#include "taskgen.hpp"

namespace gwap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Error in how the program was invoked; reported with exit status 2.
class UsageError : public Error {
public:
    using Error::Error;
};

inline std::string now_timestamp() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    localtime_r(&t, &tm);
    char buf[20];
    std::strftime(buf, sizeof buf, "%Y-%m-%d %H:%M:%S", &tm);
    return buf;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline void emit(const ordered_json& doc, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        out << doc.dump(2) << '\n';
    } else {
        write_json_atomic(out_path, doc);
    }
}

inline TagRegistry load_registry(const std::string& path) {
    return TagRegistry::from_json(gwap::detail::read_json_file(path));
}

inline void save_registry(const std::string& path, const TagRegistry& reg) {
    write_json_atomic(path, reg.to_json());
}

inline std::vector<TagId> split_tags(const std::string& csv) {
    std::vector<TagId> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = std::string(gwap::detail::trim(item));
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

} // namespace detail

struct InitOptions {
    std::string seeds;
    std::string tags;
    std::string tags_file;
};

/// Bootstraps PlayerDB, ResultDB and the vocabulary from a seed group.
inline int cmd_init(const RunConfig& cfg, const InitOptions& opt, std::ostream& out,
                    std::ostream& err) {
    std::vector<TagId> predefined = detail::split_tags(opt.tags);
    if (!opt.tags_file.empty()) {
        std::ifstream in(opt.tags_file);
        if (!in) throw UsageError("cannot open tags file '" + opt.tags_file + "'");
        std::string line;
        while (std::getline(in, line)) {
            auto t = std::string(gwap::detail::trim(line));
            if (!t.empty() && t.front() != '#') predefined.push_back(std::move(t));
        }
    }
    if (predefined.empty()) throw UsageError("init needs a predefined tag list (--tags or --tags-file)");

    const auto seed_db = PlayerDb::load(opt.seeds);
    std::vector<PlayerAnnotation> seeds;
    for (const auto& rec : seed_db.records()) {
        const auto ann = seed_db.annotations(rec.player_id);
        seeds.insert(seeds.end(), ann.begin(), ann.end());
    }
    auto state = init_trusted_group(seeds, predefined);

    const auto manifest = Manifest::load(cfg.manifest);
    PlayerDb players = std::filesystem::exists(cfg.playerdb) ? PlayerDb::load(cfg.playerdb) : PlayerDb{};
    ResultDb results = std::filesystem::exists(cfg.resultdb) ? ResultDb::load(cfg.resultdb) : ResultDb{};
    TagRegistry scratch = state.registry; // counts already include the seeds
    for (auto rec : seed_db.records()) {
        std::vector<ImageId> images;
        for (auto& t : rec.tasks) {
            t.reliable.reset();
            images.push_back(t.image_id);
        }
        players.persist(rec);
        promote_reliable(true, rec.player_id, images, players, results, manifest, scratch);
    }
    players.save(cfg.playerdb);
    results.save(cfg.resultdb);
    detail::save_registry(cfg.vocabulary, state.registry);

    ordered_json j;
    j["trusted"] = state.trusted;
    j["initial_trust"] = ordered_json::object();
    for (const auto& p : state.trusted) j["initial_trust"][p] = state.initial_trust.at(p);
    j["vocabulary"] = state.registry.to_json()["tags"];
    out << j.dump(2) << '\n';
    err << "initialized trusted group of " << state.trusted.size() << " player(s)\n";
    return kExitOk;
}

/// Upserts player records (one object or a PlayerDB-style array) into PlayerDB.
inline int cmd_submit(const RunConfig& cfg, const std::string& record_path, std::ostream& out) {
    const auto doc = gwap::detail::read_json_file(record_path);
    const auto incoming = doc.is_array() ? PlayerDb::from_json(doc) : [&] {
        PlayerDb one;
        one.persist(player_record_from_json(doc));
        return one;
    }();
    PlayerDb players = std::filesystem::exists(cfg.playerdb) ? PlayerDb::load(cfg.playerdb) : PlayerDb{};
    ordered_json ids = ordered_json::array();
    for (const auto& rec : incoming.records()) {
        players.persist(rec);
        ids.push_back(rec.player_id);
    }
    players.save(cfg.playerdb);
    out << ordered_json{{"stored", ids}}.dump(2) << '\n';
    return kExitOk;
}

struct TileOptions {
    std::string region_id;
    std::int64_t width = 0;
    std::int64_t height = 0;
    std::string out;
};

inline int cmd_tile(const RunConfig& cfg, const TileOptions& opt, std::ostream& out) {
    Rng rng(cfg.seed.value_or(0));
    const auto region = opt.region_id.empty() ? random_uuid(rng) : opt.region_id;
    const auto tiles =
        tile_region(region, {opt.width, opt.height}, cfg.tile_width, cfg.tile_height, rng);
    ordered_json arr = ordered_json::array();
    for (const auto& t : tiles) arr.push_back(to_json(t));
    detail::emit(arr, opt.out, out);
    return kExitOk;
}

struct GenTaskOptions {
    std::string player;
    std::string out;
};

inline int cmd_gen_task(const RunConfig& cfg, const GenTaskOptions& opt, std::ostream& out) {
    const auto results = ResultDb::load(cfg.resultdb);
    const auto manifest = Manifest::load(cfg.manifest);
    const auto tagged = results.tagged_images();
    const auto known = results.known_images();
    std::vector<ImageId> fresh;
    for (const auto& im : manifest.images()) {
        if (!known.contains(im.image_id)) fresh.push_back(im.image_id);
    }
    const auto task = generate_task(tagged, fresh, static_cast<std::size_t>(cfg.n), opt.player,
                                    cfg.seed.value_or(0));
    if (!opt.out.empty()) write_json_atomic(opt.out, task.to_server_json());
    out << task.to_player_json().dump(2) << '\n';
    return kExitOk;
}

struct RateOptions {
    std::string player;
    std::string task;
    bool commit = false;
};

inline int cmd_rate(const RunConfig& cfg, const RateOptions& opt, std::ostream& out,
                    std::ostream& err) {
    auto players = PlayerDb::load(cfg.playerdb);
    auto results = ResultDb::load(cfg.resultdb);
    const auto manifest = Manifest::load(cfg.manifest);
    auto registry = detail::load_registry(cfg.vocabulary);

    const auto* record = players.find(opt.player);
    if (!record) throw UsageError("player '" + opt.player + "' not found in PlayerDB");

    PlayerTask task;
    if (!opt.task.empty()) {
        task = PlayerTask::from_server_json(gwap::detail::read_json_file(opt.task));
        if (task.player != opt.player) {
            throw UsageError("task belongs to '" + task.player + "', not '" + opt.player + "'");
        }
    } else {
        // Without a task file the round is every unrated task of the player;
        // images already in ResultDB are the tagged half.
        const auto tagged = results.tagged_images();
        task.task_id = "derived";
        task.player = opt.player;
        for (const auto& t : record->tasks) {
            if (t.reliable.has_value()) continue;
            const bool is_tagged = std::find(tagged.begin(), tagged.end(), t.image_id) != tagged.end();
            task.images.push_back(
                {t.image_id, is_tagged ? ImageProvenance::tagged : ImageProvenance::fresh});
        }
    }
    std::vector<ImageId> round;
    for (const auto& im : task.images) round.push_back(im.image);

    std::vector<PlayerAnnotation> mine;
    for (auto& a : players.annotations(opt.player)) {
        if (std::find(round.begin(), round.end(), a.image) != round.end()) mine.push_back(std::move(a));
    }
    for (const auto& w : clamp_to_manifest(mine, manifest)) err << "warning: " << w << '\n';

    auto trusted = players.trusted_players();
    std::erase(trusted, opt.player);
    const auto trusted_annotations = players.reliable_annotations();
    const int n = static_cast<int>(task.tagged_images().size());
    const int theta = cfg.theta_accept.value_or(n);

    const auto outcome =
        rate_player(mine, trusted, task, theta, trusted_annotations, registry, cfg.rating);

    auto doc = to_json(outcome.verdict, opt.player);
    doc["task_id"] = task.task_id;
    doc["new_tags"] = {{"case", to_string(outcome.merge.kind)},
                       {"results_dropped", outcome.merge.dropped},
                       {"added", outcome.merge.added}};

    if (opt.commit) {
        auto* rec = players.find(opt.player);
        for (auto& t : rec->tasks) {
            for (const auto& a : mine) {
                if (a.image == t.image_id) t.rois = a.rois;
            }
        }
        const auto summary = promote_reliable(outcome.verdict, opt.player, round, players, results,
                                              manifest, registry);
        players.save(cfg.playerdb);
        results.save(cfg.resultdb);
        detail::save_registry(cfg.vocabulary, registry);
        doc["committed"] = {{"tasks_stamped", summary.tasks_stamped},
                            {"history_added", summary.history_added},
                            {"first_time_images", summary.first_time_images}};
    }
    out << doc.dump(2) << '\n';
    return kExitOk;
}

struct DisasterOptions {
    std::string region;
    std::string now;
};

inline int cmd_disaster(const RunConfig& cfg, const DisasterOptions& opt, std::ostream& out) {
    const auto results = ResultDb::load(cfg.resultdb);
    const auto manifest = Manifest::load(cfg.manifest);
    const auto registry = detail::load_registry(cfg.vocabulary);
    const auto images = region_images(opt.region, results, manifest);
    const auto report =
        disaster_level(opt.region, images, registry, opt.now.empty() ? now_timestamp() : opt.now);
    out << to_json(report).dump(2) << '\n';
    return kExitOk;
}

struct SimulateOptions {
    std::string csv;
    std::string json;
    bool fixed_sigma = false;
};

inline std::string roc_csv(const SimulationResult& r) {
    std::ostringstream os;
    os << "# positive class: malicious; fpr = rejected honest / honest, tpr = rejected malicious / malicious\n";
    os << "mode,parameter,fpr,tpr\n";
    for (const auto& p : r.threshold_roc.points) {
        os << "threshold," << format_double(p.parameter) << ',' << format_double(p.fpr) << ','
           << format_double(p.tpr) << '\n';
    }
    for (const auto& p : r.margin_roc.points) {
        os << "margin," << format_double(p.parameter) << ',' << format_double(p.fpr) << ','
           << format_double(p.tpr) << '\n';
    }
    return os.str();
}

inline ordered_json simulation_summary(const SimulationConfig& sc, const SimulationResult& r) {
    ordered_json j;
    j["positive_class"] = "malicious";
    j["auc"] = r.threshold_roc.auc;
    j["margin_auc"] = r.margin_roc.auc;
    j["shuffled_auc"] = r.shuffled_auc;
    j["sigma_mle"] = r.sigma_mle;
    j["sigma_used"] = r.sigma_used;
    std::map<int, int> honest_hist;
    std::map<int, int> malicious_hist;
    for (const auto& p : r.players) ++(p.malicious ? malicious_hist : honest_hist)[p.counter];
    auto hist = [&](const std::map<int, int>& h) {
        ordered_json a = ordered_json::array();
        for (int c = 0; c <= sc.n; ++c) a.push_back(h.contains(c) ? h.at(c) : 0);
        return a;
    };
    j["counter_histogram"] = {{"honest", hist(honest_hist)}, {"malicious", hist(malicious_hist)}};
    j["config"] = {{"honest", sc.honest},
                   {"malicious", sc.malicious},
                   {"n", sc.n},
                   {"trusted", sc.trusted},
                   {"sigma_noise", sc.noise.sigma},
                   {"sigma_relative", sc.noise.relative},
                   {"use_estimated_sigma", sc.use_estimated_sigma},
                   {"tag_keep", sc.tag_keep},
                   {"malicious_boxes", sc.malicious_model.max_side > 0 ? "scene" : "image"},
                   {"image_width", sc.image.width},
                   {"image_height", sc.image.height},
                   {"smoothing", sc.rating.smoothing},
                   {"solver", std::string(to_string(sc.rating.solver))},
                   {"seed", sc.seed}};
    return j;
}

inline int cmd_simulate(const RunConfig& cfg, const SimulateOptions& opt, std::ostream& out) {
    if (!cfg.seed) throw UsageError("simulate requires a seed (--seed or `seed =` in the config)");
    SimulationConfig sc;
    sc.honest = cfg.honest;
    sc.malicious = cfg.malicious;
    sc.n = cfg.n;
    sc.trusted = cfg.trusted;
    sc.noise = {cfg.sigma_noise, cfg.sigma_relative};
    sc.tag_keep = cfg.tag_keep;
    sc.use_estimated_sigma = !opt.fixed_sigma;
    sc.rating = cfg.rating;
    if (cfg.malicious_image_boxes) sc.malicious_model.min_side = sc.malicious_model.max_side = 0;
    sc.seed = *cfg.seed;
    const auto result = run_simulation(sc);
    const auto summary = simulation_summary(sc, result);
    if (!opt.csv.empty()) {
        std::ofstream f(opt.csv, std::ios::trunc);
        if (!f) throw Error("cannot write '" + opt.csv + "'");
        f << roc_csv(result);
    }
    if (!opt.json.empty()) write_json_atomic(opt.json, summary);
    out << summary.dump(2) << '\n';
    return kExitOk;
}

/// Parses `args` (without the program name) and runs one subcommand.
/// Returns 0 on success, 1 on runtime failure, 2 on usage or config errors.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Crowdsourced disaster-monitoring player rating and evaluation", "gwap"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<int> theta;
    std::optional<int> n;
    app.add_option("-c,--config", config_path, "key = value configuration file");
    app.add_option("--set", overrides, "override one config key (key=value)");
    std::map<std::string, std::string> paths;
    for (const char* key : {"playerdb", "resultdb", "manifest", "vocabulary"}) {
        app.add_option_function<std::string>(
            std::string("--") + key, [&paths, key](const std::string& v) { paths[key] = v; },
            std::string(key) + " path");
    }
    app.add_option("--seed", seed, "RNG seed");
    app.add_option("--theta", theta, "acceptance threshold (images to pass)");
    app.add_option("-n,--n", n, "tagged images per task");

    InitOptions init_opt;
    auto* init = app.add_subcommand("init", "bootstrap the trusted group");
    init->add_option("--seeds", init_opt.seeds, "PlayerDB-format file with the seed players")->required();
    init->add_option("--tags", init_opt.tags, "comma-separated predefined tags");
    init->add_option("--tags-file", init_opt.tags_file, "predefined tags, one per line");

    std::string submit_record;
    auto* submit = app.add_subcommand("submit", "store a player's task record in PlayerDB");
    submit->add_option("record", submit_record, "player record JSON (object or array)")->required();

    TileOptions tile_opt;
    std::optional<std::int64_t> tile_w;
    std::optional<std::int64_t> tile_h;
    auto* tile = app.add_subcommand("tile", "cut a region into base and half-shifted tiles");
    tile->add_option("--region-id", tile_opt.region_id, "region id (random UUID if omitted)");
    tile->add_option("--width", tile_opt.width, "region width in pixels")->required();
    tile->add_option("--height", tile_opt.height, "region height in pixels")->required();
    tile->add_option("--tile-width", tile_w, "tile width");
    tile->add_option("--tile-height", tile_h, "tile height");
    tile->add_option("-o,--out", tile_opt.out, "write JSON here instead of stdout");

    GenTaskOptions task_opt;
    auto* gen = app.add_subcommand("gen-task", "assemble a task of n tagged and n fresh images");
    gen->add_option("--player", task_opt.player, "player id")->required();
    gen->add_option("-o,--out", task_opt.out, "write the server-side task (with provenance) here");

    RateOptions rate_opt;
    auto* rate = app.add_subcommand("rate", "run malicious player detection for one player");
    rate->add_option("--player", rate_opt.player, "player id")->required();
    rate->add_option("--task", rate_opt.task, "server-side task file from gen-task");
    rate->add_flag("--commit", rate_opt.commit, "write the verdict and promote reliable results");

    DisasterOptions dis_opt;
    auto* dis = app.add_subcommand("disaster", "evaluate the disaster level of a region");
    dis->add_option("--region", dis_opt.region, "region id")->required();
    dis->add_option("--now", dis_opt.now, "evaluation timestamp (YYYY-MM-DD HH:MM:SS)");

    SimulateOptions sim_opt;
    std::optional<int> honest;
    std::optional<int> malicious;
    std::optional<int> trusted;
    std::optional<double> sigma;
    bool absolute_sigma = false;
    std::optional<std::string> malicious_boxes;
    auto* sim = app.add_subcommand("simulate", "synthetic honest/malicious ROC evaluation");
    sim->add_option("--honest", honest, "honest players");
    sim->add_option("--malicious", malicious, "malicious players");
    sim->add_option("--trusted", trusted, "trusted group size");
    sim->add_option("--sigma", sigma, "scatter sigma (fraction of ROI side unless --absolute-sigma)");
    sim->add_flag("--absolute-sigma", absolute_sigma, "sigma is in pixels");
    sim->add_flag("--fixed-sigma", sim_opt.fixed_sigma, "skip the MLE re-estimate for honest players");
    sim->add_option("--malicious-boxes", malicious_boxes, "random ROI sizes: scene (ROI-scale) or image (corner-uniform)")
        ->check(CLI::IsMember({"scene", "image"}));
    sim->add_option("--csv", sim_opt.csv, "ROC points CSV output");
    sim->add_option("--json", sim_opt.json, "summary JSON output");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        if (args.empty()) err << app.help();
        return kExitUsage;
    }

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path);
        for (const auto& [key, value] : paths) set_config_value(cfg, key, value);
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw InvalidArgument("--set expects key=value, got '" + kv + "'");
            set_config_value(cfg, gwap::detail::trim(std::string_view(kv).substr(0, eq)),
                             gwap::detail::trim(std::string_view(kv).substr(eq + 1)));
        }
        if (seed) cfg.seed = seed;
        if (theta) cfg.theta_accept = theta;
        if (n) cfg.n = *n;
        if (tile_w) cfg.tile_width = *tile_w;
        if (tile_h) cfg.tile_height = *tile_h;
        if (honest) cfg.honest = *honest;
        if (malicious) cfg.malicious = *malicious;
        if (trusted) cfg.trusted = *trusted;
        if (sigma) cfg.sigma_noise = *sigma;
        if (absolute_sigma) cfg.sigma_relative = false;
        if (malicious_boxes) set_config_value(cfg, "malicious_boxes", *malicious_boxes);
        validate(cfg);
    } catch (const Error& e) {
        err << "gwap: invalid configuration: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*init) return cmd_init(cfg, init_opt, out, err);
        if (*submit) return cmd_submit(cfg, submit_record, out);
        if (*tile) return cmd_tile(cfg, tile_opt, out);
        if (*gen) return cmd_gen_task(cfg, task_opt, out);
        if (*rate) return cmd_rate(cfg, rate_opt, out, err);
        if (*dis) return cmd_disaster(cfg, dis_opt, out);
        if (*sim) return cmd_simulate(cfg, sim_opt, out);
    } catch (const UsageError& e) {
        err << "gwap: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "gwap: " << e.what() << '\n';
        return kExitFailure;
    }
    return kExitUsage;
}

} // namespace gwap::cli
