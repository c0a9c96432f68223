#include <gtest/gtest.h>

#include <regex>
#include <set>

#include "support.hpp"

using namespace gwap;

namespace {

std::vector<Tile> layer(const std::vector<Tile>& tiles, TileLayer l) {
    std::vector<Tile> out;
    for (const auto& t : tiles) {
        if (t.layer == l) out.push_back(t);
    }
    return out;
}

std::vector<ImageId> ids(const std::string& prefix, int n) {
    std::vector<ImageId> v;
    for (int i = 0; i < n; ++i) v.push_back(prefix + std::to_string(i));
    return v;
}

} // namespace

TEST(Uuid, CanonicalUpperCaseV4) {
    Rng rng(1);
    const std::regex re("^[0-9A-F]{8}-[0-9A-F]{4}-4[0-9A-F]{3}-[89AB][0-9A-F]{3}-[0-9A-F]{12}$");
    std::set<std::string> seen;
    for (int i = 0; i < 1000; ++i) {
        const auto id = random_uuid(rng);
        ASSERT_TRUE(std::regex_match(id, re)) << id;
        seen.insert(id);
    }
    EXPECT_EQ(seen.size(), 1000u);
}

TEST(Tiling, HundredByFifty) {
    Rng rng(2);
    const auto tiles = tile_region("R", {100, 100}, 50, 50, rng);
    const auto base = layer(tiles, TileLayer::base);
    const auto shifted = layer(tiles, TileLayer::half_shifted);
    ASSERT_EQ(base.size(), 4u);
    ASSERT_EQ(shifted.size(), 1u);
    EXPECT_EQ(shifted[0].x, 25);
    EXPECT_EQ(shifted[0].y, 25);
    EXPECT_EQ(shifted[0].width, 50);
    EXPECT_EQ(shifted[0].height, 50);
}

TEST(Tiling, DegenerateSingleTile) {
    Rng rng(3);
    EXPECT_EQ(tile_region("R", {64, 64}, 64, 64, rng).size(), 1u);
    const auto big = tile_region("R", {30, 20}, 100, 100, rng);
    ASSERT_EQ(big.size(), 1u);
    EXPECT_EQ(big[0].width, 30);
    EXPECT_EQ(big[0].height, 20);
}

TEST(Tiling, SingleAxisSeams) {
    Rng rng(4);
    const auto tiles = tile_region("R", {100, 40}, 50, 40, rng);
    const auto shifted = layer(tiles, TileLayer::half_shifted);
    ASSERT_EQ(shifted.size(), 1u);
    EXPECT_EQ(shifted[0].x, 25);
    EXPECT_EQ(shifted[0].y, 0);
}

TEST(Tiling, IdsUniqueAndRegionStamped) {
    Rng rng(5);
    const auto tiles = tile_region("R", {300, 200}, 64, 48, rng);
    std::set<std::string> seen;
    for (const auto& t : tiles) {
        EXPECT_EQ(t.region_id, "R");
        seen.insert(t.id);
    }
    EXPECT_EQ(seen.size(), tiles.size());
}

TEST(Tiling, Errors) {
    Rng rng(6);
    EXPECT_THROW(tile_region("R", {0, 10}, 5, 5, rng), InvalidArgument);
    EXPECT_THROW(tile_region("R", {10, 10}, 0, 5, rng), InvalidArgument);
}

TEST(Task, BalancedAndDeterministic) {
    const auto tagged = ids("t", 10);
    const auto fresh = ids("f", 10);
    const auto a = generate_task(tagged, fresh, 3, "P", 42);
    const auto b = generate_task(tagged, fresh, 3, "P", 42);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.images.size(), 6u);
    EXPECT_EQ(a.tagged_images().size(), 3u);
    EXPECT_EQ(a.fresh_images().size(), 3u);
    std::set<ImageId> uniq;
    for (const auto& im : a.images) uniq.insert(im.image);
    EXPECT_EQ(uniq.size(), 6u);
    EXPECT_NE(generate_task(tagged, fresh, 3, "P", 43), a);
}

TEST(Task, MinimumViable) {
    const std::vector<ImageId> one{"t0"};
    const std::vector<ImageId> fresh{"f0"};
    const auto t = generate_task(one, fresh, 1, "P", 1);
    EXPECT_EQ(t.tagged_images(), one);
}

TEST(Task, ShortPoolIsNamed) {
    const auto tagged = ids("t", 2);
    const auto fresh = ids("f", 10);
    try {
        generate_task(tagged, fresh, 3, "P", 1);
        FAIL();
    } catch (const PoolExhaustedError& e) {
        EXPECT_EQ(e.pool(), "tagged (ResultDB)");
    }
    try {
        generate_task(fresh, tagged, 3, "P", 1);
        FAIL();
    } catch (const PoolExhaustedError& e) {
        EXPECT_EQ(e.pool(), "fresh");
    }
}

TEST(Task, FreshPoolExcludesTaggedImages) {
    const std::vector<ImageId> tagged{"a", "b"};
    const std::vector<ImageId> fresh{"a", "b", "c"};
    EXPECT_THROW(generate_task(tagged, fresh, 2, "P", 1), PoolExhaustedError);
}

TEST(Task, PlayerPayloadHidesProvenance) {
    const auto t = generate_task(ids("t", 4), ids("f", 4), 2, "P", 9);
    const auto pj = t.to_player_json();
    EXPECT_EQ(pj.dump().find("provenance"), std::string::npos);
    EXPECT_EQ(pj.dump().find("tagged"), std::string::npos);
    EXPECT_EQ(PlayerTask::from_server_json(t.to_server_json()), t);
    EXPECT_THROW(PlayerTask::from_server_json(pj), SchemaError);
}

TEST(Bootstrap, TrustSharesAndVocabulary) {
    std::vector<PlayerAnnotation> seeds;
    for (const char* p : {"s1", "s2", "s3", "s4"}) seeds.push_back({p, "i", {Roi(0, 0, 5, 5, {"smoke"})}});
    const auto st = init_trusted_group(seeds, {"smoke", "fire"});
    EXPECT_EQ(st.trusted.size(), 4u);
    for (const auto& [p, v] : st.initial_trust) EXPECT_DOUBLE_EQ(v, 0.25);
    EXPECT_EQ(st.registry.count("smoke"), 4u);
    EXPECT_EQ(st.registry.count("fire"), 0u);

    const auto single = init_trusted_group(std::vector<PlayerAnnotation>{seeds[0]}, {"smoke"});
    EXPECT_DOUBLE_EQ(single.initial_trust.at("s1"), 1.0);
}

TEST(Bootstrap, Preconditions) {
    const std::vector<PlayerAnnotation> seeds{{"s1", "i", {Roi(0, 0, 5, 5, {"smoke"})}}};
    EXPECT_THROW(init_trusted_group(seeds, {}), InvalidArgument);
    EXPECT_THROW(init_trusted_group(std::vector<PlayerAnnotation>{}, {"smoke"}), InvalidArgument);
}

TEST(Bootstrap, SingleSeedGivesTwoPlayerGraphs) {
    const std::vector<PlayerAnnotation> seeds{{"s1", "i", {Roi(0, 0, 5, 5, {"smoke"})}}};
    const auto st = init_trusted_group(seeds, {"smoke"});
    PlayerTask task{"t", "P", {{"i", ImageProvenance::tagged}, {"f", ImageProvenance::fresh}}};
    const std::vector<PlayerAnnotation> mine{{"P", "i", {Roi(0, 0, 5, 5, {"smoke"})}}};
    const auto v = detect_malicious(mine, st.trusted, task, 1, st.reliable, st.registry);
    EXPECT_TRUE(v.reliable);
    EXPECT_EQ(v.images[0].trusted_count, 1u);
}
