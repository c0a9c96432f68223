#include <gtest/gtest.h>

#include "support.hpp"

using namespace gwap;

namespace {

struct Round {
    std::vector<PlayerId> trusted;
    std::vector<PlayerAnnotation> trusted_annotations;
    PlayerTask task;
    TagRegistry registry;
};

// n tagged + n fresh images; one trusted player with a single ROI per
// tagged image.
Round one_trusted_round(int n) {
    Round r;
    r.trusted = {"T"};
    r.registry = TagRegistry({"flooded area", "smoke", "debris"});
    r.task.task_id = "task";
    r.task.player = "P";
    for (int k = 0; k < n; ++k) {
        const auto img = "tagged-" + std::to_string(k);
        r.task.images.push_back({img, ImageProvenance::tagged});
        r.task.images.push_back({"fresh-" + std::to_string(k), ImageProvenance::fresh});
        r.trusted_annotations.push_back(
            {"T", img, {Roi(10 * k, 5, 30, 20, {"flooded area", "smoke"})}});
        r.registry.count_rois(r.trusted_annotations.back().rois);
    }
    return r;
}

std::vector<PlayerAnnotation> replay(const Round& r, const PlayerId& who) {
    std::vector<PlayerAnnotation> out;
    for (auto a : r.trusted_annotations) {
        a.player = who;
        out.push_back(std::move(a));
    }
    return out;
}

} // namespace

TEST(Detect, IdenticalReplayPassesEveryImage) {
    const auto r = one_trusted_round(4);
    const auto mine = replay(r, "P");
    for (int theta = 1; theta <= 4; ++theta) {
        const auto v = detect_malicious(mine, r.trusted, r.task, theta, r.trusted_annotations, r.registry);
        EXPECT_TRUE(v.reliable);
        EXPECT_EQ(v.counter, 4);
        for (const auto& im : v.images) {
            EXPECT_NEAR(im.trust, 0.5, 1e-12);
            EXPECT_NEAR(im.trusted_mean, 0.5, 1e-12);
            EXPECT_TRUE(im.passed);
        }
    }
}

TEST(Detect, ZeroRoisFailsEverything) {
    const auto r = one_trusted_round(3);
    std::vector<PlayerAnnotation> empty{{"P", "tagged-0", {}}};
    const auto v = detect_malicious(empty, r.trusted, r.task, 1, r.trusted_annotations, r.registry);
    EXPECT_FALSE(v.reliable);
    EXPECT_EQ(v.counter, 0);
    for (const auto& im : v.images) {
        EXPECT_FALSE(im.passed);
        EXPECT_FALSE(im.participated);
    }
}

TEST(Detect, ThetaEqualToNRequiresAllImages) {
    const auto r = one_trusted_round(3);
    auto mine = replay(r, "P");
    mine[1].rois = {Roi(200, 200, 5, 5, {"debris"})}; // nowhere near the trusted ROI
    const auto strict = detect_malicious(mine, r.trusted, r.task, 3, r.trusted_annotations, r.registry);
    EXPECT_EQ(strict.counter, 2);
    EXPECT_FALSE(strict.reliable);
    const auto lenient = detect_malicious(mine, r.trusted, r.task, 2, r.trusted_annotations, r.registry);
    EXPECT_TRUE(lenient.reliable);
}

TEST(Detect, CounterMatchesFlags) {
    Rng rng(4);
    const auto r = one_trusted_round(5);
    for (int t = 0; t < 50; ++t) {
        std::vector<PlayerAnnotation> mine;
        for (const auto& img : r.task.tagged_images()) {
            mine.push_back({"P", img, {test::random_rect(rng, 64, {"smoke"})}});
        }
        const auto v = detect_malicious(mine, r.trusted, r.task, 3, r.trusted_annotations, r.registry);
        const auto passes = std::count_if(v.images.begin(), v.images.end(), [](auto& a) { return a.passed; });
        ASSERT_EQ(v.counter, passes);
        ASSERT_EQ(v.reliable, v.counter >= 3);
        const auto again = detect_malicious(mine, r.trusted, r.task, 3, r.trusted_annotations, r.registry);
        ASSERT_EQ(again.counter, v.counter);
    }
}

TEST(Detect, Preconditions) {
    const auto r = one_trusted_round(2);
    const auto mine = replay(r, "P");
    EXPECT_THROW(detect_malicious(mine, r.trusted, r.task, 0, r.trusted_annotations, r.registry),
                 InvalidArgument);
    EXPECT_THROW(detect_malicious(mine, r.trusted, r.task, 3, r.trusted_annotations, r.registry),
                 InvalidArgument);
    EXPECT_THROW(detect_malicious(mine, {}, r.task, 1, r.trusted_annotations, r.registry),
                 InvalidArgument);
    auto orphan = r.task;
    orphan.images.push_back({"nobody-annotated", ImageProvenance::tagged});
    EXPECT_THROW(detect_malicious(mine, r.trusted, orphan, 1, r.trusted_annotations, r.registry),
                 ConfigurationError);
}

TEST(Detect, TrustedAbsentFromImageIsNotInGraph) {
    auto r = one_trusted_round(1);
    r.trusted.push_back("U"); // trusted but never annotated anything
    const auto v = detect_malicious(replay(r, "P"), r.trusted, r.task, 1, r.trusted_annotations, r.registry);
    EXPECT_EQ(v.images.front().trusted_count, 1u);
    EXPECT_TRUE(v.reliable);
}

TEST(NewTags, Classification) {
    const TagRegistry reg({"a", "b"});
    auto make = [](std::vector<TagId> tags) {
        return std::vector<PlayerAnnotation>{{"P", "i", {Roi(0, 0, 1, 1, std::move(tags))}}};
    };
    EXPECT_EQ(classify_new_tags(make({"a"}), reg), NewTagCase::none);
    EXPECT_EQ(classify_new_tags(make({"z"}), reg), NewTagCase::only_new);
    EXPECT_EQ(classify_new_tags(make({"a", "z"}), reg), NewTagCase::mixed);
}

TEST(NewTags, ReliableMixedPlayerExtendsVocabulary) {
    auto r = one_trusted_round(2);
    auto mine = replay(r, "P");
    mine[0].rois[0] = mine[0].rois[0].with_tags({"flooded area", "smoke", "sinkhole"});
    const auto before = r.registry.size();
    const auto out = rate_player(mine, r.trusted, r.task, 2, r.trusted_annotations, r.registry);
    EXPECT_EQ(out.merge.kind, NewTagCase::mixed);
    EXPECT_TRUE(out.verdict.reliable);
    EXPECT_EQ(out.merge.added, (std::vector<TagId>{"sinkhole"}));
    EXPECT_EQ(r.registry.size(), before + 1);
    // counted once the results are promoted, not at merge time
    EXPECT_EQ(r.registry.count("sinkhole"), 0u);
}

TEST(NewTags, CountAfterPromotionRenormalizesWeights) {
    // g1 known with count 3; a reliable player brings g9 on one ROI.
    TagRegistry reg({"g1"});
    reg.add_count("g1", 3);
    DetectionVerdict ok;
    ok.reliable = true;
    const std::vector<PlayerAnnotation> mine{{"P", "i", {Roi(0, 0, 2, 2, {"g1", "g9"})}}};
    const auto merged = merge_new_tags(ok, mine, reg);
    ASSERT_TRUE(merged.reliable);
    reg.count_rois(mine[0].rois);
    EXPECT_EQ(reg.count("g9"), 1u);
    const auto w = reg.system_weights();
    EXPECT_DOUBLE_EQ(w[0], 4.0 / 5);
    EXPECT_DOUBLE_EQ(w[1], 1.0 / 5);
}

TEST(NewTags, OnlyNewTagsDropped) {
    auto r = one_trusted_round(2);
    auto mine = replay(r, "P");
    for (auto& a : mine) {
        for (auto& roi : a.rois) roi = roi.with_tags({"mystery"});
    }
    const auto before = r.registry;
    const auto out = rate_player(mine, r.trusted, r.task, 1, r.trusted_annotations, r.registry);
    EXPECT_EQ(out.merge.kind, NewTagCase::only_new);
    EXPECT_FALSE(out.verdict.reliable);
    EXPECT_TRUE(out.merge.dropped);
    EXPECT_EQ(r.registry, before);
}

TEST(NewTags, UnreliableMixedPlayerDropped) {
    auto r = one_trusted_round(2);
    // nothing on tagged-1, so theta = 2 cannot be met
    std::vector<PlayerAnnotation> mine{{"P", "tagged-0", {Roi(200, 200, 4, 4, {"smoke", "sinkhole"})}}};
    const auto before = r.registry;
    const auto out = rate_player(mine, r.trusted, r.task, 2, r.trusted_annotations, r.registry);
    EXPECT_EQ(out.merge.kind, NewTagCase::mixed);
    EXPECT_FALSE(out.verdict.reliable);
    EXPECT_EQ(r.registry, before);
}

TEST(NewTags, NoNewTagsLeavesVocabularyAlone) {
    auto r = one_trusted_round(2);
    const auto before = r.registry;
    const auto out = rate_player(replay(r, "P"), r.trusted, r.task, 2, r.trusted_annotations, r.registry);
    EXPECT_TRUE(out.verdict.reliable);
    EXPECT_EQ(out.merge.kind, NewTagCase::none);
    EXPECT_EQ(r.registry, before);
}

TEST(Verdict, JsonShape) {
    const auto r = one_trusted_round(1);
    const auto v = detect_malicious(replay(r, "P"), r.trusted, r.task, 1, r.trusted_annotations, r.registry);
    const auto j = to_json(v, "P");
    EXPECT_EQ(j["player_id"], "P");
    EXPECT_EQ(j["reliable"], true);
    EXPECT_EQ(j["counter"], 1);
    EXPECT_EQ(j["images"].size(), 1u);
}
