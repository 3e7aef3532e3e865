#include <random>

#include <gtest/gtest.h>

#include "exclaim/alignment.hpp"
#include "exclaim/error.hpp"
#include "fixtures.hpp"

namespace exclaim {
namespace {

using alignment::AlignedEntity;
using alignment::AlignmentConfig;
using alignment::AlignmentScore;
using extraction::EntityPairCandidate;
using nlohmann::json;

EntityPairCandidate pair(const std::string& label, const std::string& surface) {
    return {testing::visual("v-" + label, label), {"t-" + surface, surface, 0, surface.size(), "ENT"}};
}

double lexical(const std::string& label, const std::string& surface) {
    return alignment::score_alignment(pair(label, surface), AlignmentConfig{}).value();
}

TEST(Alignment, JaccardExamples) {
    EXPECT_DOUBLE_EQ(lexical("dog", "dog park"), 0.5);
    EXPECT_DOUBLE_EQ(lexical("dog", "Dog"), 1.0);
    EXPECT_DOUBLE_EQ(lexical("cat", "dog park"), 0.0);
    EXPECT_DOUBLE_EQ(lexical("", ""), 0.0);
    EXPECT_DOUBLE_EQ(lexical("cell phone", "phone, cell"), 1.0);
    EXPECT_DOUBLE_EQ(lexical("a b c", "b c d"), 0.5);
}

TEST(Alignment, ScoreRange) {
    EXPECT_THROW(AlignmentScore(1.01), Error);
    EXPECT_THROW(AlignmentScore(-0.01), Error);
    EXPECT_THROW(AlignmentScore(std::nan("")), Error);
    EXPECT_NO_THROW(AlignmentScore(0.0));
    EXPECT_NO_THROW(AlignmentScore(1.0));
}

std::vector<AlignedEntity> scored(const std::vector<double>& scores) {
    std::vector<AlignedEntity> out;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out.push_back({pair("v" + std::to_string(i), "t"), AlignmentScore(scores[i]), "src"});
    }
    return out;
}

TEST(Alignment, GateExamples) {
    const auto s = scored({0.5, 0.2, 0.9, 1.0, 0.0});
    EXPECT_EQ(alignment::gate(s, 0.0).size(), 5u);
    const auto top = alignment::gate(s, 1.0);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_DOUBLE_EQ(top[0].score.value(), 1.0);

    const auto three = scored({0.5, 0.2, 0.9});
    const auto kept = alignment::gate(three, 0.5);
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0], three[0]);
    EXPECT_EQ(kept[1], three[2]);
}

TEST(Alignment, GateOverCandidatesKeepsEqualityAndSource) {
    const std::vector<EntityPairCandidate> candidates = {pair("dog", "dog park"), pair("cat", "dog park"),
                                                         pair("park", "park")};
    AlignmentConfig cfg;
    cfg.threshold = 0.5;
    const auto kept = alignment::gate(candidates, cfg, "n1");
    ASSERT_EQ(kept.size(), 2u);
    EXPECT_EQ(kept[0].pair, candidates[0]);
    EXPECT_DOUBLE_EQ(kept[0].score.value(), 0.5);
    EXPECT_EQ(kept[1].source_news_id, "n1");
}

TEST(Alignment, GateProperties) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> scores(rng() % 20);
        for (auto& s : scores) s = (rng() % 4 == 0) ? std::round(u(rng) * 10) / 10 : u(rng);
        const auto all = scored(scores);
        double t1 = u(rng), t2 = u(rng);
        if (t1 > t2) std::swap(t1, t2);
        const auto g1 = alignment::gate(all, t1);
        const auto g2 = alignment::gate(all, t2);
        for (const auto& e : g2) EXPECT_NE(std::find(g1.begin(), g1.end(), e), g1.end());
        EXPECT_EQ(alignment::gate(g1, t1), g1);
        for (double s : scores) {
            const auto at = alignment::gate(scored({s}), s);
            EXPECT_EQ(at.size(), 1u);
        }
    }
}

TEST(Alignment, RemoteScorer) {
    auto client = std::make_shared<testing::FakeHttpClient>([](const std::string&, const std::string& body) {
        const auto req = json::parse(body);
        return testing::json_reply({{"score", req.at("surface") == "Pope Francis" ? 0.8 : 0.1}});
    });
    AlignmentConfig cfg;
    cfg.scorer = RemoteService{"http://align.local/score"};
    const std::vector<EntityPairCandidate> c = {pair("pope", "Pope Francis"), pair("pope", "Juarez")};
    const auto kept = alignment::gate(c, cfg, "n", client.get());
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_DOUBLE_EQ(kept[0].score.value(), 0.8);
    EXPECT_EQ(client->calls(), 2u);
}

TEST(Alignment, RemoteOutOfRangeScore) {
    auto client = std::make_shared<testing::FakeHttpClient>(
        [](const std::string&, const std::string&) { return testing::json_reply({{"score", 1.7}}); });
    AlignmentConfig cfg;
    cfg.scorer = RemoteService{"http://align.local/score"};
    try {
        alignment::score_alignment(pair("a", "b"), cfg, client.get());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MalformedScore);
    }
}

TEST(Alignment, ThresholdValidated) {
    AlignmentConfig cfg;
    cfg.threshold = 1.2;
    EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace exclaim
