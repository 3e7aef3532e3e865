#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "exclaim/corpus.hpp"
#include "exclaim/error.hpp"
#include "fixtures.hpp"

namespace exclaim {
namespace {

using corpus::Category;
using corpus::Label;
using testing::TempDir;

ErrorKind kind_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no exception";
    return ErrorKind::Io;
}

TEST(Corpus, LoadsFourRecords) {
    std::istringstream in(
        R"({"id":"a1","image_ref":"i/1.jpg","caption":"One.","label":"falsified","category":"text_image"})"
        "\n"
        R"({"id":"a2","image_ref":"i/2.jpg","caption":"Two.","label":"pristine"})"
        "\n\n"
        R"({"id":"a3","image_ref":"i/3.jpg","caption":"Three."})"
        "\n"
        R"({"id":"a4","image_ref":"i/4.jpg","caption":"Four.","category":"scene"})"
        "\n");
    const auto c = corpus::parse_corpus(in, "test");
    EXPECT_EQ(c.manifest.items, 4u);
    EXPECT_EQ(c.items.size(), 4u);
    EXPECT_EQ(c.manifest.labeled, 2u);
    EXPECT_EQ(c.manifest.uncategorized, 2u);
    EXPECT_EQ(c.manifest.categories.at(Category::TextImage), 1u);
    EXPECT_EQ(c.manifest.categories.at(Category::SceneMatching), 1u);
    EXPECT_EQ(c.items[2].id, "a3");
    EXPECT_FALSE(c.items[2].label.has_value());
}

TEST(Corpus, DuplicateIdRejected) {
    std::istringstream in(
        R"({"id":"a1","image_ref":"x","caption":"One."})"
        "\n"
        R"({"id":"a1","image_ref":"y","caption":"Again."})"
        "\n");
    try {
        corpus::parse_corpus(in);
        FAIL() << "expected DuplicateId";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DuplicateId);
        EXPECT_NE(e.detail().find("a1"), std::string::npos);
    }
}

TEST(Corpus, MalformedLineReportsLineNumber) {
    std::istringstream in(
        R"({"id":"a1","image_ref":"x","caption":"One."})"
        "\n"
        R"({"id":"a2","caption":"no image"})"
        "\n");
    try {
        corpus::parse_corpus(in);
        FAIL() << "expected MalformedRecord";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::MalformedRecord);
        EXPECT_EQ(e.detail().rfind("line 2", 0), 0u) << e.detail();
    }
}

TEST(Corpus, RejectsBadValues) {
    for (const char* line : {R"({"id":"a","image_ref":"x","caption":"   "})",
                             R"({"id":"","image_ref":"x","caption":"c"})",
                             R"({"id":"a","image_ref":"x","caption":"c","label":"maybe"})",
                             R"({"id":"a","image_ref":"x","caption":"c","category":"other"})",
                             R"({"id":"a","image_ref":"x","caption":7})", R"([1,2])", R"({not json)"}) {
        std::istringstream in(std::string(line) + "\n");
        EXPECT_EQ(kind_of([&] { corpus::parse_corpus(in); }), ErrorKind::MalformedRecord) << line;
    }
}

TEST(Corpus, MissingFileIsIoError) {
    EXPECT_EQ(kind_of([] { corpus::load_corpus("/nonexistent/corpus.jsonl"); }), ErrorKind::Io);
}

TEST(Corpus, FullTestSplitSize) {
    TempDir dir;
    const auto items = testing::synthetic_corpus();
    corpus::save_corpus(dir / "test.jsonl", items);
    const auto c = corpus::load_corpus(dir / "test.jsonl");
    EXPECT_EQ(c.manifest.items, 7264u);
    EXPECT_EQ(c.manifest.labeled, 7264u);
}

TEST(Corpus, RoundTripPreservesItemsAndUnknownKeys) {
    auto items = testing::newsroom_corpus(12);
    items[3].extra["source"] = "wire";
    items[4].label.reset();
    items[5].category.reset();
    std::ostringstream out;
    corpus::write_corpus(out, items);
    std::istringstream in(out.str());
    const auto back = corpus::parse_corpus(in);
    EXPECT_EQ(back.items, items);
    EXPECT_EQ(back.items[3].extra.at("source"), "wire");
}

TEST(Corpus, ValidateItemModes) {
    auto item = testing::make_item("x", "A caption.", Label::Falsified);
    EXPECT_TRUE(corpus::validate_item(item, corpus::ValidationMode::Eval).empty());
    item.label.reset();
    const auto v = corpus::validate_item(item, corpus::ValidationMode::Eval);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0], "missing label");
    EXPECT_TRUE(corpus::validate_item(item, corpus::ValidationMode::Train).empty());
}

TEST(Corpus, CategoryNames) {
    for (auto c : corpus::k_all_categories) {
        EXPECT_EQ(corpus::parse_category(corpus::to_string(c)), c);
    }
    EXPECT_EQ(corpus::display_name(Category::PersonMatching), "Person-Matching");
    EXPECT_EQ(corpus::parse_label("falsified"), Label::Falsified);
    EXPECT_FALSE(corpus::parse_label("FALSE").has_value());
}

TEST(Corpus, SidecarParsedFromRecord) {
    std::istringstream in(
        R"({"id":"p","image_ref":"x","caption":"Marco Rubio speaks in Minneapolis",)"
        R"("pre_extracted":{"visual_entities":[{"entity_id":"v0","class_label":"man","region":[1,2,3,4],"crop_ref":"c"}],)"
        R"("textual_entities":[{"entity_id":"t0","surface":"Marco Rubio","span":[0,11]}]}})"
        "\n");
    const auto c = corpus::parse_corpus(in);
    ASSERT_TRUE(c.items[0].pre_extracted.has_value());
    const auto& pre = *c.items[0].pre_extracted;
    ASSERT_EQ(pre.visual_entities.size(), 1u);
    EXPECT_EQ(pre.visual_entities[0].region, (BoundingBox{1, 2, 3, 4}));
    EXPECT_DOUBLE_EQ(pre.visual_entities[0].confidence, 1.0);
    ASSERT_EQ(pre.textual_entities.size(), 1u);
    EXPECT_EQ(pre.textual_entities[0].end, 11u);
    EXPECT_EQ(pre.textual_entities[0].ner_label, "ENT");
}

}  // namespace
}  // namespace exclaim
