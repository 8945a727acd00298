#include <gtest/gtest.h>

#include <random>

#include "context/splitter.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace ttarag;
namespace ts = testing_support;

TEST(Splitter, CutsAfterFirstEligibleMark) {
    const auto p = split_passage("the color of apple is red. it grows on trees", "d1");
    ASSERT_TRUE(p);
    EXPECT_EQ(p->prefix, "the color of apple is red.");
    EXPECT_EQ(p->suffix, "it grows on trees");
    EXPECT_EQ(p->kind, SplitKind::punctuation);
    EXPECT_EQ(p->source_id, "d1");
}

TEST(Splitter, MarksTooCloseToAnEdgeAreSkipped) {
    const auto p = split_passage("hi, there you are now. fine");
    ASSERT_TRUE(p);
    EXPECT_EQ(p->kind, SplitKind::midpoint);
    EXPECT_EQ(p->prefix, "hi, there you");
    EXPECT_EQ(p->suffix, "are now. fine");
}

TEST(Splitter, MidpointWithoutMarksAndShortPassagesRejected) {
    const auto p = split_passage("one two three four five six seven");
    ASSERT_TRUE(p);
    EXPECT_EQ(p->prefix, "one two three");
    EXPECT_EQ(p->suffix, "four five six seven");
    EXPECT_FALSE(split_passage("one two three four five"));
    EXPECT_FALSE(split_passage(""));
}

TEST(Splitter, FilterKeepsOrderAndCountsTokens) {
    EXPECT_EQ(passage_token_count("the sky is blue."), 5u);
    std::vector<Document> docs{{"a", "", "the sky is blue."}, {"b", "", "the color of apple is red."}};
    const auto kept = filter_passages(docs, 6);
    ASSERT_EQ(kept.size(), 1u);
    EXPECT_EQ(kept[0].id, "b");
}

TEST(Splitter, AdaptationSetRespectsBudgetAndRank) {
    std::vector<Document> docs{{"a", "", "short one."},
                               {"b", "", "the color of apple is red."},
                               {"c", "", "the size of the whale is large."},
                               {"d", "", "the taste of lemon is sour today."}};
    const auto pairs = build_adaptation_set(docs, 2);
    ASSERT_EQ(pairs.size(), 2u);
    EXPECT_EQ(pairs[0].source_id, "b");
    EXPECT_EQ(pairs[1].source_id, "c");
    EXPECT_TRUE(build_adaptation_set(docs, 0).empty());
    const auto whole = build_whole_passage_set(docs, 5);
    ASSERT_EQ(whole.size(), 3u);
    EXPECT_TRUE(whole[0].prefix.empty());
    EXPECT_EQ(whole[0].suffix, "the color of apple is red.");
    EXPECT_EQ(whole[0].kind, SplitKind::whole_passage);
}

TEST(Splitter, AgreesWithReferenceOnRandomPassages) {
    std::mt19937_64 rng(77);
    const std::string marks = ".,;:!?";
    for (int trial = 0; trial < 2000; ++trial) {
        std::uniform_int_distribution<int> nw(0, 14), coin(0, 4), m(0, 5), spaces(1, 3);
        std::string text;
        for (int i = nw(rng); i > 0; --i) {
            std::string w = ts::random_word(rng);
            if (coin(rng) == 0) w.push_back(marks[m(rng)]);
            text += w + std::string(spaces(rng), ' ');
        }
        const auto got = split_passage(text);
        const auto ref = oracle::reference_split(text);
        ASSERT_EQ(got.has_value(), ref.has_value()) << text;
        if (!got) continue;
        EXPECT_EQ(got->prefix, ref->first) << text;
        EXPECT_EQ(got->suffix, ref->second) << text;
        EXPECT_GE(split_words(got->prefix).size(), kMinSideWords);
        EXPECT_GE(split_words(got->suffix).size(), kMinSideWords);
    }
}
