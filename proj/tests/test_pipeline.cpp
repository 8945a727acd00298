#include <gtest/gtest.h>

#include "helpers.hpp"
#include "pipeline/pipeline.hpp"

using namespace ttarag;
namespace ts = testing_support;

namespace {

struct Fixture {
    Vocab vocab = ts::tiny_vocab();
    Bm25Index index{ts::tiny_corpus()};
    TransformerLm model{ts::tiny_config(vocab.size())};

    PipelineConfig config(double lr = 0.05) const {
        PipelineConfig c;
        c.top_k = 2;
        c.max_new_tokens = 4;
        c.adaptation.learning_rate = lr;
        return c;
    }
};

QueryRecord q(std::string id, std::string text) { return {std::move(id), "toy", std::move(text), {"x"}}; }

}  // namespace

TEST(Pipeline, PromptFormat) {
    std::vector<std::string> ps{"p one.", "p two."};
    EXPECT_EQ(format_prompt("why?", ps), "Context:\np one.\np two.\nQuestion: why?\nAnswer:");
    EXPECT_EQ(format_prompt("why?", {}), "Question: why?\nAnswer:");
}

TEST(Pipeline, PromptAssemblyDropsLowestRankedPassages) {
    Vocab v = ts::tiny_vocab();
    std::vector<std::string> ps{"the color of sky is blue.", "the size of ant is small."};
    const auto full = assemble_prompt(v, "what is the color of apple?", ps, 1000);
    EXPECT_EQ(full.passages_used, 2u);
    const auto one = assemble_prompt(v, "what is the color of apple?", ps, full.ids.size() - 1);
    EXPECT_EQ(one.passages_used, 1u);
    EXPECT_NE(one.text.find("blue"), std::string::npos);
    EXPECT_THROW(assemble_prompt(v, "what is the color of apple?", ps, 3), ContextLengthError);
}

TEST(Pipeline, DatasetParsing) {
    const auto recs = parse_dataset(
        "{\"id\":\"1\",\"domain\":\"d\",\"question\":\"q?\",\"answers\":[\"a\",\"b\"]}\n\n");
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_EQ(recs[0].answers.size(), 2u);
    EXPECT_THROW(parse_dataset("{\"id\":\"1\",\"domain\":\"d\",\"question\":\"q\",\"answers\":[]}"),
                 std::invalid_argument);
    EXPECT_THROW(parse_dataset("{\"id\":\"1\",\"domain\":\"d\",\"question\":\" \",\"answers\":[\"a\"]}"),
                 std::invalid_argument);
    EXPECT_THROW(parse_dataset("{\"id\":\"1\",\"domain\":\"d\",\"question\":\"q\",\"answers\":[\"a\"]}\n"
                               "{\"id\":\"1\",\"domain\":\"d\",\"question\":\"q\",\"answers\":[\"a\"]}"),
                 std::invalid_argument);
    try {
        parse_dataset("\n{oops");
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Pipeline, ModeParsing) {
    EXPECT_EQ(parse_answer_mode("wo-seg"), AnswerMode::woseg);
    EXPECT_EQ(parse_answer_mode("ttarag"), AnswerMode::ttarag);
    EXPECT_THROW(parse_answer_mode("fast"), std::invalid_argument);
}

TEST(Pipeline, NaiveNeverMutatesParameters) {
    Fixture f;
    const auto before = f.model.snapshot();
    Pipeline p(f.index, f.vocab, f.model, f.config());
    p.answer_naive(q("a", "what is the color of apple?"));
    EXPECT_TRUE(f.model.snapshot().same_values(before));
    EXPECT_EQ(f.model.generation(), before.generation);
}

TEST(Pipeline, AdaptiveAnswersRestoreParametersExactly) {
    Fixture f;
    const auto before = f.model.snapshot();
    Pipeline p(f.index, f.vocab, f.model, f.config());
    const auto a = p.answer_ttarag(q("a", "what is the color of apple?"));
    ASSERT_TRUE(a.trace);
    EXPECT_FALSE(a.fallback);
    EXPECT_EQ(a.trace->pair_losses.size(), 2u);
    EXPECT_TRUE(f.model.snapshot().same_values(before));
    p.answer_woseg(q("b", "what is the size of ant?"));
    EXPECT_TRUE(f.model.snapshot().same_values(before));
}

TEST(Pipeline, AnswersDoNotDependOnEarlierQueries) {
    Fixture f;
    Pipeline p(f.index, f.vocab, f.model, f.config(0.5));
    const auto b = q("b", "what is the size of whale?");
    const auto alone = p.answer_ttarag(b);
    p.answer_ttarag(q("a", "what is the color of apple?"));
    p.answer_woseg(q("c", "what is the taste of lemon?"));
    const auto after = p.answer_ttarag(b);
    EXPECT_EQ(alone.text, after.text);
    EXPECT_EQ(alone.trace->pair_losses, after.trace->pair_losses);
}

TEST(Pipeline, EmptyPairSetFallsBackToNaive) {
    Fixture f;
    auto c = f.config();
    c.adaptation.pair_budget = 0;
    Pipeline p(f.index, f.vocab, f.model, c);
    const auto query = q("a", "what is the color of apple?");
    const auto a = p.answer_ttarag(query);
    EXPECT_TRUE(a.fallback);
    EXPECT_FALSE(a.fallback_reason.empty());
    EXPECT_EQ(a.text, p.answer_naive(query).text);
}

TEST(Pipeline, ZeroStepSizeMatchesNaive) {
    Fixture f;
    auto c = f.config(0.0);
    c.adaptation.weight_decay = 0.0;
    Pipeline p(f.index, f.vocab, f.model, c);
    for (const auto* text : {"what is the color of apple?", "what is the size of ant?", "taste of honey"}) {
        const auto query = q("x", text);
        const auto a = p.answer_ttarag(query);
        EXPECT_FALSE(a.fallback);
        EXPECT_EQ(a.text, p.answer_naive(query).text);
    }
}

TEST(Pipeline, NoRetrievalHitsStillAnswers) {
    Fixture f;
    Pipeline p(f.index, f.vocab, f.model, f.config());
    const auto a = p.answer_ttarag(q("z", "zebra quux"));
    EXPECT_TRUE(a.retrieved_ids.empty());
    EXPECT_TRUE(a.fallback);
}

TEST(Pipeline, ConstructionValidatesConfiguration) {
    Fixture f;
    auto c = f.config();
    c.top_k = 0;
    EXPECT_THROW(Pipeline(f.index, f.vocab, f.model, c), std::invalid_argument);
    c = f.config();
    c.max_new_tokens = 48;
    EXPECT_THROW(Pipeline(f.index, f.vocab, f.model, c), std::invalid_argument);
    Vocab other = Vocab::build(std::vector<std::string>{"just a few words"});
    EXPECT_THROW(Pipeline(f.index, other, f.model, f.config()), std::invalid_argument);
}
