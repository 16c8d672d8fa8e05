#include "test_support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace agentsoc;
using agentsoc::testing::TempDir;

namespace {

const std::filesystem::path kSource = AGENTSOC_SOURCE_DIR;

AgentState agent0() {
    AgentState a;
    a.id = 0;
    a.name = "agent0";
    a.position = {3, 4};
    a.memory = std::string(kNoMemory);
    return a;
}

void write(const std::filesystem::path& p, const std::string& body) { std::ofstream(p, std::ios::binary) << body; }

void write_dir(const std::filesystem::path& dir, const std::string& move_body) {
    write(dir / "message.txt", std::string(default_templates::message));
    write(dir / "memory.txt", std::string(default_templates::memory));
    write(dir / "move.txt", move_body);
}

} // namespace

TEST(Render, EmptyInboxRendersNoMessages) {
    const auto t = default_prompt_templates();
    const auto p = render(t.message, agent0(), {});
    EXPECT_NE(p.find("[No Messages]"), std::string::npos);
}

TEST(Render, InitialAgentState) {
    const auto t = default_prompt_templates();
    for (const auto* tmpl : {&t.message, &t.memory, &t.move}) {
        const auto p = render(*tmpl, agent0(), {});
        EXPECT_NE(p.find("You are agent0"), std::string::npos);
        EXPECT_NE(p.find("x=3, y=4"), std::string::npos);
        EXPECT_NE(p.find("[no memory]"), std::string::npos);
        EXPECT_EQ(p.find('{'), std::string::npos) << p;
    }
}

TEST(Render, SingleInboxEntryIsOneLine) {
    const auto t = default_prompt_templates();
    const auto p = render(t.memory, agent0(), {{"agent2", "Let's meet"}});
    EXPECT_NE(p.find("[\nagent2: Let's meet\n]"), std::string::npos) << p;
}

TEST(Render, InboxOrderIsPreserved) {
    EXPECT_EQ(render_messages({{"agent1", "a"}, {"agent4", "b"}}), "[\nagent1: a\nagent4: b\n]");
}

TEST(Render, MoveTemplateListsCommandVocabulary) {
    const auto p = render(default_prompt_templates().move, agent0(), {});
    EXPECT_NE(p.find(R"("x+1", "x-1", "y+1", "y-1", "stay")"), std::string::npos) << p;
}

TEST(Render, LiteralBracesSurvive) {
    PromptTemplate t{PromptPhase::Message, "json {\"k\": 1} {name} { } {}"};
    EXPECT_NO_THROW(validate_template(t));
    EXPECT_EQ(render(t, agent0(), {}), "json {\"k\": 1} agent0 { } {}");
}

TEST(Templates, ShippedFilesMatchEmbeddedDefaults) {
    const auto loaded = load_templates(kSource / "data" / "templates");
    const auto embedded = default_prompt_templates();
    EXPECT_EQ(loaded.message.body, embedded.message.body);
    EXPECT_EQ(loaded.memory.body, embedded.memory.body);
    EXPECT_EQ(loaded.move.body, embedded.move.body);
    EXPECT_EQ(loaded.digest(), embedded.digest());
}

TEST(Templates, DirectionalWordingLoads) {
    const auto t = load_templates(kSource / "data" / "templates_directional");
    EXPECT_NE(t.move.body.find("right, left, up or down"), std::string::npos);
    EXPECT_NE(t.digest(), default_prompt_templates().digest());
}

TEST(Templates, UnknownPlaceholderIsRejected) {
    TempDir dir;
    write_dir(dir.path(), std::string(default_templates::move) + "\n{typo}\n");
    try {
        load_templates(dir.path());
        FAIL() << "expected TemplateError";
    } catch (const TemplateError& e) {
        EXPECT_NE(std::string(e.what()).find("{typo}"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("move.txt"), std::string::npos) << e.what();
    }
}

TEST(Templates, MissingFileIsRejected) {
    TempDir dir;
    write(dir / "message.txt", "{name}");
    EXPECT_THROW(load_templates(dir.path()), TemplateError);
    EXPECT_THROW(load_templates("/nonexistent/templates"), ConfigError);
}

TEST(Templates, MoveVocabularyMustBeComplete) {
    PromptTemplate t{PromptPhase::Move, "## Instruction\nGo right, left or up.\n{memory}\n"};
    EXPECT_THROW(validate_template(t), TemplateError);
    t.body = "## Instruction\nGo right, left, up, down or stay.\n{memory}\n";
    EXPECT_NO_THROW(validate_template(t));
}

TEST(Templates, MoveNeedsOneInstructionSection) {
    PromptTemplate t{PromptPhase::Move, "Pick one of {commands}.\n"};
    EXPECT_THROW(validate_template(t), TemplateError);
}

TEST(WithInstruction, ReplacesOnlyTheInstructionBody) {
    const auto t = default_prompt_templates().move;
    const auto q = with_instruction(t, "Which do you prefer? A or B.");
    EXPECT_EQ(q.body.find("Choose your next movement"), std::string::npos);
    EXPECT_NE(q.body.find("## Instruction\nWhich do you prefer? A or B.\n"), std::string::npos);
    EXPECT_NE(q.body.find("## Your own memory\n{memory}"), std::string::npos);
    EXPECT_NE(q.body.find("## Current state of yourself"), std::string::npos);
    EXPECT_THROW(with_instruction(PromptTemplate{PromptPhase::Move, "no sections"}, "x"), TemplateError);
}
