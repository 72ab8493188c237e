#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "agentrt/context.hpp"
#include "test_util.hpp"

using namespace agentrt;

namespace {

ModelTurn acting_turn(int dx = 0) {
  ModelTurn t;
  t.action.mouse.dx = dx;
  return t;
}

ModelTurn thinking_turn(const std::string& reasoning) {
  ModelTurn t;
  t.mode = TurnMode::Thinking;
  t.reasoning = reasoning;
  return t;
}

std::vector<std::string> frames_of(const ContextWindow& ctx) {
  std::vector<std::string> out;
  for (const auto& e : ctx.entries()) out.push_back(e.frame);
  return out;
}

}  // namespace

TEST_CASE("sliding window with capacity 2 evicts the oldest pair") {
  ContextWindow ctx("sys", 2);
  CHECK(ctx.push_step("f1", acting_turn()).empty());
  CHECK(ctx.push_step("f2", acting_turn()).empty());
  auto evicted = ctx.push_step("f3", acting_turn());
  REQUIRE(evicted.size() == 1);
  CHECK(evicted[0].frame == "f1");
  CHECK(frames_of(ctx) == std::vector<std::string>{"f2", "f3"});
}

TEST_CASE("capacity 1 always evicts the previous entry") {
  ContextWindow ctx("sys", 1);
  ctx.push_step("f1", acting_turn());
  for (int i = 2; i <= 5; ++i) {
    auto evicted = ctx.push_step("f" + std::to_string(i), acting_turn());
    REQUIRE(evicted.size() == 1);
    CHECK(ctx.entries().size() == 1);
  }
}

TEST_CASE("reasoning flushes and re-accumulates from that point") {
  ContextWindow ctx("sys", 2);
  ctx.push_step("f1", acting_turn());
  ctx.push_step("f2", acting_turn());
  ctx.flush_on_reasoning("f3", thinking_turn("go north"));
  CHECK(frames_of(ctx) == std::vector<std::string>{"f3"});
  CHECK(ctx.latest_reasoning() == "go north");
  CHECK(ctx.steps_since_reasoning() == 0);
}

TEST_CASE("only the most recent reasoning is preserved") {
  ContextWindow ctx("sys", 2);
  ctx.flush_on_reasoning("f1", thinking_turn("first"));
  ctx.flush_on_reasoning("f2", thinking_turn("second"));
  CHECK(ctx.latest_reasoning() == "second");
  CHECK(frames_of(ctx) == std::vector<std::string>{"f2"});
}

TEST_CASE("the initial instruction acts as a synthetic reasoning") {
  ContextWindow ctx("sys", 2, "Complete the main storyline mission");
  CHECK(ctx.latest_reasoning() == "Complete the main storyline mission");
  ctx.flush_on_reasoning("f1", thinking_turn("override"));
  CHECK(ctx.latest_reasoning() == "override");
}

TEST_CASE("mode mismatches are rejected") {
  ContextWindow ctx("sys", 2);
  CHECK_THROWS_AS(ctx.push_step("f", thinking_turn("x")), ThinkingTurnRejected);
  CHECK_THROWS_AS(ctx.flush_on_reasoning("f", acting_turn()),
                  NonThinkingTurnRejected);
}

TEST_CASE("force-think threshold is strictly greater than 100") {
  ContextWindow ctx("sys", 20);
  for (int i = 0; i < 100; ++i) ctx.push_step("f", acting_turn());
  CHECK(ctx.steps_since_reasoning() == 100);
  CHECK(!ctx.force_think_check());
  ctx.push_step("f", acting_turn());
  CHECK(ctx.force_think_check());
  ctx.flush_on_reasoning("f", thinking_turn("reset"));
  CHECK(!ctx.force_think_check());
}

TEST_CASE("assembled prompt is ordered and deterministic") {
  ContextWindow ctx("sys", 2);
  CHECK(ctx.assemble_prompt() == "<|system|>sys\n");
  ctx.flush_on_reasoning("f1", thinking_turn("r"));
  ctx.push_step("f2", acting_turn());
  std::string p = ctx.assemble_prompt();
  auto sys = p.find("<|system|>");
  auto reasoning = p.find("<|reasoning|>");
  auto f1 = p.find("f1");
  auto f2 = p.find("f2");
  REQUIRE(sys != std::string::npos);
  REQUIRE(reasoning != std::string::npos);
  REQUIRE(f1 != std::string::npos);
  REQUIRE(f2 != std::string::npos);
  CHECK(sys < reasoning);
  CHECK(reasoning < f1);
  CHECK(f1 < f2);
  CHECK(p == ctx.assemble_prompt());
}

TEST_CASE("assembly is injective over randomized windows") {
  std::mt19937_64 rng(41);
  std::set<std::string> prompts;
  int windows = 0;
  for (int i = 0; i < 200; ++i) {
    ContextWindow ctx("sys", 1 + static_cast<int>(rng() % 4));
    int ops = 1 + static_cast<int>(rng() % 6);
    for (int k = 0; k < ops; ++k) {
      std::string frame = "frame-" + std::to_string(i) + "-" + std::to_string(k);
      if (rng() % 5 == 0) {
        ctx.flush_on_reasoning(frame, thinking_turn("r" + std::to_string(i)));
      } else {
        ctx.push_step(frame, acting_turn(static_cast<int>(rng() % 100)));
      }
    }
    prompts.insert(ctx.assemble_prompt());
    ++windows;
  }
  CHECK(static_cast<int>(prompts.size()) == windows);
}

TEST_CASE("cache plan pins the sink and drops exactly the evicted spans") {
  ContextWindow ctx("sys", 2, "", 100, 1196);
  CHECK(ctx.sink_tokens() == 100);

  auto evicted = ctx.push_step("f1", acting_turn(), 1200);
  CachePlan plan = ctx.plan_cache(evicted);
  CHECK(plan.dropped_spans.empty());
  CHECK(plan.sink_anchor.start == 0);
  CHECK(plan.sink_anchor.length == 100);
  CHECK(plan.reused_prefix_len == 100 + 1200);

  ctx.push_step("f2", acting_turn(), 1300);
  evicted = ctx.push_step("f3", acting_turn(), 1250);
  plan = ctx.plan_cache(evicted);
  REQUIRE(plan.dropped_spans.size() == 1);
  CHECK(plan.dropped_spans[0].start == 100);
  CHECK(plan.dropped_spans[0].length == 1200);
  CHECK(!plan.sink_anchor.overlaps(plan.dropped_spans[0]));
  CHECK(plan.reused_prefix_len == 100 + 1300 + 1250);
}

TEST_CASE("flush reuses only the sink") {
  ContextWindow ctx("sys", 2, "", 100, 1196);
  ctx.push_step("f1", acting_turn(), 1200);
  ctx.push_step("f2", acting_turn(), 1300);
  CachePlan plan = ctx.flush_on_reasoning("f3", thinking_turn("r"), 1400);
  CHECK(plan.reused_prefix_len == 100);
  REQUIRE(plan.dropped_spans.size() == 1);
  CHECK(plan.dropped_spans[0].start == 100);
  CHECK(plan.dropped_spans[0].length == 1200 + 1300);
  CHECK(!plan.sink_anchor.overlaps(plan.dropped_spans[0]));
}

TEST_CASE("default entry token count uses the image-token constant") {
  ContextWindow ctx("sys", 2);
  ctx.push_step("f1", acting_turn());
  CHECK(ctx.entries()[0].token_count >= kImageTokenCount);
}

TEST_CASE("random operation sequences preserve all invariants") {
  std::mt19937_64 rng(43);
  for (int run = 0; run < 50; ++run) {
    int capacity = 1 + static_cast<int>(rng() % 20);
    ContextWindow ctx("sys", capacity, "", 64);
    int pushes_since_flush = 0;
    std::string last_reasoning;
    for (int op = 0; op < 400; ++op) {
      std::string frame = "f" + std::to_string(op);
      if (rng() % 10 == 0) {
        last_reasoning = "r" + std::to_string(op);
        CachePlan plan = ctx.flush_on_reasoning(frame, thinking_turn(last_reasoning));
        for (const TokenSpan& span : plan.dropped_spans) {
          CHECK(!plan.sink_anchor.overlaps(span));
        }
        pushes_since_flush = 0;
        CHECK(ctx.entries().size() == 1);
      } else {
        auto evicted = ctx.push_step(frame, acting_turn());
        CHECK(evicted.size() <= 1);
        ++pushes_since_flush;
        CHECK(ctx.steps_since_reasoning() == pushes_since_flush);
        CachePlan plan = ctx.plan_cache(evicted);
        for (const TokenSpan& span : plan.dropped_spans) {
          CHECK(!plan.sink_anchor.overlaps(span));
        }
      }
      REQUIRE(static_cast<int>(ctx.entries().size()) <= capacity);
      if (!last_reasoning.empty()) CHECK(ctx.latest_reasoning() == last_reasoning);
      CHECK(ctx.force_think_check() == (ctx.steps_since_reasoning() > 100));
    }
    // Conservation: everything ever pushed is resident, evicted, or flushed.
    CHECK(ctx.pushed_count() ==
          ctx.evicted_count() + ctx.entries().size() + ctx.flushed_count());
  }
}

TEST_CASE("snapshot serializes the full window state") {
  ContextWindow ctx("sys", 2);
  ctx.flush_on_reasoning("f1", thinking_turn("r"));
  ctx.push_step("f2", acting_turn(5));
  nlohmann::json j = ctx.snapshot();
  CHECK(j["capacity"] == 2);
  CHECK(j["latest_reasoning"] == "r");
  REQUIRE(j["entries"].size() == 2);
  CHECK(j["entries"][0]["frame"] == "f1");
  CHECK(j["entries"][1]["frame"] == "f2");
}
