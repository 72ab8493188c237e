#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "agentrt/action.hpp"
#include "agentrt/tokenizer.hpp"
#include "test_util.hpp"

using namespace agentrt;
using testutil::make_chunk;
using testutil::random_action;

namespace {
const char* kDashExample = "92 0 0 ; Shift W ; Shift W ; Shift W ; F W ; F W ; F";
}

TEST_CASE("dash-toward-chest example parses to the documented structure") {
  ActionSequence a = parse_action(kDashExample);
  CHECK(a.mouse == MouseDelta{92, 0, 0});
  CHECK(a.chunks[0] == make_chunk({"Shift", "W"}));
  CHECK(a.chunks[1] == make_chunk({"Shift", "W"}));
  CHECK(a.chunks[2] == make_chunk({"Shift", "W"}));
  CHECK(a.chunks[3] == make_chunk({"F", "W"}));
  CHECK(a.chunks[4] == make_chunk({"F", "W"}));
  CHECK(a.chunks[5] == make_chunk({"F"}));
  CHECK(serialize_action(a) == kDashExample);
}

TEST_CASE("no-op action is canonical") {
  ActionSequence a = parse_action("0 0 0 ; ; ; ; ; ;");
  CHECK(a.mouse == MouseDelta{});
  for (const auto& c : a.chunks) CHECK(c.empty());
  CHECK(serialize_action(a) == "0 0 0 ; ; ; ; ; ;");
}

TEST_CASE("markers are accepted on parse input") {
  std::string framed = std::string(kActionStart) + kDashExample + std::string(kActionEnd);
  CHECK(parse_action(framed) == parse_action(kDashExample));
}

TEST_CASE("whitespace runs around semicolons are tolerated") {
  ActionSequence a = parse_action("  92   0  0  ;  Shift   W ;Shift W; Shift W ;F W;  F W ;F ");
  CHECK(serialize_action(a) == kDashExample);
}

TEST_CASE("parse errors") {
  auto kind_of = [](const char* text) {
    try {
      parse_action(text);
    } catch (const ParseError& e) {
      return e.kind();
    }
    FAIL("expected a parse error for: ", text);
    return ParseErrorKind::MalformedMouse;
  };
  CHECK(kind_of("1000 0 0 ; ; ; ; ; ;") == ParseErrorKind::RangeError);
  CHECK(kind_of("-1000 0 0 ; ; ; ; ; ;") == ParseErrorKind::RangeError);
  CHECK(kind_of("0 0 6 ; ; ; ; ; ;") == ParseErrorKind::RangeError);
  CHECK(kind_of("0 0 ; ; ; ; ; ;") == ParseErrorKind::MalformedMouse);
  CHECK(kind_of("0 0 0 0 ; ; ; ; ; ;") == ParseErrorKind::MalformedMouse);
  CHECK(kind_of("0 x 0 ; ; ; ; ; ;") == ParseErrorKind::MalformedMouse);
  CHECK(kind_of("0 0 0 ; ; ; ; ;") == ParseErrorKind::ChunkCountError);
  CHECK(kind_of("0 0 0 ; ; ; ; ; ; ;") == ParseErrorKind::ChunkCountError);
  CHECK(kind_of("0 0 0 ; Meta ; ; ; ; ;") == ParseErrorKind::UnknownKey);
  CHECK(kind_of("0 0 0 ; A B C D E ; ; ; ; ;") == ParseErrorKind::TooManyKeys);
  CHECK(kind_of("0 0 0 ; W W ; ; ; ; ;") == ParseErrorKind::DuplicateKey);
}

TEST_CASE("boundary deltas of the open interval are accepted") {
  CHECK_NOTHROW(parse_action("999 -999 5 ; ; ; ; ; ;"));
  CHECK_NOTHROW(parse_action("-999 999 -5 ; ; ; ; ; ;"));
}

TEST_CASE("round trip and idempotence over random actions") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 2000; ++i) {
    ActionSequence a = random_action(rng);
    std::string s = serialize_action(a);
    CHECK(parse_action(s) == a);
    CHECK(serialize_action(parse_action(s)) == s);
  }
}

TEST_CASE("alphabet has exactly 58 distinct keys, all parseable") {
  std::set<std::string_view> names(kKeyAlphabet.begin(), kKeyAlphabet.end());
  CHECK(names.size() == 58);
  for (auto name : kKeyAlphabet) {
    std::string s = "0 0 0 ; " + std::string(name) + " ; ; ; ; ;";
    ActionSequence a = parse_action(s);
    CHECK(a.chunks[0].contains(*KeyToken::lookup(name)));
  }
}

TEST_CASE("intra-chunk key order is preserved but compared as a set") {
  ActionSequence a = parse_action("0 0 0 ; Shift W ; ; ; ; ;");
  ActionSequence b = parse_action("0 0 0 ; W Shift ; ; ; ; ;");
  CHECK(a == b);
  CHECK(serialize_action(a) == "0 0 0 ; Shift W ; ; ; ; ;");
  CHECK(serialize_action(b) == "0 0 0 ; W Shift ; ; ; ; ;");
}

// --- turn framing ---------------------------------------------------------

TEST_CASE("non-thinking turn") {
  ModelTurn t = parse_turn("<|action_start|>0 0 0 ; ; ; ; ; ;<|action_end|>");
  CHECK(t.mode == TurnMode::NonThinking);
  CHECK(t.reasoning.empty());
}

TEST_CASE("thinking turn carries its reasoning") {
  ModelTurn t = parse_turn(
      "<|thought_start|>head to the marker<|thought_end|>"
      "<|action_start|>92 0 0 ; Shift W ; Shift W ; Shift W ; F W ; F W ; F<|action_end|>");
  CHECK(t.mode == TurnMode::Thinking);
  CHECK(t.reasoning == "head to the marker");
  CHECK(serialize_action(t.action) == kDashExample);
}

TEST_CASE("mode is decided by the first marker") {
  ModelTurn thinking = parse_turn(
      "<|thought_start|>x<|thought_end|><|action_start|>0 0 0 ; ; ; ; ; ;<|action_end|>");
  ModelTurn acting = parse_turn("<|action_start|>0 0 0 ; ; ; ; ; ;<|action_end|>");
  CHECK(thinking.thinking());
  CHECK(!acting.thinking());
}

TEST_CASE("turn framing errors") {
  auto kind_of = [](const std::string& text) {
    try {
      parse_turn(text);
    } catch (const ParseError& e) {
      return e.kind();
    }
    FAIL("expected a parse error");
    return ParseErrorKind::ActionMissing;
  };
  CHECK(kind_of("<|action_start|>0 0 0 ; ; ; ; ; ;<|action_end|>"
                "<|thought_start|>late<|thought_end|>") ==
        ParseErrorKind::ReasoningAfterAction);
  CHECK(kind_of("<|thought_start|>never closed") == ParseErrorKind::UnbalancedMarkers);
  CHECK(kind_of("<|thought_start|>x<|thought_end|>") == ParseErrorKind::ActionMissing);
  CHECK(kind_of("<|action_start|>0 0 0 ; ; ; ; ; ;") == ParseErrorKind::UnbalancedMarkers);
  CHECK(kind_of("<|thought_start|><|thought_end|>"
                "<|action_start|>0 0 0 ; ; ; ; ; ;<|action_end|>") ==
        ParseErrorKind::EmptyReasoning);
}

TEST_CASE("turn serialization round-trips") {
  ModelTurn t;
  t.mode = TurnMode::Thinking;
  t.reasoning = "open the chest";
  t.action = parse_action(kDashExample);
  CHECK(parse_turn(serialize_turn(t)) == t);
}

// --- tokenization ---------------------------------------------------------

TEST_CASE("no-op action tokenizes to 12 tokens") {
  auto tokens = tokenize_action(ActionSequence{});
  REQUIRE(tokens.size() == 12);
  CHECK(tokens[0] == number_token(0));
  CHECK(tokens[1] == space_token());
  CHECK(tokens[5] == semicolon_token());
  CHECK(tokens[11] == action_end_token());
}

TEST_CASE("keys are single tokens with the space folded in") {
  ActionSequence a = parse_action("0 0 0 ; Shift W ; ; ; ; ;");
  auto tokens = tokenize_action(a);
  CHECK(tokens[6] == key_token(*KeyToken::lookup("Shift")));
  CHECK(tokens[7] == key_token(*KeyToken::lookup("W")));
  CHECK(tokens[8] == semicolon_token());
}

TEST_CASE("token count matches the character-walk oracle") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    ActionSequence a = random_action(rng);
    auto tokens = tokenize_action(a);
    auto oracle = testutil::char_walk_tokens(serialize_action(a));
    REQUIRE(tokens.size() == oracle.size());
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      CHECK(tokens[k].text == oracle[k]);
    }
    CHECK(tokens.size() == token_count(a));
  }
}
