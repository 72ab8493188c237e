#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "agentrt/keys.hpp"

namespace agentrt {

inline constexpr std::string_view kActionStart = "<|action_start|>";
inline constexpr std::string_view kActionEnd = "<|action_end|>";
inline constexpr std::string_view kThoughtStart = "<|thought_start|>";
inline constexpr std::string_view kThoughtEnd = "<|thought_end|>";

inline constexpr int kChunksPerAction = 6;
inline constexpr int kMaxKeysPerChunk = 4;
inline constexpr int kMouseDeltaLimit = 999;  // dx, dy in [-999, 999]
inline constexpr int kScrollLimit = 5;        // dz in [-5, 5]

enum class ParseErrorKind {
  MalformedMouse,
  RangeError,
  ChunkCountError,
  UnknownKey,
  TooManyKeys,
  DuplicateKey,
  UnbalancedMarkers,
  ActionMissing,
  ReasoningAfterAction,
  EmptyReasoning,
};

class ParseError : public std::runtime_error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ParseErrorKind kind() const { return kind_; }

 private:
  ParseErrorKind kind_;
};

/// Relative mouse displacement for one 200 ms step: (dx, dy) screen units
/// plus dz scroll steps.
struct MouseDelta {
  int dx = 0;
  int dy = 0;
  int dz = 0;

  bool in_range() const {
    return dx >= -kMouseDeltaLimit && dx <= kMouseDeltaLimit &&
           dy >= -kMouseDeltaLimit && dy <= kMouseDeltaLimit &&
           dz >= -kScrollLimit && dz <= kScrollLimit;
  }

  friend bool operator==(const MouseDelta&, const MouseDelta&) = default;
};

/// Zero to four keys held during one 33 ms slice. Order is preserved as
/// written; equality is set-wise.
class KeyChunk {
 public:
  KeyChunk() = default;

  /// Throws TooManyKeys / DuplicateKey on violation.
  void add(KeyToken key) {
    if (contains(key)) {
      throw ParseError(ParseErrorKind::DuplicateKey,
                       "duplicate key in chunk: " + std::string(key.name()));
    }
    if (keys_.size() >= kMaxKeysPerChunk) {
      throw ParseError(ParseErrorKind::TooManyKeys,
                       "more than 4 keys in a chunk");
    }
    keys_.push_back(key);
  }

  bool contains(KeyToken key) const {
    return std::find(keys_.begin(), keys_.end(), key) != keys_.end();
  }

  const std::vector<KeyToken>& keys() const { return keys_; }
  bool empty() const { return keys_.empty(); }
  std::size_t size() const { return keys_.size(); }

  /// Set-wise equality; written order carries no meaning.
  friend bool operator==(const KeyChunk& a, const KeyChunk& b) {
    if (a.keys_.size() != b.keys_.size()) return false;
    for (KeyToken k : a.keys_) {
      if (!b.contains(k)) return false;
    }
    return true;
  }
  friend bool operator!=(const KeyChunk& a, const KeyChunk& b) {
    return !(a == b);
  }

 private:
  std::vector<KeyToken> keys_;
};

/// One complete 200 ms action: a mouse triple plus exactly six key chunks.
struct ActionSequence {
  MouseDelta mouse;
  std::array<KeyChunk, kChunksPerAction> chunks;

  friend bool operator==(const ActionSequence&, const ActionSequence&) = default;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    std::size_t next = s.find(sep, pos);
    if (next == std::string_view::npos) {
      out.push_back(s.substr(pos));
      break;
    }
    out.push_back(s.substr(pos, next - pos));
    pos = next + 1;
  }
  return out;
}

inline std::vector<std::string_view> words(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

/// Strict integer field: optional leading minus, digits only.
inline int parse_int_field(std::string_view s) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError(ParseErrorKind::MalformedMouse,
                     "bad mouse integer: '" + std::string(s) + "'");
  }
  return value;
}

}  // namespace detail

/// Parses the textual action form. Accepts bare content or content wrapped
/// in action markers; tolerates runs of spaces around semicolons.
inline ActionSequence parse_action(std::string_view text) {
  std::string_view body = detail::trim(text);
  if (body.starts_with(kActionStart)) {
    body.remove_prefix(kActionStart.size());
    if (!body.ends_with(kActionEnd)) {
      throw ParseError(ParseErrorKind::UnbalancedMarkers,
                       "action start marker without end marker");
    }
    body.remove_suffix(kActionEnd.size());
    body = detail::trim(body);
  }

  auto segments = detail::split(body, ';');
  if (segments.size() != 1 + kChunksPerAction) {
    throw ParseError(ParseErrorKind::ChunkCountError,
                     "expected 6 key chunks, got " +
                         std::to_string(static_cast<int>(segments.size()) - 1));
  }

  auto mouse_fields = detail::words(segments[0]);
  if (mouse_fields.size() != 3) {
    throw ParseError(ParseErrorKind::MalformedMouse,
                     "mouse component needs exactly 3 integers");
  }
  ActionSequence a;
  a.mouse.dx = detail::parse_int_field(mouse_fields[0]);
  a.mouse.dy = detail::parse_int_field(mouse_fields[1]);
  a.mouse.dz = detail::parse_int_field(mouse_fields[2]);
  if (!a.mouse.in_range()) {
    throw ParseError(ParseErrorKind::RangeError, "mouse delta out of range");
  }

  for (int i = 0; i < kChunksPerAction; ++i) {
    for (std::string_view w : detail::words(segments[static_cast<std::size_t>(i) + 1])) {
      auto key = KeyToken::lookup(w);
      if (!key) {
        throw ParseError(ParseErrorKind::UnknownKey,
                         "unknown key: '" + std::string(w) + "'");
      }
      a.chunks[static_cast<std::size_t>(i)].add(*key);
    }
  }
  return a;
}

/// Canonical single-space " ; "-delimited form. Never emits markers.
inline std::string serialize_action(const ActionSequence& a) {
  std::string out = std::to_string(a.mouse.dx) + " " +
                    std::to_string(a.mouse.dy) + " " +
                    std::to_string(a.mouse.dz);
  for (const KeyChunk& chunk : a.chunks) {
    out += " ;";
    for (KeyToken k : chunk.keys()) {
      out += " ";
      out += k.name();
    }
  }
  return out;
}

/// One assistant message: optional reasoning followed by an action.
enum class TurnMode { Thinking, NonThinking };

struct ModelTurn {
  std::string reasoning;  // meaningful only in Thinking mode
  ActionSequence action;
  TurnMode mode = TurnMode::NonThinking;

  bool thinking() const { return mode == TurnMode::Thinking; }

  friend bool operator==(const ModelTurn&, const ModelTurn&) = default;
};

/// Parses a full turn. Mode is decided by the first marker token; the
/// thought block, when present, must precede the action block.
inline ModelTurn parse_turn(std::string_view text) {
  std::string_view rest = detail::trim(text);
  ModelTurn turn;

  if (rest.starts_with(kThoughtStart)) {
    rest.remove_prefix(kThoughtStart.size());
    std::size_t end = rest.find(kThoughtEnd);
    if (end == std::string_view::npos) {
      throw ParseError(ParseErrorKind::UnbalancedMarkers,
                       "thought block never closed");
    }
    std::string_view reasoning = detail::trim(rest.substr(0, end));
    if (reasoning.empty()) {
      throw ParseError(ParseErrorKind::EmptyReasoning,
                       "thinking turn with empty reasoning");
    }
    turn.reasoning = std::string(reasoning);
    turn.mode = TurnMode::Thinking;
    rest = detail::trim(rest.substr(end + kThoughtEnd.size()));
  }

  if (!rest.starts_with(kActionStart)) {
    throw ParseError(ParseErrorKind::ActionMissing, "no action block in turn");
  }
  rest.remove_prefix(kActionStart.size());
  std::size_t end = rest.find(kActionEnd);
  if (end == std::string_view::npos) {
    throw ParseError(ParseErrorKind::UnbalancedMarkers,
                     "action block never closed");
  }
  turn.action = parse_action(rest.substr(0, end));
  std::string_view tail = detail::trim(rest.substr(end + kActionEnd.size()));
  if (!tail.empty()) {
    if (tail.find(kThoughtStart) != std::string_view::npos) {
      throw ParseError(ParseErrorKind::ReasoningAfterAction,
                       "reasoning may not follow the action block");
    }
    throw ParseError(ParseErrorKind::UnbalancedMarkers,
                     "trailing content after action end marker");
  }
  return turn;
}

/// Renders a turn back to its framed message form.
inline std::string serialize_turn(const ModelTurn& turn) {
  std::string out;
  if (turn.thinking()) {
    out += kThoughtStart;
    out += turn.reasoning;
    out += kThoughtEnd;
  }
  out += kActionStart;
  out += serialize_action(turn.action);
  out += kActionEnd;
  return out;
}

}  // namespace agentrt
