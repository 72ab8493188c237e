#pragma once

#include <string>
#include <vector>

#include "agentrt/action.hpp"

namespace agentrt {

/// Canonical decode-time token categories. Keys fold their preceding space
/// into a single token; mouse integers are one token each.
enum class TokenKind { Number, Space, Semicolon, Key, ActionEnd };

struct ActionToken {
  TokenKind kind;
  std::string text;  // "92", " ", ";", "Shift", or the action-end marker

  friend bool operator==(const ActionToken&, const ActionToken&) = default;
};

inline ActionToken number_token(int v) {
  return {TokenKind::Number, std::to_string(v)};
}
inline ActionToken space_token() { return {TokenKind::Space, " "}; }
inline ActionToken semicolon_token() { return {TokenKind::Semicolon, ";"}; }
inline ActionToken key_token(KeyToken k) {
  return {TokenKind::Key, std::string(k.name())};
}
inline ActionToken action_end_token() {
  return {TokenKind::ActionEnd, std::string(kActionEnd)};
}

/// Emits the canonical token stream for one action:
///   DX ␣ DY ␣ DZ ; (keys of K1) ; ... (keys of K5) ; (keys of K6) <end>
/// Total length is 12 + total key count.
inline std::vector<ActionToken> tokenize_action(const ActionSequence& a) {
  std::vector<ActionToken> out;
  out.push_back(number_token(a.mouse.dx));
  out.push_back(space_token());
  out.push_back(number_token(a.mouse.dy));
  out.push_back(space_token());
  out.push_back(number_token(a.mouse.dz));
  out.push_back(semicolon_token());  // terminates the mouse component
  for (int i = 0; i < kChunksPerAction; ++i) {
    for (KeyToken k : a.chunks[static_cast<std::size_t>(i)].keys()) {
      out.push_back(key_token(k));
    }
    if (i < kChunksPerAction - 1) {
      out.push_back(semicolon_token());
    } else {
      out.push_back(action_end_token());
    }
  }
  return out;
}

inline std::size_t token_count(const ActionSequence& a) {
  std::size_t keys = 0;
  for (const KeyChunk& c : a.chunks) keys += c.size();
  return 12 + keys;  // 3 numbers + 2 spaces + 6 semicolons + action end
}

}  // namespace agentrt
