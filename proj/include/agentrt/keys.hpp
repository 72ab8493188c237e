#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace agentrt {

/// Closed alphabet of 58 keyboard/mouse identifiers. Anything outside this
/// set is rejected at parse time.
inline constexpr std::array<std::string_view, 58> kKeyAlphabet = {
    // mouse buttons
    "LMB", "RMB", "MMB",
    // digits
    "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
    // letters
    "A", "B", "C", "D", "E", "F", "G", "H", "I", "J", "K", "L", "M",
    "N", "O", "P", "Q", "R", "S", "T", "U", "V", "W", "X", "Y", "Z",
    // function keys
    "F1", "F2", "F3", "F4", "F5", "F6", "F7", "F8", "F9", "F10", "F11", "F12",
    // modifiers and specials
    "Esc", "Tab", "Caps", "Shift", "Ctrl", "Alt", "Space",
};

/// Emission-token spelling for each key. Multi-token spellings (F1-F12,
/// digits) are remapped so every key is a single token on the wire.
inline constexpr std::array<std::pair<std::string_view, std::string_view>, 58>
    kKeyTokenMap = {{
        {"LMB", "LB"},    {"RMB", "RB"},    {"MMB", "MB"},
        {"0", "zero"},    {"1", "one"},     {"2", "two"},
        {"3", "three"},   {"4", "four"},    {"5", "five"},
        {"6", "six"},     {"7", "seven"},   {"8", "eight"},
        {"9", "nine"},    {"A", "A"},       {"B", "B"},
        {"C", "C"},       {"D", "D"},       {"E", "E"},
        {"F", "F"},       {"G", "G"},       {"H", "H"},
        {"I", "I"},       {"J", "J"},       {"K", "K"},
        {"L", "L"},       {"M", "M"},       {"N", "N"},
        {"O", "O"},       {"P", "P"},       {"Q", "Q"},
        {"R", "R"},       {"S", "S"},       {"T", "T"},
        {"U", "U"},       {"V", "V"},       {"W", "W"},
        {"X", "X"},       {"Y", "Y"},       {"Z", "Z"},
        {"F1", "One"},    {"F2", "Two"},    {"F3", "Three"},
        {"F4", "Four"},   {"F5", "Five"},   {"F6", "Six"},
        {"F7", "Seven"},  {"F8", "Eight"},  {"F9", "Nine"},
        {"F10", "Ten"},   {"F11", "Eleven"},{"F12", "Twelve"},
        {"Esc", "Esc"},   {"Tab", "Tab"},   {"Caps", "Caps"},
        {"Shift", "Shift"}, {"Ctrl", "Ctrl"}, {"Alt", "Alt"},
        {"Space", "Space"},
    }};

/// A validated member of the key alphabet. Stores the index into
/// kKeyAlphabet so comparisons are cheap.
class KeyToken {
 public:
  static std::optional<KeyToken> lookup(std::string_view name) {
    for (std::size_t i = 0; i < kKeyAlphabet.size(); ++i) {
      if (kKeyAlphabet[i] == name) return KeyToken(static_cast<int>(i));
    }
    return std::nullopt;
  }

  std::string_view name() const { return kKeyAlphabet[static_cast<std::size_t>(index_)]; }

  /// Single-token emission spelling (e.g. F1 -> "One").
  std::string_view emission_token() const {
    return kKeyTokenMap[static_cast<std::size_t>(index_)].second;
  }

  int index() const { return index_; }

  friend bool operator==(KeyToken a, KeyToken b) { return a.index_ == b.index_; }
  friend bool operator!=(KeyToken a, KeyToken b) { return a.index_ != b.index_; }
  friend bool operator<(KeyToken a, KeyToken b) { return a.index_ < b.index_; }

 private:
  explicit KeyToken(int index) : index_(index) {}
  int index_;
};

}  // namespace agentrt
