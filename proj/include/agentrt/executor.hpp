#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentrt/action.hpp"

namespace agentrt {

inline constexpr int kActionWindowMs = 200;

/// Boundary times for the six 33.33 ms chunks: {0, 33, 66, 100, 133, 166}.
inline int chunk_boundary_ms(int index) {
  return kActionWindowMs * index / kChunksPerAction;
}

enum class EventKind { KeyDown, KeyUp, MouseMove, Scroll };

struct TimedEvent {
  int at_ms = 0;
  EventKind kind = EventKind::KeyDown;
  // KeyDown/KeyUp use key; MouseMove uses (dx, dy); Scroll uses dz.
  std::optional<KeyToken> key;
  int dx = 0;
  int dy = 0;
  int dz = 0;
};

struct EventStream {
  std::vector<TimedEvent> events;
};

class IllegalTransition : public std::logic_error {
 public:
  explicit IllegalTransition(const std::string& what)
      : std::logic_error(what) {}
};

/// Tracks which keys are currently down. After executing chunk K_i the held
/// set equals exactly the keys of K_i.
class KeyboardState {
 public:
  bool holds(KeyToken k) const { return held_.contains(k); }
  const KeyChunk& held() const { return held_; }

  void apply(const TimedEvent& e) {
    switch (e.kind) {
      case EventKind::KeyDown:
        if (held_.contains(*e.key)) {
          throw IllegalTransition("key-down while already held: " +
                                  std::string(e.key->name()));
        }
        held_.add(*e.key);
        break;
      case EventKind::KeyUp: {
        if (!held_.contains(*e.key)) {
          throw IllegalTransition("key-up without key-down: " +
                                  std::string(e.key->name()));
        }
        KeyChunk next;
        for (KeyToken k : held_.keys()) {
          if (k != *e.key) next.add(k);
        }
        held_ = next;
        break;
      }
      case EventKind::MouseMove:
      case EventKind::Scroll:
        break;  // mouse events leave the held set unchanged
    }
  }

 private:
  KeyChunk held_;
};

struct ChunkDiff {
  std::vector<KeyToken> presses;
  std::vector<KeyToken> releases;
};

/// Keys in next but not prev are pressed; keys omitted from next are
/// released; keys in both retain their key-down state.
inline ChunkDiff diff_chunks(const KeyChunk& prev, const KeyChunk& next) {
  ChunkDiff d;
  for (KeyToken k : next.keys()) {
    if (!prev.contains(k)) d.presses.push_back(k);
  }
  for (KeyToken k : prev.keys()) {
    if (!next.contains(k)) d.releases.push_back(k);
  }
  return d;
}

/// Splits a total displacement into 6 integer sub-deltas that sum exactly,
/// remainder distributed to the earliest sub-steps.
inline std::array<int, kChunksPerAction> split_delta(int total) {
  std::array<int, kChunksPerAction> out{};
  int q = total / kChunksPerAction;
  int r = std::abs(total % kChunksPerAction);
  int sign = total < 0 ? -1 : 1;
  for (int i = 0; i < kChunksPerAction; ++i) {
    out[static_cast<std::size_t>(i)] = q + (i < r ? sign : 0);
  }
  return out;
}

/// Lowers one action to its timed event stream. prev_tail is the final
/// chunk of the previous action (empty at session start): keys held there
/// persist into chunk 1 unless omitted. At each boundary releases are
/// emitted before presses, then mouse motion and scroll.
inline EventStream lower_action(const ActionSequence& a,
                                const KeyChunk& prev_tail = {}) {
  EventStream stream;
  auto dxs = split_delta(a.mouse.dx);
  auto dys = split_delta(a.mouse.dy);
  int scroll_sign = a.mouse.dz < 0 ? -1 : 1;
  int scroll_steps = std::abs(a.mouse.dz);

  const KeyChunk* prev = &prev_tail;
  for (int i = 0; i < kChunksPerAction; ++i) {
    int at = chunk_boundary_ms(i);
    const KeyChunk& next = a.chunks[static_cast<std::size_t>(i)];
    ChunkDiff d = diff_chunks(*prev, next);
    for (KeyToken k : d.releases) {
      stream.events.push_back({at, EventKind::KeyUp, k, 0, 0, 0});
    }
    for (KeyToken k : d.presses) {
      stream.events.push_back({at, EventKind::KeyDown, k, 0, 0, 0});
    }
    int sdx = dxs[static_cast<std::size_t>(i)];
    int sdy = dys[static_cast<std::size_t>(i)];
    if (sdx != 0 || sdy != 0) {
      stream.events.push_back({at, EventKind::MouseMove, std::nullopt, sdx, sdy, 0});
    }
    if (i < scroll_steps) {
      stream.events.push_back({at, EventKind::Scroll, std::nullopt, 0, 0, scroll_sign});
    }
    prev = &next;
  }
  return stream;
}

struct TracePoint {
  int at_ms = 0;
  KeyChunk held;
  int cum_dx = 0;
  int cum_dy = 0;
  int cum_dz = 0;
};

/// Replays an event stream through the keyboard state machine under a
/// virtual clock, recording state after every event.
inline std::vector<TracePoint> replay(const EventStream& stream,
                                      KeyboardState& state) {
  std::vector<TracePoint> trace;
  int cum_dx = 0, cum_dy = 0, cum_dz = 0;
  for (const TimedEvent& e : stream.events) {
    state.apply(e);
    cum_dx += e.dx;
    cum_dy += e.dy;
    cum_dz += e.dz;
    trace.push_back({e.at_ms, state.held(), cum_dx, cum_dy, cum_dz});
  }
  return trace;
}

inline std::vector<TracePoint> replay(const EventStream& stream) {
  KeyboardState state;
  return replay(stream, state);
}

/// One JSONL record per event: {"at_ms":..,"kind":..,...}.
inline std::string trace_to_jsonl(const EventStream& stream) {
  std::string out;
  for (const TimedEvent& e : stream.events) {
    out += "{\"at_ms\":" + std::to_string(e.at_ms) + ",\"kind\":\"";
    switch (e.kind) {
      case EventKind::KeyDown:
        out += "key-down\",\"key\":\"" + std::string(e.key->name()) + "\"";
        break;
      case EventKind::KeyUp:
        out += "key-up\",\"key\":\"" + std::string(e.key->name()) + "\"";
        break;
      case EventKind::MouseMove:
        out += "mouse-move\",\"dx\":" + std::to_string(e.dx) +
               ",\"dy\":" + std::to_string(e.dy);
        break;
      case EventKind::Scroll:
        out += "scroll\",\"dz\":" + std::to_string(e.dz);
        break;
    }
    out += "}\n";
  }
  return out;
}

}  // namespace agentrt
