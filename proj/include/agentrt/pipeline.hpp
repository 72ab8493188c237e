#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentrt/action.hpp"
#include "agentrt/executor.hpp"

namespace agentrt {

inline constexpr int kDatasetSchemaVersion = 1;
inline constexpr std::int64_t kFrameIntervalUs = 200000;  // 5 Hz
inline constexpr std::int64_t kBinIntervalNumUs = kFrameIntervalUs;  // /6 per bin

class EmptyStream : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  double keep_ratio = 0.05;        // fraction of idle frames retained
  int jitter_min_run = 10;         // frames
  int jitter_net_threshold = 10;   // |sum dx| below this counts as jitter
  double template_threshold = 0.8; // scene-classifier NCC threshold
  std::int64_t offset_warn_ms = 5000;
  bool random_idle_stride = false; // deterministic stride by default
  std::uint64_t seed = 0;
};

inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  c.keep_ratio = j.value("keep_ratio", c.keep_ratio);
  c.jitter_min_run = j.value("jitter_min_run", c.jitter_min_run);
  c.jitter_net_threshold = j.value("jitter_net_threshold", c.jitter_net_threshold);
  c.template_threshold = j.value("template_threshold", c.template_threshold);
  c.offset_warn_ms = j.value("offset_warn_ms", c.offset_warn_ms);
  c.random_idle_stride = j.value("random_idle_stride", c.random_idle_stride);
  c.seed = j.value("seed", c.seed);
  return c;
}

struct Diagnostics {
  std::vector<std::string> messages;
  void warn(std::string msg) { messages.push_back(std::move(msg)); }
};

// ---------------------------------------------------------------------------
// Raw recording streams

struct KeyEvent {
  std::int64_t t_us = 0;
  std::string key;
  bool down = false;
};

struct RelPoll {
  std::int64_t t_us = 0;
  int dx = 0;
  int dy = 0;
  int wheel = 0;
};

struct AbsSample {
  std::int64_t t_us = 0;
  int x = 0;
  int y = 0;
};

struct RawInputLog {
  std::vector<KeyEvent> key_events;
  std::vector<RelPoll> rel_polls;
  std::vector<AbsSample> abs_positions;

  std::optional<std::int64_t> start_us() const {
    std::optional<std::int64_t> s;
    auto consider = [&](std::int64_t t) {
      if (!s || t < *s) s = t;
    };
    if (!key_events.empty()) consider(key_events.front().t_us);
    if (!rel_polls.empty()) consider(rel_polls.front().t_us);
    if (!abs_positions.empty()) consider(abs_positions.front().t_us);
    return s;
  }
};

struct VideoIndex {
  std::int64_t first_frame_at_us = 0;
  std::int64_t frame_interval_us = kFrameIntervalUs;
  std::int64_t frame_count = 0;
};

/// Event-log JSONL: one record per line, {t_us, stream: key|rel|abs, payload}.
inline RawInputLog load_input_log(std::istream& in) {
  RawInputLog log;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    std::int64_t t = j.at("t_us").get<std::int64_t>();
    std::string stream = j.at("stream").get<std::string>();
    const nlohmann::json& p = j.at("payload");
    if (stream == "key") {
      log.key_events.push_back({t, p.at("key").get<std::string>(),
                                p.at("down").get<bool>()});
    } else if (stream == "rel") {
      log.rel_polls.push_back({t, p.at("dx").get<int>(), p.at("dy").get<int>(),
                               p.value("wheel", 0)});
    } else if (stream == "abs") {
      log.abs_positions.push_back({t, p.at("x").get<int>(), p.at("y").get<int>()});
    }
  }
  return log;
}

inline void save_input_log(const RawInputLog& log, std::ostream& out) {
  std::vector<nlohmann::json> records;
  for (const KeyEvent& e : log.key_events) {
    records.push_back({{"t_us", e.t_us},
                       {"stream", "key"},
                       {"payload", {{"key", e.key}, {"down", e.down}}}});
  }
  for (const RelPoll& p : log.rel_polls) {
    records.push_back(
        {{"t_us", p.t_us},
         {"stream", "rel"},
         {"payload", {{"dx", p.dx}, {"dy", p.dy}, {"wheel", p.wheel}}}});
  }
  for (const AbsSample& s : log.abs_positions) {
    records.push_back({{"t_us", s.t_us},
                       {"stream", "abs"},
                       {"payload", {{"x", s.x}, {"y", s.y}}}});
  }
  std::sort(records.begin(), records.end(),
            [](const nlohmann::json& a, const nlohmann::json& b) {
              return a.at("t_us").get<std::int64_t>() <
                     b.at("t_us").get<std::int64_t>();
            });
  for (const nlohmann::json& r : records) out << r.dump() << "\n";
}

// ---------------------------------------------------------------------------
// Alignment

struct AlignResult {
  std::int64_t offset_ms = 0;  // first_frame_time - input_log_start
  std::int64_t frames_dropped = 0;
  std::size_t events_dropped = 0;
  bool warning = false;
};

/// Synchronizes the video index with the input log. A positive offset means
/// input logging started earlier: events before the first frame are
/// dropped. A negative offset means the video started earlier: leading
/// frames are dropped instead.
inline AlignResult align_streams(VideoIndex& video, RawInputLog& log,
                                 const PipelineConfig& cfg = {},
                                 Diagnostics* diags = nullptr) {
  if (video.frame_count <= 0) throw EmptyStream("video index is empty");
  auto log_start = log.start_us();
  if (!log_start) throw EmptyStream("input log is empty");

  AlignResult r;
  std::int64_t offset_us = video.first_frame_at_us - *log_start;
  r.offset_ms = offset_us / 1000;
  if (std::llabs(r.offset_ms) > cfg.offset_warn_ms) {
    r.warning = true;
    if (diags) {
      diags->warn("alignment offset " + std::to_string(r.offset_ms) +
                  " ms exceeds " + std::to_string(cfg.offset_warn_ms) +
                  " ms; session may be corrupt");
    }
  }

  if (offset_us > 0) {
    std::int64_t cut = video.first_frame_at_us;
    auto drop_before = [&](auto& vec) {
      auto it = std::find_if(vec.begin(), vec.end(),
                             [&](const auto& e) { return e.t_us >= cut; });
      r.events_dropped += static_cast<std::size_t>(it - vec.begin());
      vec.erase(vec.begin(), it);
    };
    drop_before(log.key_events);
    drop_before(log.rel_polls);
    drop_before(log.abs_positions);
  } else if (offset_us < 0) {
    std::int64_t behind = -offset_us;
    std::int64_t drop =
        (behind + video.frame_interval_us - 1) / video.frame_interval_us;
    drop = std::min(drop, video.frame_count);
    video.first_frame_at_us += drop * video.frame_interval_us;
    video.frame_count -= drop;
    r.frames_dropped = drop;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Keyboard reconstruction

/// Snaps an absolute time to the nearest 33.33 ms bin boundary (global bin
/// index relative to t0); an exact midpoint snaps to the earlier bin.
inline std::int64_t snap_to_bin(std::int64_t t_us, std::int64_t t0_us) {
  std::int64_t rel = (t_us - t0_us) * 6;  // in units of 1/6 us-frame
  std::int64_t n = rel / kFrameIntervalUs;
  std::int64_t rem = rel % kFrameIntervalUs;
  if (rem < 0) {
    n -= 1;
    rem += kFrameIntervalUs;
  }
  if (2 * rem > kFrameIntervalUs) ++n;
  return n;
}

/// Replays hook events through a keyboard state machine and samples the
/// held set at every 33.33 ms bin boundary; events snap to their nearest
/// boundary first. Up events without a matching down are dropped with a
/// diagnostic, as are keys outside the alphabet.
inline std::vector<std::array<KeyChunk, kChunksPerAction>> reconstruct_keyboard(
    const std::vector<KeyEvent>& events, const VideoIndex& video,
    Diagnostics* diags = nullptr) {
  std::int64_t t0 = video.first_frame_at_us;
  std::int64_t total_bins = video.frame_count * kChunksPerAction;

  // Per key: press intervals [down_bin, up_bin) after snapping.
  std::map<int, std::vector<std::pair<std::int64_t, std::int64_t>>> intervals;
  std::map<int, std::int64_t> open_down;
  for (const KeyEvent& e : events) {
    auto key = KeyToken::lookup(e.key);
    if (!key) {
      if (diags) diags->warn("discarding key outside alphabet: " + e.key);
      continue;
    }
    std::int64_t bin = snap_to_bin(e.t_us, t0);
    if (e.down) {
      if (!open_down.contains(key->index())) open_down[key->index()] = bin;
      // OS auto-repeat emits extra downs while held; ignore them.
    } else {
      auto it = open_down.find(key->index());
      if (it == open_down.end()) {
        if (diags) diags->warn("dangling key-up dropped: " + e.key);
        continue;
      }
      intervals[key->index()].push_back({it->second, bin});
      open_down.erase(it);
    }
  }
  for (auto& [idx, bin] : open_down) {
    intervals[idx].push_back({bin, total_bins});  // held through end of log
  }

  std::vector<std::array<KeyChunk, kChunksPerAction>> frames(
      static_cast<std::size_t>(video.frame_count));
  for (auto& [idx, spans] : intervals) {
    KeyToken key = *KeyToken::lookup(kKeyAlphabet[static_cast<std::size_t>(idx)]);
    for (auto [lo, hi] : spans) {
      lo = std::max<std::int64_t>(lo, 0);
      hi = std::min(hi, total_bins);
      for (std::int64_t g = lo; g < hi; ++g) {
        auto& chunk = frames[static_cast<std::size_t>(g / kChunksPerAction)]
                            [static_cast<std::size_t>(g % kChunksPerAction)];
        if (!chunk.contains(key)) chunk.add(key);
      }
    }
  }
  return frames;
}

// ---------------------------------------------------------------------------
// Mouse

enum class Scene { Gui, Overworld };

struct RawMouse {
  std::int64_t dx = 0;
  std::int64_t dy = 0;
  int wheel = 0;
};

/// Raw per-frame mouse motion. Overworld frames sum relative polls within
/// the window; GUI frames take the difference of absolute positions, where
/// pointer acceleration makes relative counts unreliable. Wheel is always
/// summed from polls.
inline RawMouse mouse_per_frame(const RawInputLog& log, Scene scene,
                                std::int64_t window_start_us,
                                std::int64_t window_end_us,
                                Diagnostics* diags = nullptr) {
  RawMouse m;
  for (const RelPoll& p : log.rel_polls) {
    if (p.t_us >= window_start_us && p.t_us < window_end_us) m.wheel += p.wheel;
  }
  auto relative_sum = [&] {
    for (const RelPoll& p : log.rel_polls) {
      if (p.t_us >= window_start_us && p.t_us < window_end_us) {
        m.dx += p.dx;
        m.dy += p.dy;
      }
    }
  };
  if (scene == Scene::Overworld) {
    relative_sum();
    return m;
  }
  const AbsSample* at_start = nullptr;
  const AbsSample* at_end = nullptr;
  for (const AbsSample& s : log.abs_positions) {
    if (s.t_us <= window_start_us) at_start = &s;
    if (s.t_us <= window_end_us) at_end = &s;
  }
  if (!at_start || !at_end) {
    if (diags) diags->warn("GUI frame without absolute samples; using relative sum");
    relative_sum();
    return m;
  }
  m.dx = at_end->x - at_start->x;
  m.dy = at_end->y - at_start->y;
  return m;
}

// ---------------------------------------------------------------------------
// Discretization

inline constexpr int kMouseUnitX = 5;  // pixels per unit along X
inline constexpr int kMouseUnitY = 4;  // pixels per unit along Y

/// Pixel deltas to action units: round half away from zero, then clamp to
/// the action-grammar ranges.
inline MouseDelta discretize_mouse(std::int64_t raw_dx, std::int64_t raw_dy,
                                   int wheel = 0) {
  auto unit = [](std::int64_t v, int divisor) {
    long r = std::lround(static_cast<double>(v) / divisor);
    return static_cast<int>(std::clamp<long>(r, -kMouseDeltaLimit, kMouseDeltaLimit));
  };
  MouseDelta d;
  d.dx = unit(raw_dx, kMouseUnitX);
  d.dy = unit(raw_dy, kMouseUnitY);
  d.dz = std::clamp(wheel, -kScrollLimit, kScrollLimit);
  return d;
}

// ---------------------------------------------------------------------------
// Frame-action pairs

struct FrameActionPair {
  std::string frame_ref;
  std::int64_t ts_us = 0;
  MouseDelta mouse;
  std::array<KeyChunk, kChunksPerAction> chunks;
  Scene scene = Scene::Overworld;

  bool idle() const {
    if (mouse != MouseDelta{}) return false;
    for (const KeyChunk& c : chunks) {
      if (!c.empty()) return false;
    }
    return true;
  }

  ActionSequence action() const { return {mouse, chunks}; }
};

/// Drops camera-jitter runs (alternating-sign dx, small net motion over a
/// long run), then keeps every ceil(1/keep_ratio)-th frame of each idle
/// run. Active frames always survive.
inline std::vector<FrameActionPair> filter_idle(
    const std::vector<FrameActionPair>& pairs, const PipelineConfig& cfg = {}) {
  std::vector<bool> drop(pairs.size(), false);

  // Jitter pass: runs of key-free frames whose dx alternates sign.
  std::size_t i = 0;
  while (i < pairs.size()) {
    auto jittery = [&](std::size_t k) {
      if (pairs[k].mouse.dx == 0) return false;
      for (const KeyChunk& c : pairs[k].chunks) {
        if (!c.empty()) return false;
      }
      return true;
    };
    if (!jittery(i)) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    std::int64_t net = pairs[i].mouse.dx;
    while (j < pairs.size() && jittery(j) &&
           (pairs[j].mouse.dx > 0) != (pairs[j - 1].mouse.dx > 0)) {
      net += pairs[j].mouse.dx;
      ++j;
    }
    if (j - i >= static_cast<std::size_t>(cfg.jitter_min_run) &&
        std::llabs(net) < cfg.jitter_net_threshold) {
      for (std::size_t k = i; k < j; ++k) drop[k] = true;
    }
    i = j;
  }

  int stride = static_cast<int>(std::ceil(1.0 / cfg.keep_ratio));
  std::mt19937_64 rng(cfg.seed);

  std::vector<FrameActionPair> out;
  std::size_t run_pos = 0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    if (drop[k]) {
      run_pos = 0;
      continue;
    }
    if (!pairs[k].idle()) {
      out.push_back(pairs[k]);
      run_pos = 0;
      continue;
    }
    ++run_pos;
    bool keep = cfg.random_idle_stride
                    ? std::uniform_real_distribution<>(0, 1)(rng) < cfg.keep_ratio
                    : run_pos % static_cast<std::size_t>(stride) == 0;
    if (keep) out.push_back(pairs[k]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sample assembly

enum class SampleKind { Pretrain, Instruct, Reasoning };

struct InstructionSpan {
  std::size_t begin = 0;  // pair index, inclusive
  std::size_t end = 0;    // exclusive
  std::string text;
};

struct ReasoningPoint {
  std::size_t step = 0;  // pair index where the reasoning was generated
  std::string text;
};

struct Annotations {
  std::vector<InstructionSpan> instruction_spans;
  std::vector<ReasoningPoint> reasoning_points;
};

struct DatasetSample {
  SampleKind kind = SampleKind::Pretrain;
  bool history = false;
  std::string text;  // instruction or reasoning, when applicable
  std::vector<FrameActionPair> steps;
};

inline constexpr std::size_t kHistorySampleSteps = 20;

namespace detail {

inline void emit_windows(const std::vector<FrameActionPair>& pairs,
                         std::size_t begin, std::size_t end, SampleKind kind,
                         const std::string& text,
                         std::vector<DatasetSample>& out) {
  for (std::size_t w = begin; w < end; w += kHistorySampleSteps) {
    DatasetSample s;
    s.kind = kind;
    s.history = true;
    s.text = text;
    std::size_t stop = std::min(end, w + kHistorySampleSteps);
    s.steps.assign(pairs.begin() + static_cast<std::ptrdiff_t>(w),
                   pairs.begin() + static_cast<std::ptrdiff_t>(stop));
    out.push_back(std::move(s));
  }
}

}  // namespace detail

/// Assembles dataset samples for all six (kind x history) layouts. Idle
/// filtering is the caller's concern and must not be applied for the
/// reasoning kind.
inline std::vector<DatasetSample> assemble_samples(
    const std::vector<FrameActionPair>& pairs, const Annotations& ann,
    SampleKind kind, bool history, Diagnostics* diags = nullptr) {
  std::vector<DatasetSample> out;
  switch (kind) {
    case SampleKind::Pretrain:
      if (history) {
        detail::emit_windows(pairs, 0, pairs.size(), kind, {}, out);
      } else {
        for (const FrameActionPair& p : pairs) {
          out.push_back({kind, false, {}, {p}});
        }
      }
      break;
    case SampleKind::Instruct: {
      std::vector<bool> covered(pairs.size(), false);
      for (const InstructionSpan& span : ann.instruction_spans) {
        std::size_t end = std::min(span.end, pairs.size());
        for (std::size_t k = span.begin; k < end; ++k) covered[k] = true;
        if (history) {
          detail::emit_windows(pairs, span.begin, end, kind, span.text, out);
        } else {
          for (std::size_t k = span.begin; k < end; ++k) {
            out.push_back({kind, false, span.text, {pairs[k]}});
          }
        }
      }
      if (diags) {
        for (std::size_t k = 0; k < pairs.size(); ++k) {
          if (!covered[k]) {
            diags->warn("pair " + std::to_string(k) +
                        " outside any instruction span; skipped");
          }
        }
      }
      break;
    }
    case SampleKind::Reasoning: {
      const auto& points = ann.reasoning_points;
      if (history) {
        // A trajectory starts at the frame of a reasoning and ends before
        // the next reasoning, or at 20 frames, whichever comes first.
        for (std::size_t r = 0; r < points.size(); ++r) {
          std::size_t begin = points[r].step;
          std::size_t end = r + 1 < points.size() ? points[r + 1].step
                                                  : pairs.size();
          end = std::min({end, pairs.size(), begin + kHistorySampleSteps});
          if (begin >= end) continue;
          DatasetSample s;
          s.kind = kind;
          s.history = true;
          s.text = points[r].text;
          s.steps.assign(pairs.begin() + static_cast<std::ptrdiff_t>(begin),
                         pairs.begin() + static_cast<std::ptrdiff_t>(end));
          out.push_back(std::move(s));
        }
      } else {
        std::size_t r = 0;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
          while (r + 1 < points.size() && points[r + 1].step <= k) ++r;
          if (points.empty() || points[r].step > k) {
            if (diags) {
              diags->warn("pair " + std::to_string(k) +
                          " precedes the first reasoning; skipped");
            }
            continue;
          }
          out.push_back({kind, false, points[r].text, {pairs[k]}});
        }
      }
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset JSONL

inline nlohmann::json pair_to_json(const FrameActionPair& p) {
  nlohmann::json j;
  j["frame"] = p.frame_ref;
  j["ts_us"] = p.ts_us;
  j["action"] = serialize_action(p.action());
  j["scene"] = p.scene == Scene::Gui ? "gui" : "overworld";
  j["idle"] = p.idle();
  return j;
}

inline const char* sample_kind_name(SampleKind k) {
  switch (k) {
    case SampleKind::Pretrain: return "pretrain";
    case SampleKind::Instruct: return "instruct";
    case SampleKind::Reasoning: return "reasoning";
  }
  return "?";
}

inline void write_dataset_jsonl(const std::vector<DatasetSample>& samples,
                                std::ostream& out) {
  for (const DatasetSample& s : samples) {
    nlohmann::json j;
    j["schema_version"] = kDatasetSchemaVersion;
    j["kind"] = sample_kind_name(s.kind);
    j["history"] = s.history;
    if (!s.text.empty()) j["text"] = s.text;
    j["steps"] = nlohmann::json::array();
    for (const FrameActionPair& p : s.steps) j["steps"].push_back(pair_to_json(p));
    out << j.dump() << "\n";
  }
}

}  // namespace agentrt
