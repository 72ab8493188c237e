#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentrt/action.hpp"
#include "agentrt/context.hpp"
#include "agentrt/executor.hpp"
#include "agentrt/latency.hpp"
#include "agentrt/specdecode.hpp"
#include "agentrt/wire.hpp"

namespace agentrt {

inline constexpr double kCycleBudgetMs = 200.0;
inline constexpr double kChunkSlotMs = kCycleBudgetMs / kChunksPerAction;

// ---------------------------------------------------------------------------
// Mock policy

/// Deterministic stand-in for the model: either a scripted playlist of
/// turns or seeded-random generation, with thinking on a fixed schedule and
/// whenever the context manager forces it.
class MockPolicy {
 public:
  static MockPolicy scripted(std::vector<ModelTurn> playlist) {
    MockPolicy p;
    p.playlist_ = std::move(playlist);
    return p;
  }

  static MockPolicy seeded(std::uint64_t seed, int think_every = 0) {
    MockPolicy p;
    p.seed_ = seed;
    p.think_every_ = think_every;
    return p;
  }

  std::size_t playlist_size() const { return playlist_.size(); }

  /// Turn for cycle `seq`. force_think overrides the schedule.
  ModelTurn turn_for(std::uint64_t seq, bool force_think) const {
    if (!playlist_.empty()) {
      ModelTurn t = playlist_[static_cast<std::size_t>(seq) % playlist_.size()];
      if (force_think && !t.thinking()) {
        t.mode = TurnMode::Thinking;
        t.reasoning = "forced reassessment at step " + std::to_string(seq);
      }
      return t;
    }
    std::mt19937_64 rng(seed_ * 0x9E3779B97F4A7C15ULL + seq);
    ModelTurn t;
    t.action = random_action(rng);
    bool think = force_think ||
                 (think_every_ > 0 && seq % static_cast<std::uint64_t>(think_every_) == 0);
    if (think) {
      t.mode = TurnMode::Thinking;
      t.reasoning = "plan for step " + std::to_string(seq);
    }
    return t;
  }

  /// Random in-range action, skewed toward small chunks.
  static ActionSequence random_action(std::mt19937_64& rng) {
    ActionSequence a;
    std::uniform_int_distribution<int> delta(-200, 200);
    std::uniform_int_distribution<int> scroll(-1, 1);
    a.mouse = {delta(rng), delta(rng), scroll(rng)};
    std::discrete_distribution<int> nkeys({30, 40, 25, 4, 1});
    std::uniform_int_distribution<int> key_index(0, 57);
    for (auto& chunk : a.chunks) {
      int n = nkeys(rng);
      while (static_cast<int>(chunk.size()) < n) {
        auto key = KeyToken::lookup(kKeyAlphabet[static_cast<std::size_t>(key_index(rng))]);
        if (!chunk.contains(*key)) chunk.add(*key);
      }
    }
    return a;
  }

 private:
  std::vector<ModelTurn> playlist_;
  std::uint64_t seed_ = 0;
  int think_every_ = 0;
};

// ---------------------------------------------------------------------------
// Cycle accounting

struct CycleRecord {
  std::uint64_t seq = 0;
  bool thinking = false;
  bool forced_think = false;
  double first_chunk_latency_ms = 0;
  double chunk_decode_ms[kChunksPerAction] = {};    // per key chunk
  double chunk_delivery_ms[kChunksPerAction] = {};  // relative to capture
  bool deadline_met[kChunksPerAction] = {};
  double idle_gap_ms = 0;
};

struct StageAggregate {
  double p50 = 0, p95 = 0, max = 0;
};

struct CycleReport {
  std::vector<CycleRecord> cycles;
  LatencyModel model;
  bool strict = false;
  int late_chunks = 0;
  int reasoning_cycles = 0;
  int idle_gaps = 0;

  StageAggregate aggregate(const std::function<double(const CycleRecord&)>& f) const {
    std::vector<double> v;
    v.reserve(cycles.size());
    for (const CycleRecord& c : cycles) v.push_back(f(c));
    std::sort(v.begin(), v.end());
    StageAggregate a;
    if (v.empty()) return a;
    a.p50 = v[v.size() / 2];
    a.p95 = v[std::min(v.size() - 1, static_cast<std::size_t>(
                                         std::ceil(v.size() * 0.95)) )];
    a.max = v.back();
    return a;
  }

  bool any_deadline_violation() const { return late_chunks > 0; }
};

// ---------------------------------------------------------------------------
// Closed loop

/// Runs n capture -> request -> decode -> execute cycles under a virtual
/// clock. The policy sees the frame captured one cycle earlier (the ~200 ms
/// perception staleness); executor key state threads across cycles via
/// prev_tail.
template <typename FrameFn>
inline CycleReport run_closed_loop(FrameFn&& frame_for, const MockPolicy& policy,
                                   const LatencyModel& lat, int cycles,
                                   bool strict = false,
                                   ContextWindow* external_ctx = nullptr) {
  if (strict && lat.stage_sum_ms() > kCycleBudgetMs) {
    throw DeadlineConfigError("configured stage sum exceeds the 200 ms budget");
  }
  CycleReport report;
  report.model = lat;
  report.strict = strict;

  ContextWindow local_ctx("closed-loop system prompt", kHistoryWindowCapacity,
                          "Complete the main storyline mission");
  ContextWindow& ctx = external_ctx ? *external_ctx : local_ctx;

  KeyChunk prev_tail;
  KeyboardState keyboard;  // persists across cycles, matching prev_tail
  for (int i = 0; i < cycles; ++i) {
    auto seq = static_cast<std::uint64_t>(i);
    bool force = ctx.force_think_check();
    // Perception staleness: the policy sees the previous cycle's frame.
    std::string frame = frame_for(i == 0 ? 0 : seq - 1);
    ModelTurn turn = policy.turn_for(seq, force);

    CycleRecord rec;
    rec.seq = seq;
    rec.thinking = turn.thinking();
    rec.forced_think = force;

    DecodeResult decode =
        simulate_decode(tokenize_action(turn.action), lat.decode_per_token_ms);

    // First executable chunk covers the mouse component plus K1.
    double first_steps =
        lat.first_chunk_forward_steps
            ? *lat.first_chunk_forward_steps
            : static_cast<double>(decode.chunks[0].forward_steps +
                                  decode.chunks[1].forward_steps);
    double decode_start = lat.stage_sum_ms();
    if (turn.thinking()) {
      rec.first_chunk_latency_ms =
          decode_start + lat.reasoning_forward_steps * lat.decode_per_token_ms;
    } else {
      rec.first_chunk_latency_ms =
          decode_start + first_steps * lat.decode_per_token_ms;
    }

    double t = rec.first_chunk_latency_ms;
    for (int k = 0; k < kChunksPerAction; ++k) {
      double steps = static_cast<double>(
          decode.chunks[static_cast<std::size_t>(k) + 1].forward_steps);
      rec.chunk_decode_ms[k] = steps * lat.decode_per_token_ms;
      if (k > 0) t += rec.chunk_decode_ms[k];
      rec.chunk_delivery_ms[k] = t;
      double deadline = rec.first_chunk_latency_ms + k * kChunkSlotMs;
      rec.deadline_met[k] = rec.chunk_delivery_ms[k] <= deadline + 1e-9;
      if (!rec.deadline_met[k]) ++report.late_chunks;
    }

    if (rec.first_chunk_latency_ms > kCycleBudgetMs) {
      rec.idle_gap_ms = rec.first_chunk_latency_ms - kCycleBudgetMs;
      ++report.idle_gaps;
    }
    if (turn.thinking()) ++report.reasoning_cycles;

    // Execute: lower against the previous cycle's tail chunk.
    EventStream stream = lower_action(turn.action, prev_tail);
    replay(stream, keyboard);
    prev_tail = turn.action.chunks[kChunksPerAction - 1];

    if (turn.thinking()) {
      ctx.flush_on_reasoning(frame, turn);
    } else {
      auto evicted = ctx.push_step(frame, turn);
      ctx.plan_cache(evicted);
    }
    report.cycles.push_back(rec);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Reporting

inline nlohmann::json report_to_json(const CycleReport& r) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["cycles"] = r.cycles.size();
  j["reasoning_cycles"] = r.reasoning_cycles;
  j["idle_gaps"] = r.idle_gaps;
  j["late_chunks"] = r.late_chunks;
  auto agg = [&](const std::function<double(const CycleRecord&)>& f) {
    StageAggregate a = r.aggregate(f);
    return nlohmann::json{{"p50", a.p50}, {"p95", a.p95}, {"max", a.max}};
  };
  j["first_chunk_latency_ms"] =
      agg([](const CycleRecord& c) { return c.first_chunk_latency_ms; });
  j["chunk_decode_ms"] = agg([](const CycleRecord& c) {
    return *std::max_element(c.chunk_decode_ms, c.chunk_decode_ms + kChunksPerAction);
  });
  j["idle_gap_ms"] = agg([](const CycleRecord& c) { return c.idle_gap_ms; });
  j["stages"] = {{"network_ms", r.model.network_ms},
                 {"preprocess_ms", r.model.preprocess_ms},
                 {"vision_ms", r.model.vision_ms},
                 {"prefill_ms", r.model.prefill_ms},
                 {"decode_per_token_ms", r.model.decode_per_token_ms},
                 {"overlap_ms", r.model.overlap_ms}};
  return j;
}

inline std::string render_report(const CycleReport& r) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(1);
  auto row = [&](const std::string& name, double value) {
    out << "  " << std::left << std::setw(36) << name << std::right
        << std::setw(8) << value << "\n";
  };
  out << "Stage latency (ms)\n";
  row("Network latency", r.model.network_ms);
  row("Preprocessing", r.model.preprocess_ms);
  row("Vision encoder", r.model.vision_ms);
  row("LLM prefill", r.model.prefill_ms);
  row("Decode latency per token", r.model.decode_per_token_ms);
  StageAggregate first =
      r.aggregate([](const CycleRecord& c) { return c.first_chunk_latency_ms; });
  row("First action chunk (p50)", first.p50);
  row("First action chunk (max)", first.max);
  StageAggregate chunk = r.aggregate([](const CycleRecord& c) {
    return *std::max_element(c.chunk_decode_ms, c.chunk_decode_ms + kChunksPerAction);
  });
  row("Action chunk decode (max)", chunk.max);
  out << "Cycles: " << r.cycles.size() << "  reasoning: " << r.reasoning_cycles
      << "  idle gaps: " << r.idle_gaps << "  late chunks: " << r.late_chunks
      << "\n";
  return out.str();
}

/// Re-prices a nominal 20-token non-reasoning action under two latency
/// models and returns baseline/optimized as the speedup ratio.
inline double what_if_speedup(const LatencyModel& baseline,
                              const LatencyModel& optimized,
                              int action_tokens = 20) {
  auto total = [&](const LatencyModel& m) {
    return m.stage_sum_ms() + action_tokens * m.decode_per_token_ms;
  };
  return total(baseline) / total(optimized);
}

}  // namespace agentrt
