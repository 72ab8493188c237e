// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Each criterion re-derives its expectations from independent
// oracles rather than from the library under test.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <thread>

#include "agentrt/agentrt.hpp"
#include "agentrt/simenv.hpp"
#include "test_util.hpp"

using namespace agentrt;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void criterion(const std::string& name, double budget_s,
               const std::function<void()>& body) {
  auto t0 = Clock::now();
  std::string error;
  try {
    body();
  } catch (const std::exception& e) {
    error = e.what();
  }
  double elapsed = std::chrono::duration<double>(Clock::now() - t0).count();
  if (budget_s > 0 && elapsed > budget_s && error.empty()) {
    error = "exceeded time budget of " + std::to_string(budget_s) + "s";
  }
  if (error.empty()) {
    std::printf("PASS  %-58s (%.2fs)\n", name.c_str(), elapsed);
  } else {
    std::printf("FAIL  %-58s (%.2fs): %s\n", name.c_str(), elapsed, error.c_str());
    ++failures;
  }
  std::fflush(stdout);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw std::runtime_error(what);
}

// --- criterion bodies ------------------------------------------------------

void grammar_round_trip() {
  std::mt19937_64 rng(1001);
  for (int i = 0; i < 10'000; ++i) {
    ActionSequence a = testutil::random_action(rng);
    std::string s = serialize_action(a);
    require(parse_action(s) == a, "parse(serialize(a)) != a");
    require(serialize_action(parse_action(s)) == s, "serialize not idempotent");
    auto tokens = tokenize_action(a);
    auto oracle = testutil::char_walk_tokens(s);
    require(tokens.size() == oracle.size(), "token count disagrees with oracle");
    for (std::size_t k = 0; k < tokens.size(); ++k) {
      require(tokens[k].text == oracle[k], "token text disagrees with oracle");
    }
    require(tokens.size() == token_count(a), "token_count formula mismatch");
  }
}

void exhaustive_key_lowering() {
  auto make = [](int mask) {
    KeyChunk c;
    if (mask & 1) c.add(*KeyToken::lookup("W"));
    if (mask & 2) c.add(*KeyToken::lookup("Shift"));
    return c;
  };
  struct View {
    int at_ms;
    bool down;
    std::string key;
    bool operator==(const View&) const = default;
  };
  auto canon = [](std::vector<View> v) {
    std::stable_sort(v.begin(), v.end(), [](const View& a, const View& b) {
      if (a.at_ms != b.at_ms) return a.at_ms < b.at_ms;
      if (a.down != b.down) return !a.down;
      return a.key < b.key;
    });
    return v;
  };
  long cases = 0;
  for (int tail = 0; tail < 4; ++tail) {
    for (int code = 0; code < 4096; ++code) {  // 4^6 full chunk sequences
      ActionSequence a;
      int c = code;
      for (auto& chunk : a.chunks) {
        chunk = make(c & 3);
        c >>= 2;
      }
      std::vector<View> got;
      for (const TimedEvent& e : lower_action(a, make(tail)).events) {
        if (e.kind == EventKind::KeyDown || e.kind == EventKind::KeyUp) {
          got.push_back({e.at_ms, e.kind == EventKind::KeyDown,
                         std::string(e.key->name())});
        }
      }
      std::vector<View> want;
      for (const auto& e : testutil::oracle_key_events(
               {a.chunks.begin(), a.chunks.end()}, make(tail))) {
        want.push_back({e.at_ms, e.down, e.key});
      }
      require(canon(got) == canon(want), "lowering disagrees with oracle");
      ++cases;
    }
  }
  require(cases == 4 * 4096, "sweep incomplete");
}

void motion_exactness() {
  std::mt19937_64 rng(1003);
  for (int i = 0; i < 10'000; ++i) {
    ActionSequence a = testutil::random_action(rng);
    int dx = 0, dy = 0, dz = 0;
    for (const TimedEvent& e : lower_action(a).events) {
      dx += e.dx;
      dy += e.dy;
      dz += e.dz;
      require(e.at_ms >= 0 && e.at_ms < 200, "event outside the cycle window");
    }
    require(dx == a.mouse.dx && dy == a.mouse.dy && dz == a.mouse.dz,
            "motion sums drifted");
  }
}

void context_window_semantics() {
  auto act = [](int dx) {
    ModelTurn t;
    t.action.mouse.dx = dx;
    return t;
  };
  auto think = [](const std::string& r) {
    ModelTurn t;
    t.mode = TurnMode::Thinking;
    t.reasoning = r;
    return t;
  };

  // Golden replay at capacity 2: push f1 f2, push f3 evicts f1, flush on f4
  // leaves only f4, then re-accumulate.
  ContextWindow golden("sys", 2);
  require(golden.push_step("f1", act(1)).empty(), "premature eviction");
  require(golden.push_step("f2", act(2)).empty(), "premature eviction");
  auto ev = golden.push_step("f3", act(3));
  require(ev.size() == 1 && ev[0].frame == "f1", "FIFO evicted wrong entry");
  golden.flush_on_reasoning("f4", think("regroup"));
  require(golden.entries().size() == 1 && golden.entries()[0].frame == "f4",
          "flush did not keep the triggering frame");
  require(golden.latest_reasoning() == "regroup", "stale reasoning");
  golden.push_step("f5", act(5));
  require(golden.entries().size() == 2, "post-flush accumulation broken");

  // Property suite: 100,000 operations across randomized windows.
  std::mt19937_64 rng(1004);
  long ops_done = 0;
  while (ops_done < 100'000) {
    int capacity = 1 + static_cast<int>(rng() % 20);
    ContextWindow ctx("sys", capacity, "", 64);
    int pushes_since = 0;
    for (int op = 0; op < 500; ++op, ++ops_done) {
      std::string frame = "f" + std::to_string(ops_done);
      if (rng() % 10 == 0) {
        CachePlan plan = ctx.flush_on_reasoning(frame, think("r"));
        for (const TokenSpan& s : plan.dropped_spans) {
          require(!plan.sink_anchor.overlaps(s), "flush dropped the sink");
        }
        require(ctx.entries().size() == 1, "flush kept extra entries");
        pushes_since = 0;
      } else {
        auto evicted = ctx.push_step(frame, act(op));
        require(evicted.size() <= 1, "multi-eviction on a single push");
        ++pushes_since;
        CachePlan plan = ctx.plan_cache(evicted);
        for (const TokenSpan& s : plan.dropped_spans) {
          require(!plan.sink_anchor.overlaps(s), "eviction dropped the sink");
        }
      }
      require(static_cast<int>(ctx.entries().size()) <= capacity,
              "capacity exceeded");
      require(ctx.steps_since_reasoning() == pushes_since, "step counter wrong");
      require(ctx.force_think_check() == (pushes_since > 100),
              "force-think threshold wrong");
    }
    require(ctx.pushed_count() ==
                ctx.evicted_count() + ctx.entries().size() + ctx.flushed_count(),
            "entry conservation violated");
  }
}

void speculative_decode() {
  // Identity check straight from the timing table: a full 4-key chunk is 5
  // tokens and 4 forward steps.
  DecodeResult full =
      simulate_decode(tokenize_action(parse_action("0 0 0 ; W A S D ; ; ; ; ;")), 3.1);
  require(full.chunks[1].tokens == 5 && full.chunks[1].forward_steps == 4,
          "4-key chunk identity broken");

  std::mt19937_64 rng(1005);
  for (int i = 0; i < 2000; ++i) {
    auto target = tokenize_action(testutil::random_action(rng));
    DecodeResult r = simulate_decode(target, 3.1);
    require(r.emitted == target, "emitted stream diverged from target");
    require(r.forward_steps ==
                static_cast<int>(target.size()) - r.accepted_drafts,
            "step accounting broken");
  }

  // Skewed-small-chunk corpus must save over a quarter of the steps.
  std::vector<ActionSequence> corpus;
  std::discrete_distribution<int> nkeys({25, 45, 25, 4, 1});
  std::uniform_int_distribution<int> delta(-200, 200);
  std::uniform_int_distribution<int> key_index(0, 57);
  for (int i = 0; i < 1000; ++i) {
    ActionSequence a;
    a.mouse = {delta(rng), delta(rng), 0};
    for (auto& chunk : a.chunks) {
      int n = nkeys(rng);
      while (static_cast<int>(chunk.size()) < n) {
        auto key = KeyToken::lookup(kKeyAlphabet[static_cast<std::size_t>(key_index(rng))]);
        if (!chunk.contains(*key)) chunk.add(*key);
      }
    }
    corpus.push_back(a);
  }
  CorpusStats stats = corpus_stats(corpus);
  require(stats.savings_ratio < 0.75,
          "savings ratio " + std::to_string(stats.savings_ratio) + " >= 0.75");
}

void wire_soak() {
  const int kCycles = 10'000;
  WireServer server(0);
  std::thread server_thread([&] {
    server.accept_client();
    std::mt19937_64 rng(1006);
    for (int i = 0; i < kCycles; ++i) {
      InferenceRequest req = server.read_request();
      ModelTurn turn;
      turn.action = testutil::random_action(rng);
      if (i % 40 == 0) {
        turn.mode = TurnMode::Thinking;
        turn.reasoning = "soak checkpoint " + std::to_string(i);
      }
      server.send_turn(req.seq, turn);
    }
  });

  Session session = Session::open("127.0.0.1", server.port());
  SimEnv env(1006);
  std::vector<std::vector<std::uint8_t>> frames;
  for (std::uint64_t s = 0; s < 8; ++s) frames.push_back(env.frame_jpeg(s));

  std::mt19937_64 rng(1006);  // mirrors the server's action stream
  for (int i = 0; i < kCycles; ++i) {
    ObservationFrame frame{static_cast<std::uint64_t>(i + 1), 0,
                           frames[static_cast<std::size_t>(i) % frames.size()]};
    session.send_request(frame);
    TurnResult result = session.receive_turn(frame.seq);
    ActionSequence expected = testutil::random_action(rng);
    require(result.action_text == serialize_action(expected),
            "reassembled action diverged at cycle " + std::to_string(i));
    require(parse_action(result.action_text) == expected,
            "reassembled action does not parse back");
    require(result.chunks.back().terminal, "missing terminal chunk");
    require((i % 40 == 0) == result.reasoning.has_value(),
            "reasoning presence wrong");
  }
  require(session.connect_count() == 1, "session reconnected mid-soak");
  server_thread.join();
}

void latency_budget() {
  LatencyModel lat;
  lat.first_chunk_forward_steps = 4.7;
  auto frame = [](std::uint64_t seq) { return "f" + std::to_string(seq); };
  CycleReport r = run_closed_loop(frame, MockPolicy::seeded(1007, 10), lat, 500, false);

  double expected_first = lat.stage_sum_ms() + 4.7 * lat.decode_per_token_ms;
  for (const CycleRecord& c : r.cycles) {
    if (c.thinking) {
      require(c.first_chunk_latency_ms > kCycleBudgetMs,
              "thinking cycle finished inside the budget");
      require(c.idle_gap_ms > 0, "thinking cycle left no idle gap");
    } else {
      require(std::abs(c.first_chunk_latency_ms - expected_first) < 1e-9,
              "first-chunk latency is not the exact stage sum");
      require(std::abs(c.first_chunk_latency_ms - 113.9) / 113.9 < 0.10,
              "first-chunk latency outside 10% of the 113.9 ms reference");
    }
    double worst = *std::max_element(c.chunk_decode_ms,
                                     c.chunk_decode_ms + kChunksPerAction);
    require(worst <= 4 * lat.decode_per_token_ms + 1e-9,
            "a chunk took more than 4 forward steps");
    require(worst < kChunkSlotMs, "chunk decode spilled past its slot");
  }
  require(r.late_chunks == 0, "late chunks under the default budget");
  require(r.idle_gaps == r.reasoning_cycles,
          "idle gaps != reasoning cycles");
  require(r.reasoning_cycles == 50, "thinking schedule drifted");
}

void pipeline_recovery() {
  // Alignment: exact offset recovery across the sweep.
  for (std::int64_t offset_ms = -3000; offset_ms <= 3000; offset_ms += 250) {
    VideoIndex video{offset_ms * 1000, kFrameIntervalUs, 100};
    RawInputLog log;
    log.rel_polls.push_back({0, 1, 0, 0});
    AlignResult r = align_streams(video, log);
    require(r.offset_ms == offset_ms, "offset not recovered exactly");
    require(!r.warning, "spurious alignment warning");
  }

  // Reconstruction inverts lowering for 1000 random actions.
  std::mt19937_64 rng(1008);
  for (int i = 0; i < 1000; ++i) {
    ActionSequence a = testutil::random_action(rng);
    std::vector<KeyEvent> events;
    for (const TimedEvent& e : lower_action(a).events) {
      if (e.kind == EventKind::KeyDown || e.kind == EventKind::KeyUp) {
        events.push_back({e.at_ms * 1000, std::string(e.key->name()),
                          e.kind == EventKind::KeyDown});
      }
    }
    VideoIndex video{0, kFrameIntervalUs, 1};
    auto frames = reconstruct_keyboard(events, video);
    for (std::size_t b = 0; b < kChunksPerAction; ++b) {
      require(frames[0][b] == a.chunks[b], "reconstruction lost a chunk");
    }
  }

  // Per-scene mouse oracle.
  RawInputLog log;
  std::int64_t oracle_dx = 0, oracle_dy = 0;
  for (int i = 0; i < 100; ++i) {
    int dx = static_cast<int>(rng() % 21) - 10;
    int dy = static_cast<int>(rng() % 21) - 10;
    log.rel_polls.push_back({i * 1500, dx, dy, 0});
    if (i * 1500 < 150'000) {
      oracle_dx += dx;
      oracle_dy += dy;
    }
  }
  log.abs_positions = {{0, 400, 300}, {140'000, 460, 280}};
  RawMouse over = mouse_per_frame(log, Scene::Overworld, 0, 150'000);
  require(over.dx == oracle_dx && over.dy == oracle_dy,
          "overworld sum disagrees with oracle");
  RawMouse gui = mouse_per_frame(log, Scene::Gui, 0, 150'000);
  require(gui.dx == 60 && gui.dy == -20, "GUI absolute diff wrong");

  // Idle retention: a 1000-frame idle run keeps exactly 50 frames (5%).
  std::vector<FrameActionPair> idle(1000);
  auto kept = filter_idle(idle);
  require(kept.size() == 50, "idle keep rate is not 5%");

  // Reasoning trajectories: at most 20 steps, cut at the next reasoning.
  std::vector<FrameActionPair> run(60);
  Annotations ann;
  ann.reasoning_points = {{0, "a"}, {8, "b"}, {45, "c"}};
  auto samples = assemble_samples(run, ann, SampleKind::Reasoning, true);
  require(samples.size() == 3, "trajectory count wrong");
  require(samples[0].steps.size() == 8, "trajectory not cut by next reasoning");
  require(samples[1].steps.size() == 20, "trajectory not capped at 20");
  require(samples[2].steps.size() == 15, "tail trajectory wrong");
  for (const auto& s : samples) {
    require(s.steps.size() <= kHistorySampleSteps, "trajectory too long");
  }
}

}  // namespace

int main() {
  criterion("grammar: 10,000-action round trip + token oracle", 5.0,
            grammar_round_trip);
  criterion("executor: exhaustive 2-key chunk sweep vs oracle", 10.0,
            exhaustive_key_lowering);
  criterion("executor: 10,000-action motion exactness", 0, motion_exactness);
  criterion("context: golden replay + 100,000-op property suite", 0,
            context_window_semantics);
  criterion("decode: emitted==target, 5-token/4-step, savings < 0.75", 0,
            speculative_decode);
  criterion("wire: 10,000-cycle loopback soak, zero reconnects", 60.0,
            wire_soak);
  criterion("latency: stage-sum first chunk, slot fit, idle gaps", 0,
            latency_budget);
  criterion("pipeline: alignment, reconstruction, mouse, idle, reasoning", 0,
            pipeline_recovery);
  if (failures == 0) {
    std::printf("ALL CRITERIA PASSED\n");
  } else {
    std::printf("%d CRITERIA FAILED\n", failures);
  }
  return failures == 0 ? 0 : 1;
}
