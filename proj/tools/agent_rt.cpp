// agent-rt: command-line front end for the interaction runtime.
//
//   parse       validate an action or turn string and dump its structure
//   replay      lower an action to timed input events (JSONL trace)
//   loop        run the closed-loop latency harness with the mock policy
//   bench       compare two latency configs on a nominal action
//   serve-mock  run a loopback inference server backed by the mock policy
//   curate      turn a raw gameplay recording into dataset JSONL

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "agentrt/agentrt.hpp"

using namespace agentrt;

namespace {

std::string read_all(std::istream& in) {
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string slurp_or_stdin(const std::string& text) {
  if (!text.empty() && text != "-") return text;
  return read_all(std::cin);
}

int cmd_parse(const std::string& input, bool as_turn) {
  std::string text = slurp_or_stdin(input);
  try {
    nlohmann::json out;
    ActionSequence action;
    if (as_turn) {
      ModelTurn turn = parse_turn(text);
      out["mode"] = turn.thinking() ? "thinking" : "non-thinking";
      if (turn.thinking()) out["reasoning"] = turn.reasoning;
      action = turn.action;
    } else {
      action = parse_action(text);
    }
    out["action"] = serialize_action(action);
    out["mouse"] = {{"dx", action.mouse.dx},
                    {"dy", action.mouse.dy},
                    {"dz", action.mouse.dz}};
    out["chunks"] = nlohmann::json::array();
    for (const KeyChunk& c : action.chunks) {
      nlohmann::json keys = nlohmann::json::array();
      for (const KeyToken& k : c.keys()) keys.push_back(std::string(k.name()));
      out["chunks"].push_back(keys);
    }
    out["tokens"] = token_count(action);
    std::cout << out.dump(2) << "\n";
    return 0;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 1;
  }
}

int cmd_replay(const std::string& input, const std::string& tail_text) {
  try {
    ActionSequence a = parse_action(slurp_or_stdin(input));
    KeyChunk tail;
    if (!tail_text.empty()) {
      // Tail keys: space-separated names held at the end of the previous action.
      std::istringstream in(tail_text);
      std::string name;
      while (in >> name) {
        auto key = KeyToken::lookup(name);
        if (!key) {
          std::cerr << "unknown tail key: " << name << "\n";
          return 1;
        }
        tail.add(*key);
      }
    }
    std::cout << trace_to_jsonl(lower_action(a, tail));
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "replay failed: " << e.what() << "\n";
    return 1;
  }
}

MockPolicy policy_from(const std::string& script_path, std::uint64_t seed,
                       int think_every) {
  if (script_path.empty()) return MockPolicy::seeded(seed, think_every);
  std::ifstream in(script_path);
  if (!in) throw std::runtime_error("cannot open policy script: " + script_path);
  std::vector<ModelTurn> playlist;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    playlist.push_back(parse_turn(line));
  }
  if (playlist.empty()) throw std::runtime_error("policy script is empty");
  return MockPolicy::scripted(std::move(playlist));
}

int cmd_loop(int cycles, const std::string& latency_path,
             const std::string& script_path, std::uint64_t seed,
             int think_every, bool strict, const std::string& json_out) {
  try {
    LatencyModel lat =
        latency_path.empty() ? LatencyModel{} : load_latency_model(latency_path);
    MockPolicy policy = policy_from(script_path, seed, think_every);
    auto frame = [](std::uint64_t seq) { return "frame-" + std::to_string(seq); };
    CycleReport report = run_closed_loop(frame, policy, lat, cycles, strict);
    std::cout << render_report(report);
    if (!json_out.empty()) {
      std::ofstream out(json_out);
      out << report_to_json(report).dump(2) << "\n";
    }
    if (strict && report.any_deadline_violation()) {
      std::cerr << "deadline violations: " << report.late_chunks << "\n";
      return 2;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "loop failed: " << e.what() << "\n";
    return 1;
  }
}

int cmd_bench(const std::string& baseline_path, const std::string& optimized_path,
              int action_tokens) {
  try {
    LatencyModel baseline = baseline_path.empty()
                                ? LatencyModel{}
                                : load_latency_model(baseline_path);
    LatencyModel optimized = optimized_path.empty()
                                 ? LatencyModel{}
                                 : load_latency_model(optimized_path);
    double speedup = what_if_speedup(baseline, optimized, action_tokens);
    std::cout << "baseline cycle:  "
              << baseline.stage_sum_ms() +
                     action_tokens * baseline.decode_per_token_ms
              << " ms\n"
              << "optimized cycle: "
              << optimized.stage_sum_ms() +
                     action_tokens * optimized.decode_per_token_ms
              << " ms\n"
              << "speedup:         " << speedup << "x\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "bench failed: " << e.what() << "\n";
    return 1;
  }
}

int cmd_serve_mock(std::uint16_t port, std::uint64_t seed, int think_every) {
  try {
    WireServer server(port);
    std::cout << "listening on 127.0.0.1:" << server.port() << "\n";
    MockPolicy policy = MockPolicy::seeded(seed, think_every);
    server.accept_client();
    std::cout << "client connected\n";
    std::uint64_t served = 0;
    while (true) {
      InferenceRequest req;
      try {
        req = server.read_request();
      } catch (const SessionClosed&) {
        break;  // peer hung up; a persistent session ends here
      }
      server.send_turn(req.seq, policy.turn_for(req.seq, false));
      ++served;
    }
    std::cout << "served " << served << " turns\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "serve-mock failed: " << e.what() << "\n";
    return 1;
  }
}

int cmd_decode_stats(const std::string& path) {
  try {
    std::ifstream file;
    std::istream* in = &std::cin;
    if (!path.empty() && path != "-") {
      file.open(path);
      if (!file) throw std::runtime_error("cannot open " + path);
      in = &file;
    }
    std::vector<ActionSequence> corpus;
    std::string line;
    while (std::getline(*in, line)) {
      if (!line.empty()) corpus.push_back(parse_action(line));
    }
    if (corpus.empty()) throw std::runtime_error("no actions on input");
    std::cout << corpus_stats_json(corpus_stats(corpus)).dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "decode-stats failed: " << e.what() << "\n";
    return 1;
  }
}

SampleKind kind_from(const std::string& s) {
  if (s == "pretrain") return SampleKind::Pretrain;
  if (s == "instruct") return SampleKind::Instruct;
  if (s == "reasoning") return SampleKind::Reasoning;
  throw std::runtime_error("unknown sample kind: " + s);
}

/// Session directory layout:
///   input.jsonl       raw input log ({t_us, stream, payload} records)
///   video.json        {first_frame_at_us, frame_interval_us, frame_count}
///   annotations.json  optional {scenes: [frame -> "gui"|"overworld"],
///                     instruction_spans, reasoning_points}
int cmd_curate(const std::string& session_dir, const std::string& out_path,
               const std::string& kind_name, bool history, double keep_ratio,
               const std::string& config_path) {
  try {
    std::ifstream input_in(session_dir + "/input.jsonl");
    if (!input_in) throw std::runtime_error("missing " + session_dir + "/input.jsonl");
    RawInputLog log = load_input_log(input_in);

    std::ifstream video_in(session_dir + "/video.json");
    if (!video_in) throw std::runtime_error("missing " + session_dir + "/video.json");
    nlohmann::json vj;
    video_in >> vj;
    VideoIndex video;
    video.first_frame_at_us = vj.at("first_frame_at_us").get<std::int64_t>();
    video.frame_interval_us = vj.value("frame_interval_us", kFrameIntervalUs);
    video.frame_count = vj.at("frame_count").get<std::int64_t>();

    Annotations ann;
    std::vector<Scene> scenes(static_cast<std::size_t>(video.frame_count),
                              Scene::Overworld);
    std::ifstream ann_in(session_dir + "/annotations.json");
    if (ann_in) {
      nlohmann::json aj;
      ann_in >> aj;
      if (aj.contains("scenes")) {
        for (std::size_t i = 0; i < scenes.size() && i < aj["scenes"].size(); ++i) {
          scenes[i] = aj["scenes"][i] == "gui" ? Scene::Gui : Scene::Overworld;
        }
      }
      for (const auto& s : aj.value("instruction_spans", nlohmann::json::array())) {
        ann.instruction_spans.push_back({s.at("begin").get<std::size_t>(),
                                         s.at("end").get<std::size_t>(),
                                         s.at("text").get<std::string>()});
      }
      for (const auto& p : aj.value("reasoning_points", nlohmann::json::array())) {
        ann.reasoning_points.push_back({p.at("step").get<std::size_t>(),
                                        p.at("text").get<std::string>()});
      }
    }

    PipelineConfig cfg;
    if (!config_path.empty()) {
      std::ifstream cfg_in(config_path);
      if (!cfg_in) throw std::runtime_error("cannot open config: " + config_path);
      nlohmann::json cj;
      cfg_in >> cj;
      cfg = pipeline_config_from_json(cj);
    }
    if (keep_ratio > 0) cfg.keep_ratio = keep_ratio;
    Diagnostics diags;
    AlignResult aligned = align_streams(video, log, cfg, &diags);
    std::cerr << "alignment offset: " << aligned.offset_ms << " ms ("
              << aligned.events_dropped << " events, " << aligned.frames_dropped
              << " frames dropped)\n";
    scenes.resize(static_cast<std::size_t>(video.frame_count), Scene::Overworld);

    auto keyboard = reconstruct_keyboard(log.key_events, video, &diags);
    std::vector<FrameActionPair> pairs;
    for (std::int64_t f = 0; f < video.frame_count; ++f) {
      std::int64_t start = video.first_frame_at_us + f * video.frame_interval_us;
      FrameActionPair p;
      p.frame_ref = "frames/" + std::to_string(f) + ".jpg";
      p.ts_us = start;
      p.scene = scenes[static_cast<std::size_t>(f)];
      RawMouse raw = mouse_per_frame(log, p.scene, start,
                                     start + video.frame_interval_us, &diags);
      p.mouse = discretize_mouse(raw.dx, raw.dy, raw.wheel);
      p.chunks = keyboard[static_cast<std::size_t>(f)];
      pairs.push_back(std::move(p));
    }

    SampleKind kind = kind_from(kind_name);
    // Reasoning samples must keep the full timeline; indices in the
    // annotations refer to unfiltered frames.
    if (kind != SampleKind::Reasoning) pairs = filter_idle(pairs, cfg);
    auto samples = assemble_samples(pairs, ann, kind, history, &diags);

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    write_dataset_jsonl(samples, out);
    for (const std::string& msg : diags.messages) std::cerr << "warning: " << msg << "\n";
    std::cerr << "wrote " << samples.size() << " samples to " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "curate failed: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"real-time game-agent interaction runtime"};
  app.require_subcommand(1);

  std::string parse_input;
  bool parse_as_turn = false;
  auto* parse_cmd = app.add_subcommand("parse", "validate an action or turn string");
  parse_cmd->add_option("text", parse_input, "action text ('-' or empty reads stdin)");
  parse_cmd->add_flag("--turn", parse_as_turn, "parse with thought/action markers");

  std::string replay_input, replay_tail;
  auto* replay_cmd = app.add_subcommand("replay", "lower an action to timed events");
  replay_cmd->add_option("text", replay_input, "action text ('-' or empty reads stdin)");
  replay_cmd->add_option("--tail", replay_tail, "keys held from the previous action");

  int loop_cycles = 100;
  std::string loop_latency, loop_script, loop_json;
  std::uint64_t loop_seed = 0;
  int loop_think_every = 25;
  bool loop_strict = false;
  auto* loop_cmd = app.add_subcommand("loop", "run the closed-loop harness");
  loop_cmd->add_option("--cycles", loop_cycles, "number of 200 ms cycles");
  loop_cmd->add_option("--latency", loop_latency, "latency config (.json or .toml)");
  loop_cmd->add_option("--policy", loop_script, "scripted turn playlist (JSONL of turns)");
  loop_cmd->add_option("--seed", loop_seed, "seed for the random policy");
  loop_cmd->add_option("--think-every", loop_think_every,
                       "thinking-turn period for the random policy (0 = never)");
  loop_cmd->add_flag("--strict", loop_strict,
                     "fail on config overruns and deadline violations");
  loop_cmd->add_option("--json", loop_json, "also write the report as JSON");

  std::string bench_baseline, bench_optimized;
  int bench_tokens = 20;
  auto* bench_cmd = app.add_subcommand("bench", "compare two latency configs");
  bench_cmd->add_option("--baseline", bench_baseline, "baseline latency config");
  bench_cmd->add_option("--optimized", bench_optimized, "optimized latency config");
  bench_cmd->add_option("--tokens", bench_tokens, "action tokens per cycle");

  std::uint16_t serve_port = 0;
  std::uint64_t serve_seed = 0;
  int serve_think_every = 25;
  auto* serve_cmd = app.add_subcommand("serve-mock", "loopback mock inference server");
  serve_cmd->add_option("--port", serve_port, "TCP port (0 picks a free one)");
  serve_cmd->add_option("--seed", serve_seed, "mock policy seed");
  serve_cmd->add_option("--think-every", serve_think_every,
                        "thinking-turn period (0 = never)");

  std::string stats_input;
  auto* stats_cmd =
      app.add_subcommand("decode-stats", "speculative-decode stats for an action corpus");
  stats_cmd->add_option("file", stats_input,
                        "file with one action per line ('-' or empty reads stdin)");

  std::string curate_in, curate_out = "dataset.jsonl", curate_kind = "pretrain";
  std::string curate_config;
  bool curate_history = false;
  double curate_keep = 0;
  auto* curate_cmd = app.add_subcommand("curate", "build dataset JSONL from a recording");
  curate_cmd->add_option("--in", curate_in, "session directory")->required();
  curate_cmd->add_option("--out", curate_out, "output JSONL path");
  curate_cmd->add_option("--kind", curate_kind, "pretrain | instruct | reasoning");
  curate_cmd->add_flag("--history", curate_history, "emit multi-step history samples");
  curate_cmd->add_option("--config", curate_config, "pipeline thresholds (JSON)");
  curate_cmd->add_option("--keep-ratio", curate_keep,
                         "idle frame retention ratio (overrides the config)");

  CLI11_PARSE(app, argc, argv);

  if (parse_cmd->parsed()) return cmd_parse(parse_input, parse_as_turn);
  if (replay_cmd->parsed()) return cmd_replay(replay_input, replay_tail);
  if (loop_cmd->parsed()) {
    return cmd_loop(loop_cycles, loop_latency, loop_script, loop_seed,
                    loop_think_every, loop_strict, loop_json);
  }
  if (bench_cmd->parsed()) return cmd_bench(bench_baseline, bench_optimized, bench_tokens);
  if (serve_cmd->parsed()) return cmd_serve_mock(serve_port, serve_seed, serve_think_every);
  if (stats_cmd->parsed()) return cmd_decode_stats(stats_input);
  if (curate_cmd->parsed()) {
    return cmd_curate(curate_in, curate_out, curate_kind, curate_history,
                      curate_keep, curate_config);
  }
  return 0;
}
