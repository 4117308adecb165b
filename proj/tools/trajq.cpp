// Copyright 2026 The trajq Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// trajq command-line entry point.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
// TRAJQ_LOG selects the log level (trace, debug, info, warn, error, off).

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/cfg/helpers.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "trajq/checkpoint.hpp"
#include "trajq/conllu.hpp"
#include "trajq/dep_reorder.hpp"
#include "trajq/encoder.hpp"
#include "trajq/game.hpp"
#include "trajq/replay.hpp"
#include "trajq/run_config.hpp"
#include "trajq/trainer.hpp"

namespace fs = std::filesystem;

namespace {

// Errors that map to exit status 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("trajq");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");
  spdlog::set_level(spdlog::level::info);
  if (const char* lvl = std::getenv("TRAJQ_LOG")) spdlog::cfg::helpers::load_levels(lvl);
}

trajq::GameSpec load_game_or_usage(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("game file not found: " + path);
  return trajq::load_game_file(path);
}

std::shared_ptr<const trajq::ParseIndex> load_parses(const std::string& path) {
  if (path.empty()) return nullptr;
  if (!fs::exists(path)) throw UsageError("parse file not found: " + path);
  return std::make_shared<const trajq::ParseIndex>(trajq::read_conllu_file(path));
}

// Writes `text` to `path` through a temporary file and a rename.
void write_atomic(const std::string& path, const std::string& text) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << text;
    if (!out) throw std::runtime_error("short write to " + tmp);
  }
  fs::rename(tmp, path);
}

struct InputOptions {
  std::string game;
  std::string parses;
  std::size_t reorder_n = 0;
};

trajq::StateBuilder make_builder(const trajq::GameSpec& spec, const InputOptions& in,
                                 const trajq::EncoderConfig& enc, std::size_t max_sentences) {
  trajq::ReorderOptions ro;
  ro.n = in.reorder_n ? in.reorder_n : enc.max_kernel();
  return trajq::StateBuilder(spec, max_sentences, enc.token_cap, load_parses(in.parses), ro);
}

// ---- train ---------------------------------------------------------------

int cmd_train(const std::string& config, std::optional<std::uint64_t> seed,
              std::optional<std::string> output, const std::vector<std::string>& sets) {
  std::vector<std::string> overrides = sets;
  if (seed) overrides.push_back("seed=" + std::to_string(*seed));
  if (output) overrides.push_back("output_dir=" + nlohmann::json(*output).dump());
  if (!fs::exists(config)) throw UsageError("config file not found: " + config);
  trajq::RunConfig rc = trajq::load_run_config(config, overrides);
  auto spec = load_game_or_usage(rc.game);
  InputOptions in{rc.game, rc.reorder ? rc.parses : std::string(), rc.reorder_n};
  auto builder = make_builder(spec, in, rc.encoder, rc.train.max_sentences);

  fs::create_directories(rc.output_dir);
  builder.vocab().save((fs::path(rc.output_dir) / "vocab.txt").string());
  const std::string metrics_path = (fs::path(rc.output_dir) / "metrics.jsonl").string();
  std::ofstream metrics(metrics_path + ".tmp", std::ios::trunc);
  if (!metrics) throw UsageError("output directory not writable: " + rc.output_dir);

  spdlog::info("training on {} for {} steps (seed {}, sampler {}, pooling {}, positions {})",
               rc.game, rc.train.total_steps, rc.seed, trajq::sampler_name(rc.train.sampler),
               trajq::pool_name(rc.encoder.pooling), rc.encoder.position_embeddings);
  trajq::TrainHooks hooks;
  hooks.metrics = &metrics;
  hooks.checkpoint_dir = rc.output_dir;
  hooks.on_eval = [](const trajq::EvalPoint& p, trajq::Network&) {
    spdlog::info("step {} episode {} eval mean {:.3f}", p.step, p.episode, p.report.mean_score);
    return true;
  };
  auto summary = trajq::run_training(spec, rc.train, rc.encoder, rc.shaping, builder, hooks);
  metrics.close();
  fs::rename(metrics_path + ".tmp", metrics_path);
  spdlog::info("done: {} steps, {} episodes, repeat-bad rate {:.4f}", summary.steps,
               summary.episodes, summary.repeat_bad_rate());
  return 0;
}

// ---- eval ----------------------------------------------------------------

int cmd_eval(const std::string& ckpt_path, const InputOptions& in, std::size_t episodes,
             double epsilon, std::uint64_t seed, std::size_t cap, std::size_t max_sentences) {
  auto spec = load_game_or_usage(in.game);
  auto ck = trajq::load_checkpoint(ckpt_path);
  auto net = trajq::network_from_checkpoint(ck);
  auto builder = make_builder(spec, in, net.config(), max_sentences);
  auto rep = trajq::evaluate(net, spec, builder, episodes, epsilon, seed, cap);
  nlohmann::json out = trajq::to_json(rep);
  out["episodes"] = episodes;
  out["epsilon"] = epsilon;
  out["checkpoint_step"] = ck.global_step;
  std::cout << out.dump() << '\n';
  return 0;
}

// ---- play ----------------------------------------------------------------

std::string score_suffix(const trajq::EpisodeHandle& h) {
  std::ostringstream os;
  os << " (Score: " << h.score() << ", Moves: " << h.moves() << ")";
  return os.str();
}

int cmd_play(const std::string& game, std::uint64_t seed) {
  auto spec = load_game_or_usage(game);
  auto [handle, master] = trajq::reset(spec, seed);
  std::cout << master << score_suffix(handle) << '\n';
  std::string line;
  while (!handle.terminated() && std::cout << "> " << std::flush && std::getline(std::cin, line)) {
    auto text = trajq::to_lower(line);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    if (text == "quit") break;
    if (text.empty()) continue;
    std::optional<std::size_t> action;
    for (std::size_t i = 0; i < spec.actions.size(); ++i)
      if (trajq::to_lower(spec.actions[i]) == text) action = i;
    if (!action) {
      std::cout << "Unknown action. Available actions:\n";
      for (const auto& a : spec.actions) std::cout << "  " << a << '\n';
      continue;
    }
    auto r = handle.step(*action);
    std::cout << r.master << score_suffix(handle) << '\n';
  }
  return 0;
}

// ---- reorder -------------------------------------------------------------

int cmd_reorder(const std::string& conllu, std::size_t n, const std::string& pad,
                const std::string& out_path) {
  if (!fs::exists(conllu)) throw UsageError("CoNLL-U file not found: " + conllu);
  if (n < 1) throw UsageError("--n must be >= 1");
  std::string text;
  for (const auto& s : trajq::read_conllu_file(conllu)) {
    auto blocks = trajq::blocks_from_tree(s.tree);
    auto tokens = blocks.empty() ? s.tree.tokens : trajq::reorder_with_padding(blocks, pad, n);
    text += trajq::join_tokens(tokens) + '\n';
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_atomic(out_path, text);
  }
  return 0;
}

// ---- attention -----------------------------------------------------------

int cmd_attention(const std::string& ckpt_path, const InputOptions& in, std::size_t steps,
                  std::size_t topk, std::uint64_t seed, std::size_t max_sentences,
                  const std::string& out_path) {
  auto spec = load_game_or_usage(in.game);
  auto ck = trajq::load_checkpoint(ckpt_path);
  auto net = trajq::network_from_checkpoint(ck);
  if (net.config().kind != trajq::EncoderKind::kCnn ||
      net.config().pooling != trajq::PoolMode::kMax) {
    throw std::runtime_error("attention requires a max-pooling CNN checkpoint");
  }
  auto builder = make_builder(spec, in, net.config(), max_sentences);
  if (net.vocab_size() != builder.vocab().size() || net.num_actions() != spec.action_count()) {
    throw trajq::ShapeError("checkpoint does not match the game's vocabulary or actions");
  }
  auto [handle, master] = trajq::reset(spec, seed);
  builder.reset(master);
  std::string text;
  const auto& head = net.head_weights().value.data;
  const std::size_t width = net.state_width();
  for (std::size_t step = 0; step < steps && !handle.terminated(); ++step) {
    auto ids = builder.ids();
    auto enc = net.encode(*ids);
    auto q = net.q_values(enc.state);
    std::size_t a = trajq::argmax_lowest<float>(q);
    std::span<const float> row(head.data() + a * width, width);
    auto spans = trajq::attention_topk<float>(enc.trace, row, topk);
    nlohmann::json rec;
    rec["step"] = step;
    rec["action"] = spec.actions[a];
    rec["spans"] = nlohmann::json::array();
    for (const auto& s : spans) {
      std::string toks;
      for (std::size_t i = s.start; i <= s.end; ++i) {
        if (i > s.start) toks += ' ';
        toks += builder.vocab().token(ids->ids[i]);
      }
      rec["spans"].push_back({{"start", s.start}, {"end", s.end}, {"tokens", toks},
                              {"weight", s.weight}});
    }
    text += rec.dump() + '\n';
    auto r = handle.step(a);
    builder.push(spec.actions[a], trajq::SentenceTag::kAction);
    builder.push(r.master, trajq::SentenceTag::kMaster);
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    write_atomic(out_path, text);
  }
  return 0;
}

// ---- inspect-replay ------------------------------------------------------

// Fills a replay memory with `steps` uniformly random actions under the run's
// shaping and dumps it as JSONL.
int cmd_inspect_replay(const std::string& config, std::size_t steps, std::uint64_t seed,
                       const std::string& out_path) {
  if (!fs::exists(config)) throw UsageError("config file not found: " + config);
  auto rc = trajq::load_run_config(config);
  auto spec = load_game_or_usage(rc.game);
  InputOptions in{rc.game, rc.reorder ? rc.parses : std::string(), rc.reorder_n};
  auto builder = make_builder(spec, in, rc.encoder, rc.train.max_sentences);
  trajq::ReplayMemory replay(std::max<std::size_t>(1, std::min(steps, rc.train.replay_capacity)),
                             rc.train.per);
  std::mt19937_64 rng(seed);
  auto [handle, master] = trajq::reset(spec, rng());
  builder.reset(master);
  auto s = builder.ids();
  trajq::RepeatTracker tracker;
  std::size_t ep = 0;
  for (std::size_t i = 0; i < steps; ++i) {
    std::size_t a = std::uniform_int_distribution<std::size_t>(0, spec.action_count() - 1)(rng);
    auto r = handle.step(a);
    auto shaped = trajq::shape_step(r.reward, a, r.master, tracker, rc.shaping);
    builder.push(spec.actions[a], trajq::SentenceTag::kAction);
    builder.push(r.master, trajq::SentenceTag::kMaster);
    auto s2 = builder.ids();
    replay.push(trajq::ReplaySample{s, a, shaped.reward, s2, r.terminal, 0.0});
    s = s2;
    if (r.terminal || ++ep >= rc.train.episode_step_cap) {
      auto next = trajq::reset(spec, rng());
      handle = std::move(next.first);
      builder.reset(next.second);
      s = builder.ids();
      tracker.reset();
      ep = 0;
    }
  }
  std::ostringstream os;
  replay.dump_jsonl(os);
  if (out_path.empty() || out_path == "-") {
    std::cout << os.str();
  } else {
    write_atomic(out_path, os.str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trajq: deep Q-learning lab for text games"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config, checkpoint, conllu, out, pad = trajq::Vocab::kPad;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::string> output;
  std::uint64_t seed = 0;
  std::size_t episodes = 10, cap = 100, steps = 100, topk = 3, n = 5, max_sentences = 21;
  double epsilon = 0.05;
  InputOptions in;

  auto* train = app.add_subcommand("train", "Train a DQN agent from a run config");
  train->add_option("--config", config, "Run config JSON")->required();
  train->add_option("--seed", train_seed, "Master seed (overrides the config)");
  train->add_option("--output", output, "Output directory (overrides the config)");
  train->add_option("--set", sets, "Dotted override, e.g. train.total_steps=20000");

  auto add_inputs = [&](CLI::App* c) {
    c->add_option("--game", in.game, "Game spec JSON")->required();
    c->add_option("--parses", in.parses, "CoNLL-U parses for master reordering");
    c->add_option("--reorder-n", in.reorder_n, "Reorder padding N (default: largest kernel)");
    c->add_option("--max-sentences", max_sentences, "Trajectory sentence bound");
  };

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  add_inputs(eval);
  eval->add_option("--episodes", episodes, "Episodes to play");
  eval->add_option("--epsilon", epsilon, "Exploration rate")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--seed", seed, "Evaluation seed");
  eval->add_option("--cap", cap, "Episode step cap");

  auto* play = app.add_subcommand("play", "Play a game interactively");
  play->add_option("--game", in.game, "Game spec JSON")->required();
  play->add_option("--seed", seed, "Game seed");

  auto* reorder = app.add_subcommand("reorder", "Reorder CoNLL-U sentences into padded blocks");
  reorder->add_option("conllu", conllu, "CoNLL-U file")->required();
  reorder->add_option("--n", n, "Largest kernel size N; N-1 pads separate blocks");
  reorder->add_option("--pad", pad, "Padding token");
  reorder->add_option("--out", out, "Output file (default stdout)");

  auto* attention = app.add_subcommand("attention", "Dump max-pool attention spans");
  attention->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  add_inputs(attention);
  attention->add_option("--steps", steps, "Greedy steps to roll out");
  attention->add_option("--topk", topk, "Spans per decision");
  attention->add_option("--seed", seed, "Game seed");
  attention->add_option("--out", out, "Output JSONL (default stdout)");

  auto* inspect = app.add_subcommand("inspect-replay", "Dump a random-policy replay memory");
  inspect->add_option("--config", config, "Run config JSON")->required();
  inspect->add_option("--steps", steps, "Environment steps");
  inspect->add_option("--seed", seed, "Seed");
  inspect->add_option("--out", out, "Output JSONL (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  setup_logging();
  try {
    if (*train) return cmd_train(config, train_seed, output, sets);
    if (*eval) return cmd_eval(checkpoint, in, episodes, epsilon, seed, cap, max_sentences);
    if (*play) return cmd_play(in.game, seed);
    if (*reorder) return cmd_reorder(conllu, n, pad, out);
    if (*attention)
      return cmd_attention(checkpoint, in, steps, topk, seed, max_sentences, out);
    if (*inspect) return cmd_inspect_replay(config, steps, seed, out);
  } catch (const UsageError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const trajq::ConfigError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const trajq::GameSpecError& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}
