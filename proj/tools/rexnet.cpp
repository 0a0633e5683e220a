// rexnet: train, explain, evaluate and serve relatable vocal emotion explanations.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "rexnet/bundle.hpp"
#include "rexnet/error.hpp"
#include "rexnet/pipeline.hpp"
#include "rexnet/serve.hpp"

namespace fs = std::filesystem;
using namespace rexnet;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

struct TrainArgs {
  std::string config_file;
  std::string data_dir;
  std::string out = "checkpoints";
  std::uint64_t seed = 7;
  int per_class = 32;
  bool synthetic = false;
  bool skip_gan = false;
};

struct ExplainArgs {
  std::string checkpoints = "checkpoints";
  std::vector<std::string> clips;
  bool test_split = false;
  std::string contrasts = "all";
  std::string out = "bundles";
};

struct EvaluateArgs {
  std::string checkpoints = "checkpoints";
  double k_fraction = 0.2;
  std::string out;
};

struct ServeArgs {
  std::string dir = "bundles";
  std::string host = "127.0.0.1";
  int port = 8080;
};

pipeline::Prepared prepare_from(const pipeline::Loaded& loaded) {
  return pipeline::prepare(pipeline::load_corpus(loaded.config), &loaded.models.norm);
}

int cmd_train(const TrainArgs& a, const CLI::App& sub) {
  pipeline::Config cfg;
  if (!a.config_file.empty()) cfg = pipeline::Config::from_json(read_json_file(a.config_file));
  if (sub.count("--data")) cfg.data_dir = a.data_dir;
  if (sub.count("--synthetic")) cfg.synthetic = true;
  if (sub.count("--per-class")) cfg.synth_per_class = a.per_class;
  if (sub.count("--skip-gan")) cfg.skip_gan = true;
  if (sub.count("--seed")) cfg.reseed(a.seed);

  const auto data = pipeline::prepare(pipeline::load_corpus(cfg));
  spdlog::info("{} clips: {} train, {} test", data.corpus.clips.size(), data.train.size(),
               data.test.size());
  auto result = pipeline::train(cfg, data, [](const std::string& stage, const json& rec) {
    spdlog::info("{} {}", stage, rec.dump());
  });
  const fs::path dir = a.out;
  pipeline::save_checkpoints(result.models, cfg, dir);
  write_text(dir / "trace.json", result.trace.dump(2) + "\n");
  write_text(dir / "config.json", cfg.to_json().dump(2) + "\n");
  std::cout << "wrote " << pipeline::kBaseFile << ", " << pipeline::kHeadsFile;
  if (result.models.gan) std::cout << ", " << pipeline::kGanFile;
  std::cout << " and trace.json to " << dir.string() << "\n";
  return 0;
}

int cmd_explain(const ExplainArgs& a) {
  const auto loaded = pipeline::load_checkpoints(a.checkpoints);
  const auto data = prepare_from(loaded);
  std::vector<std::size_t> clips;
  if (a.test_split) clips = data.test;
  for (const auto& id : a.clips) {
    if (const auto* c = data.corpus.find(id); c == nullptr) {
      std::string valid;
      for (const auto& clip : data.corpus.clips) valid += "\n  " + clip.meta.clip_id;
      throw Error("unknown clip '" + id + "'; valid ids:" + valid);
    }
    clips.push_back(data.corpus.index_of(id));
  }
  if (clips.empty()) throw Error("nothing to explain: pass --clip <id> or --test-split");
  for (std::size_t i : clips) {
    const auto ex = pipeline::explain(loaded.models, data, i, loaded.config.tau);
    const auto contrasts = bundle::parse_contrasts(a.contrasts, ex.heads.initial);
    const auto b = bundle::write_bundle(ex, data, contrasts, a.out);
    std::cout << b.clip_id << ": predicted " << b.initial_prediction << " (final " << b.final_prediction
              << "), " << b.contrasts.size() << " contrasts\n";
  }
  std::cout << "bundles in " << a.out << "\n";
  return 0;
}

int cmd_evaluate(const EvaluateArgs& a, const CLI::App& sub) {
  const auto loaded = pipeline::load_checkpoints(a.checkpoints);
  const auto data = prepare_from(loaded);
  const double k = sub.count("--k-fraction") ? a.k_fraction : loaded.config.k_fraction;
  if (!(k >= 0.0 && k < 1.0)) throw Error("--k-fraction must lie in [0, 1)");
  const auto report = pipeline::evaluate(loaded.models, loaded.config, data, k);
  const fs::path out = a.out.empty() ? fs::path(a.checkpoints) : fs::path(a.out);
  fs::create_directories(out);
  write_text(out / "metrics.json", report.to_json().dump(2) + "\n");
  const std::string table = report.to_table();
  write_text(out / "metrics.txt", table);
  std::cout << table;
  return 0;
}

int cmd_serve(const ServeArgs& a) {
  auto server = serve::make_server(a.dir);
  serve::run(*server, a.host, a.port);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rexnet: relatable explanations for vocal emotion recognition"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train all models and write checkpoints");
  train_cmd->add_option("--config", train.config_file, "JSON config; flags override its values");
  train_cmd->add_option("--data", train.data_dir, "RAVDESS root directory");
  train_cmd->add_flag("--synthetic", train.synthetic, "Use the generated corpus");
  train_cmd->add_option("--per-class", train.per_class, "Generated clips per emotion");
  train_cmd->add_option("--seed", train.seed, "Seed for every stage");
  train_cmd->add_flag("--skip-gan", train.skip_gan, "Do not train the counterfactual generator");
  train_cmd->add_option("--out", train.out, "Checkpoint directory");

  ExplainArgs explain;
  auto* explain_cmd = app.add_subcommand("explain", "Write explanation bundles for clips");
  explain_cmd->add_option("--checkpoints", explain.checkpoints, "Checkpoint directory");
  explain_cmd->add_option("--clip", explain.clips, "Clip id (repeatable)");
  explain_cmd->add_flag("--test-split", explain.test_split, "Explain every test clip");
  explain_cmd->add_option("--contrasts", explain.contrasts, "Comma-separated emotions or 'all'");
  explain_cmd->add_option("--out", explain.out, "Bundle directory");

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compute the metrics report");
  evaluate_cmd->add_option("--checkpoints", evaluate.checkpoints, "Checkpoint directory");
  evaluate_cmd->add_option("--k-fraction", evaluate.k_fraction, "Fraction of bins ablated");
  evaluate_cmd->add_option("--out", evaluate.out, "Report directory (default: checkpoints)");

  ServeArgs serve_args;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a bundle directory over HTTP");
  serve_cmd->add_option("--dir", serve_args.dir, "Bundle directory");
  serve_cmd->add_option("--host", serve_args.host, "Listen address");
  serve_cmd->add_option("--port", serve_args.port, "Listen port");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));
  spdlog::set_pattern("[%l] %v");

  try {
    if (*train_cmd) return cmd_train(train, *train_cmd);
    if (*explain_cmd) return cmd_explain(explain);
    if (*evaluate_cmd) return cmd_evaluate(evaluate, *evaluate_cmd);
    if (*serve_cmd) return cmd_serve(serve_args);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "fatal: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
