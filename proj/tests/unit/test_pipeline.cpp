#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "rexnet/bundle.hpp"
#include "rexnet/error.hpp"
#include "rexnet/pipeline.hpp"
#include "rexnet/serve.hpp"

namespace fs = std::filesystem;
using namespace rexnet;
using namespace rexnet::pipeline;
using nlohmann::json;

namespace {

Config tiny_config() {
  Config c;
  c.synthetic = true;
  c.synth_per_class = 4;
  c.base.epochs = 1;
  c.speaker.epochs = 1;
  c.gan.epochs = 1;
  c.gan.clips_per_epoch = 8;
  c.gan.eval_clips = 4;
  c.joint.epochs = 1;
  c.reseed(3);
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rexnet_test_pipeline_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Fixture {
  Config config = tiny_config();
  Prepared data = prepare(load_corpus(config));
  TrainOutput trained = train(config, data);
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

}  // namespace

TEST_CASE("config JSON round trip, overrides and validation") {
  Config c = tiny_config();
  c.tau = 0.4;
  c.k_sweep = {0.3};
  const json j = c.to_json();
  const Config back = Config::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.joint.seed == 34);

  const Config partial = Config::from_json(json{{"seed", 5}, {"stargan", {{"epochs", 2}}}});
  CHECK(partial.seed == 5);
  CHECK(partial.base.seed == 51);
  CHECK(partial.gan.epochs == 2);
  CHECK(partial.gan.clips_per_epoch == Config{}.gan.clips_per_epoch);

  CHECK_THROWS_AS(Config::from_json(json{{"sed", 5}}), Error);
  CHECK_THROWS_AS(Config::from_json(json{{"joint", {{"epoch", 2}}}}), Error);
  CHECK_THROWS_AS(Config::from_json(json{{"tau", 1.5}}), Error);
  CHECK_THROWS_AS(Config::from_json(json{{"k_fraction", -0.1}}), Error);
  CHECK_THROWS_AS(load_corpus(Config{}), Error);
}

TEST_CASE("training is reproducible and checkpoints restore every model") {
  auto& f = fixture();
  CHECK(f.trained.trace.contains("base"));
  CHECK(f.trained.trace.contains("stargan"));
  CHECK(f.trained.trace.at("joint").size() == 1);
  const auto again = train(f.config, f.data);
  CHECK(again.trace.dump() == f.trained.trace.dump());

  const fs::path dir = scratch("ckpt");
  save_checkpoints(f.trained.models, f.config, dir);
  for (const char* name : {kBaseFile, kHeadsFile, kGanFile}) CHECK(fs::exists(dir / name));
  const auto loaded = load_checkpoints(dir);
  CHECK(loaded.config.to_json() == f.config.to_json());
  REQUIRE(loaded.models.gan.has_value());
  for (std::size_t i : f.data.test) {
    CHECK(nn::predict(loaded.models.initial, f.data.inputs[i]) == nn::predict(f.trained.models.initial, f.data.inputs[i]));
    CHECK(nn::predict(loaded.models.speaker, f.data.inputs[i]) == nn::predict(f.trained.models.speaker, f.data.inputs[i]));
  }
  const auto a = explain(f.trained.models, f.data, f.data.test[0], f.config.tau);
  const auto b = explain(loaded.models, f.data, f.data.test[0], f.config.tau);
  CHECK(a.heads.final_probs == b.heads.final_probs);
  CHECK(a.contrasts[0].heads.bit_probs == b.contrasts[0].heads.bit_probs);

  const fs::path tmp = scratch("ckpt_again");
  save_checkpoints(f.trained.models, f.config, tmp);
  for (const char* name : {kBaseFile, kHeadsFile, kGanFile}) CHECK(slurp(dir / name) == slurp(tmp / name));
  CHECK_THROWS_AS(load_checkpoints(scratch("empty")), Error);
}

TEST_CASE("skip_gan trains without a generator and explains from samples") {
  Config c = tiny_config();
  c.skip_gan = true;
  const auto data = prepare(load_corpus(c));
  auto out = train(c, data);
  CHECK_FALSE(out.models.gan.has_value());
  CHECK_FALSE(out.trace.contains("stargan"));
  const fs::path dir = scratch("nogan");
  std::ofstream(dir / kGanFile) << "stale";
  save_checkpoints(out.models, c, dir);
  CHECK_FALSE(fs::exists(dir / kGanFile));
  const auto loaded = load_checkpoints(dir);
  CHECK_FALSE(loaded.models.gan.has_value());
  const auto ex = explain(loaded.models, data, data.test[0], c.tau);
  for (const auto& d : ex.contrasts) CHECK_FALSE(d.synthetic.has_value());
}

TEST_CASE("explain covers every other emotion with frame-aligned bars") {
  auto& f = fixture();
  const std::size_t clip = f.data.test[1];
  const auto ex = explain(f.trained.models, f.data, clip, f.config.tau);
  CHECK(ex.clip == clip);
  REQUIRE(ex.contrasts.size() == 7u);
  CHECK(ex.words.size() == static_cast<std::size_t>(f.data.corpus.clips[clip].meta.word_count));
  CHECK(ex.total_bar.per_frame.size() == static_cast<std::size_t>(dsp::kFrames));
  for (const auto& d : ex.contrasts) {
    CHECK(d.contrast != ex.heads.initial);
    CHECK(d.bar.per_frame.size() == static_cast<std::size_t>(dsp::kFrames));
    CHECK(d.synthetic.has_value());
    if (d.sample) {
      CHECK(f.data.speaker[*d.sample] == f.data.speaker[clip]);
      CHECK(f.data.emotion[*d.sample] == d.contrast);
    } else {
      CHECK_FALSE(d.unavailable_reason.empty());
    }
  }
  CHECK_THROWS(explain(f.trained.models, f.data, f.data.corpus.clips.size(), f.config.tau));
}

TEST_CASE("contrast selection") {
  CHECK(bundle::parse_contrasts("all", 2).size() == 7u);
  CHECK(bundle::parse_contrasts("angry, sad", 2) == std::vector<int>{3, 4});
  CHECK_THROWS_AS(bundle::parse_contrasts("happy", 2), Error);
  CHECK_THROWS_AS(bundle::parse_contrasts("bored", 2), Error);
  CHECK_THROWS_AS(bundle::parse_contrasts("", 2), Error);
}

TEST_CASE("bundles round trip byte for byte and feed the index") {
  auto& f = fixture();
  const fs::path root = scratch("bundles");
  std::vector<std::string> ids;
  for (std::size_t k = 0; k < 2; ++k) {
    const auto ex = explain(f.trained.models, f.data, f.data.test[k], f.config.tau);
    const auto contrasts = bundle::parse_contrasts("all", ex.heads.initial);
    const auto b = bundle::write_bundle(ex, f.data, contrasts, root);
    ids.push_back(b.clip_id);
    CHECK(b.contrasts.size() == 7u);
    CHECK(b.saliency.size() == static_cast<std::size_t>(dsp::kFrames));
    CHECK(fs::exists(root / b.audio));
    for (const auto& c : b.contrasts) {
      if (c.available) CHECK(fs::exists(root / c.counterfactual_audio));
      CHECK(fs::exists(root / c.synthetic_image));
      CHECK(c.word_saliency.size() == b.words.size());
    }

    const std::string text = slurp(root / "bundles" / (b.clip_id + ".json"));
    CHECK(text == bundle::serialize(b));
    const auto parsed = bundle::ExplanationBundle::from_json(json::parse(text));
    CHECK(bundle::serialize(parsed) == text);
  }
  std::sort(ids.begin(), ids.end());

  const json index = json::parse(slurp(root / "index.json"));
  CHECK(index.at("schema_version") == bundle::kSchemaVersion);
  REQUIRE(index.at("clips").size() == 2u);
  for (std::size_t k = 0; k < 2; ++k) {
    const auto& e = index.at("clips")[k];
    CHECK(e.at("clip_id") == ids[k]);
    CHECK(e.at("bundle") == "bundles/" + ids[k] + ".json");
    CHECK(e.at("predicted").is_string());
  }

  json bad = json::parse(slurp(root / "bundles" / (ids[0] + ".json")));
  bad["schema_version"] = 2;
  CHECK_THROWS_AS(bundle::ExplanationBundle::from_json(bad), Error);
}

TEST_CASE("evaluate honors the requested ablation fraction") {
  auto& f = fixture();
  const auto report = evaluate(f.trained.models, f.config, f.data, 0.4);
  REQUIRE(!report.ablation.empty());
  CHECK(report.ablation.front().k_fraction == 0.4);
  CHECK(report.ablation.size() == f.config.k_sweep.size());
  CHECK(report.synthetic.has_value());
  CHECK(report.initial_accuracy.overall.total == f.data.test.size());
  CHECK(report.final_accuracy.overall.total == f.data.test.size());
  const json j = report.to_json();
  CHECK(j.at("ablation")[0].at("k_fraction") == 0.4);
  CHECK(j.at("relation_macro_accuracy").is_number());
}

TEST_CASE("static server returns the index, bundles and 404") {
  auto& f = fixture();
  const fs::path root = scratch("serve");
  CHECK_THROWS_AS(serve::make_server(root), Error);
  const auto ex = explain(f.trained.models, f.data, f.data.test[0], f.config.tau);
  const auto b = bundle::write_bundle(ex, f.data, bundle::parse_contrasts("all", ex.heads.initial), root);

  auto server = serve::make_server(root);
  const int port = server->bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server->listen_after_bind(); });
  server->wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto index = client.Get("/index.json");
  REQUIRE(index);
  CHECK(index->status == 200);
  CHECK(index->get_header_value("Content-Type") == "application/json");
  CHECK(json::parse(index->body).at("clips")[0].at("clip_id") == b.clip_id);

  auto bundle_res = client.Get("/bundles/" + b.clip_id + ".json");
  REQUIRE(bundle_res);
  CHECK(bundle_res->status == 200);
  CHECK(bundle_res->body == bundle::serialize(b));

  auto audio = client.Get("/" + b.audio);
  REQUIRE(audio);
  CHECK(audio->status == 200);
  CHECK(audio->get_header_value("Content-Type") == "audio/wav");

  auto missing = client.Get("/bundles/nope.json");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  auto post = client.Post("/index.json", "{}", "application/json");
  REQUIRE(post);
  CHECK(post->status != 200);

  server->stop();
  worker.join();

  auto busy = serve::make_server(root);
  httplib::Server holder;
  const int taken = holder.bind_to_any_port("127.0.0.1");
  std::thread holding([&] { holder.listen_after_bind(); });
  holder.wait_until_ready();
  CHECK_THROWS_AS(serve::run(*busy, "127.0.0.1", taken), Error);
  holder.stop();
  holding.join();
}
