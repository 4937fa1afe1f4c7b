// fencekit command-line interface: transform registry, preprocessing, image
// metrics, training, attacks, and the evaluation harness.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.  Every run prints
// the effective seed on stderr; --seed beats the FENCEKIT_SEED environment
// variable, which beats 0 (config files may carry their own seeds where
// documented).

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fencekit/attacks.hpp"
#include "fencekit/dataset.hpp"
#include "fencekit/harness.hpp"
#include "fencekit/image.hpp"
#include "fencekit/metrics.hpp"
#include "fencekit/model.hpp"
#include "fencekit/pipeline.hpp"
#include "json.hpp"

using namespace fencekit;
using nlohmann::json;

namespace {

std::string fmt4(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

uint64_t resolve_seed(const std::optional<uint64_t>& flag) {
  if (flag.has_value()) return *flag;
  if (const char* env = std::getenv("FENCEKIT_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
      throw std::runtime_error("FENCEKIT_SEED is not an unsigned integer: " +
                               std::string(env));
    return uint64_t(v);
  }
  return 0;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> keys,
                    const std::string& ctx) {
  if (!obj.is_object()) throw std::runtime_error(ctx + " must be a JSON object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : keys)
      if (it.key() == k) ok = true;
    if (!ok) throw std::runtime_error(ctx + ": unknown key '" + it.key() + "'");
  }
}

const char* category_name(TransformCategory c) {
  switch (c) {
    case TransformCategory::distortion: return "distortion";
    case TransformCategory::compression: return "compression";
    case TransformCategory::noise: return "noise";
  }
  return "?";
}

json default_params_json(const std::string& kind) {
  Pipeline p;
  p.stages.push_back(make_default_spec(kind));
  return json::parse(serialize_pipeline(p)).at("stages").at(0).at("params");
}

// Dataset description shared by the train and evaluate configs.
struct DataSpec {
  std::string kind = "shapes";
  int side = 32, channels = 3, num_classes = 10;
  int per_class = 50, test_per_class = 20;
  double contrast = 1.0;
  uint64_t seed = 0;
  std::string train_dir, test_dir;
};

DataSpec parse_data_spec(const json& j, uint64_t fallback_seed) {
  DataSpec d;
  d.seed = fallback_seed;
  reject_unknown(j,
                 {"kind", "side", "channels", "num_classes", "per_class", "test_per_class",
                  "contrast", "seed", "train_dir", "test_dir"},
                 "data");
  d.kind = j.value("kind", d.kind);
  if (d.kind != "shapes" && d.kind != "dir")
    throw std::runtime_error("data: kind must be 'shapes' or 'dir'");
  d.side = j.value("side", d.side);
  d.channels = j.value("channels", d.channels);
  d.num_classes = j.value("num_classes", d.num_classes);
  d.per_class = j.value("per_class", d.per_class);
  d.test_per_class = j.value("test_per_class", d.test_per_class);
  d.contrast = j.value("contrast", d.contrast);
  d.seed = j.value("seed", d.seed);
  d.train_dir = j.value("train_dir", d.train_dir);
  d.test_dir = j.value("test_dir", d.test_dir);
  if (d.kind == "dir" && d.test_dir.empty())
    throw std::runtime_error("data: kind 'dir' needs test_dir");
  return d;
}

json data_spec_json(const DataSpec& d) {
  if (d.kind == "dir")
    return json{{"kind", d.kind}, {"train_dir", d.train_dir}, {"test_dir", d.test_dir}};
  return json{{"kind", d.kind},         {"side", d.side},
              {"channels", d.channels}, {"num_classes", d.num_classes},
              {"per_class", d.per_class}, {"test_per_class", d.test_per_class},
              {"contrast", d.contrast},  {"seed", d.seed}};
}

Dataset make_split(const DataSpec& d, bool train) {
  if (d.kind == "dir") {
    const std::string& dir = train ? d.train_dir : d.test_dir;
    if (dir.empty()) throw std::runtime_error("data: missing train_dir");
    return load_dataset_dir(dir);
  }
  ShapeSetOptions opt;
  opt.side = d.side;
  opt.channels = d.channels;
  opt.num_classes = d.num_classes;
  opt.per_class = train ? d.per_class : d.test_per_class;
  opt.contrast = d.contrast;
  opt.seed = d.seed;
  opt.split = train ? "train" : "test";
  return make_shape_dataset(opt);
}

Classifier::TrainOptions parse_train_options(const json& j, uint64_t fallback_seed) {
  Classifier::TrainOptions t;
  t.seed = fallback_seed;
  reject_unknown(j, {"epochs", "lr", "momentum", "batch_size", "seed"}, "train");
  t.epochs = j.value("epochs", t.epochs);
  t.lr = j.value("lr", t.lr);
  t.momentum = j.value("momentum", t.momentum);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.seed = j.value("seed", t.seed);
  return t;
}

json train_options_json(const Classifier::TrainOptions& t) {
  return json{{"epochs", t.epochs},
              {"lr", t.lr},
              {"momentum", t.momentum},
              {"batch_size", t.batch_size},
              {"seed", t.seed}};
}

DefenseEntry parse_defense_entry(const json& j) {
  DefenseEntry e;
  json pipeline_json;
  if (j.is_object() && j.contains("pipeline")) {
    reject_unknown(j, {"name", "pipeline"}, "defense");
    e.name = j.value("name", std::string());
    pipeline_json = j.at("pipeline");
  } else {
    pipeline_json = j;  // bare pipeline object
  }
  e.pipeline = parse_pipeline(pipeline_json.dump());
  return e;
}

int cmd_describe() {
  for (const RegistryEntry& e : registry_list()) {
    std::printf("%-8s %-12s %s\n", e.kind.c_str(), category_name(e.category),
                e.description.c_str());
    std::printf("         defaults: %s\n", default_params_json(e.kind).dump().c_str());
  }
  return 0;
}

int cmd_preprocess(const std::string& pipeline_path, const std::string& in_path,
                   const std::string& out_path, uint64_t seed) {
  Pipeline p = parse_pipeline(slurp(pipeline_path));
  ImageTensor x = load_image(in_path);
  RngStream rng(seed, "preprocess");
  ImageTensor y = apply_pipeline(p, x, rng);
  save_image(y, out_path);
  std::fprintf(stderr, "pipeline: %s\n", pipeline_label(p).c_str());
  std::fprintf(stderr, "l2: %s linf: %s\n", fmt4(l2_distance(x, y)).c_str(),
               fmt4(linf_distance(x, y)).c_str());
  return 0;
}

int cmd_metrics(const std::string& a_path, const std::string& b_path) {
  ImageTensor a = load_image(a_path);
  ImageTensor b = load_image(b_path);
  std::printf("l2: %s\n", fmt4(l2_distance(a, b)).c_str());
  std::printf("linf: %s\n", fmt4(linf_distance(a, b)).c_str());
  std::printf("ssim: %s\n", fmt4(ssim(a, b)).c_str());
  std::printf("psnr: %s\n", fmt4(psnr(a, b)).c_str());
  return 0;
}

int cmd_train(const std::string& config_path, uint64_t seed) {
  json cfg = json::parse(slurp(config_path));
  reject_unknown(cfg, {"data", "init_seed", "train", "out"}, "train config");
  DataSpec data = parse_data_spec(cfg.value("data", json::object()), seed);
  uint64_t init_seed = cfg.value("init_seed", seed);
  Classifier::TrainOptions topt = parse_train_options(cfg.value("train", json::object()), seed);
  std::string out = cfg.value("out", std::string());

  json resolved{{"data", data_spec_json(data)},
                {"init_seed", init_seed},
                {"train", train_options_json(topt)},
                {"out", out}};
  std::printf("%s\n", resolved.dump(2).c_str());

  Dataset train_set = make_split(data, true);
  Dataset test_set = make_split(data, false);
  RngStream init(init_seed, "model-init");
  Classifier c(train_set.images.at(0).height, train_set.images.at(0).channels,
               train_set.num_classes, init);
  Classifier::TrainReport rep = c.train(train_set, test_set, topt);
  std::printf("final_loss: %s\n", fmt4(rep.final_loss).c_str());
  std::printf("train_accuracy: %s\n", fmt4(rep.train_accuracy).c_str());
  std::printf("test_accuracy: %s\n", fmt4(rep.test_accuracy).c_str());
  if (!out.empty()) {
    c.save(out);
    std::printf("checkpoint: %s.json / %s.bin\n", out.c_str(), out.c_str());
  }
  return 0;
}

int cmd_attack(const std::string& config_path, const std::string& model_prefix,
               const std::string& in_path, int target, const std::string& defense_path,
               const std::string& out_path, uint64_t seed) {
  AttackConfig cfg = parse_attack_config(slurp(config_path));
  std::printf("%s\n", serialize_attack_config(cfg).c_str());
  Classifier c = Classifier::load(model_prefix);
  ImageTensor x = load_image(in_path);
  std::optional<Pipeline> defense;
  if (!defense_path.empty()) defense = parse_pipeline(slurp(defense_path));
  RngStream rng(seed, "attack");
  AttackResult r = run_attack(cfg, c, x, target, defense.has_value() ? &*defense : nullptr, rng);
  std::printf("attack: %s\n", attack_label(cfg).c_str());
  std::printf("prediction: %d\n",
              defended_predict(c, defense.has_value() ? &*defense : nullptr, r.adversarial,
                               rng.fork("report-check")));
  std::printf("success: %s\n", r.success ? "true" : "false");
  std::printf("rounds: %d\n", r.rounds_used);
  std::printf("l2: %s\n", fmt4(r.l2).c_str());
  std::printf("linf: %s\n", fmt4(r.linf).c_str());
  if (!out_path.empty()) save_image(r.adversarial, out_path);
  return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& out_dir, int jobs,
                 const std::optional<uint64_t>& seed_flag) {
  json cfg = json::parse(slurp(config_path));
  reject_unknown(cfg,
                 {"model", "data", "init_seed", "train", "samples", "defenses", "attacks",
                  "seed"},
                 "evaluate config");
  // --seed beats the config seed, which beats the environment fallback.
  uint64_t seed = seed_flag.has_value()
                      ? *seed_flag
                      : (cfg.contains("seed") ? cfg.at("seed").get<uint64_t>()
                                              : resolve_seed(std::nullopt));
  std::fprintf(stderr, "seed: %llu\n", static_cast<unsigned long long>(seed));
  DataSpec data = parse_data_spec(cfg.value("data", json::object()), seed);
  int samples = cfg.value("samples", 100);
  std::vector<DefenseEntry> defenses;
  for (const json& j : cfg.value("defenses", json::array())) defenses.push_back(parse_defense_entry(j));
  std::vector<AttackConfig> attacks;
  for (const json& j : cfg.value("attacks", json::array()))
    attacks.push_back(parse_attack_config(j.dump()));

  std::string model_prefix = cfg.value("model", std::string());
  uint64_t init_seed = cfg.value("init_seed", seed);
  Classifier::TrainOptions topt = parse_train_options(cfg.value("train", json::object()), seed);

  json resolved{{"model", model_prefix},
                {"data", data_spec_json(data)},
                {"samples", samples},
                {"defenses", cfg.value("defenses", json::array())},
                {"attacks", cfg.value("attacks", json::array())},
                {"seed", seed},
                {"jobs", jobs}};
  if (model_prefix.empty()) {
    resolved["init_seed"] = init_seed;
    resolved["train"] = train_options_json(topt);
  }
  std::printf("%s\n", resolved.dump(2).c_str());

  Classifier c;
  if (!model_prefix.empty()) {
    c = Classifier::load(model_prefix);
  } else {
    Dataset train_set = make_split(data, true);
    Dataset test_for_train = make_split(data, false);
    RngStream init(init_seed, "model-init");
    c = Classifier(train_set.images.at(0).height, train_set.images.at(0).channels,
                   train_set.num_classes, init);
    Classifier::TrainReport rep = c.train(train_set, test_for_train, topt);
    std::fprintf(stderr, "trained model: test_accuracy %s\n", fmt4(rep.test_accuracy).c_str());
  }
  Dataset test_set = make_split(data, false);
  std::vector<EvalSample> eval_samples = select_samples(c, test_set, samples, seed);
  EvalReport report = evaluate_grid(c, eval_samples, defenses, attacks, seed, jobs);
  write_report_files(report, out_dir);
  std::printf("wrote %s/report.json\n", out_dir.c_str());
  std::printf("wrote %s/report.md\n", out_dir.c_str());
  std::printf("wrote %s/report.csv\n", out_dir.c_str());
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& format,
               const std::string& out_path) {
  EvalReport r = report_from_json(slurp(in_path));
  std::string text;
  if (format == "md")
    text = report_markdown(r);
  else if (format == "csv")
    text = report_csv(r);
  else if (format == "json")
    text = report_json(r);
  else
    throw std::runtime_error("report: format must be md, csv or json");
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    std::ofstream f(out_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + out_path);
    f << text;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fencekit: preprocessing defenses, attacks and evaluation"};
  app.require_subcommand(1);
  std::optional<uint64_t> seed_flag;

  CLI::App* describe = app.add_subcommand("describe", "list the registered transforms");
  describe->add_option("--seed", seed_flag, "seed override (unused here, printed for parity)");

  std::string pipeline_path, in_path, out_path;
  CLI::App* preprocess = app.add_subcommand("preprocess", "run a pipeline over one image");
  preprocess->add_option("--pipeline", pipeline_path, "pipeline config JSON")->required();
  preprocess->add_option("--in", in_path, "input PNG")->required();
  preprocess->add_option("--out", out_path, "output PNG")->required();
  preprocess->add_option("--seed", seed_flag, "RNG seed");

  std::string a_path, b_path;
  CLI::App* metrics = app.add_subcommand("metrics", "distance metrics between two images");
  metrics->add_option("--a", a_path, "first PNG")->required();
  metrics->add_option("--b", b_path, "second PNG")->required();
  metrics->add_option("--seed", seed_flag, "seed override (unused here, printed for parity)");

  std::string config_path;
  CLI::App* train = app.add_subcommand("train", "train a classifier from a config file");
  train->add_option("--config", config_path, "train config JSON")->required();
  train->add_option("--seed", seed_flag, "fallback seed for config seeds left unset");

  std::string model_prefix, defense_path, attack_out;
  int target = 0;
  CLI::App* attack = app.add_subcommand("attack", "attack one image");
  attack->add_option("--config", config_path, "attack config JSON")->required();
  attack->add_option("--model", model_prefix, "checkpoint prefix")->required();
  attack->add_option("--in", in_path, "input PNG")->required();
  attack->add_option("--target", target, "target class")->required();
  attack->add_option("--defense", defense_path, "pipeline config JSON");
  attack->add_option("--out", attack_out, "write the adversarial PNG here");
  attack->add_option("--seed", seed_flag, "RNG seed");

  std::string eval_out = "report";
  int jobs = 1;
  CLI::App* evaluate = app.add_subcommand("evaluate", "run the defense x attack grid");
  evaluate->add_option("--config", config_path, "evaluation config JSON")->required();
  evaluate->add_option("--out", eval_out, "output directory");
  evaluate->add_option("--jobs", jobs, "parallel workers (1 = serial reference)");
  evaluate->add_option("--seed", seed_flag, "overrides the config seed");

  std::string report_in, report_format = "md";
  CLI::App* report = app.add_subcommand("report", "re-render a report.json");
  report->add_option("--in", report_in, "report.json path")->required();
  report->add_option("--format", report_format, "md, csv or json");
  report->add_option("--out", out_path, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    uint64_t seed = resolve_seed(seed_flag);
    if (!evaluate->parsed())  // evaluate prints its own config-aware seed
      std::fprintf(stderr, "seed: %llu\n", static_cast<unsigned long long>(seed));
    if (describe->parsed()) return cmd_describe();
    if (preprocess->parsed()) return cmd_preprocess(pipeline_path, in_path, out_path, seed);
    if (metrics->parsed()) return cmd_metrics(a_path, b_path);
    if (train->parsed()) return cmd_train(config_path, seed);
    if (attack->parsed())
      return cmd_attack(config_path, model_prefix, in_path, target, defense_path, attack_out,
                        seed);
    if (evaluate->parsed()) return cmd_evaluate(config_path, eval_out, jobs, seed_flag);
    if (report->parsed()) return cmd_report(report_in, report_format, out_path);
    std::fprintf(stderr, "error: no subcommand\n");
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
