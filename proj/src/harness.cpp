#include "fencekit/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "fencekit/metrics.hpp"
#include "json.hpp"

namespace fencekit {

using nlohmann::json;

namespace {

std::string defense_display_name(const DefenseEntry& e) {
  if (!e.name.empty()) return e.name;
  if (e.pipeline.has_value()) return pipeline_label(*e.pipeline);
  return "none";
}

// Percentile bootstrap (B = 200) over per-sample 0/1 outcomes.
std::array<double, 2> bootstrap_ci(const std::vector<int>& hits, const RngStream& rng,
                                   std::string_view label) {
  constexpr int kReplicates = 200;
  size_t n = hits.size();
  if (n == 0) return {0, 0};
  RngStream stream = rng.fork(label);
  std::vector<double> means(kReplicates);
  for (int b = 0; b < kReplicates; ++b) {
    long total = 0;
    for (size_t i = 0; i < n; ++i) total += hits[size_t(stream.uniform_int(0, int64_t(n) - 1))];
    means[size_t(b)] = double(total) / double(n);
  }
  std::sort(means.begin(), means.end());
  size_t lo = size_t(std::floor(0.025 * (kReplicates - 1)));
  size_t hi = size_t(std::ceil(0.975 * (kReplicates - 1)));
  return {means[lo], means[hi]};
}

// Cumulative per-round ASR from per-sample first-success rounds (0 = round 1).
std::vector<double> cumulative_curve(const std::vector<int>& first_success, size_t rounds,
                                     size_t n) {
  std::vector<double> curve(rounds, 0.0);
  for (int fs : first_success) {
    if (fs <= 0) continue;
    for (size_t r = size_t(fs) - 1; r < rounds; ++r) curve[r] += 1.0;
  }
  for (double& v : curve) v /= double(n);
  return curve;
}

int first_success_round(const AttackResult& r) {
  for (const RoundRecord& rec : r.trace)
    if (rec.success) return rec.round;
  return 0;  // never succeeded (or no trace)
}

// One (defense, attack) cell.  ai == 0 is the Clean column.  All randomness
// comes from forks of `cell_rng`, so cells are order-independent.
EvalCell evaluate_cell(const Classifier& c, const std::vector<EvalSample>& samples,
                       const Pipeline* g, const std::string& defense_name,
                       const std::string& attack_name, const AttackConfig* cfg,
                       const RngStream& cell_rng) {
  EvalCell cell;
  cell.defense = defense_name;
  cell.attack = attack_name;
  cell.n = int(samples.size());
  size_t n = samples.size();
  std::vector<int> acc_hits(n, 0), asr_hits(n, 0);
  std::vector<int> first_success(n, 0);
  size_t max_trace = 0;
  try {
    for (size_t si = 0; si < n; ++si) {
      const EvalSample& s = samples[si];
      std::string tag = "s" + std::to_string(si);
      int pred;
      if (cfg == nullptr) {
        pred = defended_predict(c, g, s.image, cell_rng.fork(tag));
      } else {
        RngStream attack_rng = cell_rng.fork(tag);
        AttackResult r = run_attack(*cfg, c, s.image, s.target, g, attack_rng);
        pred = defended_predict(c, g, r.adversarial, cell_rng.fork("final-" + tag));
        cell.mean_l2 += r.l2;
        cell.mean_linf += r.linf;
        cell.mean_rounds += r.rounds_used;
        first_success[si] = first_success_round(r);
        max_trace = std::max(max_trace, r.trace.size());
      }
      acc_hits[si] = pred == s.label ? 1 : 0;
      asr_hits[si] = pred == s.target ? 1 : 0;
    }
  } catch (const std::exception& e) {
    EvalCell failed;
    failed.defense = defense_name;
    failed.attack = attack_name;
    failed.n = int(n);
    failed.error = e.what();
    return failed;
  }
  for (size_t si = 0; si < n; ++si) {
    cell.acc += acc_hits[si];
    cell.asr += asr_hits[si];
  }
  cell.acc /= double(n);
  cell.asr /= double(n);
  if (cfg != nullptr) {
    cell.mean_l2 /= double(n);
    cell.mean_linf /= double(n);
    cell.mean_rounds /= double(n);
    if (max_trace > 0) cell.round_asr = cumulative_curve(first_success, max_trace, n);
  }
  cell.acc_ci = bootstrap_ci(acc_hits, cell_rng, "bootstrap-acc");
  cell.asr_ci = bootstrap_ci(asr_hits, cell_rng, "bootstrap-asr");
  return cell;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string two_decimals(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

const EvalCell* find_cell(const EvalReport& r, const std::string& defense,
                          const std::string& attack) {
  for (const EvalCell& c : r.cells)
    if (c.defense == defense && c.attack == attack) return &c;
  return nullptr;
}

std::string sanitize_filename(const std::string& name) {
  std::string out;
  for (char ch : name) {
    bool ok = (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') ||
              ch == '.' || ch == '-';
    out.push_back(ok ? ch : '_');
  }
  return out;
}

json cell_to_json(const EvalCell& c) {
  return json{
      {"defense", c.defense},
      {"attack", c.attack},
      {"n", c.n},
      {"acc", c.acc},
      {"asr", c.asr},
      {"mean_l2", c.mean_l2},
      {"mean_linf", c.mean_linf},
      {"mean_rounds", c.mean_rounds},
      {"acc_ci", {c.acc_ci[0], c.acc_ci[1]}},
      {"asr_ci", {c.asr_ci[0], c.asr_ci[1]}},
      {"error", c.error},
      {"round_asr", c.round_asr},
  };
}

EvalCell cell_from_json(const json& j) {
  EvalCell c;
  c.defense = j.at("defense").get<std::string>();
  c.attack = j.at("attack").get<std::string>();
  c.n = j.at("n").get<int>();
  c.acc = j.at("acc").get<double>();
  c.asr = j.at("asr").get<double>();
  c.mean_l2 = j.at("mean_l2").get<double>();
  c.mean_linf = j.at("mean_linf").get<double>();
  c.mean_rounds = j.at("mean_rounds").get<double>();
  c.acc_ci = {j.at("acc_ci").at(0).get<double>(), j.at("acc_ci").at(1).get<double>()};
  c.asr_ci = {j.at("asr_ci").at(0).get<double>(), j.at("asr_ci").at(1).get<double>()};
  c.error = j.at("error").get<std::string>();
  c.round_asr = j.at("round_asr").get<std::vector<double>>();
  return c;
}

}  // namespace

std::vector<EvalSample> select_samples(const Classifier& c, const Dataset& test_set, int n,
                                       uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("select_samples: n must be positive");
  if (test_set.num_classes < 2)
    throw std::invalid_argument("select_samples: need at least two classes");
  std::vector<size_t> correct;
  for (size_t i = 0; i < test_set.size(); ++i)
    if (c.predict(test_set.images[i]) == test_set.labels[i]) correct.push_back(i);
  if (correct.size() < size_t(n))
    throw std::runtime_error("select_samples: only " + std::to_string(correct.size()) +
                             " correctly classified samples, need " + std::to_string(n));
  RngStream rng(seed, "select-samples");
  for (size_t i = correct.size() - 1; i > 0; --i) {
    size_t j = size_t(rng.uniform_int(0, int64_t(i)));
    std::swap(correct[i], correct[j]);
  }
  std::vector<EvalSample> out;
  out.reserve(size_t(n));
  for (int k = 0; k < n; ++k) {
    EvalSample s;
    s.image = test_set.images[correct[size_t(k)]];
    s.label = test_set.labels[correct[size_t(k)]];
    int t = int(rng.uniform_int(0, int64_t(test_set.num_classes) - 2));
    s.target = t + (t >= s.label ? 1 : 0);
    out.push_back(std::move(s));
  }
  return out;
}

EvalReport evaluate_grid(const Classifier& c, const std::vector<EvalSample>& samples,
                         const std::vector<DefenseEntry>& defenses,
                         const std::vector<AttackConfig>& attacks, uint64_t seed, int jobs) {
  if (samples.empty()) throw std::invalid_argument("evaluate_grid: no samples");
  for (const EvalSample& s : samples)
    if (s.target == s.label) throw std::invalid_argument("evaluate_grid: target equals label");
  for (const DefenseEntry& d : defenses)
    if (d.pipeline.has_value()) validate(*d.pipeline);

  EvalReport report;
  report.seed = seed;
  report.n_samples = int(samples.size());

  // Row 0 is always the undefended baseline; the caller's defenses follow.
  std::vector<const Pipeline*> row_pipeline;
  report.defense_names.push_back("none");
  row_pipeline.push_back(nullptr);
  for (const DefenseEntry& d : defenses) {
    report.defense_names.push_back(defense_display_name(d));
    row_pipeline.push_back(d.pipeline.has_value() ? &*d.pipeline : nullptr);
  }
  report.attack_names.push_back("Clean");
  for (const AttackConfig& a : attacks) report.attack_names.push_back(attack_label(a));

  json cfg_defenses = json::array();
  for (size_t i = 0; i < defenses.size(); ++i) {
    json d;
    d["name"] = report.defense_names[i + 1];
    d["pipeline"] = defenses[i].pipeline.has_value()
                        ? json::parse(serialize_pipeline(*defenses[i].pipeline))
                        : json();
    cfg_defenses.push_back(d);
  }
  json cfg_attacks = json::array();
  for (const AttackConfig& a : attacks) cfg_attacks.push_back(json::parse(serialize_attack_config(a)));
  report.config_snapshot = json{{"seed", seed},
                                {"n_samples", report.n_samples},
                                {"defenses", cfg_defenses},
                                {"attacks", cfg_attacks}}
                               .dump(2);

  RngStream root(seed, "eval");
  size_t rows = report.defense_names.size();
  size_t cols = report.attack_names.size();
  report.cells.assign(rows * cols, EvalCell{});
  int total = int(rows * cols);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs)) if (jobs > 1)
  for (int idx = 0; idx < total; ++idx) {
    size_t di = size_t(idx) / cols;
    size_t ai = size_t(idx) % cols;
    RngStream cell_rng =
        root.fork("d" + std::to_string(di) + "-a" + std::to_string(ai));
    report.cells[size_t(idx)] = evaluate_cell(
        c, samples, row_pipeline[di], report.defense_names[di], report.attack_names[ai],
        ai == 0 ? nullptr : &attacks[ai - 1], cell_rng);
  }
  return report;
}

RoundsToAsr rounds_to_asr(const Classifier& c, const std::vector<EvalSample>& samples,
                          const DefenseEntry& defense, const AttackConfig& attack,
                          const std::vector<double>& thresholds, int round_cap, uint64_t seed,
                          int jobs) {
  if (samples.empty()) throw std::invalid_argument("rounds_to_asr: no samples");
  if (round_cap < 1) throw std::invalid_argument("rounds_to_asr: round_cap must be >= 1");
  AttackConfig cfg = attack;
  cfg.max_rounds = round_cap;
  if (cfg.kind == "ifgsm") cfg.iters = round_cap;
  const Pipeline* g = defense.pipeline.has_value() ? &*defense.pipeline : nullptr;

  RngStream root(seed, "rounds");
  size_t n = samples.size();
  std::vector<int> first_success(n, 0);
#pragma omp parallel for schedule(dynamic) num_threads(std::max(1, jobs)) if (jobs > 1)
  for (int si = 0; si < int(n); ++si) {
    RngStream rng = root.fork("s" + std::to_string(si));
    AttackResult r = run_attack(cfg, c, samples[size_t(si)].image, samples[size_t(si)].target, g,
                                rng);
    first_success[size_t(si)] = first_success_round(r);
  }

  RoundsToAsr out;
  out.defense = defense_display_name(defense);
  out.thresholds = thresholds;
  out.round_cap = round_cap;
  out.curve = cumulative_curve(first_success, size_t(round_cap), n);
  for (double t : thresholds) {
    if (t <= 0) {
      out.rounds.push_back(0);
      continue;
    }
    std::optional<int> hit;
    for (int r = 1; r <= round_cap; ++r)
      if (out.curve[size_t(r) - 1] >= t - 1e-12) {
        hit = r;
        break;
      }
    out.rounds.push_back(hit);
  }
  return out;
}

std::string report_json(const EvalReport& r) {
  json cells = json::array();
  for (const EvalCell& c : r.cells) cells.push_back(cell_to_json(c));
  json curves = json::array();
  for (const RoundsToAsr& rt : r.rounds_to_asr) {
    json rounds = json::array();
    for (const auto& v : rt.rounds) {
      if (v.has_value())
        rounds.push_back(*v);
      else
        rounds.push_back(nullptr);
    }
    curves.push_back(json{{"defense", rt.defense},
                          {"thresholds", rt.thresholds},
                          {"rounds", rounds},
                          {"round_cap", rt.round_cap},
                          {"curve", rt.curve}});
  }
  json doc{
      {"format", "fencekit-report-v1"},
      {"seed", r.seed},
      {"n_samples", r.n_samples},
      {"defense_names", r.defense_names},
      {"attack_names", r.attack_names},
      {"cells", cells},
      {"rounds_to_asr", curves},
      {"config", r.config_snapshot.empty() ? json() : json::parse(r.config_snapshot)},
  };
  return doc.dump(2);
}

EvalReport report_from_json(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "fencekit-report-v1")
      throw std::invalid_argument("report: unsupported format");
    EvalReport r;
    r.seed = doc.at("seed").get<uint64_t>();
    r.n_samples = doc.at("n_samples").get<int>();
    r.defense_names = doc.at("defense_names").get<std::vector<std::string>>();
    r.attack_names = doc.at("attack_names").get<std::vector<std::string>>();
    for (const json& j : doc.at("cells")) r.cells.push_back(cell_from_json(j));
    for (const json& j : doc.at("rounds_to_asr")) {
      RoundsToAsr rt;
      rt.defense = j.at("defense").get<std::string>();
      rt.thresholds = j.at("thresholds").get<std::vector<double>>();
      for (const json& v : j.at("rounds"))
        rt.rounds.push_back(v.is_null() ? std::optional<int>{} : std::optional<int>{v.get<int>()});
      rt.round_cap = j.at("round_cap").get<int>();
      rt.curve = j.at("curve").get<std::vector<double>>();
      r.rounds_to_asr.push_back(std::move(rt));
    }
    if (!doc.at("config").is_null()) r.config_snapshot = doc.at("config").dump(2);
    return r;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("report: ") + e.what());
  }
}

std::string report_markdown(const EvalReport& r) {
  auto render_cell = [&](const std::string& d, const std::string& a, bool asr) {
    const EvalCell* c = find_cell(r, d, a);
    if (c == nullptr) return std::string("-");
    if (!c->error.empty()) return std::string("err");
    return two_decimals(asr ? c->asr : c->acc);
  };
  std::string out;
  out += "# Evaluation report\n\n";
  out += "Seed " + std::to_string(r.seed) + ", " + std::to_string(r.n_samples) + " samples.\n\n";
  out += "## Accuracy (ACC)\n\n";
  out += "| Defense |";
  for (const std::string& a : r.attack_names) out += " " + a + " |";
  out += "\n|---|";
  for (size_t i = 0; i < r.attack_names.size(); ++i) out += "---|";
  out += "\n";
  for (const std::string& d : r.defense_names) {
    out += "| " + d + " |";
    for (const std::string& a : r.attack_names) out += " " + render_cell(d, a, false) + " |";
    out += "\n";
  }
  out += "\n## Attack success rate (ASR)\n\n";
  out += "| Defense |";
  for (size_t i = 1; i < r.attack_names.size(); ++i) out += " " + r.attack_names[i] + " |";
  out += "\n|---|";
  for (size_t i = 1; i < r.attack_names.size(); ++i) out += "---|";
  out += "\n";
  for (const std::string& d : r.defense_names) {
    out += "| " + d + " |";
    for (size_t i = 1; i < r.attack_names.size(); ++i)
      out += " " + render_cell(d, r.attack_names[i], true) + " |";
    out += "\n";
  }
  if (!r.rounds_to_asr.empty()) {
    out += "\n## Rounds to cumulative ASR\n\n| Defense |";
    for (double t : r.rounds_to_asr.front().thresholds)
      out += " " + two_decimals(t) + " |";
    out += "\n|---|";
    for (size_t i = 0; i < r.rounds_to_asr.front().thresholds.size(); ++i) out += "---|";
    out += "\n";
    for (const RoundsToAsr& rt : r.rounds_to_asr) {
      out += "| " + rt.defense + " |";
      for (const auto& v : rt.rounds)
        out += v.has_value() ? " " + std::to_string(*v) + " |"
                             : " " + std::to_string(rt.round_cap) + "+ |";
      out += "\n";
    }
  }
  return out;
}

std::string report_csv(const EvalReport& r) {
  std::string out = "defense,attack,n,acc,asr,mean_l2,mean_linf,mean_rounds,error\n";
  for (const EvalCell& c : r.cells) {
    out += c.defense + "," + c.attack + "," + std::to_string(c.n) + "," + format_double(c.acc) +
           "," + format_double(c.asr) + "," + format_double(c.mean_l2) + "," +
           format_double(c.mean_linf) + "," + format_double(c.mean_rounds) + "," + c.error + "\n";
  }
  return out;
}

void write_report_files(const EvalReport& r, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  fs::create_directories(fs::path(out_dir) / "traces");
  auto dump = [](const fs::path& p, const std::string& text) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << text;
  };
  dump(fs::path(out_dir) / "report.json", report_json(r));
  dump(fs::path(out_dir) / "report.md", report_markdown(r));
  dump(fs::path(out_dir) / "report.csv", report_csv(r));
  for (const EvalCell& c : r.cells) {
    if (c.round_asr.empty()) continue;
    std::string text = "round,cum_asr\n";
    for (size_t i = 0; i < c.round_asr.size(); ++i)
      text += std::to_string(i + 1) + "," + format_double(c.round_asr[i]) + "\n";
    dump(fs::path(out_dir) / "traces" /
             (sanitize_filename(c.defense) + "-" + sanitize_filename(c.attack) + ".csv"),
         text);
  }
  for (const RoundsToAsr& rt : r.rounds_to_asr) {
    std::string text = "round,cum_asr\n";
    for (size_t i = 0; i < rt.curve.size(); ++i)
      text += std::to_string(i + 1) + "," + format_double(rt.curve[i]) + "\n";
    dump(fs::path(out_dir) / "traces" / ("rounds-" + sanitize_filename(rt.defense) + ".csv"),
         text);
  }
}

}  // namespace fencekit
