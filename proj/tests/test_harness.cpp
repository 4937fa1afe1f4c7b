// Harness tests: sample selection contracts, grid invariants, report round
// trips, and parallel/serial equality.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fencekit/harness.hpp"
#include "fencekit/dataset.hpp"
#include "fencekit/model.hpp"
#include "fencekit/pipeline.hpp"

using namespace fencekit;

namespace {

struct Fixture {
  Classifier model;
  Dataset test;
};

const Fixture& trained() {
  static Fixture f = [] {
    ShapeSetOptions opt;
    opt.side = 16;
    opt.channels = 1;
    opt.num_classes = 4;
    opt.per_class = 30;
    opt.seed = 11;
    opt.split = "train";
    Dataset train = make_shape_dataset(opt);
    opt.per_class = 10;
    opt.split = "test";
    Dataset test = make_shape_dataset(opt);
    RngStream init(5, "attack-fixture");
    Classifier c(16, 1, 4, init);
    Classifier::TrainOptions topt;
    topt.epochs = 8;
    topt.lr = 0.05;
    topt.batch_size = 16;
    topt.seed = 2;
    auto rep = c.train(train, test, topt);
    REQUIRE(rep.test_accuracy >= 0.9);
    return Fixture{std::move(c), std::move(test)};
  }();
  return f;
}

DefenseEntry defense(const std::string& kind) {
  Pipeline p;
  p.stages.push_back(make_default_spec(kind));
  return DefenseEntry{"", p};
}

AttackConfig quick_pgd(int rounds) {
  AttackConfig cfg;
  cfg.kind = "pgd";
  cfg.max_rounds = rounds;
  return cfg;
}

AttackConfig quick_ifgsm(double eps) {
  AttackConfig cfg;
  cfg.kind = "ifgsm";
  cfg.budget = PerturbationBudget::linf_default();
  cfg.epsilon = eps;
  cfg.iters = 10;
  return cfg;
}

const EvalCell& cell_of(const EvalReport& r, const std::string& d, const std::string& a) {
  for (const EvalCell& c : r.cells)
    if (c.defense == d && c.attack == a) return c;
  REQUIRE(false);
  static EvalCell dummy;
  return dummy;
}

}  // namespace

TEST_CASE("select_samples returns correctly classified images with wrong targets") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 12, 3);
  REQUIRE(samples.size() == 12);
  for (const EvalSample& s : samples) {
    CHECK(f.model.predict(s.image) == s.label);
    CHECK(s.target != s.label);
    CHECK(s.target >= 0);
    CHECK(s.target < f.test.num_classes);
  }
}

TEST_CASE("select_samples is seeded and deterministic") {
  const Fixture& f = trained();
  auto a = select_samples(f.model, f.test, 10, 3);
  auto b = select_samples(f.model, f.test, 10, 3);
  REQUIRE(a.size() == b.size());
  bool same_other_seed = true;
  auto c = select_samples(f.model, f.test, 10, 4);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == b[i].label);
    CHECK(a[i].target == b[i].target);
    CHECK(a[i].image.data == b[i].image.data);
    same_other_seed = same_other_seed && a[i].image.data == c[i].image.data &&
                      a[i].target == c[i].target;
  }
  CHECK_FALSE(same_other_seed);
}

TEST_CASE("select_samples validates its inputs") {
  const Fixture& f = trained();
  CHECK_THROWS_AS(select_samples(f.model, f.test, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(select_samples(f.model, f.test, 10000, 1), std::runtime_error);
}

TEST_CASE("grid shape, invariants and baseline behavior") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 10, 3);
  std::vector<DefenseEntry> defenses{defense("RDG"), defense("BdR")};
  std::vector<AttackConfig> attacks{quick_ifgsm(0.2), quick_pgd(45)};
  EvalReport r = evaluate_grid(f.model, samples, defenses, attacks, 5, 1);

  REQUIRE(r.defense_names == std::vector<std::string>{"none", "RDG", "BdR"});
  REQUIRE(r.attack_names == std::vector<std::string>{"Clean", "I-FGSM", "PGD"});
  REQUIRE(r.cells.size() == 9);
  CHECK(r.seed == 5);
  CHECK(r.n_samples == 10);

  for (const EvalCell& c : r.cells) {
    CHECK(c.error.empty());
    CHECK(c.n == 10);
    CHECK(c.acc >= 0.0);
    CHECK(c.acc <= 1.0);
    CHECK(c.asr >= 0.0);
    CHECK(c.asr <= 1.0);
    CHECK(c.acc + c.asr <= 1.0 + 1e-9);
    CHECK(c.acc_ci[0] <= c.acc_ci[1]);
    CHECK(c.asr_ci[0] <= c.asr_ci[1]);
    CHECK(c.acc_ci[0] <= c.acc + 1e-12);
    CHECK(c.asr_ci[1] >= c.asr - 1e-12);
  }

  // Samples are selected to be correctly classified, so the undefended clean
  // cell is exact.
  const EvalCell& base_clean = cell_of(r, "none", "Clean");
  CHECK(base_clean.acc == 1.0);
  CHECK(base_clean.asr == 0.0);
  CHECK(base_clean.mean_rounds == 0.0);

  // Plain iterative attacks on the undefended row should mostly reach the
  // target at this budget.
  const EvalCell& base_pgd = cell_of(r, "none", "PGD");
  CHECK(base_pgd.asr >= 0.7);
  CHECK(base_pgd.acc <= 0.3);
  CHECK(base_pgd.mean_rounds > 0.0);
  CHECK(base_pgd.mean_l2 > 0.0);
  CHECK_FALSE(base_pgd.round_asr.empty());
  CHECK(base_pgd.round_asr.back() == doctest::Approx(base_pgd.asr).epsilon(1e-12));

  const EvalCell& base_ifgsm = cell_of(r, "none", "I-FGSM");
  CHECK(base_ifgsm.asr >= 0.7);
  CHECK(base_ifgsm.acc <= 0.3);

  // Defenses never help the attacker (soft-tolerance dominance).
  for (const std::string& d : r.defense_names)
    CHECK(cell_of(r, d, "PGD").asr <= base_pgd.asr + 0.05 + 1e-12);

  // Cumulative round curves are monotone.
  for (const EvalCell& c : r.cells) {
    for (size_t i = 1; i < c.round_asr.size(); ++i)
      CHECK(c.round_asr[i] >= c.round_asr[i - 1]);
    if (!c.round_asr.empty()) CHECK(c.round_asr.back() <= 1.0);
  }
}

TEST_CASE("zero-round attack leaves the baseline untouched") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 8, 3);
  EvalReport r = evaluate_grid(f.model, samples, {defense("BdR")}, {quick_pgd(0)}, 7, 1);
  const EvalCell& c = cell_of(r, "none", "PGD");
  CHECK(c.asr == 0.0);
  CHECK(c.acc == 1.0);
  CHECK(c.mean_l2 == 0.0);
  CHECK(c.mean_rounds == 0.0);
}

TEST_CASE("attack failures are recorded per cell, not thrown") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 5, 3);
  AttackConfig broken;
  broken.kind = "eot";
  broken.ensemble = 0;  // rejected inside the attack
  broken.max_rounds = 3;
  EvalReport r = evaluate_grid(f.model, samples, {defense("BdR")}, {broken, quick_pgd(5)}, 7, 1);
  for (const std::string& d : r.defense_names) {
    const EvalCell& bad = cell_of(r, d, "EOT");
    CHECK_FALSE(bad.error.empty());
    CHECK(bad.acc == 0.0);
    CHECK(bad.asr == 0.0);
    const EvalCell& good = cell_of(r, d, "PGD");
    CHECK(good.error.empty());
  }
  std::string md = report_markdown(r);
  CHECK(md.find("err") != std::string::npos);
}

TEST_CASE("evaluate_grid validates its inputs") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 3, 3);
  CHECK_THROWS_AS(evaluate_grid(f.model, {}, {}, {}, 1, 1), std::invalid_argument);
  auto bad = samples;
  bad[0].target = bad[0].label;
  CHECK_THROWS_AS(evaluate_grid(f.model, bad, {}, {}, 1, 1), std::invalid_argument);
  DefenseEntry empty_pipeline{"broken", Pipeline{}};
  CHECK_THROWS_AS(evaluate_grid(f.model, samples, {empty_pipeline}, {}, 1, 1),
                  std::invalid_argument);
}

TEST_CASE("report json round trip is lossless") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 6, 3);
  EvalReport r = evaluate_grid(f.model, samples, {defense("RDG")}, {quick_pgd(6)}, 9, 1);
  r.rounds_to_asr.push_back(rounds_to_asr(f.model, samples, defense("BdR"), quick_pgd(8),
                                          {0.0, 0.5, 0.9}, 8, 4, 1));
  std::string text = report_json(r);
  EvalReport back = report_from_json(text);
  CHECK(report_json(back) == text);
  CHECK(back.seed == r.seed);
  CHECK(back.defense_names == r.defense_names);
  CHECK(back.attack_names == r.attack_names);
  REQUIRE(back.cells.size() == r.cells.size());
  for (size_t i = 0; i < r.cells.size(); ++i) {
    CHECK(back.cells[i].acc == r.cells[i].acc);
    CHECK(back.cells[i].asr == r.cells[i].asr);
    CHECK(back.cells[i].round_asr == r.cells[i].round_asr);
  }
  REQUIRE(back.rounds_to_asr.size() == 1);
  CHECK(back.rounds_to_asr[0].rounds == r.rounds_to_asr[0].rounds);
  CHECK(back.config_snapshot == r.config_snapshot);
  CHECK_THROWS_AS(report_from_json("not json"), std::invalid_argument);
  CHECK_THROWS_AS(report_from_json("{}"), std::invalid_argument);
}

TEST_CASE("markdown tables put the baseline row and Clean column first") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 5, 3);
  EvalReport r = evaluate_grid(f.model, samples, {defense("BdR")}, {quick_pgd(5)}, 9, 1);
  std::string md = report_markdown(r);
  size_t header = md.find("| Defense | Clean | PGD |");
  REQUIRE(header != std::string::npos);
  size_t none_row = md.find("| none |", header);
  size_t bdr_row = md.find("| BdR |", header);
  REQUIRE(none_row != std::string::npos);
  REQUIRE(bdr_row != std::string::npos);
  CHECK(none_row < bdr_row);
  CHECK(md.find("## Attack success rate (ASR)") != std::string::npos);
}

TEST_CASE("csv has one row per cell plus a header") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 5, 3);
  EvalReport r =
      evaluate_grid(f.model, samples, {defense("BdR"), defense("RGN")}, {quick_pgd(4)}, 9, 1);
  std::string csv = report_csv(r);
  size_t lines = 0;
  for (char ch : csv) lines += ch == '\n';
  CHECK(lines == 1 + size_t(3) * 2);  // header + (defenses+baseline) x (attacks+clean)
  CHECK(csv.rfind("defense,attack,n,acc,asr,mean_l2,mean_linf,mean_rounds,error\n", 0) == 0);
}

TEST_CASE("parallel evaluation reproduces the serial report byte for byte") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 6, 3);
  std::vector<DefenseEntry> defenses{defense("SAT"), defense("RGN")};
  std::vector<AttackConfig> attacks{quick_pgd(6), quick_ifgsm(0.05)};
  EvalReport serial = evaluate_grid(f.model, samples, defenses, attacks, 13, 1);
  EvalReport parallel = evaluate_grid(f.model, samples, defenses, attacks, 13, 4);
  CHECK(report_json(serial) == report_json(parallel));
}

TEST_CASE("rounds_to_asr thresholds, sentinel and determinism") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 6, 3);

  SUBCASE("reachable thresholds cross in order") {
    RoundsToAsr rt = rounds_to_asr(f.model, samples, DefenseEntry{"none", std::nullopt},
                                   quick_pgd(0), {0.0, 0.3, 0.7}, 20, 4, 1);
    REQUIRE(rt.rounds.size() == 3);
    CHECK(rt.rounds[0] == 0);  // threshold zero is met before any rounds
    // Undefended pgd succeeds fast, so both thresholds resolve.
    REQUIRE(rt.rounds[1].has_value());
    REQUIRE(rt.rounds[2].has_value());
    CHECK(*rt.rounds[1] <= *rt.rounds[2]);
    CHECK(rt.curve.size() == 20);
    for (size_t i = 1; i < rt.curve.size(); ++i) CHECK(rt.curve[i] >= rt.curve[i - 1]);
    CHECK(rt.curve[size_t(*rt.rounds[1]) - 1] >= 0.3);
  }

  SUBCASE("unreachable thresholds give the sentinel") {
    AttackConfig pinned = quick_pgd(0);
    pinned.budget.bound = 0.0;  // the iterate can never move
    RoundsToAsr rt = rounds_to_asr(f.model, samples, DefenseEntry{"none", std::nullopt}, pinned,
                                   {0.5}, 25, 4, 1);
    REQUIRE(rt.rounds.size() == 1);
    CHECK_FALSE(rt.rounds[0].has_value());
    EvalReport r;
    r.rounds_to_asr.push_back(rt);
    CHECK(report_markdown(r).find("25+") != std::string::npos);
  }

  SUBCASE("parallel equals serial") {
    RoundsToAsr a = rounds_to_asr(f.model, samples, defense("SAT"), quick_pgd(0), {0.1, 0.5}, 10,
                                  4, 1);
    RoundsToAsr b = rounds_to_asr(f.model, samples, defense("SAT"), quick_pgd(0), {0.1, 0.5}, 10,
                                  4, 4);
    CHECK(a.rounds == b.rounds);
    CHECK(a.curve == b.curve);
  }
}

TEST_CASE("write_report_files emits json, markdown, csv and traces") {
  const Fixture& f = trained();
  auto samples = select_samples(f.model, f.test, 5, 3);
  EvalReport r = evaluate_grid(f.model, samples, {defense("BdR")}, {quick_pgd(6)}, 9, 1);
  r.rounds_to_asr.push_back(
      rounds_to_asr(f.model, samples, defense("BdR"), quick_pgd(6), {0.5}, 6, 4, 1));
  std::string dir = (std::filesystem::temp_directory_path() / "fencekit-report-test").string();
  std::filesystem::remove_all(dir);
  write_report_files(r, dir);
  auto slurp = [](const std::string& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  CHECK(report_from_json(slurp(dir + "/report.json")).cells.size() == r.cells.size());
  CHECK(slurp(dir + "/report.md") == report_markdown(r));
  CHECK(slurp(dir + "/report.csv") == report_csv(r));
  bool has_trace = false;
  for (const auto& e : std::filesystem::directory_iterator(dir + "/traces"))
    has_trace = has_trace || e.path().extension() == ".csv";
  CHECK(has_trace);
  std::string trace = slurp(dir + "/traces/rounds-BdR.csv");
  CHECK(trace.rfind("round,cum_asr\n", 0) == 0);
  std::filesystem::remove_all(dir);
}
