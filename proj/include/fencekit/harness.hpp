#pragma once
// Defense x attack evaluation harness and report emission.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "fencekit/attacks.hpp"
#include "fencekit/model.hpp"
#include "fencekit/pipeline.hpp"

namespace fencekit {

struct EvalSample {
  ImageTensor image;
  int label = 0;   // true label (correctly classified undefended)
  int target = 0;  // attack target, != label
};

// Pick n correctly classified test samples (seeded shuffle) and assign each a
// uniform random target different from its label.  Throws if fewer than n
// samples qualify.
std::vector<EvalSample> select_samples(const Classifier& c, const Dataset& test_set, int n,
                                       uint64_t seed);

struct DefenseEntry {
  std::string name;  // display label; empty -> derived from the pipeline
  std::optional<Pipeline> pipeline;  // nullopt = no defense (baseline)
};

struct EvalCell {
  std::string defense;
  std::string attack;
  int n = 0;
  double acc = 0;  // fraction classified as the true label
  double asr = 0;  // fraction classified as the attack target
  double mean_l2 = 0;
  double mean_linf = 0;
  double mean_rounds = 0;
  std::array<double, 2> acc_ci{0, 0};  // bootstrap 2.5/97.5 percentiles
  std::array<double, 2> asr_ci{0, 0};
  std::string error;  // non-empty when the attack failed to run
  std::vector<double> round_asr;  // cumulative ASR per round (iterative attacks)
};

struct RoundsToAsr {
  std::string defense;
  std::vector<double> thresholds;
  std::vector<std::optional<int>> rounds;  // nullopt = cap exceeded
  int round_cap = 0;
  std::vector<double> curve;  // cumulative ASR per round
};

struct EvalReport {
  uint64_t seed = 0;
  int n_samples = 0;
  std::vector<std::string> defense_names;  // baseline first
  std::vector<std::string> attack_names;   // "Clean" first
  std::vector<EvalCell> cells;
  std::vector<RoundsToAsr> rounds_to_asr;
  std::string config_snapshot;  // resolved config JSON
};

// Full grid: for every defense (baseline prepended) and attack, generate AEs
// per sample and classify each through one fresh defended forward pass.
// jobs <= 1 runs serial; results are byte-identical for any jobs value.
EvalReport evaluate_grid(const Classifier& c, const std::vector<EvalSample>& samples,
                         const std::vector<DefenseEntry>& defenses,
                         const std::vector<AttackConfig>& attacks, uint64_t seed, int jobs = 1);

// Rounds needed to reach each cumulative-ASR threshold under `attack`
// (nullopt where the cap is insufficient).
RoundsToAsr rounds_to_asr(const Classifier& c, const std::vector<EvalSample>& samples,
                          const DefenseEntry& defense, const AttackConfig& attack,
                          const std::vector<double>& thresholds, int round_cap, uint64_t seed,
                          int jobs = 1);

// report.json is the source of truth; the markdown tables (ACC and ASR, Clean
// column first) and CSV render from the same data.  traces/<cell>.csv holds
// per-round cumulative ASR for iterative attacks.
std::string report_json(const EvalReport& r);
std::string report_markdown(const EvalReport& r);
std::string report_csv(const EvalReport& r);
EvalReport report_from_json(const std::string& json_text);
void write_report_files(const EvalReport& r, const std::string& out_dir);

}  // namespace fencekit
