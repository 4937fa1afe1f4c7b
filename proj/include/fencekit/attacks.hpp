#pragma once
// Targeted white-box attacks.  All attacks return the perturbed image plus
// bookkeeping; the caller judges deployment success separately.

#include <optional>
#include <vector>

#include "fencekit/image.hpp"
#include "fencekit/model.hpp"
#include "fencekit/pipeline.hpp"
#include "fencekit/rng.hpp"

namespace fencekit {

struct PerturbationBudget {
  enum class Kind { l2, linf };
  Kind kind = Kind::l2;
  double bound = 0.05;  // > 0; l2 uses the pixel-count-normalized metric

  static PerturbationBudget l2_default() { return {Kind::l2, 0.05}; }
  static PerturbationBudget linf_default() { return {Kind::linf, 8.0 / 255.0}; }
};

struct RoundRecord {
  int round = 0;
  double loss = 0;
  double l2 = 0;
  double linf = 0;
  bool success = false;
};

struct AttackResult {
  ImageTensor adversarial;
  bool success = false;
  int rounds_used = 0;
  double l2 = 0;
  double linf = 0;
  std::vector<RoundRecord> trace;
};

// Classify through the defense: predict(apply_pipeline(g, x)) when a pipeline
// is given, plain predict otherwise.
int defended_predict(const Classifier& c, const Pipeline* g, const ImageTensor& x, RngStream rng);

// One signed-gradient step of size epsilon toward `target` (sign(0) = 0).
AttackResult fgsm(const Classifier& c, const ImageTensor& x, int target, double epsilon);

// iters FGSM steps of size epsilon/iters, re-projected onto the linf ball and
// [0,1] each step.
AttackResult ifgsm(const Classifier& c, const ImageTensor& x, int target, double epsilon,
                   int iters);

// l2-normalized gradient descent toward the target; projects onto the l2 ball
// each round; stops at success, at the round cap, or after 20 consecutive
// rounds on the ball boundary without loss improvement > 1e-6.
AttackResult pgd_l2(const Classifier& c, const ImageTensor& x, int target,
                    const PerturbationBudget& budget, double lr, int max_rounds);

struct CwOptions {
  double lr = 0.1;
  int max_iterations = 1000;
  int binary_search_steps = 5;
  double initial_c = 0.01;
  double kappa = 0.0;
  PerturbationBudget budget = PerturbationBudget::l2_default();
};

// Carlini-Wagner l2 in tanh space with logits-margin loss and binary search
// over the trade-off constant.
AttackResult cw_l2(const Classifier& c, const ImageTensor& x, int target, const CwOptions& opt);

// BPDA: forward through the true pipeline, backward through the identity.
// One fresh pipeline sample per round; per-round success is judged on an
// independent fresh defended forward pass.
AttackResult bpda(const Classifier& c, const ImageTensor& x, int target, const Pipeline& g,
                  const PerturbationBudget& budget, double lr, int max_rounds, RngStream& rng);

// EOT: average the gradient over `ensemble` independent pipeline samples per
// round (BPDA backward per sample).  ensemble == 1 matches bpda step for
// step.
AttackResult eot(const Classifier& c, const ImageTensor& x, int target, const Pipeline& g,
                 const PerturbationBudget& budget, double lr, int max_rounds, int ensemble,
                 RngStream& rng);

AttackResult bpda_eot(const Classifier& c, const ImageTensor& x, int target, const Pipeline& g,
                      const PerturbationBudget& budget, double lr, int max_rounds, int ensemble,
                      RngStream& rng);

// Adaptive split attack: EOT against g1 only; every round the candidate is
// brute-force tested against the full defense g2(g1(.)).
AttackResult adaptive_g1(const Classifier& c, const ImageTensor& x, int target, const Pipeline& g1,
                         const Pipeline& g2, const PerturbationBudget& budget, double lr,
                         int max_rounds, int ensemble, RngStream& rng);

struct AttackConfig {
  std::string kind;  // fgsm | ifgsm | pgd | cw | bpda | eot | bpda_eot | adaptive
  PerturbationBudget budget = PerturbationBudget::l2_default();
  double lr = 0.1;
  int max_rounds = 50;
  int ensemble = 30;
  double epsilon = 0.03;   // fgsm / ifgsm
  int iters = 10;          // ifgsm
  CwOptions cw;            // cw
  // adaptive: the trailing `split` stages of the defense form g2.
  int split = 1;
};

AttackConfig parse_attack_config(const std::string& json_text);
std::string serialize_attack_config(const AttackConfig& cfg);
std::string attack_label(const AttackConfig& cfg);  // display name, e.g. "I-FGSM"

// Dispatch on cfg.kind.  `defense` may be null (undefended model); fgsm,
// ifgsm, pgd and cw always attack the undefended model.
AttackResult run_attack(const AttackConfig& cfg, const Classifier& c, const ImageTensor& x,
                        int target, const Pipeline* defense, RngStream& rng);

}  // namespace fencekit
