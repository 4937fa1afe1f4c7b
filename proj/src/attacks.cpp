#include "fencekit/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fencekit/metrics.hpp"
#include "json.hpp"

namespace fencekit {

using nlohmann::json;

namespace {

void require_target(const Classifier& c, const ImageTensor& x, int target) {
  if (x.height != c.side() || x.width != c.side() || x.channels != c.channels())
    throw std::invalid_argument("attack: input shape mismatch");
  if (target < 0 || target >= c.num_classes())
    throw std::invalid_argument("attack: target class out of range");
}

void require_budget(const PerturbationBudget& b) {
  if (b.bound < 0) throw std::invalid_argument("attack: budget bound must be >= 0");
}

// Defended image sample: identity when the pipeline has no stages.
ImageTensor defense_sample(const Pipeline& g, const ImageTensor& x, const RngStream& rng) {
  if (g.stages.empty()) return x;
  return apply_pipeline(g, x, rng);
}

int sign_of(float v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

void fill_norms(const ImageTensor& x, AttackResult* r) {
  r->l2 = l2_distance(x, r->adversarial);
  r->linf = linf_distance(x, r->adversarial);
}

// Pull one value toward the anchor until |value - anchor| <= bound holds in
// double arithmetic (float rounding in x + bound can overshoot by an ulp).
float clamp_within(float value, float anchor, double bound) {
  double d = double(value) - double(anchor);
  if (d > bound) value = float(double(anchor) + bound);
  if (d < -bound) value = float(double(anchor) - bound);
  while (std::fabs(double(value) - double(anchor)) > bound)
    value = std::nextafterf(value, anchor);
  return value;
}

// Project x_adv onto the budget ball around x (the perturbation shrinks
// toward zero, so values stay inside [0,1] when both endpoints are).  Returns
// true when the iterate sits on the boundary.
bool project_budget(const ImageTensor& x, const PerturbationBudget& b, ImageTensor* x_adv) {
  size_t n = x.data.size();
  if (b.kind == PerturbationBudget::Kind::linf) {
    bool on_edge = false;
    for (size_t i = 0; i < n; ++i) {
      x_adv->data[i] = clamp_within(x_adv->data[i], x.data[i], b.bound);
      if (std::fabs(double(x_adv->data[i]) - double(x.data[i])) >= b.bound * (1 - 1e-9))
        on_edge = true;
    }
    return on_edge;
  }
  double radius = b.bound * double(n);  // the l2 metric is count-normalized
  double ss = 0;
  for (size_t i = 0; i < n; ++i) {
    double d = double(x_adv->data[i]) - double(x.data[i]);
    ss += d * d;
  }
  double norm = std::sqrt(ss);
  bool on_edge = norm >= radius * (1 - 1e-9);
  // Scale the perturbation back onto the sphere; float rounding can leave the
  // recomputed norm a hair outside, so repeat until it verifies in double.
  for (int pass = 0; pass < 100 && norm > radius; ++pass) {
    double s = radius / norm * (pass == 0 ? 1.0 : 1.0 - 1e-9);
    for (size_t i = 0; i < n; ++i)
      x_adv->data[i] = float(double(x.data[i]) + s * (double(x_adv->data[i]) - double(x.data[i])));
    ss = 0;
    for (size_t i = 0; i < n; ++i) {
      double d = double(x_adv->data[i]) - double(x.data[i]);
      ss += d * d;
    }
    norm = std::sqrt(ss);
  }
  return on_edge;
}

// Shared round loop behind pgd / bpda / eot / adaptive.  Per round the
// gradient is averaged over `ensemble` fresh samples of grad_g (identity
// backward through the pipeline), the iterate takes an l2-normalized step, is
// clipped and budget-projected, and a fresh sample of check_g judges success.
// Stops on success, at the round cap, or after 20 consecutive boundary rounds
// without mean-loss improvement > 1e-6.
AttackResult iterative_core(const Classifier& c, const ImageTensor& x, int target,
                            const Pipeline& grad_g, const Pipeline& check_g,
                            const PerturbationBudget& budget, double lr, int max_rounds,
                            int ensemble, const RngStream& rng) {
  require_target(c, x, target);
  require_budget(budget);
  if (lr <= 0) throw std::invalid_argument("attack: lr must be > 0");
  if (max_rounds < 0) throw std::invalid_argument("attack: max_rounds must be >= 0");
  if (ensemble < 1) throw std::invalid_argument("attack: ensemble must be >= 1");

  AttackResult result;
  result.adversarial = x;
  const Pipeline* checker = check_g.stages.empty() ? nullptr : &check_g;
  if (defended_predict(c, checker, x, rng.fork("init-check")) == target) {
    result.success = true;
    return result;
  }

  size_t n = x.data.size();
  ImageTensor x_adv = x;
  double best_loss = std::numeric_limits<double>::infinity();
  int stalled = 0;
  std::vector<ImageTensor> member_grad{size_t(ensemble), ImageTensor{}};
  std::vector<double> member_loss(size_t(ensemble), 0.0);

  for (int round = 1; round <= max_rounds; ++round) {
    std::string prefix = "round-" + std::to_string(round);
#pragma omp parallel for schedule(dynamic)
    for (int e = 0; e < ensemble; ++e) {
      RngStream child = rng.fork(prefix + "-g" + std::to_string(e));
      ImageTensor gx = defense_sample(grad_g, x_adv, child);
      member_grad[size_t(e)] = c.loss_input_gradient(gx, target);
      member_loss[size_t(e)] = c.loss(gx, target);
    }
    std::vector<double> grad(n, 0.0);
    double mean_loss = 0;
    for (int e = 0; e < ensemble; ++e) {  // fixed order: thread-count independent
      for (size_t i = 0; i < n; ++i) grad[i] += double(member_grad[size_t(e)].data[i]);
      mean_loss += member_loss[size_t(e)];
    }
    mean_loss /= ensemble;
    double ss = 0;
    for (double v : grad) ss += v * v;
    double norm = std::sqrt(ss) / ensemble;
    if (norm > 1e-12) {
      double scale = lr / (norm * ensemble);
      for (size_t i = 0; i < n; ++i)
        x_adv.data[i] = float(double(x_adv.data[i]) - scale * grad[i]);
      clip_unit(x_adv);
    }
    bool on_edge = project_budget(x, budget, &x_adv);

    int pred = defended_predict(c, checker, x_adv, rng.fork(prefix + "-check"));
    result.rounds_used = round;
    RoundRecord rec;
    rec.round = round;
    rec.loss = mean_loss;
    rec.l2 = l2_distance(x, x_adv);
    rec.linf = linf_distance(x, x_adv);
    rec.success = pred == target;
    result.trace.push_back(rec);
    if (rec.success) {
      result.success = true;
      break;
    }
    if (mean_loss < best_loss - 1e-6) {
      best_loss = mean_loss;
      stalled = 0;
    } else if (on_edge) {
      if (++stalled >= 20) break;
    }
  }
  result.adversarial = x_adv;
  fill_norms(x, &result);
  return result;
}

Pipeline concat(const Pipeline& a, const Pipeline& b) {
  Pipeline out = a;
  out.stages.insert(out.stages.end(), b.stages.begin(), b.stages.end());
  return out;
}

AttackConfig attack_config_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("attack config must be a JSON object");
  static const char* allowed[] = {"kind",    "budget", "lr", "max_rounds", "ensemble",
                                 "epsilon", "iters",  "cw", "split"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) throw std::invalid_argument("attack config: unknown key '" + it.key() + "'");
  }
  AttackConfig cfg;
  if (!doc.contains("kind")) throw std::invalid_argument("attack config: missing 'kind'");
  cfg.kind = doc.at("kind").get<std::string>();
  static const char* kinds[] = {"fgsm", "ifgsm", "pgd", "cw", "bpda", "eot", "bpda_eot", "adaptive"};
  bool known = false;
  for (const char* k : kinds)
    if (cfg.kind == k) known = true;
  if (!known) throw std::invalid_argument("attack config: unknown kind '" + cfg.kind + "'");
  bool linf_kind = cfg.kind == "fgsm" || cfg.kind == "ifgsm";
  if (linf_kind) cfg.budget = PerturbationBudget::linf_default();

  if (doc.contains("budget")) {
    const json& b = doc.at("budget");
    for (auto it = b.begin(); it != b.end(); ++it)
      if (it.key() != "kind" && it.key() != "bound")
        throw std::invalid_argument("attack config: unknown budget key '" + it.key() + "'");
    if (b.contains("kind")) {
      std::string k = b.at("kind").get<std::string>();
      if (k == "l2")
        cfg.budget.kind = PerturbationBudget::Kind::l2;
      else if (k == "linf")
        cfg.budget.kind = PerturbationBudget::Kind::linf;
      else
        throw std::invalid_argument("attack config: budget kind must be l2 or linf");
    }
    if (b.contains("bound")) cfg.budget.bound = b.at("bound").get<double>();
  }
  if (doc.contains("lr")) cfg.lr = doc.at("lr").get<double>();
  if (doc.contains("max_rounds")) cfg.max_rounds = doc.at("max_rounds").get<int>();
  if (doc.contains("ensemble")) cfg.ensemble = doc.at("ensemble").get<int>();
  if (doc.contains("epsilon")) cfg.epsilon = doc.at("epsilon").get<double>();
  if (doc.contains("iters")) cfg.iters = doc.at("iters").get<int>();
  if (doc.contains("split")) cfg.split = doc.at("split").get<int>();
  if (doc.contains("cw")) {
    const json& cw = doc.at("cw");
    static const char* cw_keys[] = {"lr", "max_iterations", "binary_search_steps", "initial_c",
                                    "kappa"};
    for (auto it = cw.begin(); it != cw.end(); ++it) {
      bool ok = false;
      for (const char* k : cw_keys)
        if (it.key() == k) ok = true;
      if (!ok) throw std::invalid_argument("attack config: unknown cw key '" + it.key() + "'");
    }
    if (cw.contains("lr")) cfg.cw.lr = cw.at("lr").get<double>();
    if (cw.contains("max_iterations")) cfg.cw.max_iterations = cw.at("max_iterations").get<int>();
    if (cw.contains("binary_search_steps"))
      cfg.cw.binary_search_steps = cw.at("binary_search_steps").get<int>();
    if (cw.contains("initial_c")) cfg.cw.initial_c = cw.at("initial_c").get<double>();
    if (cw.contains("kappa")) cfg.cw.kappa = cw.at("kappa").get<double>();
  }

  if (linf_kind && cfg.budget.kind != PerturbationBudget::Kind::linf)
    throw std::invalid_argument("attack config: " + cfg.kind + " needs an linf budget");
  if (!linf_kind && cfg.budget.kind != PerturbationBudget::Kind::l2)
    throw std::invalid_argument("attack config: " + cfg.kind + " needs an l2 budget");
  if (cfg.budget.bound < 0) throw std::invalid_argument("attack config: budget bound >= 0");
  if (cfg.lr <= 0) throw std::invalid_argument("attack config: lr > 0");
  if (cfg.max_rounds < 0) throw std::invalid_argument("attack config: max_rounds >= 0");
  if (cfg.ensemble < 1) throw std::invalid_argument("attack config: ensemble >= 1");
  if (cfg.epsilon < 0) throw std::invalid_argument("attack config: epsilon >= 0");
  if (cfg.iters < 1) throw std::invalid_argument("attack config: iters >= 1");
  if (cfg.split < 0) throw std::invalid_argument("attack config: split >= 0");
  if (cfg.cw.lr <= 0 || cfg.cw.max_iterations < 1 || cfg.cw.binary_search_steps < 1 ||
      cfg.cw.initial_c <= 0 || cfg.cw.kappa < 0)
    throw std::invalid_argument("attack config: bad cw options");
  return cfg;
}

json attack_config_to_json(const AttackConfig& cfg) {
  return json{
      {"kind", cfg.kind},
      {"budget",
       {{"kind", cfg.budget.kind == PerturbationBudget::Kind::l2 ? "l2" : "linf"},
        {"bound", cfg.budget.bound}}},
      {"lr", cfg.lr},
      {"max_rounds", cfg.max_rounds},
      {"ensemble", cfg.ensemble},
      {"epsilon", cfg.epsilon},
      {"iters", cfg.iters},
      {"split", cfg.split},
      {"cw",
       {{"lr", cfg.cw.lr},
        {"max_iterations", cfg.cw.max_iterations},
        {"binary_search_steps", cfg.cw.binary_search_steps},
        {"initial_c", cfg.cw.initial_c},
        {"kappa", cfg.cw.kappa}}},
  };
}

}  // namespace

int defended_predict(const Classifier& c, const Pipeline* g, const ImageTensor& x, RngStream rng) {
  if (g == nullptr || g->stages.empty()) return c.predict(x);
  return c.predict(apply_pipeline(*g, x, rng));
}

AttackResult ifgsm(const Classifier& c, const ImageTensor& x, int target, double epsilon,
                   int iters) {
  require_target(c, x, target);
  if (epsilon < 0) throw std::invalid_argument("attack: epsilon must be >= 0");
  if (iters < 1) throw std::invalid_argument("attack: iters must be >= 1");

  PerturbationBudget ball{PerturbationBudget::Kind::linf, epsilon};
  double step = epsilon / iters;
  AttackResult result;
  ImageTensor x_adv = x;
  for (int it = 1; it <= iters; ++it) {
    ImageTensor g = c.loss_input_gradient(x_adv, target);
    for (size_t i = 0; i < g.data.size(); ++i)
      x_adv.data[i] = float(double(x_adv.data[i]) - step * sign_of(g.data[i]));
    clip_unit(x_adv);
    project_budget(x, ball, &x_adv);
    RoundRecord rec;
    rec.round = it;
    rec.loss = c.loss(x_adv, target);
    rec.l2 = l2_distance(x, x_adv);
    rec.linf = linf_distance(x, x_adv);
    rec.success = c.predict(x_adv) == target;
    result.trace.push_back(rec);
  }
  result.adversarial = x_adv;
  result.rounds_used = iters;
  result.success = result.trace.back().success;
  fill_norms(x, &result);
  return result;
}

AttackResult fgsm(const Classifier& c, const ImageTensor& x, int target, double epsilon) {
  return ifgsm(c, x, target, epsilon, 1);
}

AttackResult pgd_l2(const Classifier& c, const ImageTensor& x, int target,
                    const PerturbationBudget& budget, double lr, int max_rounds) {
  RngStream unused(0, "pgd");  // nothing draws from it on the empty pipeline
  return iterative_core(c, x, target, Pipeline{}, Pipeline{}, budget, lr, max_rounds, 1, unused);
}

AttackResult bpda(const Classifier& c, const ImageTensor& x, int target, const Pipeline& g,
                  const PerturbationBudget& budget, double lr, int max_rounds, RngStream& rng) {
  return iterative_core(c, x, target, g, g, budget, lr, max_rounds, 1, rng);
}

AttackResult eot(const Classifier& c, const ImageTensor& x, int target, const Pipeline& g,
                 const PerturbationBudget& budget, double lr, int max_rounds, int ensemble,
                 RngStream& rng) {
  return iterative_core(c, x, target, g, g, budget, lr, max_rounds, ensemble, rng);
}

AttackResult bpda_eot(const Classifier& c, const ImageTensor& x, int target, const Pipeline& g,
                      const PerturbationBudget& budget, double lr, int max_rounds, int ensemble,
                      RngStream& rng) {
  // The pipelines are treated as non-differentiable throughout, so EOT already
  // uses the BPDA identity backward for every ensemble member.
  return eot(c, x, target, g, budget, lr, max_rounds, ensemble, rng);
}

AttackResult adaptive_g1(const Classifier& c, const ImageTensor& x, int target, const Pipeline& g1,
                         const Pipeline& g2, const PerturbationBudget& budget, double lr,
                         int max_rounds, int ensemble, RngStream& rng) {
  return iterative_core(c, x, target, g1, concat(g1, g2), budget, lr, max_rounds, ensemble, rng);
}

AttackResult cw_l2(const Classifier& c, const ImageTensor& x, int target, const CwOptions& opt) {
  require_target(c, x, target);
  require_budget(opt.budget);
  if (opt.lr <= 0 || opt.max_iterations < 1 || opt.binary_search_steps < 1 || opt.initial_c <= 0 ||
      opt.kappa < 0)
    throw std::invalid_argument("attack: bad C&W options");
  if (opt.budget.kind != PerturbationBudget::Kind::l2)
    throw std::invalid_argument("attack: C&W uses an l2 budget");

  AttackResult result;
  result.adversarial = x;
  if (c.predict(x) == target) {
    result.success = true;
    return result;
  }

  size_t n = x.data.size();
  std::vector<double> w0(n);
  for (size_t i = 0; i < n; ++i) {
    double v = std::clamp(double(x.data[i]), 1e-6, 1.0 - 1e-6);
    w0[i] = std::atanh(2.0 * v - 1.0);
  }

  double best_norm = std::numeric_limits<double>::infinity();
  ImageTensor best = x;  // the clean input stands in until an admissible AE exists
  bool found = false;
  int total_iters = 0;

  double cost = opt.initial_c;
  double lo = 0, hi = std::numeric_limits<double>::infinity();
  ImageTensor x_adv(x.height, x.width, x.channels);
  for (int bs = 0; bs < opt.binary_search_steps; ++bs) {
    std::vector<double> w = w0;
    bool run_found = false;
    double run_best_obj = std::numeric_limits<double>::infinity();
    int since_improved = 0;
    for (int it = 0; it < opt.max_iterations; ++it) {
      ++total_iters;
      for (size_t i = 0; i < n; ++i) x_adv.data[i] = float((std::tanh(w[i]) + 1.0) / 2.0);
      std::vector<double> z = c.logits(x_adv);
      int best_other = -1;
      double zo = -std::numeric_limits<double>::infinity();
      for (int k = 0; k < c.num_classes(); ++k)
        if (k != target && z[size_t(k)] > zo) {
          zo = z[size_t(k)];
          best_other = k;
        }
      double margin = zo - z[size_t(target)];
      double dist2 = 0;
      for (size_t i = 0; i < n; ++i) {
        double d = double(x_adv.data[i]) - double(x.data[i]);
        dist2 += d * d;
      }
      double obj = dist2 + cost * std::max(margin, -opt.kappa);

      if (margin < 0) {  // the target logit dominates: candidate AE
        run_found = true;
        double norm = std::sqrt(dist2);
        if (norm / double(n) <= opt.budget.bound && norm < best_norm) {
          best_norm = norm;
          best = x_adv;
          found = true;
        }
      }
      if (obj < run_best_obj - 1e-9) {
        run_best_obj = obj;
        since_improved = 0;
      } else if (++since_improved >= 100) {
        break;
      }

      ImageTensor margin_grad;
      bool active = margin > -opt.kappa;
      if (active) {
        std::vector<double> seed(size_t(c.num_classes()), 0.0);
        seed[size_t(best_other)] = 1.0;
        seed[size_t(target)] = -1.0;
        margin_grad = c.seeded_input_gradient(x_adv, seed);
      }
      for (size_t i = 0; i < n; ++i) {
        double dx = 2.0 * (double(x_adv.data[i]) - double(x.data[i]));
        if (active) dx += cost * double(margin_grad.data[i]);
        double dtanh = 2.0 * double(x_adv.data[i]) * (1.0 - double(x_adv.data[i]));
        w[i] -= opt.lr * dx * dtanh;
      }
    }
    RoundRecord rec;
    rec.round = bs;
    rec.loss = run_best_obj;
    rec.l2 = found ? best_norm / double(n) : l2_distance(x, x_adv);
    rec.success = run_found;
    result.trace.push_back(rec);
    // Bisection on the trade-off constant: shrink after success, grow (then
    // bisect) after failure.
    if (run_found) {
      hi = cost;
      cost = (lo + hi) / 2;
    } else {
      lo = cost;
      cost = std::isinf(hi) ? cost * 10 : (lo + hi) / 2;
    }
  }
  result.rounds_used = total_iters;
  result.success = found;
  result.adversarial = best;
  fill_norms(x, &result);
  return result;
}

AttackConfig parse_attack_config(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("attack config is not valid JSON: ") + e.what());
  }
  try {
    return attack_config_from_json(doc);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("attack config: ") + e.what());
  }
}

std::string serialize_attack_config(const AttackConfig& cfg) {
  return attack_config_to_json(cfg).dump(2);
}

std::string attack_label(const AttackConfig& cfg) {
  if (cfg.kind == "fgsm") return "FGSM";
  if (cfg.kind == "ifgsm") return "I-FGSM";
  if (cfg.kind == "pgd") return "PGD";
  if (cfg.kind == "cw") return "C&W";
  if (cfg.kind == "bpda") return "BPDA";
  if (cfg.kind == "eot") return "EOT";
  if (cfg.kind == "bpda_eot") return "BPDA+EOT";
  if (cfg.kind == "adaptive") return "Adaptive";
  throw std::invalid_argument("attack config: unknown kind '" + cfg.kind + "'");
}

AttackResult run_attack(const AttackConfig& cfg, const Classifier& c, const ImageTensor& x,
                        int target, const Pipeline* defense, RngStream& rng) {
  Pipeline empty;
  const Pipeline& g = defense ? *defense : empty;
  if (cfg.kind == "fgsm") return fgsm(c, x, target, cfg.epsilon);
  if (cfg.kind == "ifgsm") return ifgsm(c, x, target, cfg.epsilon, cfg.iters);
  if (cfg.kind == "pgd") return pgd_l2(c, x, target, cfg.budget, cfg.lr, cfg.max_rounds);
  if (cfg.kind == "cw") {
    CwOptions opt = cfg.cw;
    opt.budget = cfg.budget;
    return cw_l2(c, x, target, opt);
  }
  if (cfg.kind == "bpda") return bpda(c, x, target, g, cfg.budget, cfg.lr, cfg.max_rounds, rng);
  if (cfg.kind == "eot")
    return eot(c, x, target, g, cfg.budget, cfg.lr, cfg.max_rounds, cfg.ensemble, rng);
  if (cfg.kind == "bpda_eot")
    return bpda_eot(c, x, target, g, cfg.budget, cfg.lr, cfg.max_rounds, cfg.ensemble, rng);
  if (cfg.kind == "adaptive") {
    int split = std::min<int>(cfg.split, int(g.stages.size()));
    Pipeline g1, g2;
    g1.stages.assign(g.stages.begin(), g.stages.end() - split);
    g2.stages.assign(g.stages.end() - split, g.stages.end());
    return adaptive_g1(c, x, target, g1, g2, cfg.budget, cfg.lr, cfg.max_rounds, cfg.ensemble, rng);
  }
  throw std::invalid_argument("attack config: unknown kind '" + cfg.kind + "'");
}

}  // namespace fencekit
