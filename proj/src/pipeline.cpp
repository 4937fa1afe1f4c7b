#include "fencekit/pipeline.hpp"

#include <stdexcept>
#include <utility>

#include "json.hpp"

namespace fencekit {

using nlohmann::json;

namespace {

struct KindInfo {
  const char* kind;
  TransformCategory category;
  const char* description;
};

// Index order matches the TransformParams variant alternatives.
constexpr KindInfo kKinds[] = {
    {"SAT", TransformCategory::distortion, "random shift, rotation and zoom"},
    {"RSCA", TransformCategory::distortion, "random crop with changed aspect, resized back"},
    {"RSPA", TransformCategory::distortion, "random upscale padded onto a gray canvas"},
    {"SET", TransformCategory::distortion, "random affine jitter plus smooth elastic warp"},
    {"RDG", TransformCategory::distortion, "random per-cell grid stretching"},
    {"FD", TransformCategory::compression, "two-band DCT quantization, optionally repeated"},
    {"BdR", TransformCategory::compression, "bit-depth reduction"},
    {"R-JPEG", TransformCategory::compression, "DCT round trip at a random quality"},
    {"R-WebP", TransformCategory::compression, "predictive block codec at a random quality"},
    {"SHIELD", TransformCategory::compression, "per-block random-quality DCT quantization"},
    {"SMB", TransformCategory::noise, "straight-line motion blur at a random angle"},
    {"SGB", TransformCategory::noise, "blur, random local pixel swaps, blur again"},
    {"RGN", TransformCategory::noise, "additive Gaussian noise of random strength"},
    {"RSCD", TransformCategory::noise, "random black occlusion boxes"},
    {"PD", TransformCategory::noise, "random local pixel deflections"},
};

int kind_index(const std::string& kind) {
  for (int i = 0; i < 15; ++i)
    if (kind == kKinds[i].kind) return i;
  throw std::invalid_argument("unknown transform kind '" + kind + "'");
}

TransformParams default_params(int index) {
  switch (index) {
    case 0: return SatSpec{};
    case 1: return RscaSpec{};
    case 2: return RspaSpec{};
    case 3: return SetSpec{};
    case 4: return RdgSpec{};
    case 5: return FdSpec{};
    case 6: return BdrSpec{};
    case 7: return RjpegSpec{};
    case 8: return RwebpSpec{};
    case 9: return ShieldSpec{};
    case 10: return SmbSpec{};
    case 11: return SgbSpec{};
    case 12: return RgnSpec{};
    case 13: return RscdSpec{};
    default: return PdSpec{};
  }
}

// Image-independent range checks (size-dependent ones run at apply time).
struct ValidateVisitor {
  void operator()(const SatSpec& s) const {
    if (s.translate < 0 || s.rotate < 0 || s.scale < 0 || s.scale >= 1)
      throw std::invalid_argument("SAT: need translate, rotate >= 0 and 0 <= scale < 1");
  }
  void operator()(const RscaSpec& s) const {
    if (s.theta <= 0 || s.theta > 1 || s.eta <= 0 || s.eta > 1)
      throw std::invalid_argument("RSCA: need theta, eta in (0, 1]");
  }
  void operator()(const RspaSpec& s) const {
    if (s.lambda <= 1.0) throw std::invalid_argument("RSPA: need lambda > 1");
  }
  void operator()(const SetSpec& s) const {
    if (s.theta < 0 || s.sigma < 0 || s.alpha < 0)
      throw std::invalid_argument("SET: need theta, sigma, alpha >= 0");
  }
  void operator()(const RdgSpec& s) const {
    if (s.d < 2 || s.delta < 0 || s.delta >= 1)
      throw std::invalid_argument("RDG: need d >= 2 and 0 <= delta < 1");
  }
  void operator()(const FdSpec& s) const {
    if (s.band_threshold < 0 || s.band_threshold > 64)
      throw std::invalid_argument("FD: need band_threshold in [0, 64]");
    if (s.q_low < 1 || s.q_low > 255 || s.q_high < 1 || s.q_high > 255)
      throw std::invalid_argument("FD: need q_low, q_high in [1, 255]");
    if (s.passes < 1) throw std::invalid_argument("FD: need passes >= 1");
  }
  void operator()(const BdrSpec& s) const {
    if (s.bits < 1 || s.bits > 8) throw std::invalid_argument("BdR: need bits in [1, 8]");
  }
  void operator()(const RjpegSpec& s) const {
    if (s.q_min < 1 || s.q_min > s.q_max || s.q_max > 100)
      throw std::invalid_argument("R-JPEG: need 1 <= q_min <= q_max <= 100");
  }
  void operator()(const RwebpSpec& s) const {
    if (s.q_min < 1 || s.q_min > s.q_max || s.q_max > 100)
      throw std::invalid_argument("R-WebP: need 1 <= q_min <= q_max <= 100");
  }
  void operator()(const ShieldSpec& s) const {
    if (s.qualities.empty()) throw std::invalid_argument("SHIELD: need a nonempty quality set");
    for (int q : s.qualities)
      if (q < 1 || q > 100) throw std::invalid_argument("SHIELD: qualities must be in [1, 100]");
  }
  void operator()(const SmbSpec& s) const {
    if (s.delta < 3) throw std::invalid_argument("SMB: need delta >= 3");
  }
  void operator()(const SgbSpec& s) const {
    if (s.sigma_min < 0 || s.sigma_min > s.sigma_max)
      throw std::invalid_argument("SGB: need 0 <= sigma_min <= sigma_max");
    if (s.delta_candidates.empty() || s.iter_candidates.empty())
      throw std::invalid_argument("SGB: need nonempty candidate lists");
    for (int d : s.delta_candidates)
      if (d < 0) throw std::invalid_argument("SGB: delta candidates must be >= 0");
    for (int i : s.iter_candidates)
      if (i < 1) throw std::invalid_argument("SGB: iteration candidates must be >= 1");
  }
  void operator()(const RgnSpec& s) const {
    if (s.sigma_min < 0 || s.sigma_min > s.sigma_max)
      throw std::invalid_argument("RGN: need 0 <= sigma_min <= sigma_max");
  }
  void operator()(const RscdSpec& s) const {
    if (s.lambda < 0 || s.rho < 1) throw std::invalid_argument("RSCD: need lambda >= 0, rho >= 1");
  }
  void operator()(const PdSpec& s) const {
    if (s.deflections < 0 || s.window < 1)
      throw std::invalid_argument("PD: need deflections >= 0 and window >= 1");
  }
};

void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw std::invalid_argument("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read_if(const json& p, const char* key, T* out) {
  if (p.contains(key)) *out = p.at(key).get<T>();
}

TransformParams params_from_json(int index, const json& p, const std::string& where) {
  TransformParams out = default_params(index);
  switch (index) {
    case 0: {
      check_keys(p, {"translate", "rotate", "scale"}, where);
      auto& s = std::get<SatSpec>(out);
      read_if(p, "translate", &s.translate);
      read_if(p, "rotate", &s.rotate);
      read_if(p, "scale", &s.scale);
      break;
    }
    case 1: {
      check_keys(p, {"theta", "eta"}, where);
      auto& s = std::get<RscaSpec>(out);
      read_if(p, "theta", &s.theta);
      read_if(p, "eta", &s.eta);
      break;
    }
    case 2: {
      check_keys(p, {"lambda"}, where);
      read_if(p, "lambda", &std::get<RspaSpec>(out).lambda);
      break;
    }
    case 3: {
      check_keys(p, {"theta", "sigma", "alpha"}, where);
      auto& s = std::get<SetSpec>(out);
      read_if(p, "theta", &s.theta);
      read_if(p, "sigma", &s.sigma);
      read_if(p, "alpha", &s.alpha);
      break;
    }
    case 4: {
      check_keys(p, {"d", "delta"}, where);
      auto& s = std::get<RdgSpec>(out);
      read_if(p, "d", &s.d);
      read_if(p, "delta", &s.delta);
      break;
    }
    case 5: {
      check_keys(p, {"band_threshold", "q_low", "q_high", "passes"}, where);
      auto& s = std::get<FdSpec>(out);
      read_if(p, "band_threshold", &s.band_threshold);
      read_if(p, "q_low", &s.q_low);
      read_if(p, "q_high", &s.q_high);
      read_if(p, "passes", &s.passes);
      break;
    }
    case 6: {
      check_keys(p, {"bits"}, where);
      read_if(p, "bits", &std::get<BdrSpec>(out).bits);
      break;
    }
    case 7: {
      check_keys(p, {"q_min", "q_max"}, where);
      auto& s = std::get<RjpegSpec>(out);
      read_if(p, "q_min", &s.q_min);
      read_if(p, "q_max", &s.q_max);
      break;
    }
    case 8: {
      check_keys(p, {"q_min", "q_max"}, where);
      auto& s = std::get<RwebpSpec>(out);
      read_if(p, "q_min", &s.q_min);
      read_if(p, "q_max", &s.q_max);
      break;
    }
    case 9: {
      check_keys(p, {"qualities"}, where);
      read_if(p, "qualities", &std::get<ShieldSpec>(out).qualities);
      break;
    }
    case 10: {
      check_keys(p, {"delta"}, where);
      read_if(p, "delta", &std::get<SmbSpec>(out).delta);
      break;
    }
    case 11: {
      check_keys(p, {"sigma_min", "sigma_max", "delta_candidates", "iter_candidates"}, where);
      auto& s = std::get<SgbSpec>(out);
      read_if(p, "sigma_min", &s.sigma_min);
      read_if(p, "sigma_max", &s.sigma_max);
      read_if(p, "delta_candidates", &s.delta_candidates);
      read_if(p, "iter_candidates", &s.iter_candidates);
      break;
    }
    case 12: {
      check_keys(p, {"sigma_min", "sigma_max"}, where);
      auto& s = std::get<RgnSpec>(out);
      read_if(p, "sigma_min", &s.sigma_min);
      read_if(p, "sigma_max", &s.sigma_max);
      break;
    }
    case 13: {
      check_keys(p, {"lambda", "rho"}, where);
      auto& s = std::get<RscdSpec>(out);
      read_if(p, "lambda", &s.lambda);
      read_if(p, "rho", &s.rho);
      break;
    }
    default: {
      check_keys(p, {"deflections", "window"}, where);
      auto& s = std::get<PdSpec>(out);
      read_if(p, "deflections", &s.deflections);
      read_if(p, "window", &s.window);
      break;
    }
  }
  return out;
}

struct ParamsToJson {
  json operator()(const SatSpec& s) const {
    return {{"translate", s.translate}, {"rotate", s.rotate}, {"scale", s.scale}};
  }
  json operator()(const RscaSpec& s) const { return {{"theta", s.theta}, {"eta", s.eta}}; }
  json operator()(const RspaSpec& s) const { return {{"lambda", s.lambda}}; }
  json operator()(const SetSpec& s) const {
    return {{"theta", s.theta}, {"sigma", s.sigma}, {"alpha", s.alpha}};
  }
  json operator()(const RdgSpec& s) const { return {{"d", s.d}, {"delta", s.delta}}; }
  json operator()(const FdSpec& s) const {
    return {{"band_threshold", s.band_threshold},
            {"q_low", s.q_low},
            {"q_high", s.q_high},
            {"passes", s.passes}};
  }
  json operator()(const BdrSpec& s) const { return {{"bits", s.bits}}; }
  json operator()(const RjpegSpec& s) const { return {{"q_min", s.q_min}, {"q_max", s.q_max}}; }
  json operator()(const RwebpSpec& s) const { return {{"q_min", s.q_min}, {"q_max", s.q_max}}; }
  json operator()(const ShieldSpec& s) const { return {{"qualities", s.qualities}}; }
  json operator()(const SmbSpec& s) const { return {{"delta", s.delta}}; }
  json operator()(const SgbSpec& s) const {
    return {{"sigma_min", s.sigma_min},
            {"sigma_max", s.sigma_max},
            {"delta_candidates", s.delta_candidates},
            {"iter_candidates", s.iter_candidates}};
  }
  json operator()(const RgnSpec& s) const {
    return {{"sigma_min", s.sigma_min}, {"sigma_max", s.sigma_max}};
  }
  json operator()(const RscdSpec& s) const { return {{"lambda", s.lambda}, {"rho", s.rho}}; }
  json operator()(const PdSpec& s) const {
    return {{"deflections", s.deflections}, {"window", s.window}};
  }
};

struct ApplyVisitor {
  const ImageTensor& x;
  RngStream& rng;
  ImageTensor operator()(const SatSpec& s) const { return apply_sat(s, x, rng); }
  ImageTensor operator()(const RscaSpec& s) const { return apply_rsca(s, x, rng); }
  ImageTensor operator()(const RspaSpec& s) const { return apply_rspa(s, x, rng); }
  ImageTensor operator()(const SetSpec& s) const { return apply_set(s, x, rng); }
  ImageTensor operator()(const RdgSpec& s) const { return apply_rdg(s, x, rng); }
  ImageTensor operator()(const FdSpec& s) const { return apply_fd(s, x, rng); }
  ImageTensor operator()(const BdrSpec& s) const { return apply_bdr(s, x, rng); }
  ImageTensor operator()(const RjpegSpec& s) const { return apply_rjpeg(s, x, rng); }
  ImageTensor operator()(const RwebpSpec& s) const { return apply_rwebp(s, x, rng); }
  ImageTensor operator()(const ShieldSpec& s) const { return apply_shield(s, x, rng); }
  ImageTensor operator()(const SmbSpec& s) const { return apply_smb(s, x, rng); }
  ImageTensor operator()(const SgbSpec& s) const { return apply_sgb(s, x, rng); }
  ImageTensor operator()(const RgnSpec& s) const { return apply_rgn(s, x, rng); }
  ImageTensor operator()(const RscdSpec& s) const { return apply_rscd(s, x, rng); }
  ImageTensor operator()(const PdSpec& s) const { return apply_pd(s, x, rng); }
};

}  // namespace

const std::vector<RegistryEntry>& registry_list() {
  static const std::vector<RegistryEntry> entries = [] {
    std::vector<RegistryEntry> v;
    for (int i = 0; i < 15; ++i)
      v.push_back({kKinds[i].kind, kKinds[i].category, kKinds[i].description, default_params(i)});
    return v;
  }();
  return entries;
}

TransformSpec make_default_spec(const std::string& kind) {
  int i = kind_index(kind);
  return TransformSpec{kKinds[i].kind, default_params(i), ""};
}

void validate(const TransformSpec& spec) {
  int i = kind_index(spec.kind);
  if (int(spec.params.index()) != i)
    throw std::invalid_argument("parameter record does not match kind '" + spec.kind + "'");
  std::visit(ValidateVisitor{}, spec.params);
}

void validate(const Pipeline& p) {
  if (p.stages.empty()) throw std::invalid_argument("empty pipeline");
  for (size_t i = 0; i < p.stages.size(); ++i) {
    try {
      validate(p.stages[i]);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("stage " + std::to_string(i) + ": " + e.what());
    }
  }
}

ImageTensor apply_transform(const TransformSpec& spec, const ImageTensor& x, RngStream& rng) {
  validate(spec);
  return std::visit(ApplyVisitor{x, rng}, spec.params);
}

ImageTensor apply_pipeline(const Pipeline& p, const ImageTensor& x, const RngStream& rng) {
  validate(p);
  ImageTensor out = x;
  for (size_t i = 0; i < p.stages.size(); ++i) {
    const auto& stage = p.stages[i];
    std::string label = stage.rng_label.empty()
                            ? "stage-" + std::to_string(i) + "-" + stage.kind
                            : stage.rng_label;
    RngStream child = rng.fork(label);
    try {
      out = std::visit(ApplyVisitor{out, child}, stage.params);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("stage " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

Pipeline parse_pipeline(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("pipeline config is not valid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw std::invalid_argument("pipeline config must be a JSON object");
    check_keys(doc, {"stages"}, "pipeline config");
    if (!doc.contains("stages") || !doc.at("stages").is_array())
      throw std::invalid_argument("pipeline config needs a 'stages' array");

    Pipeline p;
    int index = 0;
    for (const auto& stage : doc.at("stages")) {
      std::string where = "stage " + std::to_string(index++);
      if (!stage.is_object()) throw std::invalid_argument(where + " must be an object");
      check_keys(stage, {"kind", "params", "rng_label"}, where);
      if (!stage.contains("kind")) throw std::invalid_argument(where + " is missing 'kind'");
      std::string kind = stage.at("kind").get<std::string>();
      int ki = kind_index(kind);
      TransformSpec spec;
      spec.kind = kKinds[ki].kind;
      spec.params = stage.contains("params")
                        ? params_from_json(ki, stage.at("params"), where + " params")
                        : default_params(ki);
      if (stage.contains("rng_label")) spec.rng_label = stage.at("rng_label").get<std::string>();
      p.stages.push_back(std::move(spec));
    }
    validate(p);
    return p;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("pipeline config: ") + e.what());
  }
}

std::string serialize_pipeline(const Pipeline& p) {
  json stages = json::array();
  for (const auto& s : p.stages) {
    json stage = {{"kind", s.kind}, {"params", std::visit(ParamsToJson{}, s.params)}};
    if (!s.rng_label.empty()) stage["rng_label"] = s.rng_label;
    stages.push_back(std::move(stage));
  }
  return json{{"stages", std::move(stages)}}.dump(2);
}

std::string pipeline_label(const Pipeline& p) {
  std::string out;
  int i = int(p.stages.size()) - 1;
  while (i >= 0) {
    int j = i;
    while (j - 1 >= 0 && p.stages[j - 1].kind == p.stages[i].kind) --j;
    int run = i - j + 1;
    if (!out.empty()) out += "+";
    out += p.stages[i].kind;
    if (run > 1) out += "×" + std::to_string(run);
    i = j - 1;
  }
  return out;
}

}  // namespace fencekit
