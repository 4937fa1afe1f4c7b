#include "fencekit/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fencekit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Gradient accumulators mirroring the parameter vectors.
struct Grads {
  std::vector<double> conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;

  void resize_like(const std::vector<std::pair<std::string, const std::vector<double>*>>& params) {
    std::vector<double>* slots[6] = {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc_w, &fc_b};
    for (int i = 0; i < 6; ++i) slots[i]->assign(params[size_t(i)].second->size(), 0.0);
  }
  void zero() {
    for (auto* v : {&conv1_w, &conv1_b, &conv2_w, &conv2_b, &fc_w, &fc_b})
      std::fill(v->begin(), v->end(), 0.0);
  }
};

double logsumexp(const std::vector<double>& z) {
  double m = *std::max_element(z.begin(), z.end());
  double s = 0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

// Forward/backward scratch for one sample.  Channel-last layouts throughout:
// value (y, x, k) lives at index (y*W + x)*K + k.
struct ModelWorkspace {
  int S = 0, C = 0, P1 = 0, P2 = 0;
  std::vector<double> a0, z1, a1, p1, z2, a2, p2, logit;
  std::vector<int> idx1, idx2;  // flat argmax source per pooled cell

  static void conv_forward(const std::vector<double>& in, int side, int cin,
                           const std::vector<double>& w, const std::vector<double>& b, int cout,
                           std::vector<double>* out) {
    out->assign(size_t(side) * side * cout, 0.0);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        for (int k = 0; k < cout; ++k) {
          double acc = b[size_t(k)];
          for (int ky = 0; ky < 3; ++ky) {
            int yy = y + ky - 1;
            if (yy < 0 || yy >= side) continue;
            for (int kx = 0; kx < 3; ++kx) {
              int xx = x + kx - 1;
              if (xx < 0 || xx >= side) continue;
              size_t wb = size_t((k * 3 + ky) * 3 + kx) * cin;
              size_t ib = size_t(yy * side + xx) * cin;
              for (int c = 0; c < cin; ++c) acc += w[wb + c] * in[ib + c];
            }
          }
          (*out)[size_t(y * side + x) * cout + k] = acc;
        }
  }

  // Gradient wrt the convolution input (gather form; race-free per input cell).
  static void conv_backward_input(const std::vector<double>& dout, int side, int cout,
                                  const std::vector<double>& w, int cin,
                                  std::vector<double>* din) {
    din->assign(size_t(side) * side * cin, 0.0);
    for (int yy = 0; yy < side; ++yy)
      for (int xx = 0; xx < side; ++xx)
        for (int ky = 0; ky < 3; ++ky) {
          int y = yy - ky + 1;
          if (y < 0 || y >= side) continue;
          for (int kx = 0; kx < 3; ++kx) {
            int x = xx - kx + 1;
            if (x < 0 || x >= side) continue;
            size_t ob = size_t(y * side + x) * cout;
            size_t ib = size_t(yy * side + xx) * cin;
            for (int k = 0; k < cout; ++k) {
              double g = dout[ob + k];
              size_t wb = size_t((k * 3 + ky) * 3 + kx) * cin;
              for (int c = 0; c < cin; ++c) (*din)[ib + c] += g * w[wb + c];
            }
          }
        }
  }

  static void conv_backward_params(const std::vector<double>& in, int side, int cin,
                                   const std::vector<double>& dout, int cout,
                                   std::vector<double>* dw, std::vector<double>* db) {
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        size_t ob = size_t(y * side + x) * cout;
        for (int k = 0; k < cout; ++k) {
          double g = dout[ob + k];
          (*db)[size_t(k)] += g;
          for (int ky = 0; ky < 3; ++ky) {
            int yy = y + ky - 1;
            if (yy < 0 || yy >= side) continue;
            for (int kx = 0; kx < 3; ++kx) {
              int xx = x + kx - 1;
              if (xx < 0 || xx >= side) continue;
              size_t wb = size_t((k * 3 + ky) * 3 + kx) * cin;
              size_t ib = size_t(yy * side + xx) * cin;
              for (int c = 0; c < cin; ++c) (*dw)[wb + c] += g * in[ib + c];
            }
          }
        }
      }
  }

  static void pool_forward(const std::vector<double>& in, int side, int k, std::vector<double>* out,
                           std::vector<int>* idx) {
    int p = side / 2;
    out->assign(size_t(p) * p * k, 0.0);
    idx->assign(size_t(p) * p * k, 0);
    for (int y = 0; y < p; ++y)
      for (int x = 0; x < p; ++x)
        for (int c = 0; c < k; ++c) {
          double best = -std::numeric_limits<double>::infinity();
          int best_i = 0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
              int i = int((size_t((2 * y + dy) * side + 2 * x + dx)) * k) + c;
              if (in[size_t(i)] > best) {  // ties: first in scan order wins
                best = in[size_t(i)];
                best_i = i;
              }
            }
          (*out)[size_t(y * p + x) * k + c] = best;
          (*idx)[size_t(y * p + x) * k + c] = best_i;
        }
  }

  void forward(const Classifier& c, const ImageTensor& x) {
    S = c.side_;
    C = c.channels_;
    P1 = S / 2;
    P2 = S / 4;
    a0.assign(x.data.begin(), x.data.end());
    conv_forward(a0, S, C, c.conv1_w, c.conv1_b, c.c1_, &z1);
    a1 = z1;
    for (double& v : a1) v = std::max(v, 0.0);
    pool_forward(a1, S, c.c1_, &p1, &idx1);
    conv_forward(p1, P1, c.c1_, c.conv2_w, c.conv2_b, c.c2_, &z2);
    a2 = z2;
    for (double& v : a2) v = std::max(v, 0.0);
    pool_forward(a2, P1, c.c2_, &p2, &idx2);
    logit.assign(size_t(c.num_classes_), 0.0);
    for (int t = 0; t < c.num_classes_; ++t) {
      double acc = c.fc_b[size_t(t)];
      size_t wb = size_t(t) * c.fc_in_;
      for (int i = 0; i < c.fc_in_; ++i) acc += c.fc_w[wb + i] * p2[size_t(i)];
      logit[size_t(t)] = acc;
    }
  }

  // Backpropagate dlogits; fills *dinput (size S*S*C) unless null.  When
  // g != nullptr the parameter gradients are accumulated (+=) as well.
  void backward(const Classifier& c, const std::vector<double>& dlogits, std::vector<double>* dinput,
                Grads* g) const {
    std::vector<double> dp2(p2.size(), 0.0);
    for (int t = 0; t < c.num_classes_; ++t) {
      double gl = dlogits[size_t(t)];
      size_t wb = size_t(t) * c.fc_in_;
      if (g) {
        (*g).fc_b[size_t(t)] += gl;
        for (int i = 0; i < c.fc_in_; ++i) (*g).fc_w[wb + i] += gl * p2[size_t(i)];
      }
      for (int i = 0; i < c.fc_in_; ++i) dp2[size_t(i)] += gl * c.fc_w[wb + i];
    }

    std::vector<double> da2(a2.size(), 0.0);
    for (size_t i = 0; i < dp2.size(); ++i) da2[size_t(idx2[i])] += dp2[i];
    for (size_t i = 0; i < da2.size(); ++i)
      if (z2[i] <= 0) da2[i] = 0;  // now dz2

    if (g) conv_backward_params(p1, P1, c.c1_, da2, c.c2_, &g->conv2_w, &g->conv2_b);
    std::vector<double> dp1;
    conv_backward_input(da2, P1, c.c2_, c.conv2_w, c.c1_, &dp1);

    std::vector<double> da1(a1.size(), 0.0);
    for (size_t i = 0; i < dp1.size(); ++i) da1[size_t(idx1[i])] += dp1[i];
    for (size_t i = 0; i < da1.size(); ++i)
      if (z1[i] <= 0) da1[i] = 0;  // now dz1

    if (g) conv_backward_params(a0, S, C, da1, c.c1_, &g->conv1_w, &g->conv1_b);
    if (dinput) conv_backward_input(da1, S, c.c1_, c.conv1_w, C, dinput);
  }

  std::vector<double> softmax() const {
    double lse = logsumexp(logit);
    std::vector<double> p(logit.size());
    for (size_t i = 0; i < logit.size(); ++i) p[i] = std::exp(logit[i] - lse);
    return p;
  }
};

Classifier::Classifier(int side, int channels, int num_classes, RngStream& rng) {
  if (side < 8 || side % 4 != 0)
    throw std::invalid_argument("classifier: side must be >= 8 and divisible by 4");
  if (channels < 1) throw std::invalid_argument("classifier: need channels >= 1");
  if (num_classes < 2) throw std::invalid_argument("classifier: need num_classes >= 2");
  side_ = side;
  channels_ = channels;
  num_classes_ = num_classes;
  fc_in_ = (side / 4) * (side / 4) * c2_;

  // Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)) drawn in storage order;
  // biases start at zero (no draws).
  auto init = [&rng](std::vector<double>* w, size_t n, int fan_in) {
    double b = 1.0 / std::sqrt(double(fan_in));
    w->resize(n);
    for (auto& v : *w) v = rng.uniform(-b, b);
  };
  init(&conv1_w, size_t(c1_) * 3 * 3 * channels_, 3 * 3 * channels_);
  conv1_b.assign(size_t(c1_), 0.0);
  init(&conv2_w, size_t(c2_) * 3 * 3 * c1_, 3 * 3 * c1_);
  conv2_b.assign(size_t(c2_), 0.0);
  init(&fc_w, size_t(num_classes_) * fc_in_, fc_in_);
  fc_b.assign(size_t(num_classes_), 0.0);
}

namespace {
void require_input(const Classifier& c, const ImageTensor& x) {
  if (x.height != c.side() || x.width != c.side() || x.channels != c.channels())
    throw std::invalid_argument("classifier: input shape mismatch");
}
}  // namespace

std::vector<double> Classifier::logits(const ImageTensor& x) const {
  require_input(*this, x);
  ModelWorkspace ws;
  ws.forward(*this, x);
  return ws.logit;
}

int Classifier::predict(const ImageTensor& x) const {
  std::vector<double> z = logits(x);
  return int(std::max_element(z.begin(), z.end()) - z.begin());
}

double Classifier::loss(const ImageTensor& x, int label) const {
  if (label < 0 || label >= num_classes_) throw std::invalid_argument("classifier: bad label");
  std::vector<double> z = logits(x);
  return logsumexp(z) - z[size_t(label)];
}

ImageTensor Classifier::seeded_input_gradient(const ImageTensor& x,
                                              const std::vector<double>& dlogits) const {
  require_input(*this, x);
  if (int(dlogits.size()) != num_classes_)
    throw std::invalid_argument("classifier: seed vector length mismatch");
  ModelWorkspace ws;
  ws.forward(*this, x);
  std::vector<double> din;
  ws.backward(*this, dlogits, &din, nullptr);
  ImageTensor g(x.height, x.width, x.channels);
  for (size_t i = 0; i < din.size(); ++i) g.data[i] = float(din[i]);
  return g;
}

ImageTensor Classifier::loss_input_gradient(const ImageTensor& x, int label) const {
  require_input(*this, x);
  if (label < 0 || label >= num_classes_) throw std::invalid_argument("classifier: bad label");
  ModelWorkspace ws;
  ws.forward(*this, x);
  std::vector<double> dlogits = ws.softmax();
  dlogits[size_t(label)] -= 1.0;
  std::vector<double> din;
  ws.backward(*this, dlogits, &din, nullptr);
  ImageTensor g(x.height, x.width, x.channels);
  for (size_t i = 0; i < din.size(); ++i) g.data[i] = float(din[i]);
  return g;
}

ImageTensor Classifier::logit_input_gradient(const ImageTensor& x, int k) const {
  if (k < 0 || k >= num_classes_) throw std::invalid_argument("classifier: bad class index");
  std::vector<double> seed(size_t(num_classes_), 0.0);
  seed[size_t(k)] = 1.0;
  return seeded_input_gradient(x, seed);
}

std::vector<std::pair<std::string, std::vector<double>*>> Classifier::parameters() {
  return {{"conv1_w", &conv1_w}, {"conv1_b", &conv1_b}, {"conv2_w", &conv2_w},
          {"conv2_b", &conv2_b}, {"fc_w", &fc_w},       {"fc_b", &fc_b}};
}

std::vector<std::pair<std::string, const std::vector<double>*>> Classifier::parameters() const {
  return {{"conv1_w", &conv1_w}, {"conv1_b", &conv1_b}, {"conv2_w", &conv2_w},
          {"conv2_b", &conv2_b}, {"fc_w", &fc_w},       {"fc_b", &fc_b}};
}

Classifier::TrainReport Classifier::train(const Dataset& train_set, const Dataset& test_set,
                                          const TrainOptions& opt) {
  if (train_set.images.empty()) throw std::invalid_argument("train: empty training set");
  if (train_set.num_classes != num_classes_)
    throw std::invalid_argument("train: dataset class count mismatch");
  for (size_t i = 0; i < train_set.size(); ++i) {
    require_input(*this, train_set.images[i]);
    if (train_set.labels[i] < 0 || train_set.labels[i] >= num_classes_)
      throw std::invalid_argument("train: label out of range");
  }
  if (opt.epochs < 0 || opt.batch_size < 1) throw std::invalid_argument("train: bad options");

  auto params = static_cast<const Classifier&>(*this).parameters();
  Grads grads, velocity;
  grads.resize_like(params);
  velocity.resize_like(params);
  std::vector<double>* gslots[6] = {&grads.conv1_w, &grads.conv1_b, &grads.conv2_w,
                                    &grads.conv2_b, &grads.fc_w,    &grads.fc_b};
  std::vector<double>* vslots[6] = {&velocity.conv1_w, &velocity.conv1_b, &velocity.conv2_w,
                                    &velocity.conv2_b, &velocity.fc_w,    &velocity.fc_b};
  auto wslots = parameters();

  RngStream root(opt.seed, "train");
  size_t n = train_set.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t(0));

  TrainReport report;
  ModelWorkspace ws;
  for (int e = 0; e < opt.epochs; ++e) {
    RngStream er = root.fork("epoch-" + std::to_string(e));
    for (size_t i = n - 1; i > 0; --i) {
      size_t j = size_t(er.uniform_int(0, int64_t(i)));
      std::swap(order[i], order[j]);
    }
    double epoch_loss = 0;
    for (size_t start = 0; start < n; start += size_t(opt.batch_size)) {
      size_t stop = std::min(n, start + size_t(opt.batch_size));
      grads.zero();
      double batch_loss = 0;
      for (size_t s = start; s < stop; ++s) {
        const ImageTensor& x = train_set.images[order[s]];
        int label = train_set.labels[order[s]];
        ws.forward(*this, x);
        double lse = logsumexp(ws.logit);
        batch_loss += lse - ws.logit[size_t(label)];
        std::vector<double> dlogits = ws.softmax();
        dlogits[size_t(label)] -= 1.0;
        ws.backward(*this, dlogits, nullptr, &grads);
      }
      double count = double(stop - start);
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("train: loss diverged (non-finite)");
      epoch_loss += batch_loss;
      for (int p = 0; p < 6; ++p) {
        std::vector<double>& g = *gslots[p];
        std::vector<double>& v = *vslots[p];
        std::vector<double>& w = *wslots[size_t(p)].second;
        for (size_t i = 0; i < w.size(); ++i) {
          v[i] = opt.momentum * v[i] - opt.lr * g[i] / count;
          w[i] += v[i];
        }
      }
    }
    report.final_loss = epoch_loss / double(n);
  }
  report.train_accuracy = accuracy(train_set);
  report.test_accuracy = test_set.images.empty() ? 0.0 : accuracy(test_set);
  return report;
}

double Classifier::accuracy(const Dataset& d) const {
  if (d.images.empty()) throw std::invalid_argument("accuracy: empty dataset");
  int64_t correct = 0;
  int64_t n = int64_t(d.size());
#pragma omp parallel for schedule(static) reduction(+ : correct)
  for (int64_t i = 0; i < n; ++i)
    if (predict(d.images[size_t(i)]) == d.labels[size_t(i)]) ++correct;
  return double(correct) / double(n);
}

void Classifier::save(const std::string& prefix) const {
  auto params = parameters();
  json tensors = json::array();
  size_t offset = 0;
  auto shape_of = [&](const std::string& name) -> std::vector<int> {
    if (name == "conv1_w") return {c1_, 3, 3, channels_};
    if (name == "conv1_b") return {c1_};
    if (name == "conv2_w") return {c2_, 3, 3, c1_};
    if (name == "conv2_b") return {c2_};
    if (name == "fc_w") return {num_classes_, fc_in_};
    return {num_classes_};
  };
  std::ofstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("save: cannot open " + prefix + ".bin");
  for (const auto& [name, vec] : params) {
    tensors.push_back({{"name", name},
                       {"shape", shape_of(name)},
                       {"offset_bytes", offset},
                       {"count", vec->size()}});
    for (double v : *vec) {
      float f = float(v);
      bin.write(reinterpret_cast<const char*>(&f), sizeof f);
    }
    offset += vec->size() * sizeof(float);
  }
  bin.close();
  if (!bin) throw std::runtime_error("save: write failed for " + prefix + ".bin");

  json manifest = {{"format", "fencekit-checkpoint-v1"},
                   {"side", side_},
                   {"channels", channels_},
                   {"num_classes", num_classes_},
                   {"conv1_channels", c1_},
                   {"conv2_channels", c2_},
                   {"dtype", "float32-le"},
                   {"tensors", tensors}};
  std::ofstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("save: cannot open " + prefix + ".json");
  mf << manifest.dump(2) << "\n";
  mf.close();
  if (!mf) throw std::runtime_error("save: write failed for " + prefix + ".json");
}

Classifier Classifier::load(const std::string& prefix) {
  std::ifstream mf(prefix + ".json");
  if (!mf) throw std::runtime_error("load: cannot open " + prefix + ".json");
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw std::runtime_error("load: bad manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "fencekit-checkpoint-v1")
    throw std::runtime_error("load: unrecognized checkpoint format");

  Classifier c;
  c.side_ = manifest.at("side").get<int>();
  c.channels_ = manifest.at("channels").get<int>();
  c.num_classes_ = manifest.at("num_classes").get<int>();
  c.c1_ = manifest.at("conv1_channels").get<int>();
  c.c2_ = manifest.at("conv2_channels").get<int>();
  c.fc_in_ = (c.side_ / 4) * (c.side_ / 4) * c.c2_;

  std::ifstream bin(prefix + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("load: cannot open " + prefix + ".bin");
  auto params = c.parameters();
  for (const auto& t : manifest.at("tensors")) {
    std::string name = t.at("name").get<std::string>();
    size_t count = t.at("count").get<size_t>();
    auto it = std::find_if(params.begin(), params.end(),
                           [&](const auto& p) { return p.first == name; });
    if (it == params.end()) throw std::runtime_error("load: unknown tensor " + name);
    it->second->resize(count);
    bin.seekg(std::streamoff(t.at("offset_bytes").get<size_t>()));
    for (size_t i = 0; i < count; ++i) {
      float f = 0;
      bin.read(reinterpret_cast<char*>(&f), sizeof f);
      (*it->second)[i] = double(f);
    }
    if (!bin) throw std::runtime_error("load: truncated blob for " + name);
  }
  // Sanity: every parameter tensor must have its expected size.
  size_t expect[6] = {size_t(c.c1_) * 3 * 3 * c.channels_, size_t(c.c1_),
                      size_t(c.c2_) * 3 * 3 * c.c1_,       size_t(c.c2_),
                      size_t(c.num_classes_) * c.fc_in_,   size_t(c.num_classes_)};
  for (int i = 0; i < 6; ++i)
    if (params[size_t(i)].second->size() != expect[i])
      throw std::runtime_error("load: tensor size mismatch for " + params[size_t(i)].first);
  return c;
}

Dataset load_dataset_dir(const std::string& root) {
  if (!fs::is_directory(root)) throw std::runtime_error("dataset: no such directory " + root);
  std::vector<fs::path> class_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) class_dirs.push_back(e.path());
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.empty()) throw std::runtime_error("dataset: no class directories in " + root);

  Dataset d;
  d.num_classes = int(class_dirs.size());
  for (size_t cls = 0; cls < class_dirs.size(); ++cls) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(class_dirs[cls]))
      if (e.is_regular_file() && e.path().extension() == ".png") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      d.images.push_back(load_image(f.string()));
      d.labels.push_back(int(cls));
    }
  }
  if (d.images.empty()) throw std::runtime_error("dataset: no images under " + root);
  return d;
}

void save_dataset_dir(const Dataset& d, const std::string& root) {
  if (d.images.size() != d.labels.size())
    throw std::invalid_argument("dataset: image/label count mismatch");
  fs::create_directories(root);
  std::vector<int> counter(size_t(std::max(d.num_classes, 1)), 0);
  char name[32];
  for (size_t i = 0; i < d.images.size(); ++i) {
    int label = d.labels[i];
    if (label < 0 || label >= d.num_classes)
      throw std::invalid_argument("dataset: label out of range");
    char cls_name[16];
    std::snprintf(cls_name, sizeof cls_name, "%02d", label);
    fs::path dir = fs::path(root) / cls_name;
    fs::create_directories(dir);
    std::snprintf(name, sizeof name, "%05d.png", counter[size_t(label)]++);
    save_image(d.images[i], (dir / name).string());
  }
}

}  // namespace fencekit
