#pragma once
// Small differentiable CNN classifier with hand-written backprop.
// Architecture (fixed): conv3x3x16 + ReLU + maxpool2 + conv3x3x32 + ReLU +
// maxpool2 + dense -> logits.  Internal arithmetic is double precision.

#include <cstdint>
#include <string>
#include <vector>

#include "fencekit/image.hpp"
#include "fencekit/rng.hpp"

namespace fencekit {

struct Dataset {
  std::vector<ImageTensor> images;
  std::vector<int> labels;
  int num_classes = 0;

  size_t size() const { return images.size(); }
};

// Load a "<root>/<class>/<n>.png" directory tree (one directory per class,
// class index = sorted directory position).
Dataset load_dataset_dir(const std::string& root);
void save_dataset_dir(const Dataset& d, const std::string& root);

class Classifier {
 public:
  Classifier() = default;
  // Uniform fan-in initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Classifier(int side, int channels, int num_classes, RngStream& rng);

  int side() const { return side_; }
  int channels() const { return channels_; }
  int num_classes() const { return num_classes_; }

  std::vector<double> logits(const ImageTensor& x) const;
  int predict(const ImageTensor& x) const;
  double loss(const ImageTensor& x, int label) const;  // softmax cross-entropy

  // d loss(x, label) / dx.
  ImageTensor loss_input_gradient(const ImageTensor& x, int label) const;
  // d logits[k] / dx.
  ImageTensor logit_input_gradient(const ImageTensor& x, int k) const;
  // d (seed . logits) / dx for an arbitrary seed vector.
  ImageTensor seeded_input_gradient(const ImageTensor& x, const std::vector<double>& dlogits) const;

  // Checkpoint pair: <prefix>.json manifest + <prefix>.bin little-endian
  // float32 blobs.
  void save(const std::string& prefix) const;
  static Classifier load(const std::string& prefix);

  struct TrainOptions {
    int epochs = 8;
    double lr = 0.05;
    double momentum = 0.9;
    int batch_size = 32;
    uint64_t seed = 1;
  };

  struct TrainReport {
    double final_loss = 0;
    double train_accuracy = 0;
    double test_accuracy = 0;
  };

  // Seeded SGD with momentum; bit-deterministic for a given seed.  Throws on
  // divergence (non-finite loss).
  TrainReport train(const Dataset& train_set, const Dataset& test_set, const TrainOptions& opt);

  double accuracy(const Dataset& d) const;

  // Flat parameter access (used by tests and the checkpoint code).
  std::vector<std::pair<std::string, std::vector<double>*>> parameters();
  std::vector<std::pair<std::string, const std::vector<double>*>> parameters() const;

 private:
  friend struct ModelWorkspace;
  int side_ = 0, channels_ = 0, num_classes_ = 0;
  int c1_ = 16, c2_ = 32;  // conv widths (fixed)
  std::vector<double> conv1_w, conv1_b, conv2_w, conv2_b, fc_w, fc_b;
  int fc_in_ = 0;
};

}  // namespace fencekit
