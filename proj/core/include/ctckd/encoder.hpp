#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ctckd/types.hpp"

namespace ctckd {

// Parameter gradients / momentum buffers, same shapes as the encoder.
struct EncoderGrads {
  std::vector<double> w1, b1, w2, b2;

  void zero();
  void add_scaled(const EncoderGrads& other, double scale);
};

// One-hidden-layer frame classifier over spliced features: the frame at t
// is concatenated with `context_radius` neighbours on each side (zero padded
// at the edges), passed through tanh, and projected to V+1 logits.
struct TinyEncoder {
  int feature_dim = 0;
  int context_radius = 1;
  int hidden_dim = 0;
  int num_classes = 0;                   // V + 1
  std::vector<double> w1, b1, w2, b2;    // w1: H x input_dim, w2: C x H

  static TinyEncoder init(int feature_dim, int context_radius, int hidden_dim,
                          int num_classes, uint64_t seed);

  int input_dim() const { return feature_dim * (2 * context_radius + 1); }
  size_t parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }

  EncoderGrads zero_grads() const;

  Matrix logits(const Matrix& features) const;  // T x num_classes
  PosteriorLattice lattice(const std::string& utt_id,
                           const Matrix& features) const;

  // Accumulates parameter gradients for dLoss/dlogits into `grads`.
  void backward(const Matrix& features, const Matrix& dlogits,
                EncoderGrads& grads) const;

  void apply_update(const EncoderGrads& step);

  // Flat views over all parameters in a fixed order, for gradient checking.
  std::vector<double*> parameter_view();
  std::vector<double> flatten_grads(const EncoderGrads& grads) const;
};

// Checkpoint: versioned binary with a shape header and little-endian 64-bit
// floats.
void save_checkpoint(const std::string& path, const TinyEncoder& model);
TinyEncoder load_checkpoint(const std::string& path);

}  // namespace ctckd
