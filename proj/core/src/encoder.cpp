#include "ctckd/encoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "ctckd/errors.hpp"
#include "ctckd/rng.hpp"

namespace ctckd {

void EncoderGrads::zero() {
  std::fill(w1.begin(), w1.end(), 0.0);
  std::fill(b1.begin(), b1.end(), 0.0);
  std::fill(w2.begin(), w2.end(), 0.0);
  std::fill(b2.begin(), b2.end(), 0.0);
}

void EncoderGrads::add_scaled(const EncoderGrads& other, double scale) {
  for (size_t i = 0; i < w1.size(); ++i) w1[i] += scale * other.w1[i];
  for (size_t i = 0; i < b1.size(); ++i) b1[i] += scale * other.b1[i];
  for (size_t i = 0; i < w2.size(); ++i) w2[i] += scale * other.w2[i];
  for (size_t i = 0; i < b2.size(); ++i) b2[i] += scale * other.b2[i];
}

TinyEncoder TinyEncoder::init(int feature_dim, int context_radius,
                              int hidden_dim, int num_classes, uint64_t seed) {
  if (feature_dim < 1 || context_radius < 0 || hidden_dim < 1 ||
      num_classes < 2) {
    throw InvalidInputError("bad encoder dimensions");
  }
  TinyEncoder m;
  m.feature_dim = feature_dim;
  m.context_radius = context_radius;
  m.hidden_dim = hidden_dim;
  m.num_classes = num_classes;
  Rng rng(seed);
  const int in = m.input_dim();
  const double scale1 = 1.0 / std::sqrt(in);
  const double scale2 = 1.0 / std::sqrt(hidden_dim);
  m.w1.resize(static_cast<size_t>(hidden_dim) * in);
  for (double& w : m.w1) w = scale1 * (2.0 * rng.uniform() - 1.0);
  m.b1.assign(hidden_dim, 0.0);
  m.w2.resize(static_cast<size_t>(num_classes) * hidden_dim);
  for (double& w : m.w2) w = scale2 * (2.0 * rng.uniform() - 1.0);
  m.b2.assign(num_classes, 0.0);
  return m;
}

EncoderGrads TinyEncoder::zero_grads() const {
  EncoderGrads g;
  g.w1.assign(w1.size(), 0.0);
  g.b1.assign(b1.size(), 0.0);
  g.w2.assign(w2.size(), 0.0);
  g.b2.assign(b2.size(), 0.0);
  return g;
}

namespace {

// Spliced input for frame t: rows t-c..t+c of `features`, zero padded.
void splice(const Matrix& features, int t, int radius, std::vector<double>& z) {
  const int D = features.cols;
  int k = 0;
  for (int offset = -radius; offset <= radius; ++offset) {
    const int src = t + offset;
    if (src < 0 || src >= features.rows) {
      for (int d = 0; d < D; ++d) z[k++] = 0.0;
    } else {
      const auto row = features.row(src);
      for (int d = 0; d < D; ++d) z[k++] = row[d];
    }
  }
}

}  // namespace

Matrix TinyEncoder::logits(const Matrix& features) const {
  if (features.cols != feature_dim) {
    throw InvalidInputError("feature dim mismatch");
  }
  const int T = features.rows;
  const int in = input_dim();
  Matrix out(T, num_classes);
  std::vector<double> z(in), h(hidden_dim);
  for (int t = 0; t < T; ++t) {
    splice(features, t, context_radius, z);
    for (int j = 0; j < hidden_dim; ++j) {
      double acc = b1[j];
      const double* w = &w1[static_cast<size_t>(j) * in];
      for (int k = 0; k < in; ++k) acc += w[k] * z[k];
      h[j] = std::tanh(acc);
    }
    auto row = out.row(t);
    for (int c = 0; c < num_classes; ++c) {
      double acc = b2[c];
      const double* w = &w2[static_cast<size_t>(c) * hidden_dim];
      for (int j = 0; j < hidden_dim; ++j) acc += w[j] * h[j];
      row[c] = acc;
    }
  }
  return out;
}

PosteriorLattice TinyEncoder::lattice(const std::string& utt_id,
                                      const Matrix& features) const {
  return PosteriorLattice::from_logits(utt_id, logits(features));
}

void TinyEncoder::backward(const Matrix& features, const Matrix& dlogits,
                           EncoderGrads& grads) const {
  const int T = features.rows;
  const int in = input_dim();
  std::vector<double> z(in), h(hidden_dim), dh(hidden_dim);
  for (int t = 0; t < T; ++t) {
    splice(features, t, context_radius, z);
    for (int j = 0; j < hidden_dim; ++j) {
      double acc = b1[j];
      const double* w = &w1[static_cast<size_t>(j) * in];
      for (int k = 0; k < in; ++k) acc += w[k] * z[k];
      h[j] = std::tanh(acc);
    }
    const auto g_row = dlogits.row(t);
    for (int c = 0; c < num_classes; ++c) {
      const double g = g_row[c];
      if (g == 0.0) continue;
      grads.b2[c] += g;
      double* gw = &grads.w2[static_cast<size_t>(c) * hidden_dim];
      for (int j = 0; j < hidden_dim; ++j) gw[j] += g * h[j];
    }
    for (int j = 0; j < hidden_dim; ++j) {
      double acc = 0.0;
      for (int c = 0; c < num_classes; ++c) {
        acc += w2[static_cast<size_t>(c) * hidden_dim + j] * g_row[c];
      }
      dh[j] = acc * (1.0 - h[j] * h[j]);
    }
    for (int j = 0; j < hidden_dim; ++j) {
      const double g = dh[j];
      if (g == 0.0) continue;
      grads.b1[j] += g;
      double* gw = &grads.w1[static_cast<size_t>(j) * in];
      for (int k = 0; k < in; ++k) gw[k] += g * z[k];
    }
  }
}

void TinyEncoder::apply_update(const EncoderGrads& step) {
  for (size_t i = 0; i < w1.size(); ++i) w1[i] += step.w1[i];
  for (size_t i = 0; i < b1.size(); ++i) b1[i] += step.b1[i];
  for (size_t i = 0; i < w2.size(); ++i) w2[i] += step.w2[i];
  for (size_t i = 0; i < b2.size(); ++i) b2[i] += step.b2[i];
}

std::vector<double*> TinyEncoder::parameter_view() {
  std::vector<double*> view;
  view.reserve(parameter_count());
  for (double& w : w1) view.push_back(&w);
  for (double& w : b1) view.push_back(&w);
  for (double& w : w2) view.push_back(&w);
  for (double& w : b2) view.push_back(&w);
  return view;
}

std::vector<double> TinyEncoder::flatten_grads(const EncoderGrads& grads) const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  flat.insert(flat.end(), grads.w1.begin(), grads.w1.end());
  flat.insert(flat.end(), grads.b1.begin(), grads.b1.end());
  flat.insert(flat.end(), grads.w2.begin(), grads.w2.end());
  flat.insert(flat.end(), grads.b2.begin(), grads.b2.end());
  return flat;
}

namespace {

constexpr uint32_t kCheckpointMagic = 0x434b454eu;  // "CKEN"
constexpr uint32_t kCheckpointVersion = 1;

void write_u32(std::ostream& out, uint32_t value) {
  unsigned char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = (value >> (8 * i)) & 0xff;
  out.write(reinterpret_cast<const char*>(bytes), 4);
}

uint32_t read_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= uint32_t(bytes[i]) << (8 * i);
  return value;
}

void write_f64_array(std::ostream& out, const std::vector<double>& values) {
  for (double value : values) {
    uint64_t bits;
    std::memcpy(&bits, &value, 8);
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = (bits >> (8 * i)) & 0xff;
    out.write(reinterpret_cast<const char*>(bytes), 8);
  }
}

void read_f64_array(std::istream& in, std::vector<double>& values) {
  for (double& value : values) {
    unsigned char bytes[8];
    in.read(reinterpret_cast<char*>(bytes), 8);
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= uint64_t(bytes[i]) << (8 * i);
    std::memcpy(&value, &bits, 8);
  }
}

}  // namespace

void save_checkpoint(const std::string& path, const TinyEncoder& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("cannot open '" + path + "' for writing");
  write_u32(out, kCheckpointMagic);
  write_u32(out, kCheckpointVersion);
  write_u32(out, static_cast<uint32_t>(model.feature_dim));
  write_u32(out, static_cast<uint32_t>(model.context_radius));
  write_u32(out, static_cast<uint32_t>(model.hidden_dim));
  write_u32(out, static_cast<uint32_t>(model.num_classes));
  write_f64_array(out, model.w1);
  write_f64_array(out, model.b1);
  write_f64_array(out, model.w2);
  write_f64_array(out, model.b2);
  if (!out) throw Error("failed writing checkpoint '" + path + "'");
}

TinyEncoder load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open '" + path + "' for reading");
  if (read_u32(in) != kCheckpointMagic) {
    throw ParseError(path + ": not a checkpoint file");
  }
  if (read_u32(in) != kCheckpointVersion) {
    throw ParseError(path + ": unsupported checkpoint version");
  }
  TinyEncoder m;
  m.feature_dim = static_cast<int>(read_u32(in));
  m.context_radius = static_cast<int>(read_u32(in));
  m.hidden_dim = static_cast<int>(read_u32(in));
  m.num_classes = static_cast<int>(read_u32(in));
  if (!in || m.feature_dim < 1 || m.hidden_dim < 1 || m.num_classes < 2 ||
      m.context_radius < 0) {
    throw ParseError(path + ": corrupt checkpoint header");
  }
  m.w1.resize(static_cast<size_t>(m.hidden_dim) * m.input_dim());
  m.b1.resize(m.hidden_dim);
  m.w2.resize(static_cast<size_t>(m.num_classes) * m.hidden_dim);
  m.b2.resize(m.num_classes);
  read_f64_array(in, m.w1);
  read_f64_array(in, m.b1);
  read_f64_array(in, m.w2);
  read_f64_array(in, m.b2);
  if (!in) throw ParseError(path + ": truncated checkpoint");
  return m;
}

}  // namespace ctckd
