#pragma once

// Vanilla federated learning pieces: a full-batch logistic-regression trainer,
// dataset loading/synthesis/partitioning, confusion-matrix evaluation, a
// round-trip-exact text model format, and the sequential training loop that
// hands the model hospital to hospital. The loop is decoupled from messaging:
// it sends models through a caller-supplied callback.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "crypto.hpp"
#include "rng.hpp"

namespace fedtrust::fedlearn {

struct ModelParams {
  std::vector<double> weights;
  double bias = 0.0;
  int version = 0;

  std::size_t dim() const { return weights.size(); }
};

struct Dataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> x;  // row-major, n*d
  std::vector<int> y;     // 0/1 labels

  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x.data() + i * d, d);
  }

  void validate() const {
    if (x.size() != n * d || y.size() != n)
      throw ShapeError("dataset buffers disagree with declared shape");
    for (int label : y)
      if (label != 0 && label != 1) throw ShapeError("labels must be 0 or 1");
  }
};

struct ConfusionMatrix {
  long tp = 0, fp = 0, tn = 0, fn = 0;

  long total() const { return tp + fp + tn + fn; }
  double accuracy() const {
    return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
  }
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 50;
  double threshold = 0.5;

  void validate() const {
    if (!(learning_rate > 0) || !std::isfinite(learning_rate))
      throw ConfigError("learning_rate must be positive and finite");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0))
      throw ConfigError("threshold must lie in [0, 1]");
  }
};

// Numerically stable in both tails.
inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double predict(const ModelParams& model, std::span<const double> features) {
  if (features.size() != model.dim())
    throw ShapeError("feature vector length does not match model dimension");
  double z = model.bias;
  for (std::size_t j = 0; j < features.size(); ++j) z += model.weights[j] * features[j];
  return sigmoid(z);
}

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

// Mean binary cross-entropy and its gradient over the full batch.
inline LossGradient loss_and_gradient(const ModelParams& model, const Dataset& data) {
  if (data.d != model.dim()) throw ShapeError("dataset dimension does not match model");
  LossGradient out;
  out.grad_weights.assign(model.dim(), 0.0);
  const double eps = 1e-12;  // clamp to keep log() finite at saturated predictions
  for (std::size_t i = 0; i < data.n; ++i) {
    const double p = predict(model, data.row(i));
    const double yi = static_cast<double>(data.y[i]);
    out.loss += -(yi * std::log(p + eps) + (1.0 - yi) * std::log(1.0 - p + eps));
    const double err = p - yi;
    const auto row = data.row(i);
    for (std::size_t j = 0; j < data.d; ++j) out.grad_weights[j] += err * row[j];
    out.grad_bias += err;
  }
  const double inv_n = data.n ? 1.0 / static_cast<double>(data.n) : 0.0;
  out.loss *= inv_n;
  for (auto& g : out.grad_weights) g *= inv_n;
  out.grad_bias *= inv_n;
  return out;
}

// Full-batch gradient descent. Value semantics: the input model is untouched,
// the returned model carries version + 1.
inline ModelParams train_local(const ModelParams& model, const Dataset& data,
                               const TrainConfig& config) {
  config.validate();
  data.validate();
  if (data.d != model.dim()) throw ShapeError("dataset dimension does not match model");
  if (data.n == 0) throw ShapeError("cannot train on an empty dataset");
  ModelParams next = model;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    LossGradient lg = loss_and_gradient(next, data);
    for (std::size_t j = 0; j < next.weights.size(); ++j)
      next.weights[j] -= config.learning_rate * lg.grad_weights[j];
    next.bias -= config.learning_rate * lg.grad_bias;
    if (!std::isfinite(next.bias)) throw DivergenceError("bias became non-finite");
    for (double w : next.weights)
      if (!std::isfinite(w)) throw DivergenceError("a weight became non-finite");
  }
  next.version = model.version + 1;
  return next;
}

// Ties (probability exactly at the threshold) count as positive predictions.
inline ConfusionMatrix evaluate(const ModelParams& model, const Dataset& data,
                                double threshold) {
  if (data.d != model.dim()) throw ShapeError("dataset dimension does not match model");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < data.n; ++i) {
    const bool positive = predict(model, data.row(i)) >= threshold;
    const bool truth = data.y[i] == 1;
    if (positive && truth) ++m.tp;
    else if (positive && !truth) ++m.fp;
    else if (!positive && !truth) ++m.tn;
    else ++m.fn;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Model wire format: a line-oriented text encoding that round-trips doubles
// exactly (shortest-round-trip formatting via to_chars).
// ---------------------------------------------------------------------------

namespace detail {
inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw EncodingError("could not format double");
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw EncodingError("malformed double: " + std::string(s));
  return v;
}
}  // namespace detail

inline std::string serialize_model(const ModelParams& model) {
  std::string out = "d=" + std::to_string(model.dim());
  out += "\nversion=" + std::to_string(model.version);
  out += "\nbias=" + detail::format_double(model.bias);
  out += "\nw=";
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    if (j) out += ',';
    out += detail::format_double(model.weights[j]);
  }
  return out;
}

inline ModelParams deserialize_model(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.size() != 4 || lines[0].rfind("d=", 0) != 0 || lines[1].rfind("version=", 0) != 0 ||
      lines[2].rfind("bias=", 0) != 0 || lines[3].rfind("w=", 0) != 0)
    throw EncodingError("malformed model text");
  auto parse_int = [](std::string_view s) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
      throw EncodingError("malformed integer: " + std::string(s));
    return v;
  };
  const int d = parse_int(lines[0].substr(2));
  if (d < 0) throw EncodingError("model dimension cannot be negative");
  ModelParams model;
  model.version = parse_int(lines[1].substr(8));
  model.bias = detail::parse_double(lines[2].substr(5));
  std::string_view w = lines[3].substr(2);
  if (!w.empty()) {
    std::size_t pos = 0;
    while (pos <= w.size()) {
      std::size_t comma = w.find(',', pos);
      std::string_view item =
          comma == std::string_view::npos ? w.substr(pos) : w.substr(pos, comma - pos);
      model.weights.push_back(detail::parse_double(item));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
  }
  if (static_cast<int>(model.weights.size()) != d)
    throw EncodingError("weight count disagrees with declared dimension");
  return model;
}

inline std::string model_hash_hex(const ModelParams& model) {
  return to_hex(crypto::digest(serialize_model(model)));
}

// ---------------------------------------------------------------------------
// Data: synthesis, CSV loading, partitioning
// ---------------------------------------------------------------------------

// Two Gaussian clusters with unit noise; class means sit at ±separation/2 on
// every coordinate, so the means are separation·sqrt(d) apart overall.
inline Dataset make_synthetic(std::size_t n, std::size_t d, double separation,
                              std::uint64_t seed) {
  if (d == 0 || n == 0) throw ShapeError("synthetic dataset needs n >= 1 and d >= 1");
  DetRng rng(seed);
  Dataset ds;
  ds.n = n;
  ds.d = d;
  ds.x.resize(n * d);
  ds.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(rng.u64() & 1);
    ds.y[i] = label;
    const double mu = (label == 1 ? separation / 2.0 : -separation / 2.0);
    for (std::size_t j = 0; j < d; ++j) ds.x[i * d + j] = mu + rng.gaussian();
  }
  return ds;
}

inline void flip_labels(Dataset& ds, double rate, DetRng& rng) {
  if (rate < 0.0 || rate > 1.0) throw ConfigError("label flip rate must lie in [0, 1]");
  for (std::size_t i = 0; i < ds.n; ++i)
    if (rng.uniform01() < rate) ds.y[i] ^= 1;
}

// CSV with a header row; all columns numeric, last column the 0/1 label.
inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file " + path);
  std::string line;
  if (!std::getline(in, line)) throw EncodingError("dataset file is empty");
  Dataset ds;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> fields;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      std::string item = comma == std::string::npos ? line.substr(pos)
                                                    : line.substr(pos, comma - pos);
      fields.push_back(detail::parse_double(item));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields.size() < 2) throw EncodingError("dataset rows need >= 1 feature and a label");
    if (first) {
      ds.d = fields.size() - 1;
      first = false;
    } else if (fields.size() - 1 != ds.d) {
      throw ShapeError("dataset rows have inconsistent width");
    }
    const double label = fields.back();
    if (label != 0.0 && label != 1.0) throw ShapeError("labels must be 0 or 1");
    ds.y.push_back(static_cast<int>(label));
    ds.x.insert(ds.x.end(), fields.begin(), fields.end() - 1);
    ++ds.n;
  }
  if (ds.n == 0) throw EncodingError("dataset has a header but no rows");
  return ds;
}

// Deterministic disjoint split into k parts whose sizes differ by at most one
// (larger parts first). By convention the last part is the validation set.
// The shuffle is hand-rolled Fisher-Yates so the split is identical on every
// toolchain for a given seed.
inline std::vector<Dataset> partition(const Dataset& data, std::size_t k, std::uint64_t seed) {
  data.validate();
  if (k == 0 || data.n < k) throw ShapeError("partition needs 1 <= k <= n");
  std::vector<std::size_t> order(data.n);
  for (std::size_t i = 0; i < data.n; ++i) order[i] = i;
  DetRng rng(seed);
  for (std::size_t i = data.n; i > 1; --i) {
    const std::size_t j = rng.index(i);
    std::swap(order[i - 1], order[j]);
  }
  const std::size_t base = data.n / k;
  const std::size_t rem = data.n % k;
  std::vector<Dataset> parts;
  parts.reserve(k);
  std::size_t cursor = 0;
  for (std::size_t p = 0; p < k; ++p) {
    const std::size_t size = base + (p < rem ? 1 : 0);
    Dataset part;
    part.n = size;
    part.d = data.d;
    part.x.reserve(size * data.d);
    part.y.reserve(size);
    for (std::size_t i = 0; i < size; ++i, ++cursor) {
      const std::size_t src = order[cursor];
      const auto row = data.row(src);
      part.x.insert(part.x.end(), row.begin(), row.end());
      part.y.push_back(data.y[src]);
    }
    parts.push_back(std::move(part));
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Sequential training loop
// ---------------------------------------------------------------------------

struct BatchRecord {
  int batch = 0;  // 0 = untrained benchmark, i = after hospital i
  ConfusionMatrix matrix;
  int model_version = 0;
  std::string model_hash_hex;
};

struct RoundTrace {
  int round = 0;
  std::string hospital;
  int sent_version = 0;
  std::string sent_hash_hex;
  int received_version = 0;
  std::string received_hash_hex;
};

struct FlResult {
  std::vector<BatchRecord> batches;  // one more than the number of hospitals
  std::vector<RoundTrace> lineage;
  ModelParams final_model;
};

// One pass: benchmark the untrained model, then for each hospital in order
// send the current model text, take back the trained text, and benchmark
// again. send_model(index, text) -> reply text; it should throw on refusal or
// loss. on_round(batch_index) fires after every benchmark (bandwidth
// snapshot hook). With zero hospitals the result is the initial benchmark
// alone and the model is returned unchanged.
inline FlResult run_vanilla_fl(
    ModelParams model, const Dataset& validation, const TrainConfig& config,
    const std::vector<std::string>& hospitals,
    const std::function<std::string(std::size_t, const std::string&)>& send_model,
    const std::function<void(int)>& on_round = nullptr) {
  config.validate();
  validation.validate();
  if (validation.d != model.dim())
    throw ShapeError("validation dimension does not match model");
  FlResult out;
  auto benchmark = [&](int index) {
    BatchRecord rec;
    rec.batch = index;
    rec.matrix = evaluate(model, validation, config.threshold);
    rec.model_version = model.version;
    rec.model_hash_hex = model_hash_hex(model);
    out.batches.push_back(rec);
    if (on_round) on_round(index);
  };
  benchmark(0);
  for (std::size_t i = 0; i < hospitals.size(); ++i) {
    const std::string sent_text = serialize_model(model);
    const std::string reply = send_model(i, sent_text);
    ModelParams next = deserialize_model(reply);
    if (next.dim() != model.dim())
      throw ShapeError("hospital " + hospitals[i] + " returned a model of wrong dimension");
    RoundTrace trace;
    trace.round = static_cast<int>(i);
    trace.hospital = hospitals[i];
    trace.sent_version = model.version;
    trace.sent_hash_hex = to_hex(crypto::digest(sent_text));
    trace.received_version = next.version;
    trace.received_hash_hex = to_hex(crypto::digest(reply));
    out.lineage.push_back(trace);
    model = std::move(next);
    benchmark(static_cast<int>(i) + 1);
  }
  out.final_model = std::move(model);
  return out;
}

}  // namespace fedtrust::fedlearn
