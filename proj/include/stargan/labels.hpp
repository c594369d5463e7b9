#ifndef STARGAN_LABELS_HPP_
#define STARGAN_LABELS_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "stargan/rng.hpp"
#include "stargan/tensor.hpp"

namespace stargan {

enum class LabelKind { binary_attributes, categorical };

struct DatasetSpec {
  std::string name;
  LabelKind kind = LabelKind::categorical;
  int64_t dim = 0;
  std::vector<std::string> label_names;

  void validate() const {
    if (dim < 1) throw std::invalid_argument("DatasetSpec '" + name + "': dim must be >= 1");
    if (static_cast<int64_t>(label_names.size()) != dim)
      throw std::invalid_argument("DatasetSpec '" + name + "': label_names size != dim");
    for (size_t i = 0; i < label_names.size(); ++i)
      for (size_t j = i + 1; j < label_names.size(); ++j)
        if (label_names[i] == label_names[j])
          throw std::invalid_argument("DatasetSpec '" + name + "': duplicate label name " +
                                      label_names[i]);
  }

  // kind invariant for a raw per-dataset label vector
  bool label_valid(const std::vector<double>& label) const {
    if (static_cast<int64_t>(label.size()) != dim) return false;
    if (kind == LabelKind::categorical) {
      int ones = 0;
      for (double v : label) {
        if (v != 0.0 && v != 1.0) return false;
        if (v == 1.0) ++ones;
      }
      return ones == 1;
    }
    for (double v : label)
      if (v != 0.0 && v != 1.0) return false;
    return true;
  }
};

// Ordered list of datasets plus the derived label-vector geometry. With a
// single dataset no mask slice exists; with n >= 2 the last n entries of a
// unified label are the one-hot mask marking the dataset of origin.
struct LabelUniverse {
  std::vector<DatasetSpec> datasets;

  int64_t n() const { return static_cast<int64_t>(datasets.size()); }

  int64_t total_label_dim() const {
    int64_t s = 0;
    for (const auto& d : datasets) s += d.dim;
    return s;
  }

  int64_t unified_dim() const {
    return n() >= 2 ? total_label_dim() + n() : total_label_dim();
  }

  bool has_mask() const { return n() >= 2; }

  int64_t slice_offset(int64_t origin) const {
    int64_t off = 0;
    for (int64_t i = 0; i < origin; ++i) off += datasets[i].dim;
    return off;
  }

  void validate() const {
    if (datasets.empty()) throw std::invalid_argument("LabelUniverse: needs >= 1 dataset");
    for (const auto& d : datasets) d.validate();
  }

  int64_t index_of(const std::string& name) const {
    for (int64_t i = 0; i < n(); ++i)
      if (datasets[i].name == name) return i;
    throw std::invalid_argument("LabelUniverse: unknown dataset " + name);
  }
};

struct UnifiedLabel {
  std::vector<double> values;  // length unified_dim
  int64_t origin = 0;
};

inline UnifiedLabel encode_unified(const std::vector<double>& label, int64_t origin,
                                   const LabelUniverse& universe) {
  if (origin < 0 || origin >= universe.n())
    throw std::invalid_argument("encode_unified: origin out of range");
  const DatasetSpec& ds = universe.datasets[origin];
  if (static_cast<int64_t>(label.size()) != ds.dim)
    throw std::invalid_argument("encode_unified: label length " +
                                std::to_string(label.size()) + " != dim " +
                                std::to_string(ds.dim) + " of dataset " + ds.name);
  if (!ds.label_valid(label))
    throw std::invalid_argument("encode_unified: label violates " +
                                std::string(ds.kind == LabelKind::categorical
                                                ? "one-hot"
                                                : "binary {0,1}") +
                                " invariant of dataset " + ds.name);
  UnifiedLabel u;
  u.origin = origin;
  u.values.assign(universe.unified_dim(), 0.0);
  int64_t off = universe.slice_offset(origin);
  for (int64_t i = 0; i < ds.dim; ++i) u.values[off + i] = label[i];
  if (universe.has_mask()) u.values[universe.total_label_dim() + origin] = 1.0;
  return u;
}

inline std::pair<std::vector<double>, int64_t> decode_unified(const UnifiedLabel& u,
                                                              const LabelUniverse& universe) {
  int64_t off = universe.slice_offset(u.origin);
  const DatasetSpec& ds = universe.datasets[u.origin];
  std::vector<double> label(u.values.begin() + off, u.values.begin() + off + ds.dim);
  return {label, u.origin};
}

// Evaluation-only: build a unified vector with a caller-chosen mask, which may
// deliberately disagree with the origin slice (the wrong-mask probe).
inline std::vector<double> encode_with_mask_override(const std::vector<double>& label,
                                                     int64_t origin,
                                                     const std::vector<double>& mask,
                                                     const LabelUniverse& universe) {
  if (static_cast<int64_t>(mask.size()) != universe.n())
    throw std::invalid_argument("encode_with_mask_override: mask length != n");
  int ones = 0;
  for (double v : mask) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("mask must be one-hot");
    if (v == 1.0) ++ones;
  }
  if (ones != 1) throw std::invalid_argument("mask must be one-hot");
  const DatasetSpec& ds = universe.datasets.at(origin);
  if (static_cast<int64_t>(label.size()) != ds.dim)
    throw std::invalid_argument("encode_with_mask_override: label length mismatch");
  std::vector<double> values(universe.total_label_dim() + universe.n(), 0.0);
  int64_t off = universe.slice_offset(origin);
  for (int64_t i = 0; i < ds.dim; ++i) values[off + i] = label[i];
  for (int64_t i = 0; i < universe.n(); ++i) values[universe.total_label_dim() + i] = mask[i];
  return values;
}

// Target labels for a batch: a uniform random permutation of the batch's own
// real labels, so every target is a label combination that actually occurs.
inline std::vector<UnifiedLabel> sample_target_labels(const std::vector<UnifiedLabel>& real,
                                                      RngStream& rng) {
  if (real.empty()) throw std::invalid_argument("sample_target_labels: empty batch");
  for (const auto& u : real)
    if (u.origin != real.front().origin)
      throw std::invalid_argument("sample_target_labels: mixed-origin batch");
  std::vector<UnifiedLabel> out = real;
  rng.shuffle(out);
  return out;
}

// (h, w, unified_dim) tensor with the label copied into every spatial site.
inline Tensor spatial_replicate(const UnifiedLabel& label, int64_t h, int64_t w) {
  if (h < 1 || w < 1) throw std::invalid_argument("spatial_replicate: h, w must be >= 1");
  int64_t k = static_cast<int64_t>(label.values.size());
  Tensor t({h, w, k});
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int64_t c = 0; c < k; ++c) t[(y * w + x) * k + c] = label.values[c];
  return t;
}

// NCHW variant used when feeding the generator: (N, unified_dim, h, w).
inline Tensor replicate_labels_nchw(const std::vector<UnifiedLabel>& labels, int64_t h,
                                    int64_t w) {
  int64_t n = static_cast<int64_t>(labels.size());
  int64_t k = static_cast<int64_t>(labels.front().values.size());
  Tensor t({n, k, h, w});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < k; ++c) {
      double v = labels[i].values[c];
      double* p = t.data() + (i * k + c) * h * w;
      for (int64_t j = 0; j < h * w; ++j) p[j] = v;
    }
  return t;
}

}  // namespace stargan

#endif  // STARGAN_LABELS_HPP_
