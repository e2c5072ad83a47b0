#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "cadenet/raster.hpp"
#include "cadenet/slot.hpp"
#include "cadenet/types.hpp"

namespace cadenet::sed {

// One scene memory: an L2-normalized embedding, the filter parameters that
// were applied, and the proxy quality signal observed for them.
struct SedEntry {
  Eigen::VectorXf embedding;
  Condition condition = Condition::Clear;
  FilterOverride params{};
  float delta_f1 = 0.0f;
};

// Eq.-5 neighbour score: sim * exp(2 * delta_f1).
double neighbour_score(double sim, double delta_f1);

// Flat exact-scan embedding store with optional append-only persistence.
// Expected sizes stay well under 1e5 entries; a full scan is both the
// implementation and its own oracle.
class SedDatabase {
 public:
  explicit SedDatabase(int dim = 2048);

  static SedDatabase load(const std::string& path);
  // Bind to a file for persistent appends; creates/validates the header.
  void attach_file(const std::string& path);

  // Rejects embeddings that are not unit-norm (1e-6) or of the wrong
  // dimension. Persists the record when a file is attached.
  void append(const SedEntry& entry);

  // Top-k by cosine similarity (descending; ties keep insertion order).
  std::vector<std::pair<const SedEntry*, float>> knn(const Eigen::VectorXf& query,
                                                     int k = 5) const;

  // Among the k nearest neighbours with delta_f1 > 0, the params of the
  // argmax of neighbour_score; nullopt when no neighbour qualifies.
  std::optional<FilterOverride> recommend(const Eigen::VectorXf& query, int k = 5) const;

  std::size_t size() const { return entries_.size(); }
  int dim() const { return dim_; }
  const std::vector<SedEntry>& entries() const { return entries_; }

 private:
  int dim_;
  std::vector<SedEntry> entries_;
  std::string path_;
};

// Frame -> unit-norm embedding. Stands in for the production CNN embedder;
// implementations must be deterministic for a fixed input.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual int dim() const = 0;
  virtual Eigen::VectorXf embed(const Raster& frame) const = 0;
};

// Frame + prompt list -> per-prompt scores (zero-shot weather label lives at
// the argmax line index).
class ZeroShotClassifier {
 public:
  virtual ~ZeroShotClassifier() = default;
  virtual std::vector<float> classify(const Raster& frame,
                                      const std::vector<std::string>& prompts) const = 0;
};

// Deterministic stand-in embedder: histogram features mixed through an
// integer hash into a unit vector. Nearby images map to nearby embeddings.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(int dim = 2048, std::uint64_t seed = 0x9e3779b97f4a7c15ull)
      : dim_(dim), seed_(seed) {}
  int dim() const override { return dim_; }
  Eigen::VectorXf embed(const Raster& frame) const override;

 private:
  int dim_;
  std::uint64_t seed_;
};

// Deterministic stand-in zero-shot classifier driven by frame statistics
// (contrast, streak residual, tint, brightness), softmaxed over prompts.
class StatsZeroShot : public ZeroShotClassifier {
 public:
  std::vector<float> classify(const Raster& frame,
                              const std::vector<std::string>& prompts) const override;
};

// Prompt file: one prompt per line; line index == Condition enum value.
std::vector<std::string> load_prompts(const std::string& path);
std::vector<std::string> default_prompts();

}  // namespace cadenet::sed
