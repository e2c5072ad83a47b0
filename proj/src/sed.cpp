#include "cadenet/sed.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include "cadenet/imaging.hpp"

namespace cadenet::sed {

namespace {

constexpr char kMagic[] = "SEDB1";
constexpr std::size_t kHeaderLen = 36;  // "SEDB1 dim=%08d count=%010zu\n"
constexpr std::size_t kCountOffset = 25;

std::size_t record_size(int dim) { return static_cast<std::size_t>(dim) * 4 + 26; }

std::string header_text(int dim, std::size_t count) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s dim=%08d count=%010zu\n", kMagic, dim, count);
  return buf;
}

void write_record(std::ostream& out, const SedEntry& e) {
  out.write(reinterpret_cast<const char*>(e.embedding.data()),
            static_cast<std::streamsize>(e.embedding.size() * 4));
  const std::uint8_t cond = static_cast<std::uint8_t>(e.condition);
  out.write(reinterpret_cast<const char*>(&cond), 1);
  out.write(reinterpret_cast<const char*>(&e.delta_f1), 4);
  const std::uint8_t pcond = static_cast<std::uint8_t>(e.params.condition);
  out.write(reinterpret_cast<const char*>(&pcond), 1);
  const float fields[5] = {e.params.clahe_clip, e.params.inpaint_radius,
                           e.params.bilateral_sigma, e.params.dcp_kernel, e.params.atm_pct};
  out.write(reinterpret_cast<const char*>(fields), sizeof(fields));
}

SedEntry read_record(std::istream& in, int dim) {
  SedEntry e;
  e.embedding.resize(dim);
  in.read(reinterpret_cast<char*>(e.embedding.data()), static_cast<std::streamsize>(dim) * 4);
  std::uint8_t cond = 0;
  in.read(reinterpret_cast<char*>(&cond), 1);
  e.condition = static_cast<Condition>(cond);
  in.read(reinterpret_cast<char*>(&e.delta_f1), 4);
  std::uint8_t pcond = 0;
  in.read(reinterpret_cast<char*>(&pcond), 1);
  e.params.condition = static_cast<Condition>(pcond);
  float fields[5];
  in.read(reinterpret_cast<char*>(fields), sizeof(fields));
  e.params.clahe_clip = fields[0];
  e.params.inpaint_radius = fields[1];
  e.params.bilateral_sigma = fields[2];
  e.params.dcp_kernel = fields[3];
  e.params.atm_pct = fields[4];
  return e;
}

void patch_count(const std::string& path, std::size_t count) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%010zu", count);
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(static_cast<std::streamoff>(kCountOffset));
  f.write(buf, 10);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace

double neighbour_score(double sim, double delta_f1) { return sim * std::exp(2.0 * delta_f1); }

SedDatabase::SedDatabase(int dim) : dim_(dim) {
  if (dim < 1) throw std::invalid_argument("sed: dimension must be >= 1");
}

SedDatabase SedDatabase::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sed: cannot open " + path);
  std::string header(kHeaderLen, '\0');
  in.read(header.data(), static_cast<std::streamsize>(kHeaderLen));
  int dim = 0;
  std::size_t declared = 0;
  if (std::sscanf(header.c_str(), "SEDB1 dim=%d count=%zu", &dim, &declared) != 2 || dim < 1)
    throw std::runtime_error("sed: bad header in " + path);

  in.seekg(0, std::ios::end);
  const std::size_t payload = static_cast<std::size_t>(in.tellg()) - kHeaderLen;
  const std::size_t actual = payload / record_size(dim);  // partial tail ignored
  if (actual != declared)
    std::cerr << "sed: " << path << ": header count " << declared << " != " << actual
              << " complete records, trusting file size\n";

  SedDatabase db(dim);
  in.seekg(static_cast<std::streamoff>(kHeaderLen));
  db.entries_.reserve(actual);
  for (std::size_t i = 0; i < actual; ++i) db.entries_.push_back(read_record(in, dim));
  if (!in) throw std::runtime_error("sed: short read in " + path);
  db.path_ = path;
  return db;
}

void SedDatabase::attach_file(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("sed: cannot create " + path);
    out << header_text(dim_, entries_.size());
    for (const auto& e : entries_) write_record(out, e);
  }
  path_ = path;
}

void SedDatabase::append(const SedEntry& entry) {
  if (entry.embedding.size() != dim_)
    throw std::invalid_argument("sed: embedding dimension mismatch");
  const double norm = entry.embedding.norm();
  if (std::abs(norm - 1.0) > 1e-6)
    throw std::invalid_argument("sed: embedding must be L2-normalized");
  entries_.push_back(entry);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    write_record(out, entry);
    out.flush();
    patch_count(path_, entries_.size());
  }
}

std::vector<std::pair<const SedEntry*, float>> SedDatabase::knn(const Eigen::VectorXf& query,
                                                                int k) const {
  if (query.size() != dim_) throw std::invalid_argument("sed: query dimension mismatch");
  if (std::abs(query.norm() - 1.0) > 1e-6)
    throw std::invalid_argument("sed: query must be L2-normalized");
  std::vector<std::size_t> idx(entries_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<float> sim(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) sim[i] = entries_[i].embedding.dot(query);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
  const std::size_t take = std::min<std::size_t>(k < 0 ? 0 : k, idx.size());
  std::vector<std::pair<const SedEntry*, float>> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.emplace_back(&entries_[idx[i]], sim[idx[i]]);
  return out;
}

std::optional<FilterOverride> SedDatabase::recommend(const Eigen::VectorXf& query, int k) const {
  const auto neighbours = knn(query, k);
  const SedEntry* best = nullptr;
  double best_score = 0.0;
  for (const auto& [entry, sim] : neighbours) {
    if (!(entry->delta_f1 > 0.0f)) continue;  // strict: delta_f1 = 0 excluded
    const double s = neighbour_score(sim, entry->delta_f1);
    if (!best || s > best_score) {
      best = entry;
      best_score = s;
    }
  }
  if (!best) return std::nullopt;
  return best->params;
}

Eigen::VectorXf HashEmbedder::embed(const Raster& frame) const {
  frame.validate();
  // 64-bin luma histogram as the base feature vector.
  std::array<double, 64> hist{};
  const int ch = frame.channels;
  for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
    int v;
    if (ch == 3) {
      v = (frame.data[3 * i] * 299 + frame.data[3 * i + 1] * 587 + frame.data[3 * i + 2] * 114) /
          1000;
    } else {
      v = frame.data[i];
    }
    ++hist[static_cast<std::size_t>(v) >> 2];
  }
  for (auto& hv : hist) hv /= static_cast<double>(frame.pixel_count());

  Eigen::VectorXf v(dim_);
  for (int i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (int j = 0; j < 64; ++j) {
      const std::uint64_t r = splitmix64(seed_ ^ (static_cast<std::uint64_t>(i) * 2654435761ull + j));
      const double w = static_cast<double>(r >> 11) / 9007199254740992.0 * 2.0 - 1.0;  // [-1,1)
      acc += w * hist[j];
    }
    v(i) = static_cast<float>(acc);
  }
  const float norm = v.norm();
  if (norm <= 0.0f) {
    v.setZero();
    v(0) = 1.0f;
    return v;
  }
  return v / norm;
}

std::vector<float> StatsZeroShot::classify(const Raster& frame,
                                           const std::vector<std::string>& prompts) const {
  const imaging::LabStats st = imaging::lab_stats(frame);
  double mu_r = 0, mu_b = 0;
  if (frame.channels == 3) {
    for (std::size_t i = 0; i < frame.pixel_count(); ++i) {
      mu_r += frame.data[3 * i];
      mu_b += frame.data[3 * i + 2];
    }
    mu_r /= static_cast<double>(frame.pixel_count());
    mu_b /= static_cast<double>(frame.pixel_count());
  }

  std::array<double, 5> raw{};
  raw[static_cast<int>(Condition::Rain)] = std::clamp(st.r_v / 6.0, 0.0, 1.0);
  raw[static_cast<int>(Condition::Fog)] = std::clamp(1.0 - st.sigma_l / 40.0, 0.0, 1.0);
  raw[static_cast<int>(Condition::Sand)] =
      std::clamp((mu_r - mu_b) / 40.0, 0.0, 1.0) * std::clamp(1.0 - st.mu_s / 80.0, 0.0, 1.0);
  raw[static_cast<int>(Condition::Snow)] =
      std::clamp((st.mu_l - 150.0) / 80.0, 0.0, 1.0) * std::clamp(1.0 - st.sigma_l / 60.0, 0.0, 1.0);
  raw[static_cast<int>(Condition::Clear)] =
      std::clamp(st.rho_e / 0.15, 0.0, 1.0) * std::clamp(st.sigma_l / 50.0, 0.0, 1.0);

  std::vector<float> scores(prompts.size(), 0.0f);
  double denom = 0.0;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    const double e = i < raw.size() ? std::exp(2.0 * raw[i]) : 1.0;
    scores[i] = static_cast<float>(e);
    denom += e;
  }
  for (auto& s : scores) s = static_cast<float>(s / denom);
  return scores;
}

std::vector<std::string> load_prompts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("prompts: cannot open " + path);
  std::vector<std::string> prompts;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    prompts.push_back(line);
  }
  while (!prompts.empty() && prompts.back().empty()) prompts.pop_back();
  if (prompts.empty()) throw std::runtime_error("prompts: empty file " + path);
  return prompts;
}

std::vector<std::string> default_prompts() {
  return {"a photo of a road in heavy rain", "a photo of a road in dense fog",
          "a photo of a road in a sandstorm", "a photo of a road in snowfall",
          "a photo of a road in clear weather"};
}

}  // namespace cadenet::sed
