#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cadenet/cape.hpp"
#include "cadenet/pipeline.hpp"
#include "cadenet/raster.hpp"
#include "cadenet/types.hpp"

namespace cadenet::eval {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Maps detection class names to stable ids; aliases collapse onto one name.
class ClassRegistry {
 public:
  int id_of(const std::string& name);                       // registers on first sight
  std::optional<int> find(const std::string& name) const;
  void add_alias(const std::string& from, const std::string& to);
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::map<std::string, int> ids_;
  std::map<std::string, std::string> aliases_;
  std::vector<std::string> names_;
};

struct GtImage {
  std::string id;            // file stem
  std::string image_path;
  Condition condition = Condition::Clear;
  double severity = -1.0;    // generator metadata when known
  std::vector<geometry::LabeledBox> boxes;
};

// Pascal VOC annotation parsing; throws ParseError on malformed input.
GtImage parse_voc_text(const std::string& xml, ClassRegistry& classes);
GtImage parse_voc_file(const std::string& path, ClassRegistry& classes);

struct Corpus {
  std::vector<GtImage> images;  // sorted by id
  int parse_skipped = 0;        // unparseable annotation files
  bool has_labels = false;      // condition manifest present
};

// Directory layout: <stem>.(ppm|png) + <stem>.xml + labels.txt manifest
// ("<stem> <condition> [severity]" per line). Bad annotation files are
// skipped with a warning, matching the harness tolerance.
Corpus load_corpus(const std::string& dir, ClassRegistry& classes);

struct EvalRecord {
  std::string image;
  char variant = '1';  // '1' = C1, '2' = C2
  long tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  int flag = -1;  // per-image flag, shared by both variants
};

// Greedy COCO-style matching at fixed thresholds: detections below `conf`
// are dropped, the rest match the highest-IoU unmatched same-class GT box
// at IoU >= `iou`, in descending confidence order.
EvalRecord match_image(const std::vector<geometry::Detection>& dets,
                       const std::vector<geometry::LabeledBox>& gt, double iou = 0.5,
                       double conf = 0.25);

// F0 = |delta| < 0.01, F1 = improved, F2 = degraded; the boundary belongs
// to the flagged side.
int flag_of(double delta_f1);

struct MicroCounts {
  long tp = 0, fp = 0, fn = 0;
  void add(const EvalRecord& r) { tp += r.tp; fp += r.fp; fn += r.fn; }
  double precision() const { return tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0; }
  double recall() const { return tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0; }
  double f1() const;
};

// Image-count-weighted mean of per-condition F1 (Table-II-style macro).
double weighted_macro(const std::vector<std::pair<int, double>>& count_f1);

struct ConditionRow {
  Condition condition = Condition::Clear;
  int n = 0;
  MicroCounts c1, c2;
  int f0 = 0, f1 = 0, f2 = 0;
};

enum class Routing { GtLabel, Wem };

struct BenchmarkReport {
  std::vector<EvalRecord> records;  // two per image (C1 then C2), image order
  std::vector<ConditionRow> rows;   // per condition, enum order
  MicroCounts micro_c1, micro_c2;
  int images = 0;
  int f0 = 0, f1 = 0, f2 = 0;

  double macro_weighted_c1() const;
  double macro_weighted_c2() const;
  double macro_unweighted_c1() const;
  double macro_unweighted_c2() const;
  double delta_recall_micro() const { return micro_c2.recall() - micro_c1.recall(); }
  double delta_f1_macro() const { return macro_weighted_c2() - macro_weighted_c1(); }

  std::string table() const;   // Table-II-shaped text summary
  std::string jsonl() const;   // one record per line
};

// C1/C2 comparison over a corpus: detector on the original vs detector on
// the enhanced frame, against the same ground truth. Routing GtLabel takes
// the condition from the manifest (upper bound), Wem estimates it.
BenchmarkReport run_benchmark(const Corpus& corpus, const pipeline::Detector& detector,
                              const cape::FilterConfig& filters, Routing routing,
                              const pipeline::AblationFlags& ablation = {},
                              double iou = 0.5, double conf = 0.25);

// ---------------------------------------------------------------------------
// Synthetic corpus generator: flat-textured scenes with rectangular
// high-contrast two-tone objects (several with a zero dark channel and an
// atmosphere-valued sky band), degraded by the forward scattering model
// (fog), additive vertical streaks (rain), or contrast compression
// (sand/snow), each with known severity.

struct SyntheticScene {
  Raster clean;
  Raster degraded;
  std::vector<geometry::LabeledBox> boxes;
  Condition condition = Condition::Clear;
  double severity = 0.0;
  double t0 = 1.0;  // fog transmission actually applied
};

inline constexpr std::array<int, 3> kAtmosphere = {235, 235, 235};

Raster apply_fog(const Raster& clean, double t0, std::array<int, 3> atmo = kAtmosphere);

SyntheticScene make_scene(std::uint64_t seed, Condition condition, double severity, int width = 256,
                          int height = 192);

// Same scene with objects moving at constant velocity; frame i is degraded
// independently (streak positions vary per frame, fog/compression do not).
std::vector<SyntheticScene> make_sequence(std::uint64_t seed, int frames, Condition condition,
                                          double severity, int width = 256, int height = 192);

// Writes img_%04d.ppm + img_%04d.xml + labels.txt under dir.
void generate_corpus(const std::string& dir, int n, const std::vector<Condition>& conditions,
                     double severity_lo, double severity_hi, std::uint64_t seed);

}  // namespace cadenet::eval
