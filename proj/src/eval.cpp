#include "cadenet/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "cadenet/egnms.hpp"
#include "cadenet/imaging.hpp"
#include "cadenet/raster_io.hpp"
#include "cadenet/wem.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace cadenet::eval {

int ClassRegistry::id_of(const std::string& name) {
  std::string key = name;
  if (auto it = aliases_.find(key); it != aliases_.end()) key = it->second;
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  const int id = static_cast<int>(names_.size());
  ids_[key] = id;
  names_.push_back(key);
  return id;
}

std::optional<int> ClassRegistry::find(const std::string& name) const {
  std::string key = name;
  if (auto it = aliases_.find(key); it != aliases_.end()) key = it->second;
  if (auto it = ids_.find(key); it != ids_.end()) return it->second;
  return std::nullopt;
}

void ClassRegistry::add_alias(const std::string& from, const std::string& to) {
  aliases_[from] = to;
}

// ---------------------------------------------------------------------------
// VOC parsing: a deliberately forgiving tag scanner (the corpus tolerates
// malformed files by skipping them, so errors must be catchable, not fatal).

namespace {

std::optional<std::string> between(const std::string& text, const std::string& open,
                                   const std::string& close, std::size_t from,
                                   std::size_t* end_pos = nullptr) {
  const auto a = text.find(open, from);
  if (a == std::string::npos) return std::nullopt;
  const auto b = text.find(close, a + open.size());
  if (b == std::string::npos) return std::nullopt;
  if (end_pos) *end_pos = b + close.size();
  return text.substr(a + open.size(), b - a - open.size());
}

double parse_number(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    return v;
  } catch (const std::exception&) {
    throw ParseError(std::string("voc: bad number in ") + what + ": '" + s + "'");
  }
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  const auto b = s.find_last_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  return s.substr(a, b - a + 1);
}

}  // namespace

GtImage parse_voc_text(const std::string& xml, ClassRegistry& classes) {
  if (xml.find("<annotation") == std::string::npos)
    throw ParseError("voc: missing <annotation> root");
  GtImage out;
  if (auto fn = between(xml, "<filename>", "</filename>", 0)) out.image_path = trim(*fn);

  std::size_t pos = 0;
  for (;;) {
    const auto a = xml.find("<object>", pos);
    if (a == std::string::npos) break;
    const auto b = xml.find("</object>", a);
    if (b == std::string::npos) throw ParseError("voc: unterminated <object>");
    const std::string obj = xml.substr(a, b - a);
    pos = b + 9;

    const auto name = between(obj, "<name>", "</name>", 0);
    if (!name) throw ParseError("voc: object without <name>");
    const auto xmin = between(obj, "<xmin>", "</xmin>", 0);
    const auto ymin = between(obj, "<ymin>", "</ymin>", 0);
    const auto xmax = between(obj, "<xmax>", "</xmax>", 0);
    const auto ymax = between(obj, "<ymax>", "</ymax>", 0);
    if (!xmin || !ymin || !xmax || !ymax) throw ParseError("voc: incomplete <bndbox>");

    geometry::LabeledBox lb;
    lb.class_id = classes.id_of(trim(*name));
    lb.box.x1 = parse_number(trim(*xmin), "xmin");
    lb.box.y1 = parse_number(trim(*ymin), "ymin");
    lb.box.x2 = parse_number(trim(*xmax), "xmax");
    lb.box.y2 = parse_number(trim(*ymax), "ymax");
    if (!lb.box.valid()) throw ParseError("voc: degenerate box");
    out.boxes.push_back(lb);
  }
  return out;
}

GtImage parse_voc_file(const std::string& path, ClassRegistry& classes) {
  std::ifstream in(path);
  if (!in) throw ParseError("voc: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  GtImage img = parse_voc_text(ss.str(), classes);
  img.id = fs::path(path).stem().string();
  return img;
}

Corpus load_corpus(const std::string& dir, ClassRegistry& classes) {
  if (!fs::is_directory(dir)) throw std::invalid_argument("corpus: not a directory: " + dir);

  std::map<std::string, std::pair<Condition, double>> manifest;
  const fs::path labels = fs::path(dir) / "labels.txt";
  bool has_labels = false;
  if (fs::exists(labels)) {
    has_labels = true;
    std::ifstream in(labels);
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::string stem, cond;
      double severity = -1.0;
      if (!(ls >> stem >> cond)) continue;
      ls >> severity;
      manifest[stem] = {condition_from_string(cond), severity};
    }
  }

  std::vector<fs::path> xmls;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".xml") xmls.push_back(e.path());
  std::sort(xmls.begin(), xmls.end());

  Corpus corpus;
  corpus.has_labels = has_labels;
  for (const auto& xml : xmls) {
    GtImage img;
    try {
      img = parse_voc_file(xml.string(), classes);
    } catch (const ParseError& e) {
      std::cerr << "corpus: skipping " << xml.string() << " (" << e.what() << ")\n";
      ++corpus.parse_skipped;
      continue;
    }
    const std::string stem = xml.stem().string();
    img.id = stem;
    bool found = false;
    for (const char* ext : {".ppm", ".png", ".pgm"}) {
      fs::path cand = xml;
      cand.replace_extension(ext);
      if (fs::exists(cand)) {
        img.image_path = cand.string();
        found = true;
        break;
      }
    }
    if (!found) {
      std::cerr << "corpus: skipping " << stem << " (no image file)\n";
      ++corpus.parse_skipped;
      continue;
    }
    if (auto it = manifest.find(stem); it != manifest.end()) {
      img.condition = it->second.first;
      img.severity = it->second.second;
    }
    corpus.images.push_back(std::move(img));
  }
  std::sort(corpus.images.begin(), corpus.images.end(),
            [](const GtImage& a, const GtImage& b) { return a.id < b.id; });
  return corpus;
}

// ---------------------------------------------------------------------------
// Matching and aggregation

EvalRecord match_image(const std::vector<geometry::Detection>& dets,
                       const std::vector<geometry::LabeledBox>& gt, double iou_thresh,
                       double conf_thresh) {
  std::vector<const geometry::Detection*> kept;
  for (const auto& d : dets)
    if (d.conf >= conf_thresh) kept.push_back(&d);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto* a, const auto* b) { return a->conf > b->conf; });

  std::vector<char> gt_used(gt.size(), 0);
  EvalRecord rec;
  for (const auto* d : kept) {
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (gt_used[j] || gt[j].class_id != d->class_id) continue;
      const double v = geometry::iou(d->box, gt[j].box);
      if (v >= iou_thresh && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) {
      gt_used[best] = 1;
      ++rec.tp;
    } else {
      ++rec.fp;
    }
  }
  rec.fn = static_cast<long>(gt.size()) - rec.tp;
  rec.precision = rec.tp + rec.fp ? static_cast<double>(rec.tp) / (rec.tp + rec.fp) : 0.0;
  rec.recall = rec.tp + rec.fn ? static_cast<double>(rec.tp) / (rec.tp + rec.fn) : 0.0;
  rec.f1 = rec.precision + rec.recall > 0.0
               ? 2.0 * rec.precision * rec.recall / (rec.precision + rec.recall)
               : 0.0;
  return rec;
}

int flag_of(double delta_f1) {
  if (std::abs(delta_f1) < 0.01) return 0;
  return delta_f1 >= 0.01 ? 1 : 2;
}

double MicroCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

double weighted_macro(const std::vector<std::pair<int, double>>& count_f1) {
  double num = 0.0;
  long den = 0;
  for (const auto& [n, f1] : count_f1) {
    num += static_cast<double>(n) * f1;
    den += n;
  }
  return den > 0 ? num / static_cast<double>(den) : 0.0;
}

namespace {

std::vector<std::pair<int, double>> rows_f1(const std::vector<ConditionRow>& rows, bool c2) {
  std::vector<std::pair<int, double>> out;
  for (const auto& r : rows) out.emplace_back(r.n, c2 ? r.c2.f1() : r.c1.f1());
  return out;
}

}  // namespace

double BenchmarkReport::macro_weighted_c1() const { return weighted_macro(rows_f1(rows, false)); }
double BenchmarkReport::macro_weighted_c2() const { return weighted_macro(rows_f1(rows, true)); }

double BenchmarkReport::macro_unweighted_c1() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.c1.f1();
  return s / static_cast<double>(rows.size());
}

double BenchmarkReport::macro_unweighted_c2() const {
  if (rows.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rows) s += r.c2.f1();
  return s / static_cast<double>(rows.size());
}

std::string BenchmarkReport::table() const {
  char buf[256];
  std::string out;
  out += "Cond.      N   C1 F1   C2 F1     dF1    F0    F1    F2\n";
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%-8s %5d  %6.3f  %6.3f  %+6.3f  %4d  %4d  %4d\n",
                  std::string(to_string(r.condition)).c_str(), r.n, r.c1.f1(), r.c2.f1(),
                  r.c2.f1() - r.c1.f1(), r.f0, r.f1, r.f2);
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "%-8s %5d  %6.3f  %6.3f  %+6.3f  %4d  %4d  %4d\n", "Macro",
                images, macro_weighted_c1(), macro_weighted_c2(),
                macro_weighted_c2() - macro_weighted_c1(), f0, f1, f2);
  out += buf;
  std::snprintf(buf, sizeof(buf), "Macro (unweighted mean)  %6.3f  %6.3f  %+6.3f\n",
                macro_unweighted_c1(), macro_unweighted_c2(),
                macro_unweighted_c2() - macro_unweighted_c1());
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "Micro    C1 p=%.4f r=%.4f f1=%.4f | C2 p=%.4f r=%.4f f1=%.4f\n",
                micro_c1.precision(), micro_c1.recall(), micro_c1.f1(), micro_c2.precision(),
                micro_c2.recall(), micro_c2.f1());
  out += buf;
  std::snprintf(buf, sizeof(buf), "Delta Recall (micro): %+.4f   <- headline metric\n",
                delta_recall_micro());
  out += buf;
  out += "Note: ground truth annotated on degraded frames counts recovered objects as FP,\n"
         "so the reported dF1 is a lower bound on the true gain; recall is immune.\n";
  return out;
}

std::string BenchmarkReport::jsonl() const {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j;
    j["image"] = r.image;
    j["variant"] = r.variant == '1' ? "C1" : "C2";
    j["tp"] = r.tp;
    j["fp"] = r.fp;
    j["fn"] = r.fn;
    j["p"] = r.precision;
    j["r"] = r.recall;
    j["f1"] = r.f1;
    j["flag"] = r.flag;
    out += j.dump();
    out += '\n';
  }
  return out;
}

BenchmarkReport run_benchmark(const Corpus& corpus, const pipeline::Detector& detector,
                              const cape::FilterConfig& filters, Routing routing,
                              const pipeline::AblationFlags& ablation, double iou, double conf) {
  if (routing == Routing::GtLabel && !corpus.has_labels)
    throw std::invalid_argument("benchmark: routing=gt_label requires a labels.txt manifest");

  BenchmarkReport report;
  std::map<Condition, ConditionRow> rows;

  std::int64_t idx = 0;
  for (const auto& img : corpus.images) {
    const Raster original = io::read_image(img.image_path);
    pipeline::Frame f1{original, idx, 0.0};
    const auto c1_dets = detector.detect(f1);
    EvalRecord rec1 = match_image(c1_dets, img.boxes, iou, conf);

    wem::WeatherEstimate est;
    const imaging::LabStats stats = imaging::lab_stats(original);
    if (routing == Routing::GtLabel) {
      est.condition = img.condition;
      est.severity = wem::severity_for(img.condition, stats);
    } else {
      est = wem::classify(stats);
    }
    if (ablation.fixed_severity_0_6) est.severity = 0.6;

    Raster enhanced;
    if (ablation.cape_passthrough) {
      enhanced = original;
    } else {
      enhanced = cape::enhance(original, est, filters).first;
    }
    pipeline::Frame f2{enhanced, idx, 0.0};
    const auto c2_dets = detector.detect(f2);
    EvalRecord rec2 = match_image(c2_dets, img.boxes, iou, conf);

    const int flag = flag_of(rec2.f1 - rec1.f1);
    rec1.image = rec2.image = img.id;
    rec1.variant = '1';
    rec2.variant = '2';
    rec1.flag = rec2.flag = flag;

    auto& row = rows[img.condition];
    row.condition = img.condition;
    ++row.n;
    row.c1.add(rec1);
    row.c2.add(rec2);
    (flag == 0 ? row.f0 : flag == 1 ? row.f1 : row.f2) += 1;
    (flag == 0 ? report.f0 : flag == 1 ? report.f1 : report.f2) += 1;
    report.micro_c1.add(rec1);
    report.micro_c2.add(rec2);
    report.records.push_back(std::move(rec1));
    report.records.push_back(std::move(rec2));
    ++report.images;
    ++idx;
  }
  for (auto& [c, row] : rows) report.rows.push_back(row);
  return report;
}

}  // namespace cadenet::eval
