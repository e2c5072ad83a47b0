// cadenet: condition-adaptive asynchronous dual-stream perception pipeline.
// Subcommands: enhance, wem, pee, sed, synth, pipeline, benchmark, ablate,
// latency. Exit codes: 0 success, 1 usage error, 2 data error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "cadenet/cape.hpp"
#include "cadenet/detectors.hpp"
#include "cadenet/egnms.hpp"
#include "cadenet/eval.hpp"
#include "cadenet/imaging.hpp"
#include "cadenet/pee.hpp"
#include "cadenet/pipeline.hpp"
#include "cadenet/raster_io.hpp"
#include "cadenet/sed.hpp"
#include "cadenet/wem.hpp"

namespace fs = std::filesystem;
using namespace cadenet;

namespace {

cape::FilterConfig load_filters(const std::string& path) {
  if (!path.empty()) return cape::load_config(path);
  if (const char* env = std::getenv("CADENET_CONFIG"); env && *env)
    return cape::load_config(env);
  return cape::FilterConfig{};
}

std::vector<Condition> parse_conditions(const std::string& csv) {
  std::vector<Condition> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(condition_from_string(tok));
  }
  if (out.empty()) throw std::invalid_argument("no conditions given");
  return out;
}

int run_enhance(const std::string& cond, double severity, const std::string& config,
                double night_gate, const std::string& in, const std::string& out) {
  cape::FilterConfig cfg = load_filters(config);
  if (night_gate >= 0) cfg.night_theta = night_gate;
  wem::WeatherEstimate est;
  est.condition = condition_from_string(cond);
  est.severity = severity;
  const Raster frame = io::read_image(in);
  auto [enhanced, report] = cape::enhance(frame, est, cfg);
  io::write_image(out, enhanced);
  std::printf("condition=%s severity=%.3f", std::string(to_string(report.condition)).c_str(),
              report.severity);
  if (report.condition == Condition::Fog) std::printf(" alpha=%.3f", report.alpha);
  if (report.condition == Condition::Rain) std::printf(" rho_rain=%.4f", report.rho_rain);
  std::printf("\n");
  for (const auto& [stage, ms] : report.stage_ms)
    std::printf("  %-12s %8.2f ms\n", stage.c_str(), ms);
  return 0;
}

int run_wem(const std::string& image) {
  const Raster frame = io::read_image(image);
  const imaging::LabStats st = imaging::lab_stats(frame);
  const auto est = wem::classify(st);
  std::printf("condition=%s severity=%.4f spread=%.4f\n",
              std::string(to_string(est.condition)).c_str(), est.severity, est.spread);
  std::printf("mu_L=%.2f sigma_L=%.2f mu_S=%.2f rho_e=%.4f r_v=%.3f\n", st.mu_l, st.sigma_l,
              st.mu_s, st.rho_e, st.r_v);
  return 0;
}

int run_pee(const std::string& image, std::string png_out, std::string grid_out) {
  const Raster frame = io::read_image(image);
  const Raster l = frame.channels == 3 ? imaging::lab_l(frame) : frame;
  const auto map = pee::entropy_map(l);
  if (png_out.empty()) png_out = image + ".pee.png";
  if (grid_out.empty()) grid_out = image + ".pee.txt";

  Raster heat(frame.width, frame.height, 1);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x)
      heat.at(x, y) = static_cast<std::uint8_t>(pee::reliability_at(map, x, y) * 255.0 + 0.5);
  io::write_png(png_out, heat);

  std::ofstream grid(grid_out);
  for (int j = 0; j < map.grid.rows(); ++j) {
    for (int i = 0; i < map.grid.cols(); ++i)
      grid << (i ? " " : "") << std::fixed << std::setprecision(4) << map.grid(j, i);
    grid << "\n";
  }
  std::printf("patches %ldx%ld -> %s, %s\n", static_cast<long>(map.grid.rows()),
              static_cast<long>(map.grid.cols()), png_out.c_str(), grid_out.c_str());
  return 0;
}

int run_sed_dump(const std::string& path) {
  auto db = sed::SedDatabase::load(path);
  std::printf("sed database: dim=%d entries=%zu\n", db.dim(), db.size());
  std::size_t i = 0;
  for (const auto& e : db.entries()) {
    std::printf("[%zu] condition=%-5s delta_f1=%+.4f params{cond=%s clahe=%.2f radius=%.0f "
                "sigma=%.0f kernel=%.0f atm=%.4f}\n",
                i++, std::string(to_string(e.condition)).c_str(), e.delta_f1,
                std::string(to_string(e.params.condition)).c_str(), e.params.clahe_clip,
                e.params.inpaint_radius, e.params.bilateral_sigma, e.params.dcp_kernel,
                e.params.atm_pct);
  }
  return 0;
}

int run_synth(const std::string& out, int count, const std::string& conditions, double lo,
              double hi, std::uint64_t seed) {
  eval::generate_corpus(out, count, parse_conditions(conditions), lo, hi, seed);
  std::printf("wrote %d images to %s (labels.txt + VOC xml)\n", count, out.c_str());
  return 0;
}

std::map<std::int64_t, std::vector<geometry::LabeledBox>> sidecar_from(
    const std::vector<eval::SyntheticScene>& seq) {
  std::map<std::int64_t, std::vector<geometry::LabeledBox>> side;
  for (std::size_t i = 0; i < seq.size(); ++i) side[static_cast<std::int64_t>(i)] = seq[i].boxes;
  return side;
}

int run_pipeline(const std::string& source, double fps, const std::string& config,
                 const std::string& ablation, const std::string& out, int frames,
                 const std::string& mode, const std::string& detector_kind,
                 const std::string& condition, double severity, std::uint64_t seed,
                 const std::string& sed_path, const std::string& prompts_path) {
  pipeline::PipelineConfig cfg;
  cfg.t_cam_ms = 1000.0 / fps;
  cfg.filters = load_filters(config);
  cfg.ablation = pipeline::AblationFlags::parse(ablation);
  cfg.sed_path = sed_path;
  if (!prompts_path.empty()) cfg.prompts = sed::load_prompts(prompts_path);

  std::unique_ptr<pipeline::FrameSource> src;
  std::unique_ptr<pipeline::Detector> fast, strong;
  if (source == "synthetic") {
    auto seq = eval::make_sequence(seed, frames, condition_from_string(condition), severity);
    std::vector<Raster> rasters;
    for (auto& s : seq) rasters.push_back(s.degraded);
    src = std::make_unique<pipeline::VectorSource>(std::move(rasters));
    if (detector_kind == "oracle") {
      auto side = sidecar_from(seq);
      fast = std::make_unique<pipeline::OracleDetector>(side);
      strong = std::make_unique<pipeline::OracleDetector>(side);
    }
  } else {
    src = std::make_unique<pipeline::DirectorySource>(source);
    if (detector_kind == "oracle")
      throw std::invalid_argument("oracle detector needs a synthetic source (sidecar GT)");
  }
  if (!fast) {
    fast = std::make_unique<pipeline::ContrastDetector>();
    strong = std::make_unique<pipeline::ContrastDetector>();
  }

  pipeline::RunResult res;
  if (mode == "sim") {
    res = pipeline::run_simulated(*src, *fast, *strong, cfg);
  } else if (mode == "threaded") {
    res = pipeline::run_threaded(*src, *fast, *strong, cfg);
  } else {
    throw std::invalid_argument("mode must be sim or threaded");
  }

  if (!out.empty()) {
    std::ofstream f(out);
    f << res.track_log;
    std::printf("track log -> %s\n", out.c_str());
  }
  std::printf("ablation=%s\n%s", cfg.ablation.summary().c_str(), res.summary().c_str());
  return 0;
}

int run_benchmark_cmd(const std::string& corpus_dir, const std::string& routing,
                      const std::string& config, const std::string& out, double conf, double iou,
                      const std::string& ablation) {
  if (routing != "gt_label" && routing != "wem")
    throw std::invalid_argument("routing must be gt_label or wem");
  eval::ClassRegistry reg;
  auto corpus = eval::load_corpus(corpus_dir, reg);
  pipeline::ContrastDetector detector;
  const auto route = routing == "gt_label" ? eval::Routing::GtLabel : eval::Routing::Wem;
  auto report = eval::run_benchmark(corpus, detector, load_filters(config), route,
                                    pipeline::AblationFlags::parse(ablation), iou, conf);
  std::printf("%s", report.table().c_str());
  if (!out.empty()) {
    fs::create_directories(out);
    std::ofstream(fs::path(out) / "records.jsonl") << report.jsonl();
    std::ofstream(fs::path(out) / "summary.txt") << report.table();
    std::printf("records -> %s/records.jsonl, summary -> %s/summary.txt\n", out.c_str(),
                out.c_str());
  }
  return 0;
}

int run_ablate(const std::string& corpus_dir, const std::string& ids, const std::string& config) {
  eval::ClassRegistry reg;
  auto corpus = eval::load_corpus(corpus_dir, reg);
  pipeline::ContrastDetector detector;
  const auto filters = load_filters(config);

  auto base = eval::run_benchmark(corpus, detector, filters, eval::Routing::GtLabel);
  std::printf("baseline: dRecall=%+.4f dF1(macro)=%+.4f\n", base.delta_recall_micro(),
              base.delta_f1_macro());

  std::stringstream ss(ids);
  std::string id;
  while (std::getline(ss, id, ',')) {
    if (id.empty()) continue;
    auto flags = pipeline::AblationFlags::parse(id);
    auto rep = eval::run_benchmark(corpus, detector, filters, eval::Routing::GtLabel, flags);

    // pipeline-level effect on the same imagery
    std::vector<Raster> rasters;
    for (const auto& img : corpus.images) rasters.push_back(io::read_image(img.image_path));
    pipeline::VectorSource src(std::move(rasters));
    pipeline::PipelineConfig pcfg;
    pcfg.filters = filters;
    pcfg.ablation = flags;
    pcfg.sed_dim = 32;
    auto run = pipeline::run_simulated(src, detector, detector, pcfg);

    std::printf("%-3s dRecall=%+.4f dF1(macro)=%+.4f flags(F0/F1/F2)=%d/%d/%d | "
                "S period mean=%.1f ms p99=%.1f ms q_cycles=%lld\n",
                id.c_str(), rep.delta_recall_micro(), rep.delta_f1_macro(), rep.f0, rep.f1,
                rep.f2, run.mean_s_period(), run.p99_s_period(),
                static_cast<long long>(run.q_cycles));
  }
  return 0;
}

int run_latency(const std::string& op, bool cpu_mode) {
  const int warmup = cpu_mode ? 5 : 10;
  const int timed = cpu_mode ? 100 : 50;

  auto scene = eval::make_scene(13, Condition::Fog, 0.7);
  const Raster frame = scene.degraded;
  const Raster l = imaging::lab_l(frame);

  std::function<void()> body;
  if (op == "egnms") {
    auto rmap = pee::entropy_map(l);
    std::vector<geometry::Detection> ds, dq;
    for (int i = 0; i < 10; ++i) {
      geometry::Detection d;
      d.box = {10.0 + i * 8, 40.0, 40.0 + i * 8, 90.0};
      d.conf = 0.4 + 0.05 * i;
      ds.push_back(d);
      d.box.y1 += 4;
      d.box.y2 += 4;
      dq.push_back(d);
    }
    body = [=] { (void)egnms::fuse(ds, dq, rmap); };
  } else if (op == "pee") {
    body = [=] { (void)pee::entropy_map(l); };
  } else if (op == "clahe") {
    body = [=] { (void)imaging::clahe(l, 2.0); };
  } else if (op == "dcp") {
    body = [=] { (void)cape::dcp_core(frame, 0.78, 15, 0.001); };
  } else if (op == "derain") {
    auto rainy = eval::make_scene(13, Condition::Rain, 0.7);
    body = [rainy] { (void)cape::derain(rainy.degraded, 0.7, cape::RainParams{}); };
  } else if (op == "wem") {
    body = [=] { (void)wem::classify(imaging::lab_stats(frame)); };
  } else if (op == "knn") {
    auto db = std::make_shared<sed::SedDatabase>(64);
    sed::HashEmbedder emb(64);
    for (int i = 0; i < 500; ++i) {
      sed::SedEntry e;
      e.embedding = emb.embed(eval::make_scene(i, Condition::Fog, 0.5, 64, 48).degraded);
      e.delta_f1 = 0.01f * (i % 10);
      db->append(e);
    }
    auto q = emb.embed(frame);
    body = [db, q] { (void)db->knn(q, 5); };
  } else if (op == "hungarian") {
    Eigen::MatrixXd cost = Eigen::MatrixXd::Random(20, 20).cwiseAbs();
    body = [cost] { (void)geometry::hungarian(cost); };
  } else {
    throw std::invalid_argument("unknown op (use egnms|pee|clahe|dcp|derain|wem|knn|hungarian)");
  }

  auto stat = pipeline::measure_latency(op, body, warmup, timed);
  std::printf("%s: %.3f +- %.3f ms  (%d warmup + %d timed)\n", op.c_str(), stat.mean_ms,
              stat.std_ms, warmup, timed);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CADENet: condition-adaptive asynchronous dual-stream enhancement pipeline"};
  app.require_subcommand(1);

  std::string en_cond, en_config, en_in, en_out;
  double en_sev = 0.5, en_night = -1.0;
  auto* enhance = app.add_subcommand("enhance", "Apply the condition filter to one image");
  enhance->footer("Filter defaults: rain{inpaint_method=TELEA, inpaint_radius=3, clahe_clip=1.5,\n"
                  "bilateral_d=5, bilateral_sigma=40}; fog{method=DCP, dcp_kernel=15,\n"
                  "atm_pct=0.001, post_clahe_clip=2.0}; sand{clahe_clip=2.0}; snow{clahe_clip=2.0}.");
  enhance->add_option("--condition", en_cond, "weather condition: rain|fog|sand|snow|clear")
      ->required();
  enhance->add_option("--severity", en_sev, "severity s in [0,1]; fog uses alpha = 0.5 + 0.4 s")
      ->capture_default_str();
  enhance->add_option("--config", en_config, "filter config JSON")->envname("CADENET_CONFIG");
  enhance->add_option("--night-gate", en_night,
                      "route fog to CLAHE when mean L is below this threshold (off by default)");
  enhance->add_option("input", en_in, "input image (.png/.ppm)")->required();
  enhance->add_option("output", en_out, "output image")->required();

  std::string wem_image;
  auto* wem_cmd = app.add_subcommand("wem", "Heuristic weather estimate for one image");
  wem_cmd->add_option("image", wem_image)->required();

  std::string pee_image, pee_png, pee_grid;
  auto* pee_cmd = app.add_subcommand("pee", "Patch-entropy reliability map (16x16 patches)");
  pee_cmd->add_option("image", pee_image)->required();
  pee_cmd->add_option("--png", pee_png, "heat image output (default <image>.pee.png)");
  pee_cmd->add_option("--grid", pee_grid, "text grid output (default <image>.pee.txt)");

  auto* sed_cmd = app.add_subcommand("sed", "Scene-embedding database tools");
  std::string sed_path;
  auto* sed_dump = sed_cmd->add_subcommand("dump", "Print entries of a SED file");
  sed_dump->add_option("path", sed_path)->required();
  sed_cmd->require_subcommand(1);

  std::string sy_out = "corpus", sy_conds = "fog,rain,sand,snow";
  int sy_count = 50;
  double sy_lo = 0.5, sy_hi = 0.9;
  std::uint64_t sy_seed = 1;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic VOC-annotated corpus");
  synth->add_option("--out", sy_out, "output directory")->capture_default_str();
  synth->add_option("--count", sy_count, "number of images")->capture_default_str();
  synth->add_option("--conditions", sy_conds, "comma list")->capture_default_str();
  synth->add_option("--severity-lo", sy_lo)->capture_default_str();
  synth->add_option("--severity-hi", sy_hi)->capture_default_str();
  synth->add_option("--seed", sy_seed)->capture_default_str();

  std::string pl_source = "synthetic", pl_config, pl_ablation, pl_out, pl_mode = "sim";
  std::string pl_detector = "oracle", pl_condition = "fog", pl_sed, pl_prompts;
  double pl_fps = 30.0, pl_severity = 0.7;
  int pl_frames = 150;
  std::uint64_t pl_seed = 1;
  auto* pl = app.add_subcommand("pipeline", "Run the three-thread pipeline");
  pl->add_option("--source", pl_source, "'synthetic' or an image directory")
      ->capture_default_str();
  pl->add_option("--fps", pl_fps, "camera rate; T_cam = 1000/fps ms")->capture_default_str();
  pl->add_option("--config", pl_config, "filter config JSON")->envname("CADENET_CONFIG");
  pl->add_option("--ablation", pl_ablation, "comma list of A1..A7");
  pl->add_option("--out", pl_out, "track log path");
  pl->add_option("--frames", pl_frames, "synthetic frame count")->capture_default_str();
  pl->add_option("--mode", pl_mode, "sim (deterministic) or threaded")->capture_default_str();
  pl->add_option("--detector", pl_detector, "oracle|contrast")->capture_default_str();
  pl->add_option("--condition", pl_condition, "synthetic weather")->capture_default_str();
  pl->add_option("--severity", pl_severity, "synthetic severity")->capture_default_str();
  pl->add_option("--seed", pl_seed)->capture_default_str();
  pl->add_option("--sed-file", pl_sed, "persistent SED database path");
  pl->add_option("--prompts", pl_prompts, "zero-shot prompt list (one per line)");

  std::string bm_corpus, bm_routing = "gt_label", bm_config, bm_out, bm_ablation;
  double bm_conf = 0.25, bm_iou = 0.5;
  auto* bm = app.add_subcommand("benchmark", "C1/C2 evaluation over a VOC corpus");
  bm->add_option("--corpus", bm_corpus, "corpus directory")->required();
  bm->add_option("--routing", bm_routing, "gt_label (upper bound) or wem")->capture_default_str();
  bm->add_option("--config", bm_config, "filter config JSON")->envname("CADENET_CONFIG");
  bm->add_option("--out", bm_out, "output directory for records.jsonl + summary.txt");
  bm->add_option("--conf", bm_conf, "detector confidence threshold")->capture_default_str();
  bm->add_option("--iou", bm_iou, "matching IoU threshold")->capture_default_str();
  bm->add_option("--ablation", bm_ablation, "comma list of A1..A7");

  std::string ab_corpus, ab_ids = "A1,A2,A3,A4,A5,A6,A7", ab_config;
  auto* ab = app.add_subcommand("ablate", "Run the ablation grid over a corpus");
  ab->add_option("--corpus", ab_corpus)->required();
  ab->add_option("--ids", ab_ids, "comma list of A1..A7")->capture_default_str();
  ab->add_option("--config", ab_config)->envname("CADENET_CONFIG");

  std::string lat_op = "egnms";
  bool lat_cpu = false;
  auto* lat = app.add_subcommand("latency", "Per-op latency: 10 warmup + 50 timed calls");
  lat->add_option("--op", lat_op, "egnms|pee|clahe|dcp|derain|wem|knn|hungarian")
      ->capture_default_str();
  lat->add_flag("--cpu", lat_cpu, "CPU discipline: 5 warmup + 100 timed calls");

  app.footer("Protocol defaults: conf=0.25, IoU@0.5, NMS IoU=0.45, tracker gate=0.3,\n"
             "slot spread threshold=0.15, T_cam=33 ms (30 fps). CADENET_CONFIG sets the\n"
             "default filter config path.");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;  // usage errors exit 1
  }

  try {
    if (enhance->parsed())
      return run_enhance(en_cond, en_sev, en_config, en_night, en_in, en_out);
    if (wem_cmd->parsed()) return run_wem(wem_image);
    if (pee_cmd->parsed()) return run_pee(pee_image, pee_png, pee_grid);
    if (sed_cmd->parsed() && sed_dump->parsed()) return run_sed_dump(sed_path);
    if (synth->parsed()) return run_synth(sy_out, sy_count, sy_conds, sy_lo, sy_hi, sy_seed);
    if (pl->parsed())
      return run_pipeline(pl_source, pl_fps, pl_config, pl_ablation, pl_out, pl_frames, pl_mode,
                          pl_detector, pl_condition, pl_severity, pl_seed, pl_sed, pl_prompts);
    if (bm->parsed())
      return run_benchmark_cmd(bm_corpus, bm_routing, bm_config, bm_out, bm_conf, bm_iou,
                               bm_ablation);
    if (ab->parsed()) return run_ablate(ab_corpus, ab_ids, ab_config);
    if (lat->parsed()) return run_latency(lat_op, lat_cpu);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
