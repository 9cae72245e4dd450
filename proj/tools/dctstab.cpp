// dctstab: stabilize, flow, metrics and synth subcommands.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>

#include "dctstab/error.hpp"
#include "dctstab/flo_io.hpp"
#include "dctstab/frame_io.hpp"
#include "dctstab/metrics.hpp"
#include "dctstab/pipeline.hpp"
#include "dctstab/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dctstab;

namespace {

/// Flags shared by every subcommand that runs motion estimation.
struct CommonFlags {
  std::optional<double> crop_limit;
  std::optional<int> window_radius;
  std::optional<int> cutoff;
  std::optional<double> sigma_p;
  std::optional<int> grid;
  std::optional<int> threads;
  bool affine_only = false;
  std::string config_file;

  void add_to(CLI::App& app, bool stabilize_flags) {
    app.add_option("--cutoff", cutoff, "DCT cutoff R (0..8)");
    app.add_option("--grid", grid, "coefficient grid side");
    app.add_option("--threads", threads, "worker threads");
    app.add_option("--config", config_file, "key = value config file (flags win)");
    if (!stabilize_flags) return;
    app.add_option("--crop-limit", crop_limit, "minimum per-frame crop ratio kappa");
    app.add_option("--window-radius", window_radius, "bilateral window radius W_R");
    app.add_option("--sigma-p", sigma_p, "photometric bandwidth sigma_p");
    app.add_flag("--affine-only", affine_only, "run stage 1 only");
  }

  PipelineConfig resolve() const {
    PipelineConfig c;
    if (!config_file.empty()) c.apply_config_file(config_file);
    if (crop_limit) c.crop_limit = *crop_limit;
    if (window_radius) c.window_radius = *window_radius;
    if (cutoff) c.cutoff = *cutoff;
    if (sigma_p) c.sigma_p = *sigma_p;
    if (grid) c.grid = *grid;
    if (threads) c.threads = *threads;
    if (affine_only) c.affine_only = true;
    c.validate();
    return c;
  }
};

json coeffs_json(const DctCoeffs& c) {
  auto mat = [](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(r, k));
      rows.push_back(row);
    }
    return rows;
  };
  return {{"cutoff", c.cutoff},
          {"grid", {c.grid.grid_h, c.grid.grid_w}},
          {"image", {c.grid.image_h, c.grid.image_w}},
          {"coeff_x", mat(c.coeff_x)},
          {"coeff_y", mat(c.coeff_y)}};
}

json params_json(const SimilarityParams& p) { return {{"r", p.r}, {"s", p.s}, {"tx", p.tx}, {"ty", p.ty}}; }

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ProcessingError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw ProcessingError("cannot write " + path.string());
}

void write_path_csv(const fs::path& path, const ParamSequence& alpha, const ParamSequence& beta) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw ProcessingError("cannot write " + path.string());
  std::fprintf(f, "frame_index,alpha_r,alpha_s,alpha_tx,alpha_ty,beta_r,beta_s,beta_tx,beta_ty\n");
  for (size_t i = 0; i < alpha.size(); ++i)
    std::fprintf(f, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, alpha[i].r, alpha[i].s,
                 alpha[i].tx, alpha[i].ty, beta[i].r, beta[i].s, beta[i].tx, beta[i].ty);
  std::fclose(f);
}

int run_stabilize(const std::string& input, const std::string& output, const CommonFlags& flags,
                  const std::string& dump_paths, const std::string& dump_coeffs) {
  const PipelineConfig config = flags.resolve();
  const FrameDirectory in = read_frame_dir(input);
  const PipelineResult r = stabilize(in.frames, config);

  const fs::path out_dir(output);
  write_frame_dir(out_dir, r.frames, in.names, in.encoding);
  {
    std::ofstream echo(out_dir / "config.txt");
    echo << config.to_key_values();
  }
  write_path_csv(dump_paths.empty() ? out_dir / "paths.csv" : fs::path(dump_paths), r.alpha, r.path.beta);
  if (!dump_coeffs.empty()) {
    json arr = json::array();
    for (size_t i = 0; i < r.residual.size(); ++i) {
      json e = coeffs_json(r.residual[i]);
      e["frame"] = i;
      arr.push_back(e);
    }
    write_json(dump_coeffs, arr);
  }

  json probes = json::array();
  for (const CropProbe& p : r.path.probes)
    probes.push_back({{"z", p.z}, {"min_crop", p.min_crop}, {"feasible", p.feasible}});
  json failed = json::array();
  for (const auto& [i, j] : r.failed_pairs) failed.push_back({i, j});
  const double t = static_cast<double>(in.frames.size());
  json report = {
      {"frames", in.frames.size()},
      {"affine_only", config.affine_only},
      {"crop_ratio", r.crop_ratio},
      {"stage1_crop", r.stage1_crop},
      {"stage2_crop", r.stage2_crop},
      {"min_frame_crop", r.path.min_crop},
      {"z", r.path.slack.z},
      {"next_infeasible_z", finite_or_null(r.path.next_infeasible_z)},
      {"lambda", r.path.slack.lambda},
      {"xi", r.path.slack.xi},
      {"probes", probes},
      {"failed_pairs", failed},
      {"qp", {{"kkt_residual", r.path.qp.kkt_residual}, {"iterations", r.path.qp.iterations},
              {"converged", r.path.qp.converged}}},
      {"timings",
       {{"stage1_flow", r.timings.stage1_flow}, {"stage1_smooth", r.timings.stage1_smooth},
        {"stage1_warp", r.timings.stage1_warp}, {"stage2_flow", r.timings.stage2_flow},
        {"stage2_warp", r.timings.stage2_warp}, {"total", r.timings.total},
        {"seconds_per_frame", r.timings.total / t}}}};
  write_json(out_dir / "report.json", report);
  std::cout << "stabilized " << in.frames.size() << " frames, crop ratio " << r.crop_ratio << ", "
            << r.timings.total / t << " s/frame\n";
  return 0;
}

int run_flow(const std::vector<std::string>& args, const std::string& from_flo, const CommonFlags& flags,
             const std::string& dump_coeffs) {
  const PipelineConfig config = flags.resolve();
  fs::path out;
  DctCoeffs coeffs;
  int h = 0, w = 0;
  if (!from_flo.empty()) {
    if (args.size() != 1) throw InputError("with --from-flo give only the output .flo path");
    out = args[0];
    const FlowField ext = read_flo(from_flo);
    h = ext.height();
    w = ext.width();
    const GridSpec grid = GridSpec::for_image(h, w, config.grid);
    coeffs = project_robust(ext, config.cutoff, grid, config.flow_loss).first;
  } else {
    if (args.size() != 3) throw InputError("expected FRAME_A FRAME_B OUT.flo");
    out = args[2];
    const Frame a = read_frame(args[0]);
    const Frame b = read_frame(args[1]);
    if (a.height() != b.height() || a.width() != b.width())
      throw InputError("dimension mismatch between " + args[0] + " and " + args[1]);
    h = a.height();
    w = a.width();
    coeffs = estimate_pair(a.luma(), b.luma(), config.pyramid(), config.photometric).coeffs;
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_flo(out, evaluate(coeffs, h, w));
  fs::path cpath = dump_coeffs.empty() ? fs::path(out).replace_extension(".json") : fs::path(dump_coeffs);
  write_json(cpath, coeffs_json(coeffs));
  return 0;
}

int run_metrics(const std::string& unstable_dir, const std::string& stabilized_dir, const std::string& out,
                std::optional<double> crop_ratio, const CommonFlags& flags) {
  const PipelineConfig config = flags.resolve();
  const FrameDirectory u = read_frame_dir(unstable_dir);
  const FrameDirectory s = read_frame_dir(stabilized_dir);
  if (u.frames.size() != s.frames.size()) {
    const std::set<std::string> have(s.names.begin(), s.names.end());
    for (const std::string& n : u.names)
      if (!have.count(n)) throw InputError("missing frame file " + (fs::path(stabilized_dir) / n).string());
    throw InputError("videos differ in length: " + std::to_string(u.frames.size()) + " vs " +
                     std::to_string(s.frames.size()));
  }
  double crop = 1.0;
  if (crop_ratio) {
    crop = *crop_ratio;
  } else if (const fs::path rp = fs::path(stabilized_dir) / "report.json"; fs::exists(rp)) {
    std::ifstream in(rp);
    const json rep = json::parse(in, nullptr, false);
    if (!rep.is_discarded() && rep.contains("crop_ratio")) crop = rep["crop_ratio"].get<double>();
  }
  MetricsConfig mc;
  mc.pyramid = config.pyramid();
  mc.photometric = config.photometric;
  mc.flow_loss = config.flow_loss;
  mc.threads = config.threads;
  const MetricsReport r = compute_metrics(u.frames, s.frames, crop, mc);
  json per_param = json::object();
  for (size_t k = 0; k < r.stability_per_param.size(); ++k)
    per_param[param_name(static_cast<int>(k))] = r.stability_per_param[k];
  json report = {{"stability", r.stability},
                 {"isi", r.isi},
                 {"itf_db", r.itf_db},
                 {"paired_ssim", r.paired_ssim},
                 {"paired_psnr_db", r.paired_psnr_db},
                 {"crop_ratio", r.crop_ratio},
                 {"distortion", r.distortion},
                 {"agmdr", r.agmdr},
                 {"per_frame",
                  {{"stability_per_param", per_param},
                   {"isi", r.isi_per_pair},
                   {"itf_db", r.itf_per_pair},
                   {"distortion", r.distortion_per_frame},
                   {"distortion_skipped", r.distortion_skipped},
                   {"agmdr_unstable_diffs", r.agmdr_unstable_diffs},
                   {"agmdr_stabilized_diffs", r.agmdr_stabilized_diffs}}}};
  write_json(out, report);
  std::cout << "stability " << r.stability << " isi " << r.isi << " itf " << r.itf_db << " dB crop "
            << r.crop_ratio << " distortion " << r.distortion << " agmdr " << r.agmdr << '\n';
  return 0;
}

struct SynthFlags {
  int frames = 60;
  int height = 240;
  int width = 320;
  uint64_t seed = 1;
  int octaves = 4;
  int margin = 96;
  double smooth_freq = 1.0;
  std::vector<double> smooth_amp{0.03, 0.03, 16.0, 10.0};
  std::vector<double> jitter_amp{0.015, 0.015, 8.0, 8.0};
  bool zero_jitter = false;
  double foreground = 0.0;
  double fg_vx = 1.5;
  double fg_vy = -1.0;
  std::string format = "png";
  int bit_depth = 8;
};

int run_synth(const std::string& out_dir, const SynthFlags& f) {
  if (f.smooth_amp.size() != 4 || f.jitter_amp.size() != 4)
    throw InputError("amplitudes take four values: r s tx ty");
  ParamVector smooth{}, jitter{};
  for (int k = 0; k < 4; ++k) {
    smooth[k] = f.smooth_amp[k];
    jitter[k] = f.zero_jitter ? 0.0 : f.jitter_amp[k];
  }
  SceneSpec scene;
  scene.seed = f.seed;
  scene.octaves = f.octaves;
  scene.height = f.height;
  scene.width = f.width;
  scene.frames = f.frames;
  scene.margin = f.margin;
  if (f.foreground > 0.0) scene.foreground = ForegroundSpec{f.foreground, f.fg_vx, f.fg_vy};
  const CameraPath path = make_jitter_path(f.frames, f.smooth_freq, smooth, jitter, f.seed);
  const SyntheticVideo video = generate(scene, path, false);

  FrameEncoding enc;
  if (f.format == "png") enc.format = FrameFormat::Png;
  else if (f.format == "pgm") enc.format = FrameFormat::Pnm;
  else throw InputError("format must be png or pgm");
  enc.bit_depth = f.bit_depth;
  write_frame_dir(out_dir, video.frames, numbered_names(video.frames.size(), enc), enc);

  json poses = json::array(), smooth_j = json::array(), jitter_j = json::array(), alphas = json::array();
  for (int i = 0; i < path.size(); ++i) {
    poses.push_back(params_json(path.poses[i]));
    smooth_j.push_back(params_json(path.smooth[i]));
    jitter_j.push_back(params_json(path.jitter[i]));
  }
  for (const SimilarityParams& a : video.alphas) alphas.push_back(params_json(a));
  json truth = {
      {"convention",
       "backward warp: frame[i+1](p) = frame[i](alpha_i(p)), flow(p) = alpha_i(p) - p; similarity "
       "p -> exp(s) Rot(r) (p - c) + c + t with c = ((w-1)/2, (h-1)/2)"},
      {"seed", f.seed},
      {"frames", f.frames},
      {"height", f.height},
      {"width", f.width},
      {"octaves", f.octaves},
      {"margin", f.margin},
      {"smooth_freq", f.smooth_freq},
      {"smooth_amplitude", smooth},
      {"jitter_amplitude", path.jitter_amplitude},
      {"poses", poses},
      {"smooth", smooth_j},
      {"jitter", jitter_j},
      {"alphas", alphas}};
  if (scene.foreground) {
    json rects = json::array();
    for (const CropRect& r : video.foreground) rects.push_back({r.left, r.top, r.width, r.height});
    truth["foreground"] = {{"area_fraction", f.foreground},
                           {"velocity", {f.fg_vx, f.fg_vy}},
                           {"mask_rects", rects},
                           {"mask_rule", "pixel (x, y) is foreground when (x + 0.5, y + 0.5) lies in "
                                         "[left, left + width) x [top, top + height)"}};
  } else {
    truth["foreground"] = nullptr;
  }
  write_json(fs::path(out_dir) / "ground_truth.json", truth);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Video stabilization with low-frequency DCT global flow"};
  app.require_subcommand(1);

  CommonFlags stab_flags;
  std::string stab_in, stab_out, dump_paths, dump_coeffs;
  CLI::App* stab = app.add_subcommand("stabilize", "stabilize a directory of frames");
  stab->add_option("input", stab_in, "input frame directory")->required();
  stab->add_option("output", stab_out, "output frame directory")->required();
  stab->add_option("--dump-paths", dump_paths, "path CSV location (default OUTPUT/paths.csv)");
  stab->add_option("--dump-coeffs", dump_coeffs, "write residual coefficients as JSON");
  stab_flags.add_to(*stab, true);

  CommonFlags flow_flags;
  std::vector<std::string> flow_args;
  std::string from_flo, flow_coeffs;
  CLI::App* flow = app.add_subcommand("flow", "global flow between two frames, written as .flo");
  flow->add_option("args", flow_args, "FRAME_A FRAME_B OUT.flo, or OUT.flo with --from-flo")->required();
  flow->add_option("--from-flo", from_flo, "fit an external .flo instead of aligning frames");
  flow->add_option("--dump-coeffs", flow_coeffs, "coefficient JSON location (default OUT.json)");
  flow_flags.add_to(*flow, false);

  CommonFlags metric_flags;
  std::string m_unstable, m_stable, m_out;
  std::optional<double> m_crop;
  CLI::App* metrics = app.add_subcommand("metrics", "quality measures of a stabilized video");
  metrics->add_option("unstable", m_unstable, "original frame directory")->required();
  metrics->add_option("stabilized", m_stable, "stabilized frame directory")->required();
  metrics->add_option("out", m_out, "output JSON")->required();
  metrics->add_option("--crop-ratio", m_crop, "applied crop ratio (default: from report.json, else 1)");
  metric_flags.add_to(*metrics, false);

  SynthFlags sf;
  std::string synth_out;
  CLI::App* synth = app.add_subcommand("synth", "render a synthetic jittery video");
  synth->add_option("output", synth_out, "output frame directory")->required();
  synth->add_option("--frames", sf.frames);
  synth->add_option("--height", sf.height);
  synth->add_option("--width", sf.width);
  synth->add_option("--seed", sf.seed);
  synth->add_option("--octaves", sf.octaves);
  synth->add_option("--margin", sf.margin, "texture border in pixels");
  synth->add_option("--smooth-freq", sf.smooth_freq, "cycles over the sequence, <= 2");
  synth->add_option("--smooth-amp", sf.smooth_amp, "r s tx ty")->expected(4);
  synth->add_option("--jitter-amp", sf.jitter_amp, "r s tx ty")->expected(4);
  synth->add_flag("--zero-jitter", sf.zero_jitter);
  synth->add_option("--foreground", sf.foreground, "foreground area fraction in [0, 0.5]");
  synth->add_option("--fg-velocity", [&sf](const CLI::results_t& r) {
    sf.fg_vx = std::stod(r.at(0));
    sf.fg_vy = std::stod(r.at(1));
    return true;
  })->expected(2);
  synth->add_option("--format", sf.format, "png or pgm");
  synth->add_option("--bit-depth", sf.bit_depth, "8 or 16");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*stab) return run_stabilize(stab_in, stab_out, stab_flags, dump_paths, dump_coeffs);
    if (*flow) return run_flow(flow_args, from_flo, flow_flags, flow_coeffs);
    if (*metrics) return run_metrics(m_unstable, m_stable, m_out, m_crop, metric_flags);
    if (*synth) return run_synth(synth_out, sf);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ProcessingError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
