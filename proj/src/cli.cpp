#include "waterwave/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <omp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "waterwave/pipeline.hpp"
#include "waterwave/prior.hpp"

namespace waterwave::cli {

namespace fs = std::filesystem;

void configure_threads() {
  const char* env = std::getenv("WATERWAVE_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 0) throw InvalidArgument(std::string("WATERWAVE_THREADS must be a non-negative integer, got ") + env);
  if (n > 0) {
    omp_set_num_threads(static_cast<int>(n));
    Eigen::setNbThreads(static_cast<int>(n));
  }
}

namespace {

fs::path temp_sibling(const fs::path& target) {
  fs::path parent = target.parent_path();
  if (parent.empty()) parent = ".";
  fs::create_directories(parent);
  return parent / (".tmp-" + target.filename().string());
}

/// Writes through a temporary sibling and renames it over `target`.
template <typename Writer>
void atomic_file(const fs::path& target, Writer&& write) {
  const fs::path tmp = temp_sibling(target);
  try {
    write(tmp);
    fs::rename(tmp, target);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

template <typename Writer>
void atomic_dir(const fs::path& target, Writer&& write) {
  const fs::path tmp = temp_sibling(target);
  std::error_code ec;
  fs::remove_all(tmp, ec);
  try {
    fs::create_directories(tmp);
    write(tmp);
    fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

void write_text(const fs::path& target, const std::string& text) {
  atomic_file(target, [&](const fs::path& p) {
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw IoError("cannot open " + p.string() + " for writing");
    os << text;
    if (!os) throw IoError("write failed for " + p.string());
  });
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

nlohmann::json sig6(double v) {
  if (!std::isfinite(v)) return nullptr;
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return nlohmann::json::parse(os.str());
}

std::vector<FlowField> flows_for(const VideoVolume& video, const std::string& flow_dir, bool auto_flow) {
  if (!flow_dir.empty()) return load_flow_dir(flow_dir, video.frames() - 1, video.height(), video.width());
  if (auto_flow) return estimate_video_flows(video);
  std::vector<FlowField> zero;
  for (Index t = 0; t + 1 < video.frames(); ++t) zero.push_back(zero_flow(video.height(), video.width(), t, t + 1));
  return zero;
}

struct Options {
  // fit
  std::string enhanced, input, flow_dir, config_file, out, log_file, mask_dir;
  long iterations = -1;
  long long seed = -1;
  double lambda_rec = -1;
  std::string mask_mode;
  bool verbose = false;
  // render
  std::string ckpt;
  long frames = 0;
  double scale = 1.0;
  // baseline / metrics
  bool auto_flow = false;
  double w = 1.0;
  std::string video, ref, report;
  // synth
  long synth_frames = 16;
  long size = 64;
  double flicker = 0.1;
  double motion = 1.0;
  int discs = 3;
  long long synth_seed = 0;
  // profile
  long row = 0;
};

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
  FitConfig config;
  if (!o.config_file.empty()) config = config_from_json(read_text(o.config_file));
  if (o.iterations >= 0) config.iterations = o.iterations;
  if (o.seed >= 0) config.seed = static_cast<std::uint64_t>(o.seed);
  if (o.lambda_rec >= 0) config.lambda_rec = o.lambda_rec;
  if (!o.mask_mode.empty()) config.mask_mode = parse_mask_mode(o.mask_mode);
  config.validate();

  FitInputs inputs;
  inputs.enhanced = load_frames(o.enhanced);
  if (!o.input.empty()) inputs.original = load_frames(o.input);
  if (!o.flow_dir.empty())
    inputs.flows = load_flow_dir(o.flow_dir, inputs.enhanced.frames() - 1, inputs.enhanced.height(),
                                 inputs.enhanced.width());

  FitProgress report;
  if (o.verbose)
    report = [&err](const LogRow& r) {
      if (r.iteration % 100 == 0)
        err << "iter " << r.iteration << " total " << r.total << " tc " << r.loss_tc << " detail " << r.loss_detail
            << " basic " << r.loss_basic << " alpha " << r.alpha << " lr " << r.lr << '\n';
    };
  const FitResult result = fit(config, inputs, report);
  atomic_file(o.out, [&](const fs::path& p) { save_checkpoint(result.checkpoint, p); });
  if (!o.log_file.empty()) write_text(o.log_file, log_csv(result.log));
  if (!o.mask_dir.empty()) {
    const FitContext ctx = make_context(config, inputs);
    auto params = result.checkpoint.params;
    const Index len = std::min<Index>(config.window, ctx.video.frames() - ctx.video.frames() % 2);
    atomic_dir(o.mask_dir, [&](const fs::path& dir) {
      for (Index begin = 0; begin + len <= ctx.video.frames(); begin += len) {
        const auto target = window_target(ctx, params, begin, progress(result.checkpoint.iteration,
                                                                       config.grid.n_levels, config.anneal()),
                                          result.checkpoint.iteration);
        save_mask_pngs(target.mask, dir / ("window_" + std::to_string(begin)));
      }
    });
  }
  if (result.aborted) {
    err << "error: " << result.message << " (last good checkpoint written to " << o.out << ")\n";
    return kNumerical;
  }
  out << "fitted " << result.checkpoint.iteration << " iterations -> " << o.out << '\n';
  return kOk;
}

int cmd_render(const Options& o, std::ostream& out, std::ostream&) {
  const FieldCheckpoint ck = load_checkpoint(o.ckpt);
  if (!(o.scale > 0)) throw InvalidArgument("--scale must be positive");
  const Shape4 s = ck.video_shape;
  // Densified grids keep the original samples: n' = d (n - 1) + 1.
  const Index T = o.frames > 0 ? o.frames : s.t;
  const Index H = static_cast<Index>(std::lround(o.scale * double(s.h - 1))) + 1;
  const Index W = static_cast<Index>(std::lround(o.scale * double(s.w - 1))) + 1;
  const VideoVolume video = render(ck, T, H, W);
  atomic_dir(o.out, [&](const fs::path& dir) { save_frames(video, dir); });
  out << "rendered " << video.shape().str() << " -> " << o.out << '\n';
  return kOk;
}

int cmd_baseline(const Options& o, std::ostream& out, std::ostream&) {
  const VideoVolume video = load_frames(o.enhanced);
  FilterParams params;
  params.w = o.w;
  const auto flows = flows_for(video, o.flow_dir, o.auto_flow);
  const VideoVolume filtered = filter_video(video, flows, params);
  VideoVolume clamped = filtered;
  clamped.data() = filtered.data().max(0.0).min(1.0);
  atomic_dir(o.out, [&](const fs::path& dir) { save_frames(clamped, dir); });
  out << "filtered " << video.frames() << " frames -> " << o.out << '\n';
  return kOk;
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream&) {
  SynthSpec spec;
  spec.frames = o.synth_frames;
  spec.height = spec.width = o.size;
  spec.flicker = o.flicker;
  spec.motion = o.motion;
  spec.discs = o.discs;
  if (o.synth_seed < 0) throw InvalidArgument("--seed must be >= 0");
  const SynthScene scene = synth_benchmark(spec, static_cast<std::uint64_t>(o.synth_seed));
  atomic_dir(o.out, [&](const fs::path& dir) {
    save_frames(scene.clean, dir / "C");
    save_frames(scene.degraded, dir / "I");
    save_frames(scene.flickered, dir / "V");
    save_flow_dir(scene.flows, dir / "flow");
  });
  out << "wrote C, I, V and flow to " << o.out << '\n';
  return kOk;
}

int cmd_metrics(const Options& o, std::ostream& out, std::ostream&) {
  const VideoVolume video = load_frames(o.video);
  nlohmann::json report;
  report["frames"] = video.frames();
  report["flicker_energy"] = sig6(flicker_energy(video));
  report["warping_error"] = sig6(warping_error(video, flows_for(video, o.flow_dir, o.flow_dir.empty() || o.auto_flow)));
  if (!o.ref.empty()) {
    const VideoVolume ref = load_frames(o.ref);
    report["psnr"] = sig6(psnr(video, ref));
    report["detail_difference"] = sig6(detail_difference(video, ref));
  } else {
    report["psnr"] = nullptr;
    report["detail_difference"] = nullptr;
  }
  write_text(o.report, report.dump(2) + "\n");
  out << report.dump() << '\n';
  return kOk;
}

int cmd_flow(const Options& o, std::ostream& out, std::ostream&) {
  const VideoVolume video = load_frames(o.input);
  const auto flows = estimate_video_flows(video);
  atomic_dir(o.out, [&](const fs::path& dir) { save_flow_dir(flows, dir); });
  out << "wrote " << flows.size() << " flows to " << o.out << '\n';
  return kOk;
}

int cmd_profile(const Options& o, std::ostream& out, std::ostream&) {
  const VideoVolume video = load_frames(o.video);
  const Frame profile = temporal_profile(video, o.row);
  atomic_file(o.out, [&](const fs::path& p) { write_png(profile, p); });
  out << "wrote " << profile.height() << "x" << profile.width() << " profile -> " << o.out << '\n';
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Temporal consistency restoration for frame-wise enhanced video", "waterwave"};
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit", "Fit the consistency field to an enhanced video");
  fit->add_option("--enhanced", o.enhanced, "Directory of enhanced frames (V)")->required()->check(CLI::ExistingDirectory);
  fit->add_option("--input", o.input, "Directory of original frames (I), used for flow and transmission")
      ->check(CLI::ExistingDirectory);
  fit->add_option("--flow-dir", o.flow_dir, "Directory of flow_%05d.flo base flows")->check(CLI::ExistingDirectory);
  fit->add_option("--config", o.config_file, "JSON file with FitConfig fields")->check(CLI::ExistingFile);
  fit->add_option("--out", o.out, "Checkpoint path")->required();
  fit->add_option("--log", o.log_file, "Training log CSV path");
  fit->add_option("--iterations", o.iterations, "Override iterations");
  fit->add_option("--seed", o.seed, "Override seed");
  fit->add_option("--lambda-rec", o.lambda_rec, "Override the reconstruction weight");
  fit->add_option("--mask-mode", o.mask_mode, "complement or as-written");
  fit->add_option("--masks", o.mask_dir, "Export final inconsistency masks of V as PNGs");
  fit->add_flag("-v,--verbose", o.verbose, "Print progress every 100 iterations");

  auto* render_cmd = app.add_subcommand("render", "Render a fitted field to frames");
  render_cmd->add_option("--ckpt", o.ckpt, "Checkpoint path")->required()->check(CLI::ExistingFile);
  render_cmd->add_option("--out", o.out, "Output frame directory")->required();
  render_cmd->add_option("--frames", o.frames, "Number of frames (default: training count)")->capture_default_str();
  render_cmd->add_option("--scale", o.scale, "Spatial densification factor")->capture_default_str();

  auto* baseline = app.add_subcommand("baseline", "Closed-form recursive consistency filter");
  baseline->add_option("--enhanced", o.enhanced, "Directory of enhanced frames")->required()->check(CLI::ExistingDirectory);
  auto* bflow = baseline->add_option("--flow-dir", o.flow_dir, "Directory of .flo flows")->check(CLI::ExistingDirectory);
  baseline->add_flag("--auto-flow", o.auto_flow, "Estimate flows with Horn-Schunck (default: zero flow)")->excludes(bflow);
  baseline->add_option("--w", o.w, "Regularization weight")->capture_default_str();
  baseline->add_option("--out", o.out, "Output frame directory")->required();

  auto* synth = app.add_subcommand("synth", "Generate the synthetic flicker benchmark");
  synth->add_option("--out", o.out, "Output directory (C, I, V, flow)")->required();
  synth->add_option("--frames", o.synth_frames, "Frame count")->capture_default_str();
  synth->add_option("--size", o.size, "Frame side in pixels")->capture_default_str();
  synth->add_option("--flicker", o.flicker, "Flicker sigma")->capture_default_str();
  synth->add_option("--motion", o.motion, "Disc speed in pixels per frame")->capture_default_str();
  synth->add_option("--discs", o.discs, "Number of discs")->capture_default_str();
  synth->add_option("--seed", o.synth_seed, "Random seed")->capture_default_str();

  auto* metrics = app.add_subcommand("metrics", "Consistency and fidelity metrics as JSON");
  metrics->add_option("--video", o.video, "Frame directory to evaluate")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--ref", o.ref, "Reference frames for PSNR")->check(CLI::ExistingDirectory);
  auto* mflow = metrics->add_option("--flow-dir", o.flow_dir, "Flows for the warping error")->check(CLI::ExistingDirectory);
  metrics->add_flag("--auto-flow", o.auto_flow, "Estimate flows (default when --flow-dir is absent)")->excludes(mflow);
  metrics->add_option("--report", o.report, "Report JSON path")->required();

  auto* flow = app.add_subcommand("flow", "Estimate Horn-Schunck flows f_{i+1 -> i}");
  flow->add_option("--input", o.input, "Frame directory")->required()->check(CLI::ExistingDirectory);
  flow->add_option("--out", o.out, "Output directory of flow_%05d.flo")->required();

  auto* profile = app.add_subcommand("profile", "Temporal profile image of one row");
  profile->add_option("--video", o.video, "Frame directory")->required()->check(CLI::ExistingDirectory);
  profile->add_option("--row", o.row, "Row index")->required();
  profile->add_option("--out", o.out, "Output PNG")->required();

  std::vector<std::string> rev(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(rev.begin(), rev.end());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n"
        << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return kUsage;
  }

  try {
    configure_threads();
    if (*fit) return cmd_fit(o, out, err);
    if (*render_cmd) return cmd_render(o, out, err);
    if (*baseline) return cmd_baseline(o, out, err);
    if (*synth) return cmd_synth(o, out, err);
    if (*metrics) return cmd_metrics(o, out, err);
    if (*flow) return cmd_flow(o, out, err);
    if (*profile) return cmd_profile(o, out, err);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

}  // namespace waterwave::cli
