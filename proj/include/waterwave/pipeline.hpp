#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "waterwave/core.hpp"
#include "waterwave/encoding.hpp"
#include "waterwave/flow.hpp"
#include "waterwave/nn/adam.hpp"
#include "waterwave/nn/mlp.hpp"
#include "waterwave/tfr.hpp"
#include "waterwave/vcwave.hpp"

namespace waterwave {

struct FitConfig {
  long iterations = 5000;
  double lr0 = 1e-3;
  long lr_breakpoint = -1;  // -1: 3/4 of iterations
  double lambda_tc = 1.0;
  double lambda_detail = 1.0;
  double lambda_basic = 1.0;
  double lambda_rec = 0.0;
  BasicMaskMode mask_mode = BasicMaskMode::Complement;
  Index window = 4;
  Index max_resolution = 128;  // frames larger than this on either side are downsampled for fitting
  double anneal_steps = -1.0;  // -1: iterations / 2
  std::uint64_t seed = 0;
  long mask_refresh = 500;
  MaskThresholds thresholds;
  HashGridConfig grid;
  std::vector<Index> hidden{64, 64};
  std::vector<Index> tfr_hidden{64, 64};
  bool share_tables = true;
  bool train_tfr = true;
  HornSchunckParams flow;
  TransmissionParams transmission;

  void validate() const;
  long breakpoint() const { return lr_breakpoint >= 0 ? lr_breakpoint : (3 * iterations) / 4; }
  double anneal() const { return anneal_steps > 0 ? anneal_steps : std::max(1.0, double(iterations) / 2.0); }
};

/// Canonical JSON of a config (sorted keys) and its inverse. Unknown keys are
/// rejected; absent keys keep their defaults.
std::string config_to_json(const FitConfig& config);
FitConfig config_from_json(const std::string& text, const FitConfig& base = {});

/// Trained field: configuration, training-grid shape and parameters.
struct FieldCheckpoint {
  FitConfig config;
  Shape4 video_shape;  // shape of the video the field was fitted to
  Shape4 fit_shape;    // working shape (after the resolution cap)
  long iteration = 0;
  nn::ParamStore<float> params;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const FieldCheckpoint& checkpoint, const std::filesystem::path& path);
FieldCheckpoint load_checkpoint(const std::filesystem::path& path);

namespace field {

inline const std::string kTable = "hash";
inline const std::string kTfrTable = "tfr_hash";
inline const std::string kColor = "color";
inline const std::string kTfr = "tfr";

nn::MlpSpec color_spec(const FitConfig& config, Index channels);
nn::MlpSpec tfr_spec(const FitConfig& config);
inline const std::string& tfr_table(const FitConfig& config) { return config.share_tables ? kTable : kTfrTable; }

/// Fresh parameters: hash tables, colour MLP and the zero-output TFR MLP.
nn::ParamStore<float> init_params(const FitConfig& config, Index channels);

/// Colour field over a window: (frames x H x W x C).
template <typename Scalar>
nn::Var color(nn::Tape<Scalar>& tape, nn::ParamStore<Scalar>& store, const FitConfig& config, Index channels,
              const CoordGrid& coords, double alpha) {
  nn::Var table = store.bind(tape, kTable);
  nn::Var emb = nn::hash_encode(tape, table, coords.xyz, config.grid, alpha);
  nn::Var rgb = nn::mlp_forward(tape, color_spec(config, channels), store, kColor, emb);
  return nn::reshape(tape, rgb, Shape4{coords.window.length(), coords.height, coords.width, channels});
}

}  // namespace field

/// Evaluates the colour field at the normalized coordinates of a
/// frames x height x width grid (defaults: the original video shape).
VideoVolume render(const FieldCheckpoint& checkpoint, std::optional<Index> frames = std::nullopt,
                   std::optional<Index> height = std::nullopt, std::optional<Index> width = std::nullopt);

struct LogRow {
  long iteration = 0;
  double loss_tc = 0.0;
  double loss_detail = 0.0;
  double loss_basic = 0.0;
  double total = 0.0;
  double alpha = 0.0;
  double lr = 0.0;
};

void write_log_csv(const std::vector<LogRow>& rows, const std::filesystem::path& path);
std::string log_csv(const std::vector<LogRow>& rows);

struct FitInputs {
  VideoVolume enhanced;                      // V
  std::optional<VideoVolume> original;       // I, drives flow and transmission when present
  std::optional<std::vector<FlowField>> flows;  // external base flows f_{t+1 -> t}
};

struct FitResult {
  FieldCheckpoint checkpoint;
  std::vector<LogRow> log;
  bool aborted = false;
  std::string message;
  std::vector<FlowField> base_flows;       // at the working resolution
  std::vector<FlowField> rectified_flows;  // after training
};

using FitProgress = std::function<void(const LogRow&)>;

/// Fits the consistency field to V. A non-finite loss or gradient stops the
/// loop; the result then holds the last good parameters and aborted = true.
FitResult fit(const FitConfig& config, const FitInputs& inputs, const FitProgress& progress = {});

/// Everything a training step needs that does not change between steps.
struct FitContext {
  FitConfig config;
  VideoVolume video;                      // V at working resolution
  std::vector<FlowField> base_flows;      // f_{t+1 -> t}
  std::vector<Volume<double>> guidance;   // per pair, 1 x H x W x 4
};

FitContext make_context(const FitConfig& config, const FitInputs& inputs);

/// Cached V-side quantities of one window.
struct WindowTarget {
  VcWaveBands bands;
  InconsistencyMask mask;
  long computed_at = -1;
};

WindowTarget window_target(const FitContext& ctx, nn::ParamStore<float>& params, Index begin, double alpha,
                           long iteration);

struct WindowLoss {
  nn::Var total;
  nn::Var tc;
  nn::Var detail;
  nn::Var basic;
  nn::Var rec;
};

/// Training objective of one window; used by fit and by gradient checks.
template <typename Scalar>
WindowLoss window_loss(nn::Tape<Scalar>& tape, nn::ParamStore<Scalar>& store, const FitContext& ctx, Index begin,
                       double alpha, const WindowTarget& target);

std::vector<FlowField> rectified_flows(const FitContext& ctx, nn::ParamStore<float>& params, double alpha);

// ---------------------------------------------------------------------------
// Synthetic benchmark

struct SynthSpec {
  Index frames = 16;
  Index height = 64;
  Index width = 64;
  int discs = 3;
  double motion = 1.0;  // disc speed in pixels per frame; 0 gives a static scene
  double flicker = 0.1;
  double background_amplitude = 0.06;

  void validate() const;
};

struct SynthScene {
  VideoVolume clean;      // C
  VideoVolume degraded;   // I
  VideoVolume flickered;  // V
  std::vector<FlowField> flows;  // ground truth f_{t+1 -> t}
  Volume<double> transmission;   // 1 x H x W x 1
};

SynthScene synth_benchmark(const SynthSpec& spec, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Metrics

/// Mean over pairs of the mean |F_t - warp(F_{t-1}, f_{t -> t-1})| over valid pixels.
double warping_error(const VideoVolume& video, const std::vector<FlowField>& flows);

/// Population variance over t of the per-frame mean after removing a linear trend.
double flicker_energy(const VideoVolume& video);

/// Row `row` of every frame stacked into a 1 x T x W x C image.
Frame temporal_profile(const VideoVolume& video, Index row);

/// Mean |H_xy(a) - H_xy(b)| over the three detail subbands of all frames.
double detail_difference(const VideoVolume& a, const VideoVolume& b);

/// Area-average downsampling / bilinear resizing of every frame.
VideoVolume resize_video(const VideoVolume& video, Index height, Index width);
FlowField resize_flow(const FlowField& flow, Index height, Index width);

}  // namespace waterwave
