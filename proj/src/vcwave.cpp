#include "waterwave/vcwave.hpp"

#include <cstdio>

namespace waterwave {

BasicMaskMode parse_mask_mode(const std::string& name) {
  if (name == "complement") return BasicMaskMode::Complement;
  if (name == "as-written" || name == "as_written") return BasicMaskMode::AsWritten;
  throw InvalidArgument("unknown mask mode '" + name + "' (expected complement or as-written)");
}

std::string to_string(BasicMaskMode mode) { return mode == BasicMaskMode::Complement ? "complement" : "as-written"; }

namespace {

std::vector<nn::Var> bind_flows(nn::Tape<double>& tape, const FrameWindow& window, const std::vector<FlowField>& flows) {
  if (window.begin < 0 || window.end > window.total || window.length() < 2)
    throw InvalidArgument("window [" + std::to_string(window.begin) + ", " + std::to_string(window.end) +
                          ") is not a valid range of at least 2 frames");
  std::vector<nn::Var> vars;
  for (Index t = window.begin; t + 1 < window.end; ++t) {
    if (t >= static_cast<Index>(flows.size()))
      throw InvalidArgument("missing flow for frame pair " + std::to_string(t) + " -> " + std::to_string(t + 1));
    vars.push_back(tape.constant(flows[t].vectors));
  }
  return vars;
}

}  // namespace

AlignedWindow align_window(const VideoVolume& video, const FrameWindow& window, const std::vector<FlowField>& flows) {
  nn::Tape<double> tape(false);
  const Index begin = window.begin, end = window.end;
  if (window.length() == 1 && begin >= 0 && end <= video.frames())
    return {begin, video.frames_range(begin, end), Volume<double>(1, video.height(), video.width(), 1, 1.0)};
  auto flow_vars = bind_flows(tape, window, flows);
  nn::Var frames = tape.constant(video.frames_range(begin, end));
  auto aligned = nn::align_frames(tape, frames, flow_vars);
  return {end - 1, tape.value(aligned.frames), std::move(aligned.validity)};
}

VcWaveBands vcwave_decompose(const VideoVolume& video, const FrameWindow& window, const std::vector<FlowField>& flows) {
  if (window.length() < 2 || window.length() % 2 != 0)
    throw InvalidArgument("vcwave_decompose: window length must be even and >= 2");
  nn::Tape<double> tape(false);
  auto flow_vars = bind_flows(tape, window, flows);
  nn::Var frames = tape.constant(video.frames_range(window.begin, window.end));
  auto vars = nn::vcwave_bands(tape, frames, flow_vars);
  VcWaveBands out;
  out.bands.temporal = {tape.value(vars.temporal.low), tape.value(vars.temporal.high), vars.temporal.truncated};
  out.bands.spatial = {tape.value(vars.spatial.ll), tape.value(vars.spatial.lh), tape.value(vars.spatial.hl),
                       tape.value(vars.spatial.hh), video.height() % 2 != 0, video.width() % 2 != 0};
  out.bands.source = tape.shape(frames);
  out.temporal_validity = std::move(vars.temporal_validity);
  return out;
}

InconsistencyMask inconsistency_mask(const VcWaveBands& b, const MaskThresholds& thresholds) {
  return inconsistency_mask(b.bands.temporal.high, b.bands.spatial.lh, b.bands.spatial.hl, b.bands.spatial.hh,
                            thresholds);
}

Volume<double> resample_mask(const Volume<double>& mask, const Shape4& grid) {
  const Shape4 m = mask.shape();
  if (m.t < 1 || m.h < 1 || m.w < 1) throw ShapeError("resample_mask: empty mask");
  Volume<double> out(grid.t, grid.h, grid.w, 1);
  // Same temporal extent: identity in t; otherwise the grid is per-frame and
  // frame t belongs to Haar pair t / 2.
  const bool per_frame = grid.t != m.t;
  const double sy = double(m.h) / double(grid.h), sx = double(m.w) / double(grid.w);
  for (Index t = 0; t < grid.t; ++t) {
    const Index mt = per_frame ? std::min(t / 2, m.t - 1) : t;
    for (Index y = 0; y < grid.h; ++y) {
      const Index my = std::min<Index>(static_cast<Index>(std::floor(y * sy)), m.h - 1);
      for (Index x = 0; x < grid.w; ++x) {
        const Index mx = std::min<Index>(static_cast<Index>(std::floor(x * sx)), m.w - 1);
        out(t, y, x, 0) = mask(mt, my, mx, 0);
      }
    }
  }
  return out;
}

void save_mask_pngs(const InconsistencyMask& mask, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  for (Index tau = 0; tau < mask.values.frames(); ++tau) {
    char name[32];
    std::snprintf(name, sizeof name, "mask_%05ld.png", static_cast<long>(tau));
    write_png(mask.values.frame(tau), directory / name);
  }
}

double loss_tc(const InconsistencyMask& mask_f, const Volume<double>& high_t_f, const Volume<double>& validity) {
  nn::Tape<double> tape(false);
  return tape.scalar(nn::loss_tc(tape, mask_f, tape.constant(high_t_f), validity));
}

double loss_tc(const InconsistencyMask& mask_f, const Volume<double>& high_t_f) {
  const Shape4 s = high_t_f.shape();
  return loss_tc(mask_f, high_t_f, Volume<double>(s.t, s.h, s.w, 1, 1.0));
}

double loss_detail(const SpatialBands<double>& f, const SpatialBands<double>& v) {
  nn::Tape<double> tape(false);
  nn::SpatialBandVars<double> vars{tape.constant(f.ll), tape.constant(f.lh), tape.constant(f.hl), tape.constant(f.hh)};
  return tape.scalar(nn::loss_detail(tape, vars, v));
}

double loss_basic(const Volume<double>& low_t_f, const Volume<double>& low_t_v, const Volume<double>& ll_f,
                  const Volume<double>& ll_v, const InconsistencyMask& mask_v, BasicMaskMode mode,
                  const Volume<double>* temporal_validity) {
  nn::Tape<double> tape(false);
  const Shape4 s = low_t_f.shape();
  const Volume<double> ones(s.t, s.h, s.w, 1, 1.0);
  return tape.scalar(nn::loss_basic(tape, tape.constant(low_t_f), low_t_v, tape.constant(ll_f), ll_v, mask_v, mode,
                                    temporal_validity ? *temporal_validity : ones));
}

}  // namespace waterwave
