#include <cmath>
#include <map>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "waterwave/pipeline.hpp"

namespace waterwave {

namespace {

Index effective_window(const FitConfig& config, Index frames) {
  return std::min(config.window, frames - frames % 2);
}

/// Full-video flow list with the window's pairs replaced by rectified flows.
std::vector<FlowField> with_rectified(const FitContext& ctx, nn::ParamStore<float>& params, double alpha, Index begin,
                                      Index end) {
  std::vector<FlowField> flows = ctx.base_flows;
  if (!ctx.config.train_tfr) return flows;
  const auto spec = field::tfr_spec(ctx.config);
  for (Index t = begin; t + 1 < end; ++t)
    flows[t] = rectify_flow(ctx.base_flows[t], t, ctx.video.frames(), ctx.guidance[t], ctx.config.grid, alpha, params,
                            field::tfr_table(ctx.config), field::kTfr, spec);
  return flows;
}

/// The tape allocates and frees the same large buffers every step; keep them
/// on the heap instead of round-tripping through mmap.
void keep_large_allocations() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)done;
#endif
}

}  // namespace

FitContext make_context(const FitConfig& config, const FitInputs& inputs) {
  config.validate();
  validate_video(inputs.enhanced);
  const Shape4 s = inputs.enhanced.shape();
  if (s.t < 2) throw InvalidArgument("fit needs at least 2 frames");
  if (inputs.original && inputs.original->shape() != s)
    throw ShapeError("original video " + inputs.original->shape().str() + " does not match enhanced " + s.str());
  if (inputs.original) validate_video(*inputs.original);

  Index H = s.h, W = s.w;
  if (std::max(H, W) > config.max_resolution) {
    const double r = double(config.max_resolution) / double(std::max(H, W));
    H = std::max<Index>(8, static_cast<Index>(std::lround(double(H) * r)));
    W = std::max<Index>(8, static_cast<Index>(std::lround(double(W) * r)));
  }

  FitContext ctx;
  ctx.config = config;
  ctx.video = resize_video(inputs.enhanced, H, W);
  const VideoVolume source = resize_video(inputs.original ? *inputs.original : inputs.enhanced, H, W);

  if (inputs.flows) {
    if (static_cast<Index>(inputs.flows->size()) < s.t - 1)
      throw InvalidArgument("fit: need " + std::to_string(s.t - 1) + " external flows, got " +
                            std::to_string(inputs.flows->size()));
    for (Index t = 0; t + 1 < s.t; ++t) {
      const FlowField& f = (*inputs.flows)[t];
      if (f.height() != s.h || f.width() != s.w) throw ShapeError("external flow size does not match the video");
      ctx.base_flows.push_back(resize_flow(f, H, W));
      ctx.base_flows.back().from = t;
      ctx.base_flows.back().to = t + 1;
    }
  } else if (H >= 8 && W >= 8) {
    ctx.base_flows = estimate_video_flows(source, config.flow);
  } else {
    for (Index t = 0; t + 1 < s.t; ++t) ctx.base_flows.push_back(zero_flow(H, W, t, t + 1));
  }

  std::vector<Volume<double>> tmaps;
  for (Index t = 0; t < s.t; ++t)
    tmaps.push_back(source.channels() == 3 ? estimate_transmission(source.frame(t), config.transmission).t
                                           : Volume<double>(1, H, W, 1, 1.0));
  for (Index t = 0; t + 1 < s.t; ++t) ctx.guidance.push_back(transmission_guidance(tmaps[t], tmaps[t + 1], ctx.base_flows[t]));
  return ctx;
}

WindowTarget window_target(const FitContext& ctx, nn::ParamStore<float>& params, Index begin, double alpha,
                           long iteration) {
  const Index T = ctx.video.frames(), len = effective_window(ctx.config, T);
  const FrameWindow window{begin, begin + len, T};
  const auto flows = with_rectified(ctx, params, alpha, window.begin, window.end);
  WindowTarget target;
  target.bands = vcwave_decompose(ctx.video, window, flows);
  target.mask = inconsistency_mask(target.bands, ctx.config.thresholds);
  target.mask.source = MaskSource::Enhanced;
  target.computed_at = iteration;
  return target;
}

std::vector<FlowField> rectified_flows(const FitContext& ctx, nn::ParamStore<float>& params, double alpha) {
  return with_rectified(ctx, params, alpha, 0, ctx.video.frames());
}

template <typename Scalar>
WindowLoss window_loss(nn::Tape<Scalar>& tape, nn::ParamStore<Scalar>& store, const FitContext& ctx, Index begin,
                       double alpha, const WindowTarget& target) {
  const FitConfig& cfg = ctx.config;
  const Index T = ctx.video.frames(), C = ctx.video.channels(), len = effective_window(cfg, T);
  if (begin < 0 || begin + len > T) throw InvalidArgument("window start " + std::to_string(begin) + " out of range");
  const FrameWindow window{begin, begin + len, T};
  const CoordGrid coords = normalized_coords(window, ctx.video.height(), ctx.video.width());
  nn::Var frames = field::color(tape, store, cfg, C, coords, alpha);

  std::vector<nn::Var> flows;
  const auto spec = field::tfr_spec(cfg);
  for (Index t = window.begin; t + 1 < window.end; ++t) {
    if (cfg.train_tfr) {
      nn::Var table = store.bind(tape, field::tfr_table(cfg));
      flows.push_back(nn::rectify_flow(tape, ctx.base_flows[t], t, T, ctx.guidance[t], table, cfg.grid, alpha, store,
                                       field::kTfr, spec));
    } else {
      flows.push_back(tape.constant(ctx.base_flows[t].vectors.template cast<Scalar>()));
    }
  }

  auto bands = nn::vcwave_bands(tape, frames, flows);
  const InconsistencyMask mask_f = inconsistency_mask(tape.value(bands.temporal.high), tape.value(bands.spatial.lh),
                                                      tape.value(bands.spatial.hl), tape.value(bands.spatial.hh),
                                                      cfg.thresholds);
  if (tape.tracking_branches())
    for (Index i = 0; i < mask_f.values.size(); ++i)
      tape.note_branch((static_cast<std::uint64_t>(i) << 1) ^ (mask_f.values.data()[i] > 0.5 ? 0x5bd1e995ULL : 0ULL));

  const auto& vb = target.bands.bands;
  WindowLoss out;
  out.tc = nn::loss_tc(tape, mask_f, bands.temporal.high, bands.temporal_validity);
  const SpatialBands<Scalar> v_spatial{vb.spatial.ll.template cast<Scalar>(), vb.spatial.lh.template cast<Scalar>(),
                                       vb.spatial.hl.template cast<Scalar>(), vb.spatial.hh.template cast<Scalar>()};
  out.detail = nn::loss_detail(tape, bands.spatial, v_spatial);
  out.basic = nn::loss_basic(tape, bands.temporal.low, vb.temporal.low.template cast<Scalar>(), bands.spatial.ll,
                             v_spatial.ll, target.mask, cfg.mask_mode, bands.temporal_validity);
  std::vector<nn::Var> terms{out.tc, out.detail, out.basic};
  std::vector<Scalar> weights{Scalar(cfg.lambda_tc), Scalar(cfg.lambda_detail), Scalar(cfg.lambda_basic)};
  if (cfg.lambda_rec > 0) {
    const Volume<Scalar> v = ctx.video.frames_range(window.begin, window.end).template cast<Scalar>();
    out.rec = nn::weighted_l1(tape, frames, v, Volume<Scalar>(v.shape(), Scalar(1)), Scalar(v.size()));
    terms.push_back(out.rec);
    weights.push_back(Scalar(cfg.lambda_rec));
  }
  out.total = nn::weighted_sum(tape, terms, weights);
  return out;
}

template WindowLoss window_loss<float>(nn::Tape<float>&, nn::ParamStore<float>&, const FitContext&, Index, double,
                                       const WindowTarget&);
template WindowLoss window_loss<double>(nn::Tape<double>&, nn::ParamStore<double>&, const FitContext&, Index, double,
                                        const WindowTarget&);

FitResult fit(const FitConfig& config, const FitInputs& inputs, const FitProgress& progress_cb) {
  keep_large_allocations();
  const FitContext ctx = make_context(config, inputs);
  const Index T = ctx.video.frames(), len = effective_window(config, T);

  FitResult result;
  FieldCheckpoint& ck = result.checkpoint;
  ck.config = config;
  ck.video_shape = inputs.enhanced.shape();
  ck.fit_shape = ctx.video.shape();
  ck.params = field::init_params(config, ctx.video.channels());

  nn::AdamState adam(ck.params.size());
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<Index> pick(0, T - len);
  std::map<Index, WindowTarget> targets;
  const double anneal = config.anneal();

  for (long k = 0; k < config.iterations; ++k) {
    const double alpha = progress(k, config.grid.n_levels, anneal);
    const double lr = nn::learning_rate_at(k, config.lr0, config.breakpoint());
    const Index begin = pick(rng);
    auto it = targets.find(begin);
    if (it == targets.end() || k - it->second.computed_at >= config.mask_refresh)
      it = targets.insert_or_assign(begin, window_target(ctx, ck.params, begin, alpha, k)).first;

    nn::Tape<float> tape;
    ck.params.zero_grad();
    const WindowLoss loss = window_loss(tape, ck.params, ctx, begin, alpha, it->second);
    LogRow row{k, tape.scalar(loss.tc), tape.scalar(loss.detail), tape.scalar(loss.basic), tape.scalar(loss.total),
               alpha, lr};
    if (!std::isfinite(row.total)) {
      result.aborted = true;
      result.message = "non-finite loss at iteration " + std::to_string(k);
      break;
    }
    tape.backward(loss.total);
    ck.params.pull_grads(tape);
    try {
      nn::adam_step(adam, ck.params.values(), ck.params.grads(), lr);
    } catch (const NumericalError& e) {
      result.aborted = true;
      result.message = std::string(e.what()) + " at iteration " + std::to_string(k);
      break;
    }
    ck.iteration = k + 1;
    result.log.push_back(row);
    if (progress_cb) progress_cb(row);
  }

  result.base_flows = ctx.base_flows;
  result.rectified_flows = rectified_flows(ctx, ck.params, progress(ck.iteration, config.grid.n_levels, anneal));
  return result;
}

}  // namespace waterwave
