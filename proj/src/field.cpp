#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "waterwave/pipeline.hpp"

namespace waterwave {

using nlohmann::json;

void FitConfig::validate() const {
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  if (!(lr0 > 0)) throw InvalidArgument("lr0 must be positive");
  for (double l : {lambda_tc, lambda_detail, lambda_basic, lambda_rec})
    if (!(l >= 0) || !std::isfinite(l)) throw InvalidArgument("loss weights must be finite and >= 0");
  if (window < 2 || window % 2 != 0) throw InvalidArgument("window length must be even and >= 2");
  if (max_resolution < 8) throw InvalidArgument("max_resolution must be >= 8");
  if (mask_refresh < 1) throw InvalidArgument("mask_refresh must be >= 1");
  for (Index h : hidden)
    if (h < 1) throw InvalidArgument("hidden widths must be >= 1");
  for (Index h : tfr_hidden)
    if (h < 1) throw InvalidArgument("TFR hidden widths must be >= 1");
  thresholds.validate();
  grid.validate();
}

namespace {

json to_json(const FitConfig& c) {
  json j;
  j["iterations"] = c.iterations;
  j["lr0"] = c.lr0;
  j["lr_breakpoint"] = c.lr_breakpoint;
  j["lambda_tc"] = c.lambda_tc;
  j["lambda_detail"] = c.lambda_detail;
  j["lambda_basic"] = c.lambda_basic;
  j["lambda_rec"] = c.lambda_rec;
  j["mask_mode"] = to_string(c.mask_mode);
  j["window"] = c.window;
  j["max_resolution"] = c.max_resolution;
  j["anneal_steps"] = c.anneal_steps;
  j["seed"] = c.seed;
  j["mask_refresh"] = c.mask_refresh;
  j["beta0"] = c.thresholds.beta0;
  j["beta1"] = c.thresholds.beta1;
  j["grid"] = {{"n_levels", c.grid.n_levels},
               {"base_resolution", c.grid.base_resolution},
               {"per_level_scale", c.grid.per_level_scale},
               {"feature_dim", c.grid.feature_dim},
               {"table_size", c.grid.table_size},
               {"init_scale", c.grid.init_scale}};
  j["hidden"] = c.hidden;
  j["tfr_hidden"] = c.tfr_hidden;
  j["share_tables"] = c.share_tables;
  j["train_tfr"] = c.train_tfr;
  j["flow"] = {{"lambda", c.flow.lambda}, {"iterations", c.flow.iterations}, {"levels", c.flow.levels}};
  j["transmission"] = {{"omega", c.transmission.omega},
                       {"patch_radius", c.transmission.patch_radius},
                       {"t_min", c.transmission.t_min},
                       {"top_fraction", c.transmission.top_fraction}};
  return j;
}

void reject_unknown(const json& j, const json& reference, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument("config" + where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!reference.contains(key)) throw InvalidArgument("unknown config key '" + where + key + "'");
    if (reference[key].is_object()) reject_unknown(value, reference[key], where + key + ".");
  }
}

template <typename T>
void take(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

std::string config_to_json(const FitConfig& config) { return to_json(config).dump(); }

FitConfig config_from_json(const std::string& text, const FitConfig& base) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidArgument(std::string("config is not valid JSON: ") + e.what());
  }
  reject_unknown(j, to_json(base), "");
  FitConfig c = base;
  take(j, "iterations", c.iterations);
  take(j, "lr0", c.lr0);
  take(j, "lr_breakpoint", c.lr_breakpoint);
  take(j, "lambda_tc", c.lambda_tc);
  take(j, "lambda_detail", c.lambda_detail);
  take(j, "lambda_basic", c.lambda_basic);
  take(j, "lambda_rec", c.lambda_rec);
  if (j.contains("mask_mode")) {
    std::string mode;
    take(j, "mask_mode", mode);
    c.mask_mode = parse_mask_mode(mode);
  }
  take(j, "window", c.window);
  take(j, "max_resolution", c.max_resolution);
  take(j, "anneal_steps", c.anneal_steps);
  take(j, "seed", c.seed);
  take(j, "mask_refresh", c.mask_refresh);
  take(j, "beta0", c.thresholds.beta0);
  take(j, "beta1", c.thresholds.beta1);
  if (j.contains("grid")) {
    const json& g = j["grid"];
    take(g, "n_levels", c.grid.n_levels);
    take(g, "base_resolution", c.grid.base_resolution);
    take(g, "per_level_scale", c.grid.per_level_scale);
    take(g, "feature_dim", c.grid.feature_dim);
    take(g, "table_size", c.grid.table_size);
    take(g, "init_scale", c.grid.init_scale);
  }
  take(j, "hidden", c.hidden);
  take(j, "tfr_hidden", c.tfr_hidden);
  take(j, "share_tables", c.share_tables);
  take(j, "train_tfr", c.train_tfr);
  if (j.contains("flow")) {
    const json& f = j["flow"];
    take(f, "lambda", c.flow.lambda);
    take(f, "iterations", c.flow.iterations);
    take(f, "levels", c.flow.levels);
  }
  if (j.contains("transmission")) {
    const json& t = j["transmission"];
    take(t, "omega", c.transmission.omega);
    take(t, "patch_radius", c.transmission.patch_radius);
    take(t, "t_min", c.transmission.t_min);
    take(t, "top_fraction", c.transmission.top_fraction);
  }
  c.validate();
  return c;
}

namespace field {

nn::MlpSpec color_spec(const FitConfig& config, Index channels) {
  return nn::MlpSpec{config.grid.embedding_width(), config.hidden, channels, nn::Head::Sigmoid};
}

nn::MlpSpec tfr_spec(const FitConfig& config) { return tfr_mlp_spec(config.grid, config.tfr_hidden); }

nn::ParamStore<float> init_params(const FitConfig& config, Index channels) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  nn::ParamStore<float> store;
  add_hash_table(store, kTable, config.grid, rng);
  nn::add_mlp(store, kColor, color_spec(config, channels), rng, false);
  if (!config.share_tables) add_hash_table(store, kTfrTable, config.grid, rng);
  nn::add_mlp(store, kTfr, tfr_spec(config), rng, true);
  return store;
}

}  // namespace field

VideoVolume render(const FieldCheckpoint& ck, std::optional<Index> frames, std::optional<Index> height,
                   std::optional<Index> width) {
  const Index T = frames.value_or(ck.video_shape.t), H = height.value_or(ck.video_shape.h),
              W = width.value_or(ck.video_shape.w), C = ck.video_shape.c;
  if (T < 1 || H < 2 || W < 2) throw InvalidArgument("render: requested shape must be at least 1x2x2");
  auto store = ck.params.cast<double>();
  const double alpha = progress(ck.iteration, ck.config.grid.n_levels, ck.config.anneal());
  VideoVolume out(T, H, W, C);
  for (Index t = 0; t < T; ++t) {
    nn::Tape<double> tape(false);
    const CoordGrid coords = normalized_coords(FrameWindow{t, t + 1, T}, H, W);
    nn::Var f = field::color(tape, store, ck.config, C, coords, alpha);
    out.data().segment(t * H * W * C, H * W * C) = tape.value(f).data();
  }
  return out;
}

std::string log_csv(const std::vector<LogRow>& rows) {
  std::ostringstream os;
  os.precision(9);
  os << "iteration,loss_tc,loss_detail,loss_basic,total,alpha,lr\n";
  for (const auto& r : rows)
    os << r.iteration << ',' << r.loss_tc << ',' << r.loss_detail << ',' << r.loss_basic << ',' << r.total << ','
       << r.alpha << ',' << r.lr << '\n';
  return os.str();
}

void write_log_csv(const std::vector<LogRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << log_csv(rows);
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace waterwave
