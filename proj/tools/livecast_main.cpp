// Command-line front end. One binary, six subcommands:
//   generate    synthetic traffic -> frames file
//   ingest      telemetry rows -> frames file
//   train       frames + model spec -> weights file
//   predict     weights + frames -> forecast transcript
//   experiment  plan JSON -> comparison tables
//   complexity  model spec -> cost report
//
// Every subcommand accepts --config <flat json> (keys = long flag names,
// underscores allowed); command-line flags override the file, and
// LIVECAST_SEED overrides a config-file seed. Each run writes manifest.json
// into its output directory with the effective configuration, the seed, and
// checksums of everything it wrote, so a run can be reproduced byte for byte.
//
// Exit codes: 0 success, 2 configuration or usage errors, 1 runtime errors.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "livecast/complexity.hpp"
#include "livecast/error.hpp"
#include "livecast/harness.hpp"
#include "livecast/ingest.hpp"
#include "livecast/model_io.hpp"
#include "livecast/predictors.hpp"
#include "livecast/rng.hpp"
#include "livecast/train.hpp"

namespace {

constexpr const char* kVersion = "0.3.0";
constexpr const char* kContainerFormat = "LCST1";

namespace fs = std::filesystem;
using nlohmann::json;
using livecast::derive_seed;
using livecast::tensor::Tensor;
namespace engine = livecast::engine;
namespace models = livecast::models;
namespace stats = livecast::stats;
namespace sim = livecast::sim;
namespace cost = livecast::cost;
namespace ingest = livecast::ingest;
namespace harness = livecast::harness;

std::string json_scalar(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  return v.dump();
}

// Flat-JSON config files: {"rows": 16, "seed": 7}. Keys match long option
// names; underscores and dashes are interchangeable. Applied at the start of
// each subcommand's callback, filling in only options the command line or
// environment left untouched, so flags > LIVECAST_SEED > config > defaults.
void apply_config(CLI::App& cmd, const std::string& path) {
  if (path.empty()) return;
  std::ifstream in(path);
  if (!in) throw livecast::ConfigError("cannot open config file " + path);
  json data = json::parse(in, nullptr, false);
  if (data.is_discarded() || !data.is_object())
    throw livecast::ConfigError("config file is not a flat JSON object: " + path);

  for (auto it = data.begin(); it != data.end(); ++it) {
    std::string name = it.key();
    std::replace(name.begin(), name.end(), '_', '-');
    CLI::Option* opt = cmd.get_option_no_throw("--" + name);
    if (opt == nullptr || name == "config")
      throw livecast::ConfigError("config key '" + it.key() + "' is not an option of " +
                                  cmd.get_name());
    if (opt->count() > 0) continue;
    const json& v = it.value();
    if (v.is_array())
      for (const json& e : v) opt->add_result(json_scalar(e));
    else
      opt->add_result(json_scalar(v));
    opt->run_callback();
  }
}

std::uint64_t fnv1a_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw livecast::Error("cannot read back " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[1 << 14];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (got < static_cast<std::streamsize>(sizeof buf)) break;
  }
  return h;
}

std::string checksum_hex(const fs::path& path) {
  std::ostringstream out;
  out << "fnv1a:" << std::hex << fnv1a_file(path);
  return out.str();
}

// Resolve a file flag against the run's output directory; absolute paths and
// paths with directory components are honoured as given.
fs::path in_dir(const std::string& out_dir, const std::string& name) {
  fs::path p(name);
  if (p.is_absolute() || p.has_parent_path()) return p;
  return fs::path(out_dir) / p;
}

// Effective configuration of one subcommand: every configurable option with
// the value that actually applied (given or default).
json effective_config(const CLI::App& cmd) {
  json out = json::object();
  for (const CLI::Option* opt : cmd.get_options()) {
    if (opt->get_lnames().empty()) continue;
    const std::string name = opt->get_lnames()[0];
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      if (results.size() == 1)
        out[name] = results[0];
      else
        out[name] = results;
    } else {
      out[name] = opt->get_default_str();
    }
  }
  return out;
}

void write_manifest(const std::string& out_dir, const CLI::App& cmd,
                    const std::vector<fs::path>& outputs, json extra = json::object()) {
  json manifest;
  manifest["tool"] = "livecast";
  manifest["version"] = kVersion;
  manifest["container_format"] = kContainerFormat;
  manifest["subcommand"] = cmd.get_name();
  manifest["config"] = effective_config(cmd);
  for (auto it = extra.begin(); it != extra.end(); ++it) manifest[it.key()] = it.value();
  json sums = json::object();
  for (const fs::path& p : outputs) sums[p.filename().string()] = checksum_hex(p);
  manifest["outputs"] = sums;

  fs::create_directories(out_dir);
  std::ofstream out(fs::path(out_dir) / "manifest.json");
  out << manifest.dump(2) << "\n";
}

void ensure_dir(const std::string& out_dir) { fs::create_directories(out_dir); }

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw livecast::ConfigError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

engine::GatherMode parse_mode(const std::string& name) {
  if (name == "sync") return engine::GatherMode::sync;
  if (name == "async") return engine::GatherMode::async;
  throw livecast::ConfigError("unknown gather mode '" + name + "' (sync|async)");
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  int rows = 8, cols = 8, channels = 3, slot_minutes = 10;
  int slots = 600;
  std::uint64_t seed = 1;
  bool no_smooth = false;
  std::string out = "frames.bin";
  std::string csv;
  std::string out_dir = ".";
};

void setup_generate(CLI::App& app) {
  auto args = std::make_shared<GenerateArgs>();
  CLI::App* cmd = app.add_subcommand("generate", "Generate synthetic grid traffic");
  cmd->add_option("--rows", args->rows, "Grid rows")->capture_default_str();
  cmd->add_option("--cols", args->cols, "Grid columns")->capture_default_str();
  cmd->add_option("--channels", args->channels, "Traffic channels per cell")->capture_default_str();
  cmd->add_option("--slot-minutes", args->slot_minutes, "Minutes per time slot")->capture_default_str();
  cmd->add_option("--slots", args->slots, "Number of slots to generate")->capture_default_str();
  cmd->add_option("--seed", args->seed, "Master seed")->envname("LIVECAST_SEED")->capture_default_str();
  cmd->add_flag("--no-smooth", args->no_smooth, "Skip neighbourhood smoothing");
  cmd->add_option("--out", args->out, "Frames file to write")->capture_default_str();
  cmd->add_option("--csv", args->csv, "Also write frames as CSV to this path");
  cmd->add_option("--out-dir", args->out_dir, "Output directory")->capture_default_str();
  auto config_path = std::make_shared<std::string>();
  cmd->add_option("--config", *config_path, "Flat JSON config file (keys = long option names)");

  cmd->callback([args, cmd, config_path]() {
    apply_config(*cmd, *config_path);
    engine::GridSpec grid{args->rows, args->cols, args->channels, args->slot_minutes};
    grid.validate();
    if (args->slots < 1) throw livecast::ConfigError("--slots must be positive");

    const auto profiles = sim::default_profiles(grid, args->seed);
    auto frames = sim::generate(grid, profiles, args->slots, derive_seed(args->seed, 1));
    if (!args->no_smooth)
      frames = sim::spatial_smooth(grid, frames, sim::kSmoothRadius, sim::kSmoothStrength);

    ensure_dir(args->out_dir);
    std::vector<fs::path> written;
    const fs::path out_path = in_dir(args->out_dir, args->out);
    ingest::save_frames(out_path.string(), grid, frames);
    written.push_back(out_path);
    if (!args->csv.empty()) {
      const fs::path csv_path = in_dir(args->out_dir, args->csv);
      ingest::write_frames_csv(csv_path.string(), grid, frames);
      written.push_back(csv_path);
    }
    write_manifest(args->out_dir, *cmd, written, {{"seed", args->seed}});
    std::cout << "generated " << frames.size() << " frames on " << grid.rows << "x" << grid.cols
              << "x" << grid.channels << " -> " << out_path.string() << "\n";
  });
}

// ------------------------------------------------------------------ ingest

struct IngestArgs {
  std::string input;
  int rows = 8, cols = 8, slot_minutes = 10;
  long long start_ms = 0;
  int slots = 0;
  std::string square_map;
  int crop_row = 0, crop_col = 0, crop_rows = 0, crop_cols = 0;
  std::string out = "frames.bin";
  std::string csv;
  std::string out_dir = ".";
};

void setup_ingest(CLI::App& app) {
  auto args = std::make_shared<IngestArgs>();
  CLI::App* cmd = app.add_subcommand("ingest", "Aggregate telemetry rows into traffic frames");
  cmd->add_option("--input", args->input, "Telemetry CSV/TSV file")->required();
  cmd->add_option("--rows", args->rows, "Grid rows")->capture_default_str();
  cmd->add_option("--cols", args->cols, "Grid columns")->capture_default_str();
  cmd->add_option("--slot-minutes", args->slot_minutes, "Minutes per time slot")->capture_default_str();
  cmd->add_option("--start-ms", args->start_ms, "Epoch milliseconds of slot 0")->capture_default_str();
  cmd->add_option("--slots", args->slots, "Slots in the aggregation window")->required();
  cmd->add_option("--square-map", args->square_map, "Optional square_id,row,col routing file");
  cmd->add_option("--crop-row", args->crop_row, "First row of crop window")->capture_default_str();
  cmd->add_option("--crop-col", args->crop_col, "First column of crop window")->capture_default_str();
  cmd->add_option("--crop-rows", args->crop_rows, "Crop height (0 = no crop)")->capture_default_str();
  cmd->add_option("--crop-cols", args->crop_cols, "Crop width (0 = no crop)")->capture_default_str();
  cmd->add_option("--out", args->out, "Frames file to write")->capture_default_str();
  cmd->add_option("--csv", args->csv, "Also write frames as CSV to this path");
  cmd->add_option("--out-dir", args->out_dir, "Output directory")->capture_default_str();
  auto config_path = std::make_shared<std::string>();
  cmd->add_option("--config", *config_path, "Flat JSON config file (keys = long option names)");

  cmd->callback([args, cmd, config_path]() {
    apply_config(*cmd, *config_path);
    engine::GridSpec grid{args->rows, args->cols, 3, args->slot_minutes};
    grid.validate();
    const auto records = ingest::parse_cdr_file(args->input);
    ingest::SlotWindow window{args->start_ms, args->slots};
    ingest::SquareMap map;
    if (!args->square_map.empty()) map = ingest::load_square_map(args->square_map, grid);
    auto frames = ingest::aggregate(records, grid, window, map);
    if (args->crop_rows > 0 || args->crop_cols > 0) {
      auto cropped = ingest::crop(grid, frames, args->crop_row, args->crop_rows, args->crop_col,
                                  args->crop_cols);
      grid = cropped.first;
      frames = std::move(cropped.second);
    }

    ensure_dir(args->out_dir);
    std::vector<fs::path> written;
    const fs::path out_path = in_dir(args->out_dir, args->out);
    ingest::save_frames(out_path.string(), grid, frames);
    written.push_back(out_path);
    if (!args->csv.empty()) {
      const fs::path csv_path = in_dir(args->out_dir, args->csv);
      ingest::write_frames_csv(csv_path.string(), grid, frames);
      written.push_back(csv_path);
    }
    write_manifest(args->out_dir, *cmd, written,
                   {{"records", records.size()}, {"frames", frames.size()}});
    std::cout << "aggregated " << records.size() << " records into " << frames.size()
              << " frames -> " << out_path.string() << "\n";
  });
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string model = "lstm";
  int hidden = 32, lstm_layers = 2, dense_layers = 2, dense_width = 32, kernel = 3;
  std::vector<int> conv_channels{4, 4};
  std::vector<int> convlstm_channels{4, 4};
  std::vector<int> head_channels{4};
  double dropout = 0.0;
  int epochs = 8;
  double lr = 5e-3, clip_norm = 5.0;
  int window = 32;
  std::uint64_t seed = 1;
  int train_len = 0;
  int row = -1, col = -1, channel = 0;
  bool raw = false;
  std::string out = "weights.bin";
  std::string out_dir = ".";
};

// Sidecar written next to the weights: the standardization applied during
// training, plus the focus cell for single-cell models. predict picks it up
// automatically so forecasts come back in raw units.
json stats_sidecar(const harness::ChannelStats& stats, bool single_cell, int row, int col,
                   int channel) {
  json side;
  side["mean"] = stats.mean;
  side["scale"] = stats.scale;
  side["single_cell"] = single_cell;
  if (single_cell) {
    side["row"] = row;
    side["col"] = col;
    side["channel"] = channel;
  }
  return side;
}

void setup_train(CLI::App& app) {
  auto args = std::make_shared<TrainArgs>();
  CLI::App* cmd = app.add_subcommand("train", "Train a forecasting model on a frames file");
  cmd->add_option("--data", args->data, "Frames file with training history")->required();
  cmd->add_option("--model", args->model, "Architecture: lstm | cnn_lstm | convlstm")
      ->capture_default_str();
  cmd->add_option("--hidden", args->hidden, "Recurrent width")->capture_default_str();
  cmd->add_option("--lstm-layers", args->lstm_layers, "Stacked recurrent layers")->capture_default_str();
  cmd->add_option("--dense-layers", args->dense_layers, "Dense head depth")->capture_default_str();
  cmd->add_option("--dense-width", args->dense_width, "Dense head width")->capture_default_str();
  cmd->add_option("--kernel", args->kernel, "Convolution kernel size")->capture_default_str();
  cmd->add_option("--conv-channels", args->conv_channels, "Encoder channels per layer (cnn_lstm)")
      ->capture_default_str();
  cmd->add_option("--convlstm-channels", args->convlstm_channels, "Recurrent channels per layer")
      ->capture_default_str();
  cmd->add_option("--head-channels", args->head_channels,
                  "Head hidden channels (convlstm); a single 0 means direct projection")
      ->capture_default_str();
  cmd->add_option("--dropout", args->dropout, "Dropout between recurrent layers")->capture_default_str();
  cmd->add_option("--epochs", args->epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--lr", args->lr, "Learning rate")->capture_default_str();
  cmd->add_option("--clip-norm", args->clip_norm, "Gradient norm ceiling (<=0 disables)")
      ->capture_default_str();
  cmd->add_option("--window", args->window, "Backprop chunk length in slots")->capture_default_str();
  cmd->add_option("--seed", args->seed, "Master seed")->envname("LIVECAST_SEED")->capture_default_str();
  cmd->add_option("--train-len", args->train_len, "Train on the first N frames (0 = all)")
      ->capture_default_str();
  cmd->add_option("--row", args->row, "Focus cell row for single-cell models (-1 = centre)")
      ->capture_default_str();
  cmd->add_option("--col", args->col, "Focus cell column for single-cell models (-1 = centre)")
      ->capture_default_str();
  cmd->add_option("--channel", args->channel, "Focus channel for single-cell models")
      ->capture_default_str();
  cmd->add_flag("--raw", args->raw, "Train on raw values without per-channel standardization");
  cmd->add_option("--out", args->out, "Weights file to write")->capture_default_str();
  cmd->add_option("--out-dir", args->out_dir, "Output directory")->capture_default_str();
  auto config_path = std::make_shared<std::string>();
  cmd->add_option("--config", *config_path, "Flat JSON config file (keys = long option names)");

  cmd->callback([args, cmd, config_path]() {
    apply_config(*cmd, *config_path);
    auto [grid, frames] = ingest::load_frames(args->data);
    if (args->train_len > 0 && args->train_len < static_cast<int>(frames.size()))
      frames.resize(static_cast<std::size_t>(args->train_len));
    if (frames.size() < 2) throw livecast::ConfigError("training needs at least two frames");

    models::ModelSpec spec;
    spec.arch = models::arch_from_name(args->model);
    spec.hidden = args->hidden;
    spec.lstm_layers = args->lstm_layers;
    spec.dense_layers = args->dense_layers;
    spec.dense_width = args->dense_width;
    spec.kernel = args->kernel;
    spec.conv_channels = args->conv_channels;
    spec.convlstm_channels = args->convlstm_channels;
    spec.head_channels = args->head_channels;
    if (spec.head_channels == std::vector<int>{0}) spec.head_channels.clear();
    spec.dropout = args->dropout;

    const bool single_cell = spec.arch == models::Arch::lstm;
    int row = args->row, col = args->col;
    if (row < 0) row = grid.rows / 2;
    if (col < 0) col = grid.cols / 2;

    std::vector<Tensor> series;
    engine::GridSpec train_grid = grid;
    if (single_cell) {
      spec.input_dim = 1;
      if (args->channel < 0 || args->channel >= grid.channels)
        throw livecast::ConfigError("--channel outside the grid's channels");
      train_grid = engine::GridSpec{1, 1, 1, grid.slot_minutes};
      const auto values = harness::extract_series(grid, frames, engine::cell_index(grid, row, col),
                                                  args->channel);
      series = harness::series_frames(values);
    } else {
      spec.channels_in = grid.channels;
      spec.grid_h = grid.rows;
      spec.grid_w = grid.cols;
      series = frames;
    }
    spec.validate();

    harness::ChannelStats stats;
    if (!args->raw) {
      stats = harness::channel_stats(train_grid, series);
      series = harness::standardize(train_grid, series, stats);
    }
    if (single_cell)
      for (Tensor& f : series) f = Tensor::from_values({1}, f.values());

    auto model = models::build_model(spec, derive_seed(args->seed, 1));
    models::TrainOptions opts;
    opts.epochs = args->epochs;
    opts.lr = args->lr;
    opts.clip_norm = args->clip_norm;
    opts.window = args->window;
    opts.dropout_seed = derive_seed(args->seed, 2);
    const auto report = models::train(*model, series, opts);

    ensure_dir(args->out_dir);
    std::vector<fs::path> written;
    const fs::path out_path = in_dir(args->out_dir, args->out);
    models::save_model(*model, out_path.string());
    written.push_back(out_path);

    json extra{{"seed", args->seed}, {"epoch_loss", report.epoch_loss}};
    if (!args->raw) {
      const fs::path stats_path = out_path.string() + ".stats.json";
      std::ofstream side(stats_path);
      side << stats_sidecar(stats, single_cell, row, col, args->channel).dump(2) << "\n";
      side.close();
      written.push_back(stats_path);
    }
    write_manifest(args->out_dir, *cmd, written, extra);

    std::cout << "trained " << args->model << " on " << series.size() << " slots";
    if (single_cell) std::cout << " (cell " << row << "," << col << " channel " << args->channel << ")";
    std::cout << "\n";
    for (std::size_t e = 0; e < report.epoch_loss.size(); ++e)
      std::cout << "  epoch " << (e + 1) << "  loss " << report.epoch_loss[e] << "\n";
    std::cout << "weights -> " << out_path.string() << "\n";
  });
}

// ----------------------------------------------------------------- predict

struct PredictArgs {
  std::string weights;
  std::string data;
  int skip = 0;
  std::string algo = "flsp";
  int buffer = 20;
  std::string mode = "sync";
  int seed_len = 60, feed_len = 15, span = 30, collect_frame = 0;
  int feeds = 0;
  std::string stats;
  std::string out = "transcript.csv";
  std::string out_dir = ".";
};

void setup_predict(CLI::App& app) {
  auto args = std::make_shared<PredictArgs>();
  CLI::App* cmd = app.add_subcommand("predict", "Stream a frames file through a trained model");
  cmd->add_option("--weights", args->weights, "Weights file from train")->required();
  cmd->add_option("--data", args->data, "Frames file providing seed and live reports")->required();
  cmd->add_option("--skip", args->skip, "Frames to skip before the seed window")->capture_default_str();
  cmd->add_option("--algo", args->algo, "Scheduling: flsp | rolling")->capture_default_str();
  cmd->add_option("--buffer", args->buffer, "Rolling buffer length in feed batches")
      ->capture_default_str();
  cmd->add_option("--mode", args->mode, "Report gathering: sync | async")->capture_default_str();
  cmd->add_option("--seed-len", args->seed_len, "Seed conditioning slots")->capture_default_str();
  cmd->add_option("--feed-len", args->feed_len, "Slots per feed")->capture_default_str();
  cmd->add_option("--span", args->span, "Prediction span per feed")->capture_default_str();
  cmd->add_option("--collect-frame", args->collect_frame, "Collection frame slots (0 = feed length)")
      ->capture_default_str();
  cmd->add_option("--feeds", args->feeds, "Feed rounds to run (0 = as many as the data allows)")
      ->capture_default_str();
  cmd->add_option("--stats", args->stats,
                  "Standardization sidecar (default: <weights>.stats.json when present)");
  cmd->add_option("--out", args->out, "Transcript CSV to write")->capture_default_str();
  cmd->add_option("--out-dir", args->out_dir, "Output directory")->capture_default_str();
  auto config_path = std::make_shared<std::string>();
  cmd->add_option("--config", *config_path, "Flat JSON config file (keys = long option names)");

  cmd->callback([args, cmd, config_path]() {
    apply_config(*cmd, *config_path);
    if (args->algo != "flsp" && args->algo != "rolling")
      throw livecast::ConfigError("unknown algorithm '" + args->algo + "' (flsp|rolling)");
    const bool rolling = args->algo == "rolling";

    std::shared_ptr<models::SequenceModel> model = models::load_model(args->weights);
    auto [grid, frames] = ingest::load_frames(args->data);
    if (args->skip > 0) {
      if (args->skip >= static_cast<int>(frames.size()))
        throw livecast::ConfigError("--skip leaves no frames");
      frames.erase(frames.begin(), frames.begin() + args->skip);
    }

    // Standardization sidecar: explicit flag, else auto-detect beside the weights.
    std::string stats_path = args->stats;
    if (stats_path.empty()) {
      const std::string candidate = args->weights + ".stats.json";
      if (fs::exists(candidate)) stats_path = candidate;
    }
    harness::ChannelStats stats;
    bool have_stats = false;
    bool sidecar_single = false;
    int row = grid.rows / 2, col = grid.cols / 2, channel = 0;
    if (!stats_path.empty()) {
      const json side = json::parse(read_file(stats_path));
      stats.mean = side.at("mean").get<std::vector<double>>();
      stats.scale = side.at("scale").get<std::vector<double>>();
      have_stats = true;
      sidecar_single = side.value("single_cell", false);
      if (sidecar_single) {
        row = side.value("row", row);
        col = side.value("col", col);
        channel = side.value("channel", channel);
      }
    }

    const bool single_cell = model->spec().arch == models::Arch::lstm;
    if (have_stats && sidecar_single != single_cell)
      throw livecast::ConfigError("stats sidecar does not match the model's input kind");

    engine::GridSpec run_grid = grid;
    std::vector<Tensor> truth = frames;
    if (single_cell) {
      run_grid = engine::GridSpec{1, 1, 1, grid.slot_minutes};
      truth = harness::series_frames(
          harness::extract_series(grid, frames, engine::cell_index(grid, row, col), channel));
    }

    engine::StreamConfig cfg;
    cfg.seed_len = args->seed_len;
    cfg.feed_len = args->feed_len;
    cfg.span = args->span;
    cfg.collect_frame = args->collect_frame > 0 ? args->collect_frame : args->feed_len;
    cfg.mode = parse_mode(args->mode);
    if (rolling) {
      if (args->buffer < 1) throw livecast::ConfigError("--buffer must be at least 1 batch");
      const long long len = static_cast<long long>(args->buffer) * cfg.feed_len;
      cfg.buffer_len = static_cast<int>(std::min<long long>(len, 1 << 28));
    }
    cfg.validate(rolling);

    int feeds = args->feeds;
    const int available = (static_cast<int>(truth.size()) - cfg.seed_len) / cfg.feed_len;
    if (feeds <= 0) feeds = available;
    if (feeds < 1 || feeds > available)
      throw livecast::ConfigError("data covers " + std::to_string(available) + " feeds, asked for " +
                                  std::to_string(feeds));

    std::unique_ptr<engine::StreamPredictor> predictor =
        std::make_unique<engine::NeuralStreamPredictor>(model, run_grid);
    if (have_stats)
      predictor = std::make_unique<harness::StandardizedPredictor>(std::move(predictor), run_grid,
                                                                   stats);

    harness::SimFeedSource source(run_grid, truth, cfg, feeds,
                                  rolling ? sim::Consumer::rolling : sim::Consumer::snapshot);
    const engine::SessionResult result = rolling
                                             ? engine::rolling_session(*predictor, cfg, source, run_grid)
                                             : engine::flsp_session(*predictor, cfg, source, run_grid);

    std::map<long, Tensor> actuals;
    for (std::size_t s = 0; s < truth.size(); ++s) actuals.emplace(static_cast<long>(s), truth[s]);

    ensure_dir(args->out_dir);
    const fs::path out_path = in_dir(args->out_dir, args->out);
    engine::write_transcript(out_path.string(), result, run_grid, actuals);

    json extra{{"feeds", result.feeds},
               {"predictor_steps", result.predictor_steps},
               {"reported_samples", result.reported_samples},
               {"max_buffer_frames", result.max_buffer_frames}};
    const long last_needed = cfg.seed_len + static_cast<long>(feeds) * cfg.feed_len + cfg.span;
    if (last_needed <= static_cast<long>(truth.size())) {
      const double mse = harness::monitor_mse(result.monitor, truth);
      extra["mse"] = mse;
      std::cout << "monitored mse " << mse << "\n";
    }
    write_manifest(args->out_dir, *cmd, {out_path}, extra);
    std::cout << result.feeds << " feeds, " << result.predictor_steps << " predictor steps, "
              << result.reported_samples << " reported samples -> " << out_path.string() << "\n";
  });
}

// -------------------------------------------------------------- experiment

struct ExperimentArgs {
  std::string plan;
  int reps = -1;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int jobs = -1;
  std::vector<std::string> models, algos, modes;
  int stream_len = 0, train_len = 0;
  std::string out_dir = ".";
};

void setup_experiment(CLI::App& app) {
  auto args = std::make_shared<ExperimentArgs>();
  CLI::App* cmd = app.add_subcommand("experiment", "Run a model x algorithm x mode comparison");
  cmd->add_option("--plan", args->plan, "Experiment plan JSON file (defaults apply when omitted)");
  cmd->add_option("--reps", args->reps, "Override repetitions");
  CLI::Option* seed_opt =
      cmd->add_option("--seed", args->seed, "Override master seed")->envname("LIVECAST_SEED");
  cmd->add_option("--jobs", args->jobs, "Worker threads (0 = all cores)");
  cmd->add_option("--models", args->models, "Override model lineup")->delimiter(',');
  cmd->add_option("--algos", args->algos, "Override algorithms, e.g. flsp,rolling-20")->delimiter(',');
  cmd->add_option("--modes", args->modes, "Override gather modes")->delimiter(',');
  cmd->add_option("--stream-len", args->stream_len, "Override streamed slots per repetition");
  cmd->add_option("--train-len", args->train_len, "Override training slots per repetition");
  cmd->add_option("--out-dir", args->out_dir, "Output directory")->capture_default_str();
  auto config_path = std::make_shared<std::string>();
  cmd->add_option("--config", *config_path, "Flat JSON config file (keys = long option names)");

  cmd->callback([args, cmd, seed_opt, config_path]() {
    apply_config(*cmd, *config_path);
    json plan_json = json::object();
    if (!args->plan.empty()) {
      plan_json = json::parse(read_file(args->plan), nullptr, false);
      if (plan_json.is_discarded() || !plan_json.is_object())
        throw livecast::ConfigError("plan file is not a JSON object: " + args->plan);
    }
    if (args->reps > 0) plan_json["repetitions"] = args->reps;
    if (seed_opt->count() > 0) plan_json["master_seed"] = args->seed;
    if (args->jobs >= 0) plan_json["jobs"] = args->jobs;
    if (!args->models.empty()) plan_json["models"] = args->models;
    if (!args->algos.empty()) plan_json["algorithms"] = args->algos;
    if (!args->modes.empty()) plan_json["modes"] = args->modes;
    if (args->stream_len > 0) plan_json["stream_len"] = args->stream_len;
    if (args->train_len > 0) plan_json["train_len"] = args->train_len;

    ensure_dir(args->out_dir);
    if (!plan_json.contains("incremental_path"))
      plan_json["incremental_path"] = (fs::path(args->out_dir) / "cells_incremental.csv").string();

    harness::ExperimentPlan plan = harness::plan_from_json(plan_json.dump());
    const harness::ExperimentResult result = harness::run(plan);

    std::vector<fs::path> written;
    auto emit = [&](const std::string& name, const std::string& text) {
      const fs::path p = fs::path(args->out_dir) / name;
      std::ofstream out(p);
      out << text;
      written.push_back(p);
    };
    emit("cells.csv", harness::cells_csv(result));
    emit("rows.csv", harness::rows_csv(result));
    emit("result.json", harness::to_json(result));
    const std::string table = harness::summary_table(result);
    emit("summary.txt", table);
    const fs::path plot_path = fs::path(args->out_dir) / "plot.csv";
    harness::write_plot_data(plot_path.string(), result);
    written.push_back(plot_path);
    written.push_back(fs::path(plan.incremental_path));

    write_manifest(args->out_dir, *cmd, written,
                   {{"plan", plan_json}, {"combinations", result.rows.size()}});
    std::cout << table;
    std::cout << "results -> " << args->out_dir << "\n";
  });
}

// -------------------------------------------------------------- complexity

struct ComplexityArgs {
  std::string model = "arima";
  int p = 0, d = 0, q = 0, sp = 0, sd = 0, sq = 0, period = 1;
  int input_dim = 1, hidden = 64, lstm_layers = 2, dense_layers = 2, dense_width = 64, kernel = 3;
  int rows = 8, cols = 8, channels = 3;
  std::vector<int> conv_channels{4, 4};
  std::vector<int> convlstm_channels{4, 4};
  std::vector<int> head_channels{4};
  std::string algo;
  int batch = 1;
  long long buffer_samples = 400;
  int seed_len = 600, feed_len = 15, span = 30, buffer_len = 300;
  bool formulas = false;
  std::string json_out;
  std::string out_dir = ".";
};

void setup_complexity(CLI::App& app) {
  auto args = std::make_shared<ComplexityArgs>();
  CLI::App* cmd = app.add_subcommand("complexity", "Analytic cost of a model under each scheduler");
  cmd->add_option("--model", args->model, "arima | sarima | lstm | cnn_lstm | convlstm")
      ->capture_default_str();
  cmd->add_option("--p", args->p, "AR order")->capture_default_str();
  cmd->add_option("--d", args->d, "Differencing order")->capture_default_str();
  cmd->add_option("--q", args->q, "MA order")->capture_default_str();
  cmd->add_option("--sp", args->sp, "Seasonal AR order")->capture_default_str();
  cmd->add_option("--sd", args->sd, "Seasonal differencing order")->capture_default_str();
  cmd->add_option("--sq", args->sq, "Seasonal MA order")->capture_default_str();
  cmd->add_option("--period", args->period, "Seasonal period")->capture_default_str();
  cmd->add_option("--input-dim", args->input_dim, "LSTM features per slot")->capture_default_str();
  cmd->add_option("--hidden", args->hidden, "Recurrent width")->capture_default_str();
  cmd->add_option("--lstm-layers", args->lstm_layers, "Stacked recurrent layers")->capture_default_str();
  cmd->add_option("--dense-layers", args->dense_layers, "Dense head depth")->capture_default_str();
  cmd->add_option("--dense-width", args->dense_width, "Dense head width")->capture_default_str();
  cmd->add_option("--kernel", args->kernel, "Convolution kernel size")->capture_default_str();
  cmd->add_option("--rows", args->rows, "Grid rows")->capture_default_str();
  cmd->add_option("--cols", args->cols, "Grid columns")->capture_default_str();
  cmd->add_option("--channels", args->channels, "Frame channels")->capture_default_str();
  cmd->add_option("--conv-channels", args->conv_channels, "Encoder channels per layer (cnn_lstm)")
      ->capture_default_str();
  cmd->add_option("--convlstm-channels", args->convlstm_channels, "Recurrent channels per layer")
      ->capture_default_str();
  cmd->add_option("--head-channels", args->head_channels, "Head hidden channels (convlstm)")
      ->capture_default_str();
  cmd->add_option("--algo", args->algo, "Restrict to one scheduler: flsp | rolling");
  cmd->add_option("--batch", args->batch, "Training batch size n_bs")->capture_default_str();
  cmd->add_option("--buffer-samples", args->buffer_samples, "Rolling raw-sample buffer b_f")
      ->capture_default_str();
  cmd->add_option("--seed-len", args->seed_len, "Seed conditioning slots")->capture_default_str();
  cmd->add_option("--feed-len", args->feed_len, "Slots per feed")->capture_default_str();
  cmd->add_option("--span", args->span, "Prediction span per feed")->capture_default_str();
  cmd->add_option("--buffer-len", args->buffer_len, "Rolling buffer length in slots")
      ->capture_default_str();
  cmd->add_flag("--formulas", args->formulas, "Also print the symbolic formula table");
  cmd->add_option("--json", args->json_out, "Write the reports as JSON to this path");
  cmd->add_option("--out-dir", args->out_dir, "Output directory")->capture_default_str();
  auto config_path = std::make_shared<std::string>();
  cmd->add_option("--config", *config_path, "Flat JSON config file (keys = long option names)");

  cmd->callback([args, cmd, config_path]() {
    apply_config(*cmd, *config_path);
    engine::StreamConfig cfg;
    cfg.seed_len = args->seed_len;
    cfg.feed_len = args->feed_len;
    cfg.span = args->span;
    cfg.buffer_len = args->buffer_len;

    std::vector<cost::Algorithm> algos;
    if (args->algo.empty())
      algos = {cost::Algorithm::flsp, cost::Algorithm::rolling};
    else if (args->algo == "flsp")
      algos = {cost::Algorithm::flsp};
    else if (args->algo == "rolling")
      algos = {cost::Algorithm::rolling};
    else
      throw livecast::ConfigError("unknown algorithm '" + args->algo + "' (flsp|rolling)");

    std::vector<cost::CostReport> reports;
    if (args->model == "arima" || args->model == "sarima") {
      stats::SarimaOrder order;
      order.p = args->p;
      order.d = args->d;
      order.q = args->q;
      if (args->model == "sarima") {
        order.P = args->sp;
        order.D = args->sd;
        order.Q = args->sq;
        order.m = args->period;
      }
      order.validate();
      for (cost::Algorithm a : algos) reports.push_back(cost::analyze(order, a, cfg));
    } else {
      models::ModelSpec spec;
      spec.arch = models::arch_from_name(args->model);
      spec.input_dim = args->input_dim;
      spec.hidden = args->hidden;
      spec.lstm_layers = args->lstm_layers;
      spec.dense_layers = args->dense_layers;
      spec.dense_width = args->dense_width;
      spec.kernel = args->kernel;
      spec.channels_in = args->channels;
      spec.grid_h = args->rows;
      spec.grid_w = args->cols;
      spec.conv_channels = args->conv_channels;
      spec.convlstm_channels = args->convlstm_channels;
      spec.head_channels = args->head_channels;
      if (spec.head_channels == std::vector<int>{0}) spec.head_channels.clear();
      spec.validate();
      cost::MemoryParams mem{args->batch, args->buffer_samples};
      for (cost::Algorithm a : algos) reports.push_back(cost::analyze(spec, a, cfg, mem));
    }

    std::cout << cost::report_table(reports);
    for (const cost::CostReport& r : reports)
      std::cout << r.model << " " << r.algorithm << ": flops " << r.flops << "  memory "
                << r.memory_cells << "  parameters " << r.parameters << "  overhead " << r.overhead
                << "\n";
    if (args->formulas) std::cout << "\n" << cost::formula_table();

    std::vector<fs::path> written;
    if (!args->json_out.empty()) {
      ensure_dir(args->out_dir);
      const fs::path p = in_dir(args->out_dir, args->json_out);
      std::ofstream out(p);
      out << cost::to_json(reports) << "\n";
      written.push_back(p);
    }
    write_manifest(args->out_dir, *cmd, written);
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"livecast: streaming forecasts for grid-structured traffic"};
  app.set_version_flag("--version", std::string("livecast ") + kVersion);
  app.require_subcommand(1);

  setup_generate(app);
  setup_ingest(app);
  setup_train(app);
  setup_predict(app);
  setup_experiment(app);
  setup_complexity(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  } catch (const livecast::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
