//
// Copyright 2026 The dualtrace Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dualtrace/checkpoint.hpp"
#include "dualtrace/config.hpp"
#include "dualtrace/data.hpp"
#include "dualtrace/error.hpp"
#include "dualtrace/evaluate.hpp"
#include "dualtrace/synth.hpp"
#include "dualtrace/train.hpp"
#include "json.hpp"

using namespace dualtrace;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDivergence = 4;

int exit_code(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::InvalidHyper:
    case Errc::InvalidThreshold:
    case Errc::BadGeometry:
      return kExitConfig;
    case Errc::MissingFile:
    case Errc::DimensionMismatch:
    case Errc::DuplicatePath:
    case Errc::BadSplitTag:
    case Errc::DecodeError:
    case Errc::IoError:
    case Errc::DataError:
    case Errc::SchemaVersionMismatch:
    case Errc::NoCheckpoint:
      return kExitData;
    case Errc::NumericalDivergence:
      return kExitDivergence;
    default:
      return 1;
  }
}

std::optional<data::Split> split_option(const std::string& s) {
  if (s == "all") return std::nullopt;
  return data::parse_split(s);
}

int cmd_train(const std::string& config_path, bool quiet) {
  const auto cfg = engine::load_run_config(config_path);
  engine::TrainHooks hooks;
  if (!quiet) hooks.progress = &std::cerr;
  const auto result = engine::train(cfg, hooks);
  std::cout << nlohmann::json{{"checkpoint", result.final_checkpoint.string()},
                              {"steps", result.log.steps.size()},
                              {"epochs", result.log.epochs.size()}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& manifest, double threshold,
             const std::string& split, int input_size, bool exact, const std::string& out) {
  engine::EvalOptions opts;
  opts.threshold = threshold;
  opts.exact_auc = exact;
  require(threshold > 0.0 && threshold < 1.0, Errc::InvalidThreshold,
          "threshold must lie in (0, 1)");
  const auto result =
      engine::evaluate_checkpoint(ckpt, manifest, split_option(split), input_size, opts);
  const auto text = result.to_json();
  if (!out.empty()) {
    std::ofstream f(out);
    require(static_cast<bool>(f), Errc::IoError, "cannot write " + out);
    f << text << '\n';
  }
  std::cout << text << '\n';
  return 0;
}

int cmd_predict(const std::string& ckpt, const std::string& image_path, const std::string& out,
                double threshold, int input_size, const std::string& prob_out) {
  auto loaded = engine::load_checkpoint(ckpt);
  const auto image = io::read_image(image_path);
  const auto input = data::preprocess_image(image, input_size);
  const auto mask = model::predict_mask(*loaded.model, input, threshold);

  // Back to the source resolution with nearest-neighbour sampling.
  auto resample = [&](auto&& value_at) {
    io::Image img(image.height, image.width, 1);
    for (int y = 0; y < image.height; ++y) {
      const int sy = std::min(input_size - 1, int((2LL * y + 1) * input_size / (2LL * image.height)));
      for (int x = 0; x < image.width; ++x) {
        const int sx = std::min(input_size - 1, int((2LL * x + 1) * input_size / (2LL * image.width)));
        img.at(y, x, 0) = value_at(sy, sx);
      }
    }
    return img;
  };
  io::write_png(out, resample([&](int y, int x) -> std::uint8_t {
                  return mask(0, 0, y, x) > 0.5f ? 255 : 0;
                }));
  if (!prob_out.empty()) {
    const auto prob = engine::model_predictor(*loaded.model)(input);
    io::write_png(prob_out, resample([&](int y, int x) {
                    return static_cast<std::uint8_t>(std::lround(255.0f * prob(0, 0, y, x)));
                  }));
  }
  double area = 0;
  for (float v : mask.values()) area += v;
  std::cout << nlohmann::json{{"mask", out}, {"area_fraction", area / double(mask.size())}}.dump()
            << '\n';
  return 0;
}

int cmd_synth(const std::string& config_path, const std::string& out) {
  const auto cfg = config_path.empty() ? synth::SynthConfig{} : engine::load_synth_config(config_path);
  const auto manifest = synth::generate_synthetic(cfg, out);
  nlohmann::json counts = manifest.split_counts();
  std::cout << nlohmann::json{{"manifest", manifest.path.string()},
                              {"records", manifest.records.size()},
                              {"splits", counts}}
                   .dump()
            << '\n';
  return 0;
}

nlohmann::json kernel_json(const Tensor<float>& w) {
  nlohmann::json out = nlohmann::json::array();
  const auto s = w.shape();
  for (int o = 0; o < s.n; ++o)
    for (int i = 0; i < s.c; ++i) {
      nlohmann::json rows = nlohmann::json::array();
      for (int y = 0; y < s.h; ++y) {
        std::vector<float> row;
        for (int x = 0; x < s.w; ++x) row.push_back(w(o, i, y, x));
        rows.push_back(row);
      }
      out.push_back({{"out", o}, {"in", i}, {"taps", rows}});
    }
  return out;
}

int cmd_inspect(const std::string& ckpt) {
  auto loaded = engine::load_checkpoint(ckpt);
  nlohmann::json j;
  j["step"] = loaded.meta.step;
  j["epoch"] = loaded.meta.epoch;
  j["parameters"] = loaded.model->params().parameter_count();
  if (const auto* bayar = loaded.model->bayar()) {
    const auto report = loaded.model->verify_constraints();
    j["bayar"] = {{"kernels", kernel_json(bayar->weight()->value)},
                  {"max_center_error", report.max_center_error},
                  {"max_sum_error", report.max_sum_error},
                  {"satisfied", report.satisfied()}};
  } else {
    j["bayar"] = nullptr;
  }
  const auto& srm = loaded.model->srm();
  j["srm"] = {{"threshold", srm.threshold},
              {"input_scale", srm.input_scale},
              {"kernels", kernel_json(srm.weights<float>())}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-branch image manipulation localization"};
  app.require_subcommand(1);

  std::string config, ckpt, manifest, image, out, split = "test", prob_out;
  double threshold = 0.5;
  int input_size = data::kDefaultInputSize;
  bool quiet = false, exact = false;

  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("--config", config, "Run config (JSON)")->required();
  train->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  eval->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  eval->add_option("--manifest", manifest, "Manifest (JSONL)")->required();
  eval->add_option("--threshold", threshold, "Binarization threshold")->capture_default_str();
  eval->add_option("--split", split, "train, val, test or all")->capture_default_str();
  eval->add_option("--input-size", input_size, "Square input size")->capture_default_str();
  eval->add_flag("--exact-auc", exact, "Exact AUC instead of the 4096-bin histogram");
  eval->add_option("--out", out, "Also write the report here");

  auto* predict = app.add_subcommand("predict", "Predict a manipulation mask for one image");
  predict->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  predict->add_option("--image", image, "Input image (PNG or JPEG)")->required();
  predict->add_option("--out", out, "Output mask PNG")->required();
  predict->add_option("--threshold", threshold, "Binarization threshold")->capture_default_str();
  predict->add_option("--input-size", input_size, "Square input size")->capture_default_str();
  predict->add_option("--prob", prob_out, "Also write the probability map as PNG");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic forgery dataset");
  synth->add_option("--config", config, "Synth config (JSON); defaults when omitted");
  synth->add_option("--out", out, "Output directory")->required();

  auto* inspect = app.add_subcommand("inspect-filters", "Print the noise-branch filters");
  inspect->add_option("--ckpt", ckpt, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) return cmd_train(config, quiet);
    if (*eval) return cmd_eval(ckpt, manifest, threshold, split, input_size, exact, out);
    if (*predict) return cmd_predict(ckpt, image, out, threshold, input_size, prob_out);
    if (*synth) return cmd_synth(config, out);
    if (*inspect) return cmd_inspect(ckpt);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
