// pactk: command-line front end of the limited-view PACT toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "CLI11.hpp"
#include "pact/config.hpp"
#include "pact/das.hpp"
#include "pact/io.hpp"
#include "pact/metrics.hpp"
#include "pact/phantom.hpp"
#include "pact/postproc.hpp"
#include "pact/rng.hpp"
#include "pact/trainer.hpp"

namespace fs = std::filesystem;
using namespace pact;

namespace {

constexpr int kUsage = 1;
constexpr int kData = 2;
constexpr int kNumeric = 3;

/// `--config FILE` plus one override flag per config key.
class SettingsOptions {
 public:
  explicit SettingsOptions(CLI::App* app) {
    app->add_option("--config", config_path_, "settings file of key = value lines");
    for (const auto& key : config_keys()) {
      std::string flag = "--" + key;
      std::replace(flag.begin() + 2, flag.end(), '_', '-');
      options_[key] = app->add_option(flag, values_[key], "override config key " + key);
    }
  }

  Settings resolve() const {
    Settings s = config_path_.empty() ? Settings{} : parse_config(config_path_);
    for (const auto& [key, option] : options_)
      if (option->count() > 0) apply_setting(s, key, values_.at(key));
    return s;
  }

 private:
  std::string config_path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, CLI::Option*> options_;
};

std::pair<Index, Index> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw DataError("channel range '" + text + "' must have the form a:b");
  try {
    std::size_t used = 0;
    const std::string a = text.substr(0, colon);
    const std::string b = text.substr(colon + 1);
    const long first = std::stol(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    const long last = std::stol(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    if (last <= first) throw DataError("channel range '" + text + "' is empty");
    return {first, last};
  } catch (const std::logic_error&) {
    throw DataError("channel range '" + text + "' must have the form a:b with integers");
  }
}

RowMatrixXd container_matrix(const fs::path& path) {
  const Container c = read_container(path);
  const Index rows = c.header.dims[0];
  const Index cols = static_cast<Index>(c.header.dims[1]) * c.header.dims[2];
  RowMatrixXd m(rows, cols);
  for (Index k = 0; k < m.size(); ++k) m.data()[k] = c.payload[static_cast<std::size_t>(k)];
  return m;
}

RowMatrixXd image_matrix(const fs::path& path) { return load_image(path).values; }

void print_value(const std::string& name, double value) {
  if (std::isinf(value)) {
    std::printf("%s=%s\n", name.c_str(), value > 0 ? "inf" : "-inf");
  } else {
    std::printf("%s=%.17g\n", name.c_str(), value);
  }
}

ImageGrid settings_grid(const Settings& s) { return {s.grid, s.grid, s.extent_m}; }

void save_das_image(const fs::path& path, const RowMatrixXd& values, const ImageGrid& grid) {
  save_image(path, values, grid);
}

TrainingSample sample_from_phantom(const Settings& s, const fs::path& phantom, Index input_channels) {
  const PressureMap p0 = load_image(phantom);
  Acquisition acq = s.acquisition();
  acq.grid = p0.grid;
  return SampleBuilder(acq, input_channels).build(p0, derive_seed(s.seed, 0));
}

void check_model_matches(const ModelParams& model, const Settings& s) {
  if (model.arch.input_channels + model.arch.output_channels != s.num_elements)
    throw DataError("checkpoint expects " + std::to_string(model.arch.input_channels + model.arch.output_channels) +
                    " elements, settings give " + std::to_string(s.num_elements));
}

struct Outputs {
  fs::path y0, y_hat, sum_g, processed;
};

Outputs write_inference(const fs::path& dir, const std::string& stem, const InferenceBundle& b,
                        const ThresholdConfig& threshold, const ImageGrid& grid, bool pgm) {
  Outputs o{dir / (stem + "_y0.pwd"), dir / (stem + "_y_hat.pwd"), dir / (stem + "_sum_g.pwd"),
            dir / (stem + "_processed.pwd")};
  const RowMatrixXd processed = threshold_separate(b.sum_g.values, threshold);
  save_das_image(o.y0, b.y0.values, grid);
  save_das_image(o.y_hat, b.y_hat.values, grid);
  save_das_image(o.sum_g, b.sum_g.values, grid);
  save_das_image(o.processed, processed, grid);
  if (pgm) {
    export_pgm(b.y0.values, dir / (stem + "_y0.pgm"));
    export_pgm(b.y_hat.values, dir / (stem + "_y_hat.pgm"));
    export_pgm(b.sum_g.values, dir / (stem + "_sum_g.pgm"));
    export_pgm(processed, dir / (stem + "_processed.pgm"));
  }
  return o;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Limited-view photoacoustic tomography toolkit"};
  app.require_subcommand(1);
  std::vector<std::unique_ptr<SettingsOptions>> settings_options;
  auto with_settings = [&](CLI::App* sub) -> const SettingsOptions& {
    settings_options.push_back(std::make_unique<SettingsOptions>(sub));
    return *settings_options.back();
  };

  // phantom
  auto* phantom = app.add_subcommand("phantom", "generate a phantom or a phantom dataset");
  const auto& phantom_settings = with_settings(phantom);
  std::string phantom_kind = "discs";
  int phantom_objects = 3;
  std::string phantom_out, phantom_dataset;
  int n_train = 0, n_test = 0;
  phantom->add_option("--kind", phantom_kind, "discs or vessels")->capture_default_str();
  phantom->add_option("--objects", phantom_objects, "disc count or vessel branch count")->capture_default_str();
  phantom->add_option("--out", phantom_out, "single phantom container");
  phantom->add_option("--dataset", phantom_dataset, "dataset directory (writes manifest.txt)");
  phantom->add_option("--train", n_train, "training samples in the dataset");
  phantom->add_option("--test", n_test, "test samples in the dataset");

  // forward
  auto* forward = app.add_subcommand("forward", "simulate detector signals from a phantom");
  const auto& forward_settings = with_settings(forward);
  std::string forward_in, forward_out;
  forward->add_option("--phantom", forward_in, "phantom container")->required();
  forward->add_option("--out", forward_out, "signal container")->required();

  // das
  auto* das = app.add_subcommand("das", "position-wise delayed data for a channel range");
  const auto& das_settings = with_settings(das);
  std::string das_in, das_channels, das_out;
  das->add_option("--signals", das_in, "signal container")->required();
  das->add_option("--channels", das_channels, "half-open channel range a:b (default all)");
  das->add_option("--out", das_out, "position-wise container")->required();

  // superpose
  auto* sup = app.add_subcommand("superpose", "sum a position-wise stack into a DAS image");
  const auto& sup_settings = with_settings(sup);
  std::string sup_in, sup_out;
  sup->add_option("--stack", sup_in, "position-wise container")->required();
  sup->add_option("--out", sup_out, "image container")->required();

  // loss
  auto* loss = app.add_subcommand("loss", "evaluate one loss between two containers");
  const auto& loss_settings = with_settings(loss);
  std::string loss_kind, loss_a, loss_b;
  loss->add_option("--kind", loss_kind, "response, overlay, texture or rec")
      ->required()
      ->check(CLI::IsMember({"response", "overlay", "texture", "rec"}));
  loss->add_option("--a", loss_a, "generated data")->required();
  loss->add_option("--b", loss_b, "target data")->required();

  // train
  auto* trn = app.add_subcommand("train", "train the compensation network on a dataset");
  const auto& train_settings = with_settings(trn);
  std::string train_data, train_ckpt, train_log;
  trn->add_option("--data", train_data, "dataset directory with manifest.txt")->required();
  trn->add_option("--checkpoint", train_ckpt, "output checkpoint")->required();
  trn->add_option("--log", train_log, "output loss CSV")->required();

  // infer
  auto* inf = app.add_subcommand("infer", "run a trained network on phantoms");
  const auto& infer_settings = with_settings(inf);
  std::string infer_ckpt, infer_dir;
  std::vector<std::string> infer_inputs;
  bool infer_pgm = false;
  inf->add_option("--checkpoint", infer_ckpt, "trained checkpoint")->required();
  inf->add_option("--phantom", infer_inputs, "phantom containers")->required();
  inf->add_option("--out-dir", infer_dir, "output directory")->required();
  inf->add_flag("--pgm", infer_pgm, "also export PGM images");

  // ablate
  auto* abl = app.add_subcommand("ablate", "train the four response/overlay loss cases");
  const auto& ablate_settings = with_settings(abl);
  std::string ablate_data, ablate_report, ablate_dir;
  abl->add_option("--data", ablate_data, "dataset directory with manifest.txt")->required();
  abl->add_option("--report", ablate_report, "output text report")->required();
  abl->add_option("--out-dir", ablate_dir, "directory for the four sum_g images");

  // metrics
  auto* met = app.add_subcommand("metrics", "SSIM, PSNR and optional CNR of two images");
  const auto& metrics_settings = with_settings(met);
  std::string met_ref, met_test, met_roi, met_bg;
  met->add_option("--reference", met_ref, "reference image")->required();
  met->add_option("--test", met_test, "test image")->required();
  met->add_option("--roi", met_roi, "object mask (nonzero = inside)");
  met->add_option("--background", met_bg, "background mask (nonzero = inside)");

  // threshold
  auto* thr = app.add_subcommand("threshold", "separate the object from a superposed compensator output");
  const auto& threshold_settings = with_settings(thr);
  std::string thr_in, thr_out, thr_polarity;
  thr->add_option("--in", thr_in, "sum_g image")->required();
  thr->add_option("--out", thr_out, "processed image")->required();
  thr->add_option("--polarity", thr_polarity, "negative or positive (default from residual_sign)")
      ->check(CLI::IsMember({"negative", "positive"}));

  // export-pgm
  auto* pgm = app.add_subcommand("export-pgm", "write an image container as a 16-bit PGM");
  const auto& pgm_settings = with_settings(pgm);
  std::string pgm_in, pgm_out;
  Index pgm_channel = -1;
  pgm->add_option("--in", pgm_in, "image, mask or position-wise container")->required();
  pgm->add_option("--out", pgm_out, "PGM file")->required();
  pgm->add_option("--channel", pgm_channel, "channel row of a position-wise container");

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "phantom, forward, das, superpose and metrics in one run");
  const auto& pipeline_settings = with_settings(pipe);
  std::string pipe_dir, pipe_kind = "discs";
  int pipe_objects = 3;
  pipe->add_option("--out-dir", pipe_dir, "output directory")->required();
  pipe->add_option("--kind", pipe_kind, "discs or vessels")->capture_default_str();
  pipe->add_option("--objects", pipe_objects, "disc count or vessel branch count")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*phantom) {
      const Settings s = phantom_settings.resolve();
      const PhantomKind kind = parse_phantom_kind(phantom_kind);
      const ImageGrid grid = settings_grid(s);
      if (!phantom_dataset.empty()) {
        const auto m = gen_dataset(kind, grid, s.seed, n_train, n_test, phantom_dataset, phantom_objects);
        std::printf("files=%zu\n", m.entries.size());
      } else if (!phantom_out.empty()) {
        const PressureMap p = gen_phantom(kind, grid, s.seed, phantom_objects);
        save_image(phantom_out, p.values, grid);
        print_value("max", p.values.maxCoeff());
      } else {
        std::cerr << "phantom: give --out or --dataset\n";
        return kUsage;
      }
    } else if (*forward) {
      const Settings s = forward_settings.resolve();
      const PressureMap p0 = load_image(forward_in);
      Acquisition acq = s.acquisition();
      acq.grid = p0.grid;
      SignalSet signals = simulate_signals(p0, acq);
      add_white_noise(signals, acq.noise_std, derive_seed(s.seed, 1));
      save_signals(forward_out, signals);
      std::printf("channels=%ld\nsamples=%ld\n", static_cast<long>(signals.channels()),
                  static_cast<long>(signals.length()));
    } else if (*das) {
      const Settings s = das_settings.resolve();
      const SignalSet signals = load_signals(das_in);
      Index first = 0, last = signals.channels();
      if (!das_channels.empty()) std::tie(first, last) = parse_range(das_channels);
      const ImageGrid grid = settings_grid(s);
      const auto channels = view_mask(signals.geometry, first, last - first);
      const auto stack = position_wise(signals, grid, build_delay_table(signals.geometry, grid), channels);
      save_stack(das_out, stack);
      std::printf("channels=%ld\n", static_cast<long>(stack.channels()));
    } else if (*sup) {
      sup_settings.resolve();
      const auto stack = load_stack(sup_in);
      save_das_image(sup_out, superpose(stack).values, stack.grid);
    } else if (*loss) {
      loss_settings.resolve();
      const RowMatrixXd a = container_matrix(loss_a);
      const RowMatrixXd b = container_matrix(loss_b);
      double value = 0.0;
      if (loss_kind == "response") value = response_loss(a, b).value;
      if (loss_kind == "overlay") value = overlay_loss(a, b).value;
      if (loss_kind == "texture") value = texture_loss(a, b).value;
      if (loss_kind == "rec") value = rec_loss(a, b).value;
      std::printf("%.17g\n", value);
    } else if (*trn) {
      const Settings s = train_settings.resolve();
      const TrainConfig cfg = train_config(s);
      Acquisition acq = s.acquisition();
      const SampleBuilder builder(acq, cfg.arch.input_channels);
      const auto samples = load_split(read_manifest(fs::path(train_data) / kManifestName), "train", builder);
      auto result = train(build_model(cfg.arch, cfg.seed), samples, cfg);
      save_checkpoint(train_ckpt, result.model);
      write_loss_log(train_log, result.log);
      print_value("first_total", result.log.front().total);
      print_value("final_total", result.log.back().total);
    } else if (*inf) {
      const Settings s = infer_settings.resolve();
      const ModelParams model = load_checkpoint(infer_ckpt);
      check_model_matches(model, s);
      ensure_dir(infer_dir);
      const ThresholdConfig threshold{s.tau_fraction, polarity_for_residual_sign(s.residual_sign)};
      for (const auto& input : infer_inputs) {
        const TrainingSample sample = sample_from_phantom(s, input, model.arch.input_channels);
        const auto bundle = infer(model, sample, s.residual_sign);
        const auto o =
            write_inference(infer_dir, fs::path(input).stem().string(), bundle, threshold, sample.x.grid, infer_pgm);
        std::printf("%s\n%s\n%s\n%s\n", o.y0.c_str(), o.y_hat.c_str(), o.sum_g.c_str(), o.processed.c_str());
      }
    } else if (*abl) {
      const Settings s = ablate_settings.resolve();
      const TrainConfig cfg = train_config(s);
      const SampleBuilder builder(s.acquisition(), cfg.arch.input_channels);
      const auto manifest = read_manifest(fs::path(ablate_data) / kManifestName);
      const auto train_samples = load_split(manifest, "train", builder);
      const auto eval_samples = load_split(manifest, "test", builder);
      const auto result = ablate(train_samples, eval_samples, cfg);
      const std::string report = result.report();
      write_bytes(ablate_report, {report.begin(), report.end()});
      if (!ablate_dir.empty()) {
        ensure_dir(ablate_dir);
        for (std::size_t c = 0; c < result.cases.size(); ++c)
          save_das_image(fs::path(ablate_dir) / ("case" + std::to_string(c + 1) + "_sum_g.pwd"),
                         result.cases[c].bundle.sum_g.values, builder.acquisition().grid);
      }
      std::cout << report;
    } else if (*met) {
      metrics_settings.resolve();
      const RowMatrixXd ref = image_matrix(met_ref);
      const RowMatrixXd test = image_matrix(met_test);
      print_value("ssim", ssim(ref, test));
      print_value("psnr", psnr(ref, test));
      if (!met_roi.empty() || !met_bg.empty()) {
        if (met_roi.empty() || met_bg.empty()) {
          std::cerr << "metrics: --roi and --background go together\n";
          return kUsage;
        }
        print_value("cnr", cnr(test, load_mask(met_roi), load_mask(met_bg)));
      }
    } else if (*thr) {
      const Settings s = threshold_settings.resolve();
      const PressureMap in = load_image(thr_in);
      ThresholdConfig c{s.tau_fraction, polarity_for_residual_sign(s.residual_sign)};
      if (!thr_polarity.empty())
        c.polarity = thr_polarity == "negative" ? Polarity::negative_object : Polarity::positive_object;
      save_das_image(thr_out, threshold_separate(in.values, c), in.grid);
    } else if (*pgm) {
      pgm_settings.resolve();
      const Container c = read_container(pgm_in);
      if (c.header.kind == ContainerKind::positionwise) {
        const auto stack = load_stack(pgm_in);
        if (pgm_channel < 0 || pgm_channel >= stack.channels())
          throw DataError("export-pgm: position-wise input needs --channel in [0, " +
                          std::to_string(stack.channels()) + ")");
        export_pgm(RowMatrixXd(stack.channel(pgm_channel)), pgm_out);
      } else if (c.header.kind == ContainerKind::image || c.header.kind == ContainerKind::mask) {
        export_pgm(load_image(pgm_in).values, pgm_out);
      } else {
        throw DataError("export-pgm: signal containers are not images");
      }
    } else if (*pipe) {
      const Settings s = pipeline_settings.resolve();
      ensure_dir(pipe_dir);
      const fs::path dir = pipe_dir;
      const ImageGrid grid = settings_grid(s);
      const Acquisition acq = s.acquisition();
      const PressureMap p0 = gen_phantom(parse_phantom_kind(pipe_kind), grid, s.seed, pipe_objects);
      SignalSet signals = simulate_signals(p0, acq);
      add_white_noise(signals, acq.noise_std, derive_seed(s.seed, 1));
      const auto delays = build_delay_table(acq.geometry, grid);
      const auto full = position_wise(signals, grid, delays, view_mask(acq.geometry, 0, acq.geometry.num_elements));
      const auto quarter = position_wise(signals, grid, delays, view_mask(acq.geometry, 0, s.input_channels));
      const RowMatrixXd full_img = superpose(full).values;
      const RowMatrixXd quarter_img = superpose(quarter).values;

      save_image(dir / "p0.pwd", p0.values, grid);
      save_signals(dir / "signals.pwd", signals);
      save_stack(dir / "quarter_stack.pwd", quarter);
      save_das_image(dir / "full_das.pwd", full_img, grid);
      save_das_image(dir / "quarter_das.pwd", quarter_img, grid);
      export_pgm(p0.values, dir / "p0.pgm");
      export_pgm(full_img, dir / "full_das.pgm");
      export_pgm(quarter_img, dir / "quarter_das.pgm");

      char text[512];
      std::snprintf(text, sizeof text,
                    "ssim_full=%.17g\nssim_quarter=%.17g\npsnr_full=%.17g\npsnr_quarter=%.17g\n",
                    ssim(p0.values, full_img), ssim(p0.values, quarter_img), psnr(p0.values, full_img),
                    psnr(p0.values, quarter_img));
      const std::string metrics = text;
      write_bytes(dir / "metrics.txt", {metrics.begin(), metrics.end()});
      std::cout << metrics;
    }
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return 0;
}
