// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "pact/das.hpp"
#include "pact/io.hpp"
#include "pact/metrics.hpp"
#include "pact/postproc.hpp"
#include "pact/trainer.hpp"

using namespace pact;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!v.pass) ++failures;
  std::printf("%s criterion %d %s: %s (%.1f s)\n", v.pass ? "PASS" : "FAIL", id, name.c_str(), v.detail.c_str(),
              seconds);
  std::fflush(stdout);
}

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Verdict superposition_identity() {
  const auto start = std::chrono::steady_clock::now();
  const ImageGrid grid{64, 64, 0.026};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed);
    PositionWiseStack stack{oracle::random_matrix(128, grid.pixels(), rng), {}, grid};
    for (Index c = 0; c < 128; ++c) stack.channel_ids.push_back(c);
    const RowMatrixXd full = superpose(stack).values;
    RowMatrixXd parts = RowMatrixXd::Zero(64, 64);
    for (Index first = 0; first < 128; first += 32) parts += superpose_rows(stack.data.middleRows(first, 32), grid);
    worst = std::max(worst, (full - parts).norm() / full.norm());
  }
  const double t = elapsed(start);
  return {worst <= 1e-9 && t < 5.0, fmt("max relative deviation %.3g <= 1e-9, %.2f s < 5 s", worst, t)};
}

Verdict loss_oracles() {
  double overlay = 0.0, response = 0.0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    Rng rng(1000 + trial);
    const Index n = 1 + static_cast<Index>(trial % 4);
    const Index m = 1 + static_cast<Index>((trial / 4) % 9);
    const RowMatrixXd a = oracle::random_matrix(n, m, rng);
    const RowMatrixXd b = oracle::random_matrix(n, m, rng);
    const double closed = overlay_loss(a, b, OverlayMode::closed_form).value;
    overlay = std::max({overlay, std::abs(closed - overlay_loss(a, b, OverlayMode::materialized).value),
                        std::abs(closed - oracle::materialized_overlay_loss(a, b))});
    response = std::max(response, std::abs(response_loss(a, b).value - oracle::naive_response_loss(a, b)));
  }
  return {overlay <= 1e-12 && response <= 1e-12,
          fmt("overlay max |d| %.3g, response max |d| %.3g, both <= 1e-12", overlay, response)};
}

Verdict gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  double layers = 0.0, losses = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (const auto& errors :
         {gradcheck::conv(seed), gradcheck::conv(seed, 2, Padding::valid), gradcheck::pool(seed, {PoolKind::max, 2, 2, 0}),
          gradcheck::pool(seed, {PoolKind::avg, 3, 1, 1}), gradcheck::leaky(seed), gradcheck::sctm(seed, 2),
          gradcheck::rgc(seed, 2), gradcheck::upsample_conv(seed)})
      layers = std::max(layers, gradcheck::worst(errors));
    for (const auto& [name, fn] : gradcheck::loss_functions())
      losses = std::max({losses, gradcheck::loss(fn, 3, 5, seed), gradcheck::loss(fn, 4, 16, seed)});
  }
  const TrainConfig cfg = gradcheck::micro_config();
  const double e2e = gradcheck::worst(gradcheck::end_to_end(cfg, gradcheck::micro_samples(cfg, 2, 3), 1));
  const double t = elapsed(start);
  return {layers <= 1e-4 && losses <= 1e-4 && e2e <= 1e-3 && t < 120.0,
          fmt("layers %.3g, losses %.3g (<= 1e-4), end-to-end %.3g (<= 1e-3), %.1f s < 120 s", layers, losses, e2e, t)};
}

Verdict sctm_count() {
  const Index a = SctmParams::zeros(128, 8).parameter_count();
  const Index b = SctmParams::zeros(32, 8).parameter_count();
  const Index c = SctmParams::zeros(2, 4).parameter_count();
  return {a == 2 * 128 * 64 && a == 16384 && b == 2 * 32 * 64 && c == 2 * 2 * 16,
          fmt("(128,8) %.0f, (32,8) %.0f, (2,4) %.0f", double(a), double(b), double(c))};
}

Verdict limited_view() {
  const auto start = std::chrono::steady_clock::now();
  Acquisition acq;
  acq.grid = {64, 64, 0.026};
  const auto delays = build_delay_table(acq.geometry, acq.grid);
  const auto full_view = view_mask(acq.geometry, 0, 128);
  const auto quarter_view = view_mask(acq.geometry, 0, 32);
  double full = 0.0, quarter = 0.0;
  const int count = 20;
  for (int i = 0; i < count; ++i) {
    const auto p0 = gen_discs(acq.grid, derive_seed(500, static_cast<std::uint64_t>(i)), 16);
    const auto signals = simulate_signals(p0, acq);
    full += ssim(p0.values, delay_and_sum(signals, acq.grid, delays, full_view).values) / count;
    quarter += ssim(p0.values, delay_and_sum(signals, acq.grid, delays, quarter_view).values) / count;
  }
  const double t = elapsed(start);
  return {full - quarter >= 0.05 && t < 180.0,
          fmt("mean ssim full %.4f, quarter %.4f, gap %.4f >= 0.05, %.1f s < 180 s", full, quarter, full - quarter, t)};
}

bool exact_totals(const std::vector<EpochLog>& log, const LossWeights& w) {
  for (const auto& e : log)
    if (std::abs(e.total - overall_loss(e.parts, w)) > 1e-12 * std::abs(e.total)) return false;
  return !log.empty();
}

struct ToyRun {
  TrainResult result;
  double processed = 0.0;
  double quarter = 0.0;
  double seconds = 0.0;
};

const ToyRun& toy_run() {
  static const ToyRun run = [] {
    const auto start = std::chrono::steady_clock::now();
    const Settings settings;
    const TrainConfig cfg = train_config(settings);
    const SampleBuilder builder(settings.acquisition(), cfg.arch.input_channels);
    const ImageGrid grid = settings.acquisition().grid;
    std::vector<TrainingSample> train_set, held_out;
    for (int i = 0; i < 50; ++i)
      train_set.push_back(builder.build(gen_discs(grid, derive_seed(60, static_cast<std::uint64_t>(i)), 3)));
    for (int i = 0; i < 10; ++i)
      held_out.push_back(builder.build(gen_discs(grid, derive_seed(61, static_cast<std::uint64_t>(i)), 3)));
    ToyRun r{train(build_model(cfg.arch, cfg.seed), train_set, cfg)};
    for (const auto& s : held_out) {
      const auto bundle = infer(r.result.model, s, cfg.residual_sign);
      r.processed += ssim(s.p0, threshold_separate(bundle.sum_g.values, cfg.threshold())) / 10.0;
      r.quarter += ssim(s.p0, s.x_image.values) / 10.0;
    }
    r.seconds = elapsed(start);
    return r;
  }();
  return run;
}

Verdict toy_training() {
  const ToyRun& r = toy_run();
  const double first = r.result.log.front().total;
  const double last = r.result.log.back().total;
  const double drop = 1.0 - last / first;
  return {drop >= 0.5 && r.processed >= r.quarter && r.seconds < 1200.0,
          fmt("loss drop %.3f >= 0.5, ssim processed %.4f >= quarter %.4f, %.0f s < 1200 s", drop, r.processed,
              r.quarter, r.seconds)};
}

struct AblationRun {
  AblationResult result;
  LossWeights weights;
};

const AblationRun& ablation_run() {
  static const AblationRun run = [] {
    const Settings settings;
    TrainConfig cfg = train_config(settings);
    cfg.epochs = 60;
    const SampleBuilder builder(settings.acquisition(), cfg.arch.input_channels);
    const ImageGrid grid = settings.acquisition().grid;
    std::vector<TrainingSample> train_set, eval;
    for (int i = 0; i < 12; ++i)
      train_set.push_back(builder.build(gen_discs(grid, derive_seed(70, static_cast<std::uint64_t>(i)), 3)));
    eval.push_back(builder.build(gen_discs(grid, 71, 3)));
    return AblationRun{ablate(train_set, eval, cfg), cfg.weights};
  }();
  return run;
}

Verdict ablation() {
  const auto& r = ablation_run().result;
  double closest = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < r.cases.size(); ++i)
    for (std::size_t j = i + 1; j < r.cases.size(); ++j)
      closest = std::min(closest,
                         (r.cases[i].bundle.sum_g.values - r.cases[j].bundle.sum_g.values).cwiseAbs().maxCoeff());
  const std::string text = r.report();
  std::size_t sections = 0;
  for (auto pos = text.find("[case "); pos != std::string::npos; pos = text.find("[case ", pos + 1)) ++sections;
  const bool means = text.find("object_mean_sum_g") != std::string::npos &&
                     text.find("background_mean_sum_g") != std::string::npos;
  return {closest > 1e-3 && sections == 4 && means,
          fmt("smallest pairwise max |d| %.3g > 1e-3, %.0f report sections with object/background means", closest,
              double(sections))};
}

Verdict eq_exactness() {
  const LossWeights w = train_config(Settings{}).weights;
  bool ok = exact_totals(toy_run().result.log, w);
  std::size_t epochs = toy_run().result.log.size();
  for (const auto& c : ablation_run().result.cases) {
    ok = ok && exact_totals(c.result.log, ablation_run().weights);
    epochs += c.result.log.size();
  }
  return {ok, fmt("%.0f logged epochs, total equals weighted sum to 1e-12 relative", double(epochs))};
}

Verdict forward_sanity() {
  Acquisition acq;
  const ImageGrid grid{33, 33, 0.026};
  PressureMap point{RowMatrixXd::Zero(33, 33), grid};
  point.values(16, 16) = 1.0;
  const auto img = delay_and_sum(simulate_signals(point, acq), grid, build_delay_table(acq.geometry, grid),
                                 view_mask(acq.geometry, 0, 128));
  Index h = 0, w = 0;
  img.values.maxCoeff(&h, &w);
  const Index offset = std::max(std::abs(h - 16), std::abs(w - 16));

  Rng rng(9);
  const ImageGrid g{32, 32, 0.026};
  const PressureMap a{oracle::random_matrix(32, 32, rng, 0.0, 1.0), g};
  const PressureMap b{oracle::random_matrix(32, 32, rng, 0.0, 1.0), g};
  const auto sa = simulate_signals(a, acq).samples;
  const auto sb = simulate_signals(b, acq).samples;
  const auto sab = simulate_signals(PressureMap{a.values + 3.0 * b.values, g}, acq).samples;
  const double linearity = (sab - sa - 3.0 * sb).norm() / sab.norm();
  return {offset <= 1 && linearity <= 1e-10,
          fmt("argmax offset %.0f px <= 1, linearity %.3g <= 1e-10", double(offset), linearity)};
}

Verdict io_checks() {
  const fs::path dir = fs::temp_directory_path() / "pact_acceptance_io";
  fs::remove_all(dir);
  fs::create_directories(dir);

  Rng rng(4);
  ContainerHeader header;
  header.kind = ContainerKind::positionwise;
  header.dims = {7, 9, 11};
  header.metadata = {40e6, 1480.0, 0.026, 0.018, 0.25, 1.5707963267948966};
  std::vector<float> payload(header.element_count());
  for (auto& v : payload) v = static_cast<float>(rng.uniform(-1e3, 1e3));
  write_container(dir / "c.pwd", header, payload);
  const Container back = read_container(dir / "c.pwd");
  const bool round_trip = back.header == header && back.payload == payload;

  const RowMatrixXd img = oracle::random_matrix(13, 17, rng);
  export_pgm(img, dir / "x.pgm");
  const auto pgm = oracle::parse_pgm(read_bytes(dir / "x.pgm"));
  const bool grammar = pgm.width == 17 && pgm.height == 13 && pgm.maxval == 65535;

  bool identical = true;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = std::string("\"") + PACTK_PATH + "\" pipeline --seed 7 --out-dir \"" +
                            (dir / run).string() + "\" > /dev/null";
    const int status = std::system(cmd.c_str());
    identical = identical && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  }
  int files = 0;
  if (identical)
    for (const auto& e : fs::directory_iterator(dir / "a")) {
      ++files;
      identical = identical && read_bytes(e.path()) == read_bytes(dir / "b" / e.path().filename());
    }
  return {round_trip && grammar && identical && files > 0,
          std::string("round trip ") + (round_trip ? "exact" : "differs") + ", pgm " + (grammar ? "valid" : "invalid") +
              ", pipeline " + std::to_string(files) + " files " + (identical ? "byte-identical" : "differ")};
}

}  // namespace

int main() {
  report(1, "superposition identity", superposition_identity);
  report(2, "loss oracle equivalence", loss_oracles);
  report(3, "gradient suite", gradient_suite);
  report(4, "sctm parameter count", sctm_count);
  report(5, "limited-view degradation", limited_view);
  report(6, "toy training", toy_training);
  report(7, "ablation", ablation);
  report(8, "weighted total exactness", eq_exactness);
  report(9, "forward and das sanity", forward_sanity);
  report(10, "io", io_checks);
  std::printf("%s: %d of 10 criteria failed\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
