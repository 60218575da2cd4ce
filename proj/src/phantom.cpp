#include "pact/phantom.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "pact/io.hpp"
#include "pact/rng.hpp"

namespace pact {

PressureMap make_initial_pressure(const PhantomSpec& spec, const ImageGrid& grid) {
  grid.validate();
  for (double v : {spec.gruneisen, spec.conversion_efficiency, spec.fluence}) {
    if (!std::isfinite(v)) throw DataError("initial pressure: non-finite scalar");
    if (!(v > 0.0)) throw DataError("initial pressure: scalars must be positive");
  }
  if (spec.absorption.rows() != grid.height || spec.absorption.cols() != grid.width)
    throw DataError("initial pressure: absorption map does not match grid");
  if (!spec.absorption.allFinite()) throw DataError("initial pressure: non-finite absorption");
  if ((spec.absorption.array() < 0.0).any()) throw DataError("initial pressure: negative absorption");
  const double scale = spec.gruneisen * spec.conversion_efficiency * spec.fluence;
  return {spec.absorption * scale, grid};
}

PressureMap render_discs(const ImageGrid& grid, const std::vector<Disc>& discs) {
  grid.validate();
  PressureMap p{RowMatrixXd::Zero(grid.height, grid.width), grid};
  for (const auto& d : discs) {
    for (Index h = 0; h < grid.height; ++h)
      for (Index w = 0; w < grid.width; ++w)
        if ((grid.pixel_center(h, w) - d.center).norm() <= d.radius)
          p.values(h, w) = std::max(p.values(h, w), d.amplitude);
  }
  return p;
}

PressureMap gen_discs(const ImageGrid& grid, std::uint64_t seed, int count) {
  grid.validate();
  if (count < 1) throw DataError("gen_discs: count must be >= 1");
  Rng rng(seed);
  const double half = 0.5 * grid.extent;
  const double r_min = grid.pitch();
  const double r_max = std::max(r_min, grid.extent / 6.0);
  std::vector<Disc> discs;
  for (int k = 0; k < count; ++k) {
    const double radius = rng.uniform(r_min, r_max);
    // Centres keep at least one pixel of the disc inside the grid.
    const double x = rng.uniform(-half + 0.5 * r_min, half - 0.5 * r_min);
    const double y = rng.uniform(-half + 0.5 * r_min, half - 0.5 * r_min);
    discs.push_back({{x, y}, radius, rng.uniform_open_closed()});
  }
  PressureMap p = render_discs(grid, discs);
  if (!(p.values.maxCoeff() > 0.0)) {
    // A disc narrower than the pixel spacing can miss every centre; mark its nearest pixel.
    const auto& d = discs.front();
    const auto w = std::clamp<Index>(static_cast<Index>(std::floor((d.center.x() + half) / grid.pitch())), 0,
                                     grid.width - 1);
    const auto h = std::clamp<Index>(static_cast<Index>(std::floor((half - d.center.y()) / grid.pitch())), 0,
                                     grid.height - 1);
    p.values(h, w) = d.amplitude;
  }
  return p;
}

PressureMap gen_vessels(const ImageGrid& grid, std::uint64_t seed, int branches) {
  grid.validate();
  if (branches < 1) throw DataError("gen_vessels: branches must be >= 1");
  Rng rng(seed);
  PressureMap p{RowMatrixXd::Zero(grid.height, grid.width), grid};
  const double H = static_cast<double>(grid.height);
  const double W = static_cast<double>(grid.width);
  std::vector<Eigen::Vector2d> path;  // (row, col) in pixel units

  for (int b = 0; b < branches; ++b) {
    Eigen::Vector2d pos;
    if (path.empty()) {
      pos = {rng.uniform(0.25 * H, 0.75 * H), rng.uniform(0.25 * W, 0.75 * W)};
    } else {
      pos = path[static_cast<std::size_t>(rng.uniform() * static_cast<double>(path.size()))];
    }
    double heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const auto width = static_cast<Index>(1 + rng.next_u64() % 3);
    const double amplitude = rng.uniform(0.5, 1.0);
    const double length = rng.uniform(0.4, 0.8) * std::min(H, W);
    const Index steps = static_cast<Index>(length / 0.5);

    for (Index s = 0; s < steps; ++s) {
      const Index ch = static_cast<Index>(std::floor(pos.x()));
      const Index cw = static_cast<Index>(std::floor(pos.y()));
      const Index lo = -(width - 1) / 2;
      for (Index dh = lo; dh < lo + width; ++dh)
        for (Index dw = lo; dw < lo + width; ++dw) {
          const Index hh = ch + dh;
          const Index ww = cw + dw;
          if (hh >= 0 && hh < grid.height && ww >= 0 && ww < grid.width)
            p.values(hh, ww) = std::max(p.values(hh, ww), amplitude);
        }
      path.push_back(pos);

      heading += 0.25 * rng.normal();
      Eigen::Vector2d step(0.5 * std::sin(heading), 0.5 * std::cos(heading));
      // Reflect at the borders so every branch keeps its full length.
      if (pos.x() + step.x() < 0.5 || pos.x() + step.x() > H - 0.5) {
        step.x() = -step.x();
        heading = std::atan2(step.x(), step.y());
      }
      if (pos.y() + step.y() < 0.5 || pos.y() + step.y() > W - 0.5) {
        step.y() = -step.y();
        heading = std::atan2(step.x(), step.y());
      }
      pos += step;
    }
  }
  return p;
}

PhantomKind parse_phantom_kind(const std::string& text) {
  if (text == "discs") return PhantomKind::discs;
  if (text == "vessels") return PhantomKind::vessels;
  throw DataError("unknown phantom kind '" + text + "' (expected discs or vessels)");
}

std::string to_string(PhantomKind kind) { return kind == PhantomKind::discs ? "discs" : "vessels"; }

PressureMap gen_phantom(PhantomKind kind, const ImageGrid& grid, std::uint64_t seed, int objects) {
  return kind == PhantomKind::discs ? gen_discs(grid, seed, objects) : gen_vessels(grid, seed, objects);
}

std::vector<std::filesystem::path> Manifest::files(const std::string& split) const {
  std::vector<std::filesystem::path> out;
  for (const auto& e : entries)
    if (e.split == split) out.push_back(directory / e.filename);
  return out;
}

Manifest gen_dataset(PhantomKind kind, const ImageGrid& grid, std::uint64_t seed, int n_train, int n_test,
                     const std::filesystem::path& out_dir, int objects) {
  if (n_train < 0 || n_test < 0) throw DataError("gen_dataset: sample counts must be >= 0");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create directory " + out_dir.string() + ": " + ec.message());

  Manifest manifest{out_dir, {}};
  std::ostringstream text;
  for (int i = 0; i < n_train + n_test; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "sample_%05d.pwd", i);
    const PressureMap p = gen_phantom(kind, grid, derive_seed(seed, static_cast<std::uint64_t>(i)), objects);
    save_image(out_dir / name, p.values, grid);
    const std::string split = i < n_train ? "train" : "test";
    manifest.entries.push_back({split, name});
    text << split << '\t' << name << '\n';
  }
  const std::string body = text.str();
  write_bytes(out_dir / kManifestName, std::vector<std::uint8_t>(body.begin(), body.end()));
  return manifest;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m{path.parent_path(), {}};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(number) + ": expected split<TAB>filename");
    std::string split = line.substr(0, tab);
    if (split != "train" && split != "test")
      throw DataError(path.string() + ":" + std::to_string(number) + ": unknown split '" + split + "'");
    m.entries.push_back({std::move(split), line.substr(tab + 1)});
  }
  return m;
}

}  // namespace pact
