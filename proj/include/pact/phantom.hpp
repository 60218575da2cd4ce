#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pact/geometry.hpp"

namespace pact {

/// Inputs of the photoacoustic generation law p0 = gruneisen * efficiency * absorption * fluence.
/// Fluence is a single scalar: illumination is uniform over the target.
struct PhantomSpec {
  double gruneisen = 1.0;
  double conversion_efficiency = 1.0;
  RowMatrixXd absorption;
  double fluence = 1.0;
};

/// Initial-pressure map on a grid. Phantoms are non-negative; reconstructions
/// stored in the same type may be signed.
struct PressureMap {
  RowMatrixXd values;
  ImageGrid grid;
};

PressureMap make_initial_pressure(const PhantomSpec& spec, const ImageGrid& grid);

/// Explicit disc placement, mainly for tests. Centres and radii in metres.
struct Disc {
  Eigen::Vector2d center;
  double radius;
  double amplitude;
};

PressureMap render_discs(const ImageGrid& grid, const std::vector<Disc>& discs);

/// `count` filled discs with random centres, radii <= extent/6 and amplitudes
/// in (0, 1]. Overlaps keep the larger amplitude.
PressureMap gen_discs(const ImageGrid& grid, std::uint64_t seed, int count);

/// Random-walk vessel trees: each branch after the first sprouts from a point
/// on an earlier branch, so the structure is connected. Widths 1-3 pixels.
PressureMap gen_vessels(const ImageGrid& grid, std::uint64_t seed, int branches);

enum class PhantomKind { discs, vessels };

PhantomKind parse_phantom_kind(const std::string& text);
std::string to_string(PhantomKind kind);

/// Draws one phantom of `kind`; `objects` is the disc count or branch count.
PressureMap gen_phantom(PhantomKind kind, const ImageGrid& grid, std::uint64_t seed, int objects);

struct ManifestEntry {
  std::string split;  // "train" or "test"
  std::string filename;
};

struct Manifest {
  std::filesystem::path directory;
  std::vector<ManifestEntry> entries;

  std::vector<std::filesystem::path> files(const std::string& split) const;
};

inline constexpr const char* kManifestName = "manifest.txt";

/// Writes n_train + n_test phantom containers and `manifest.txt`
/// (`split<TAB>filename` per line). Sample i uses derive_seed(seed, i).
Manifest gen_dataset(PhantomKind kind, const ImageGrid& grid, std::uint64_t seed, int n_train,
                     int n_test, const std::filesystem::path& out_dir, int objects = 3);

Manifest read_manifest(const std::filesystem::path& path);

}  // namespace pact
