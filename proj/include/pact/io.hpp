#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pact/das.hpp"
#include "pact/forward.hpp"
#include "pact/phantom.hpp"

namespace pact {

// PWD1 tensor container, all fields little-endian:
//   "PWD1" | u32 version | u32 kind | u32 dim0 | u32 dim1 | u32 dim2 |
//   6 x f64 metadata | dim0*dim1*dim2 x f32 payload (slowest dim first)

class BadMagicError : public DataError {
 public:
  using DataError::DataError;
};
class VersionMismatchError : public DataError {
 public:
  using DataError::DataError;
};
class TruncatedPayloadError : public DataError {
 public:
  using DataError::DataError;
};
class IoError : public DataError {
 public:
  using DataError::DataError;
};

enum class ContainerKind : std::uint32_t { signal = 0, image = 1, positionwise = 2, mask = 3 };

inline constexpr std::uint32_t kContainerVersion = 1;
inline constexpr std::size_t kContainerHeaderBytes = 4 + 5 * 4 + 6 * 8;

/// Unused fields are 0.
struct ContainerMetadata {
  double sampling_rate_hz = 0.0;
  double sound_speed_mps = 0.0;
  double extent_m = 0.0;
  double ring_radius_m = 0.0;
  double angle_start_rad = 0.0;
  double angle_span_rad = 0.0;

  bool operator==(const ContainerMetadata&) const = default;
};

struct ContainerHeader {
  std::uint32_t version = kContainerVersion;
  ContainerKind kind = ContainerKind::image;
  std::array<std::uint32_t, 3> dims{1, 1, 1};
  ContainerMetadata metadata;

  std::uint64_t element_count() const {
    return static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2];
  }
  bool operator==(const ContainerHeader&) const = default;
};

struct Container {
  ContainerHeader header;
  std::vector<float> payload;
};

void write_container(const std::filesystem::path& path, const ContainerHeader& header,
                     const std::vector<float>& payload);
/// Converts from double, rounding to nearest float.
void write_container(const std::filesystem::path& path, const ContainerHeader& header,
                     const Eigen::Ref<const Eigen::VectorXd>& payload);
Container read_container(const std::filesystem::path& path);

// Typed helpers on top of the container.
void save_image(const std::filesystem::path& path, const RowMatrixXd& image, const ImageGrid& grid,
                ContainerKind kind = ContainerKind::image);
PressureMap load_image(const std::filesystem::path& path);
void save_signals(const std::filesystem::path& path, const SignalSet& signals);
SignalSet load_signals(const std::filesystem::path& path);
/// Channel ids are not stored; a loaded stack is numbered first_channel,
/// first_channel + 1, ...
void save_stack(const std::filesystem::path& path, const PositionWiseStack& stack);
PositionWiseStack load_stack(const std::filesystem::path& path, Index first_channel = 0);
MaskMatrix load_mask(const std::filesystem::path& path);

/// Binary "P5" PGM, maxval 65535, 16-bit big-endian samples. The image's
/// [min, max] maps linearly onto [0, 65535]; a constant image is 32768.
void export_pgm(const RowMatrixXd& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_pgm(const RowMatrixXd& image);

/// File bytes, for byte-identity checks.
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

}  // namespace pact
