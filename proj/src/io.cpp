#include "pact/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace pact {
namespace {

class ByteWriter {
 public:
  void u16_be(std::uint16_t v) {
    bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
    bytes_.push_back(static_cast<std::uint8_t>(v & 0xFF));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string source) : bytes_(bytes), source_(std::move(source)) {}

  bool has(std::size_t n) const { return pos_ + n <= bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_++]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t n) {
    need(n);
    std::string s(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (!has(n)) throw TruncatedPayloadError(source_ + ": unexpected end of file");
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

void check_header(const ContainerHeader& h, const std::string& where) {
  if (h.dims[0] < 1 || h.dims[1] < 1 || h.dims[2] < 1) throw DataError(where + ": container dims must be >= 1");
  if (static_cast<std::uint32_t>(h.kind) > 3) throw DataError(where + ": unknown container kind");
}

}  // namespace

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void write_container(const std::filesystem::path& path, const ContainerHeader& header,
                     const std::vector<float>& payload) {
  check_header(header, path.string());
  if (payload.size() != header.element_count())
    throw DataError(path.string() + ": payload has " + std::to_string(payload.size()) + " values, header declares " +
                    std::to_string(header.element_count()));
  ByteWriter w;
  w.raw("PWD1");
  w.u32(header.version);
  w.u32(static_cast<std::uint32_t>(header.kind));
  for (auto d : header.dims) w.u32(d);
  const auto& m = header.metadata;
  for (double v : {m.sampling_rate_hz, m.sound_speed_mps, m.extent_m, m.ring_radius_m, m.angle_start_rad,
                   m.angle_span_rad})
    w.f64(v);
  for (float v : payload) w.f32(v);
  write_bytes(path, w.bytes());
}

void write_container(const std::filesystem::path& path, const ContainerHeader& header,
                     const Eigen::Ref<const Eigen::VectorXd>& payload) {
  std::vector<float> values(static_cast<std::size_t>(payload.size()));
  for (Index i = 0; i < payload.size(); ++i) values[static_cast<std::size_t>(i)] = static_cast<float>(payload(i));
  write_container(path, header, values);
}

Container read_container(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  const std::string where = path.string();
  ByteReader r(bytes, where);
  if (!r.has(4) || r.raw(4) != "PWD1") throw BadMagicError(where + ": bad magic (expected PWD1)");
  Container c;
  c.header.version = r.u32();
  if (c.header.version != kContainerVersion)
    throw VersionMismatchError(where + ": container version " + std::to_string(c.header.version) +
                               ", expected " + std::to_string(kContainerVersion));
  c.header.kind = static_cast<ContainerKind>(r.u32());
  for (auto& d : c.header.dims) d = r.u32();
  auto& m = c.header.metadata;
  for (double* v : {&m.sampling_rate_hz, &m.sound_speed_mps, &m.extent_m, &m.ring_radius_m, &m.angle_start_rad,
                    &m.angle_span_rad})
    *v = r.f64();
  check_header(c.header, where);
  const std::uint64_t count = c.header.element_count();
  if (r.remaining() < count * 4)
    throw TruncatedPayloadError(where + ": payload truncated, declared " + std::to_string(count) + " values, found " +
                                std::to_string(r.remaining() / 4));
  if (r.remaining() > count * 4) throw DataError(where + ": trailing bytes after payload");
  c.payload.resize(count);
  for (auto& v : c.payload) v = r.f32();
  return c;
}

namespace {

ContainerMetadata grid_metadata(const ImageGrid& grid) {
  ContainerMetadata m;
  m.extent_m = grid.extent;
  return m;
}

Container read_kind(const std::filesystem::path& path, std::initializer_list<ContainerKind> kinds) {
  Container c = read_container(path);
  for (auto k : kinds)
    if (c.header.kind == k) return c;
  throw DataError(path.string() + ": unexpected container kind " +
                  std::to_string(static_cast<std::uint32_t>(c.header.kind)));
}

Eigen::VectorXd to_double(const std::vector<float>& payload) {
  Eigen::VectorXd out(static_cast<Index>(payload.size()));
  for (std::size_t i = 0; i < payload.size(); ++i) out(static_cast<Index>(i)) = payload[i];
  return out;
}

}  // namespace

void save_image(const std::filesystem::path& path, const RowMatrixXd& image, const ImageGrid& grid,
                ContainerKind kind) {
  ContainerHeader h;
  h.kind = kind;
  h.dims = {static_cast<std::uint32_t>(image.rows()), static_cast<std::uint32_t>(image.cols()), 1};
  h.metadata = grid_metadata(grid);
  write_container(path, h, Eigen::Map<const Eigen::VectorXd>(image.data(), image.size()));
}

PressureMap load_image(const std::filesystem::path& path) {
  const Container c = read_kind(path, {ContainerKind::image, ContainerKind::mask});
  if (c.header.dims[2] != 1) throw DataError(path.string() + ": image container must have dim2 = 1");
  PressureMap p;
  p.grid = {c.header.dims[0], c.header.dims[1], c.header.metadata.extent_m > 0 ? c.header.metadata.extent_m : 1.0};
  const Eigen::VectorXd v = to_double(c.payload);
  p.values = Eigen::Map<const RowMatrixXd>(v.data(), p.grid.height, p.grid.width);
  return p;
}

MaskMatrix load_mask(const std::filesystem::path& path) {
  return load_image(path).values.array() != 0.0;
}

void save_signals(const std::filesystem::path& path, const SignalSet& s) {
  ContainerHeader h;
  h.kind = ContainerKind::signal;
  h.dims = {static_cast<std::uint32_t>(s.channels()), static_cast<std::uint32_t>(s.length()), 1};
  h.metadata.sampling_rate_hz = s.sampling_rate;
  h.metadata.sound_speed_mps = s.sound_speed;
  h.metadata.ring_radius_m = s.geometry.ring_radius;
  h.metadata.angle_start_rad = s.geometry.angle_start;
  h.metadata.angle_span_rad = s.geometry.angle_span;
  write_container(path, h, Eigen::Map<const Eigen::VectorXd>(s.samples.data(), s.samples.size()));
}

SignalSet load_signals(const std::filesystem::path& path) {
  const Container c = read_kind(path, {ContainerKind::signal});
  const auto& m = c.header.metadata;
  SignalSet s;
  s.sampling_rate = m.sampling_rate_hz;
  s.sound_speed = m.sound_speed_mps;
  s.geometry.num_elements = c.header.dims[0];
  s.geometry.ring_radius = m.ring_radius_m;
  s.geometry.angle_start = m.angle_start_rad;
  s.geometry.angle_span = m.angle_span_rad;
  s.geometry.validate();
  if (!(s.sampling_rate > 0.0) || !(s.sound_speed > 0.0))
    throw DataError(path.string() + ": signal container lacks sampling rate or sound speed");
  const Eigen::VectorXd v = to_double(c.payload);
  s.samples = Eigen::Map<const RowMatrixXd>(v.data(), c.header.dims[0], c.header.dims[1]);
  return s;
}

void save_stack(const std::filesystem::path& path, const PositionWiseStack& stack) {
  ContainerHeader h;
  h.kind = ContainerKind::positionwise;
  h.dims = {static_cast<std::uint32_t>(stack.channels()), static_cast<std::uint32_t>(stack.grid.height),
            static_cast<std::uint32_t>(stack.grid.width)};
  h.metadata = grid_metadata(stack.grid);
  write_container(path, h, Eigen::Map<const Eigen::VectorXd>(stack.data.data(), stack.data.size()));
}

PositionWiseStack load_stack(const std::filesystem::path& path, Index first_channel) {
  const Container c = read_kind(path, {ContainerKind::positionwise});
  PositionWiseStack s;
  s.grid = {c.header.dims[1], c.header.dims[2], c.header.metadata.extent_m > 0 ? c.header.metadata.extent_m : 1.0};
  const Eigen::VectorXd v = to_double(c.payload);
  s.data = Eigen::Map<const RowMatrixXd>(v.data(), c.header.dims[0], s.grid.pixels());
  for (Index k = 0; k < s.data.rows(); ++k) s.channel_ids.push_back(first_channel + k);
  return s;
}

std::vector<std::uint8_t> encode_pgm(const RowMatrixXd& image) {
  if (image.size() == 0) throw DataError("pgm: empty image");
  if (!image.allFinite()) throw DataError("pgm: non-finite image");
  ByteWriter w;
  w.raw("P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n65535\n");
  const double lo = image.minCoeff();
  const double range = image.maxCoeff() - lo;
  for (Index h = 0; h < image.rows(); ++h) {
    for (Index x = 0; x < image.cols(); ++x) {
      const std::uint16_t v = range > 0.0
                                  ? static_cast<std::uint16_t>(std::lround((image(h, x) - lo) / range * 65535.0))
                                  : std::uint16_t{32768};
      w.u16_be(v);
    }
  }
  return std::move(w.bytes());
}

void export_pgm(const RowMatrixXd& image, const std::filesystem::path& path) { write_bytes(path, encode_pgm(image)); }

}  // namespace pact
