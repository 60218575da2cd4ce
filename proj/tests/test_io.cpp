#include <cstring>
#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"
#include "pact/io.hpp"

using namespace pact;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pact_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ContainerHeader stack_header() {
  ContainerHeader h;
  h.kind = ContainerKind::positionwise;
  h.dims = {3, 4, 5};
  h.metadata = {40e6, 1480.0, 0.026, 0.018, 0.1, 1.5707963267948966};
  return h;
}

}  // namespace

TEST_CASE("container round trip is exact at single precision") {
  const auto dir = scratch("roundtrip");
  Rng rng(1);
  std::vector<float> payload(60);
  for (auto& v : payload) v = static_cast<float>(rng.uniform(-10.0, 10.0));
  const auto h = stack_header();
  write_container(dir / "a.pwd", h, payload);
  const Container c = read_container(dir / "a.pwd");
  CHECK(c.header == h);
  CHECK(c.payload == payload);
  write_container(dir / "b.pwd", c.header, c.payload);
  CHECK(read_bytes(dir / "a.pwd") == read_bytes(dir / "b.pwd"));
  CHECK(read_bytes(dir / "a.pwd").size() == kContainerHeaderBytes + 60 * 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("container layout is little-endian") {
  const auto dir = scratch("layout");
  ContainerHeader h;
  h.kind = ContainerKind::image;
  h.dims = {1, 2, 1};
  h.metadata.sampling_rate_hz = 2.0;
  write_container(dir / "a.pwd", h, std::vector<float>{1.0f, -2.5f});
  const auto b = read_bytes(dir / "a.pwd");
  REQUIRE(b.size() == 72 + 8);
  CHECK(std::string(b.begin(), b.begin() + 4) == "PWD1");
  const std::uint8_t version[] = {1, 0, 0, 0};
  CHECK(std::memcmp(b.data() + 4, version, 4) == 0);
  CHECK(b[8] == 1);
  CHECK(b[12] == 1);
  CHECK(b[16] == 2);
  CHECK(b[20] == 1);
  // 2.0 as a little-endian double: 00 .. 00 40
  CHECK(b[24 + 7] == 0x40);
  float first = 0.0f;
  std::memcpy(&first, b.data() + 72, 4);
  CHECK(first == 1.0f);
  std::filesystem::remove_all(dir);
}

TEST_CASE("container errors are distinct") {
  const auto dir = scratch("errors");
  ContainerHeader h;
  h.dims = {2, 2, 2};
  std::vector<float> eight(8, 1.0f);
  write_container(dir / "good.pwd", h, eight);
  auto bytes = read_bytes(dir / "good.pwd");

  auto magic = bytes;
  std::memcpy(magic.data(), "XXXX", 4);
  write_bytes(dir / "magic.pwd", magic);
  CHECK_THROWS_AS(read_container(dir / "magic.pwd"), BadMagicError);

  auto version = bytes;
  version[4] = 2;
  write_bytes(dir / "version.pwd", version);
  CHECK_THROWS_AS(read_container(dir / "version.pwd"), VersionMismatchError);

  auto seven = bytes;
  seven.resize(bytes.size() - 4);
  write_bytes(dir / "seven.pwd", seven);
  CHECK_THROWS_AS(read_container(dir / "seven.pwd"), TruncatedPayloadError);

  auto header_only = bytes;
  header_only.resize(30);
  write_bytes(dir / "header.pwd", header_only);
  CHECK_THROWS_AS(read_container(dir / "header.pwd"), TruncatedPayloadError);

  auto extra = bytes;
  extra.push_back(0);
  write_bytes(dir / "extra.pwd", extra);
  CHECK_THROWS_AS(read_container(dir / "extra.pwd"), DataError);

  CHECK_THROWS_AS(write_container(dir / "bad.pwd", h, std::vector<float>(7)), DataError);
  CHECK_THROWS_AS(read_container(dir / "missing.pwd"), IoError);
  CHECK_THROWS_AS(write_container(dir / "no" / "such" / "dir.pwd", h, eight), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("typed containers round trip") {
  const auto dir = scratch("typed");
  Rng rng(2);
  ImageGrid grid{6, 5, 0.02};
  const RowMatrixXd img = oracle::random_matrix(6, 5, rng);
  save_image(dir / "img.pwd", img, grid);
  const auto back = load_image(dir / "img.pwd");
  CHECK(back.grid.height == 6);
  CHECK(back.grid.width == 5);
  CHECK(back.grid.extent == 0.02);
  CHECK((back.values - img).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(back.values == img.cast<float>().cast<double>());

  ArrayGeometry g{4, 0.018, 0.5, 1.0};
  SignalSet s{oracle::random_matrix(4, 30, rng), 40e6, 1480.0, g};
  save_signals(dir / "sig.pwd", s);
  const auto sb = load_signals(dir / "sig.pwd");
  CHECK(sb.samples == s.samples.cast<float>().cast<double>());
  CHECK(sb.sampling_rate == 40e6);
  CHECK(sb.sound_speed == 1480.0);
  CHECK(sb.geometry.num_elements == 4);
  CHECK(sb.geometry.ring_radius == 0.018);
  CHECK(sb.geometry.angle_start == 0.5);
  CHECK(sb.geometry.angle_span == 1.0);

  PositionWiseStack st{oracle::random_matrix(3, 30, rng), {0, 1, 2}, grid};
  save_stack(dir / "st.pwd", st);
  const auto stb = load_stack(dir / "st.pwd", 5);
  CHECK(stb.data == st.data.cast<float>().cast<double>());
  CHECK(stb.channel_ids == std::vector<Index>{5, 6, 7});
  CHECK(stb.grid.height == 6);

  RowMatrixXd mask_values = RowMatrixXd::Zero(6, 5);
  mask_values(2, 3) = 1.0;
  mask_values(0, 0) = -0.5;
  save_image(dir / "mask.pwd", mask_values, grid, ContainerKind::mask);
  const MaskMatrix mask = load_mask(dir / "mask.pwd");
  CHECK(mask.count() == 2);
  CHECK(mask(2, 3));

  CHECK_THROWS_AS(load_signals(dir / "img.pwd"), DataError);
  CHECK_THROWS_AS(load_stack(dir / "img.pwd"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pgm endpoints and constant images") {
  RowMatrixXd ramp(1, 2);
  ramp << 0.0, 1.0;
  const auto bytes = encode_pgm(ramp);
  const std::string head = "P5\n2 1\n65535\n";
  CHECK(std::string(bytes.begin(), bytes.begin() + static_cast<long>(head.size())) == head);
  const auto parsed = oracle::parse_pgm(bytes);
  CHECK(parsed.width == 2);
  CHECK(parsed.height == 1);
  CHECK(parsed.maxval == 65535);
  CHECK(parsed.samples == std::vector<unsigned>{0, 65535});

  const auto flat = oracle::parse_pgm(encode_pgm(RowMatrixXd::Constant(3, 4, -7.0)));
  CHECK(flat.width == 4);
  CHECK(flat.height == 3);
  for (unsigned v : flat.samples) CHECK(v == 32768);

  RowMatrixXd bad = ramp;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(encode_pgm(bad), DataError);
}

TEST_CASE("pgm raster is row-major and linear") {
  const auto dir = scratch("pgm");
  RowMatrixXd img(2, 3);
  img << 1, 2, 3, 4, 5, 6;
  export_pgm(img, dir / "a.pgm");
  const auto parsed = oracle::parse_pgm(read_bytes(dir / "a.pgm"));
  REQUIRE(parsed.samples.size() == 6);
  for (int k = 0; k < 6; ++k) CHECK(parsed.samples[k] == static_cast<unsigned>(std::lround(k / 5.0 * 65535.0)));
  std::filesystem::remove_all(dir);
}

TEST_CASE("pgm grammar checker rejects malformed files") {
  const std::string good = "P5\n# comment\n1 1\n65535\n\x01\x02";
  CHECK(oracle::parse_pgm({good.begin(), good.end()}).samples[0] == 0x0102);
  const std::string short_raster = "P5\n1 1\n65535\n\x01";
  CHECK_THROWS(oracle::parse_pgm({short_raster.begin(), short_raster.end()}));
  const std::string wrong_magic = "P2\n1 1\n255\n\x01";
  CHECK_THROWS(oracle::parse_pgm({wrong_magic.begin(), wrong_magic.end()}));
}
