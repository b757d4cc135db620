#include "fwm/tag_io.hpp"

#include <array>
#include <cstddef>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace fwm {
namespace {

constexpr std::array<char, 4> kMagic{'P', 'T', 'A', 'G'};

void put_u16(std::ostream& os, std::uint16_t v) {
  const char bytes[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(bytes, 2);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(bytes, 8);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char bytes[2];
  is.read(reinterpret_cast<char*>(bytes), 2);
  return static_cast<std::uint16_t>(bytes[0] | (bytes[1] << 8));
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

}  // namespace

void write_tag_file(const std::string& path, const TagStream& stream) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kMagic.data(), kMagic.size());
  put_u16(os, kTagFileVersion);
  os.put(static_cast<char>(stream.channel_id));
  put_u64(os, stream.timestamps.size());
  for (std::int64_t t : stream.timestamps) {
    if (t < 0) throw std::invalid_argument("negative timestamp in " + path);
    put_u64(os, static_cast<std::uint64_t>(t));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

TagStream read_tag_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kMagic) throw std::runtime_error("not a tag file: " + path);
  const std::uint16_t version = get_u16(is);
  if (version != kTagFileVersion)
    throw std::runtime_error("unsupported tag file version in " + path);
  TagStream stream;
  stream.channel_id = static_cast<std::uint8_t>(is.get());
  const std::uint64_t count = get_u64(is);
  if (!is) throw std::runtime_error("truncated tag file header: " + path);
  stream.timestamps.resize(count);
  for (std::uint64_t i = 0; i < count; ++i)
    stream.timestamps[i] = static_cast<std::int64_t>(get_u64(is));
  if (!is) throw std::runtime_error("truncated tag file: " + path);
  return stream;
}

void write_sidecar(const std::string& path, const RunSidecar& sidecar) {
  nlohmann::json j;
  j["seed"] = sidecar.seed;
  j["config_hash"] = sidecar.config_hash;
  j["n_pulses"] = sidecar.n_pulses;
  j["duration_ps"] = sidecar.duration_ps;
  j["pulse_period_ps"] = sidecar.pulse_period_ps;
  j["power_mw"] = sidecar.power_mw;
  j["tag_files"] = sidecar.tag_files;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

RunSidecar read_sidecar(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("bad sidecar " + path + ": " + e.what());
  }
  RunSidecar sc;
  sc.seed = j.at("seed").get<std::uint64_t>();
  sc.config_hash = j.at("config_hash").get<std::string>();
  sc.n_pulses = j.at("n_pulses").get<std::uint64_t>();
  sc.duration_ps = j.at("duration_ps").get<std::int64_t>();
  sc.pulse_period_ps = j.value("pulse_period_ps", std::int64_t{0});
  sc.power_mw = j.at("power_mw").get<double>();
  sc.tag_files = j.value("tag_files", std::vector<std::string>{});
  return sc;
}

}  // namespace fwm
