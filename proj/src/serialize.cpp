#include "sketchpriv/serialize.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "sketchpriv/error.hpp"

namespace sketchpriv {

namespace {

constexpr std::uint8_t kMagic[4] = {'S', 'K', 'P', '1'};

template <class T>
void put_le(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
  }
}

template <class T>
auto get_le(std::span<const std::uint8_t> in, std::size_t offset) -> T {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(in[offset + i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

auto serialize(const Sketch& m) -> std::vector<std::uint8_t> {
  std::vector<std::uint8_t> payload;
  switch (m.algorithm()) {
    case Algorithm::kmv: {
      const auto hashes = m.kmv_hashes();
      payload.reserve(4 + 8 * hashes.size());
      put_le<std::uint32_t>(payload, static_cast<std::uint32_t>(hashes.size()));
      for (const auto h : hashes) {
        put_le<std::uint64_t>(payload, h);
      }
      break;
    }
    case Algorithm::pcsa:
      for (const auto b : m.pcsa_bitmaps()) {
        put_le<std::uint32_t>(payload, b);
      }
      break;
    case Algorithm::loglog:
    case Algorithm::hll: {
      const auto regs = m.registers();
      payload.assign(regs.begin(), regs.end());
      break;
    }
  }

  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.reserve(kHeaderBytes + payload.size());
  out.push_back(kFormatVersion);
  out.push_back(static_cast<std::uint8_t>(m.algorithm()));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(m.param()));
  put_le<std::uint64_t>(out, m.salt_fingerprint());
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

auto deserialize(std::span<const std::uint8_t> bytes) -> Sketch {
  if (bytes.size() < kHeaderBytes) {
    throw Error(Errc::format_error, "truncated header");
  }
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw Error(Errc::format_error, "bad magic");
  }
  if (bytes[4] != kFormatVersion) {
    throw Error(Errc::format_error, "unsupported version " + std::to_string(bytes[4]));
  }
  const auto algo_byte = bytes[5];
  if (algo_byte < 1 || algo_byte > 4) {
    throw Error(Errc::format_error, "unknown algorithm id " + std::to_string(algo_byte));
  }
  const auto algo = static_cast<Algorithm>(algo_byte);
  const int param = get_le<std::uint16_t>(bytes, 6);
  const auto fp = get_le<std::uint64_t>(bytes, 8);
  const auto length = get_le<std::uint32_t>(bytes, 16);
  if (bytes.size() != kHeaderBytes + length) {
    throw Error(Errc::format_error, "payload length " + std::to_string(length) +
                                        " does not match " +
                                        std::to_string(bytes.size() - kHeaderBytes) + " bytes");
  }
  const auto payload = bytes.subspan(kHeaderBytes);

  SketchState state;
  switch (algo) {
    case Algorithm::kmv: {
      if (payload.size() < 4) {
        throw Error(Errc::format_error, "truncated KMV count");
      }
      const auto count = get_le<std::uint32_t>(payload, 0);
      if (payload.size() != 4 + 8 * static_cast<std::size_t>(count)) {
        throw Error(Errc::format_error, "KMV payload size does not match count");
      }
      KmvState s;
      s.hashes.resize(count);
      for (std::size_t i = 0; i < count; ++i) {
        s.hashes[i] = get_le<std::uint64_t>(payload, 4 + 8 * i);
      }
      state = std::move(s);
      break;
    }
    case Algorithm::pcsa: {
      if (payload.size() % 4 != 0) {
        throw Error(Errc::format_error, "PCSA payload not a whole number of bitmaps");
      }
      PcsaState s;
      s.bitmaps.resize(payload.size() / 4);
      for (std::size_t i = 0; i < s.bitmaps.size(); ++i) {
        s.bitmaps[i] = get_le<std::uint32_t>(payload, 4 * i);
      }
      state = std::move(s);
      break;
    }
    case Algorithm::loglog:
    case Algorithm::hll:
      state = RegisterState{std::vector<std::uint8_t>(payload.begin(), payload.end())};
      break;
  }
  return Sketch::from_state(algo, param, fp, std::move(state));
}

auto read_sketch_file(const std::string& path) -> Sketch {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(Errc::io_error, "cannot open " + path);
  }
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

void write_sketch_file(const std::string& path, const Sketch& m) {
  const auto bytes = serialize(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(Errc::io_error, "cannot write " + path);
  }
}

}  // namespace sketchpriv
