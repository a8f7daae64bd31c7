#include "sketchpriv/store.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <functional>
#include <iterator>

#include <unistd.h>

#include "sketchpriv/error.hpp"
#include "sketchpriv/serialize.hpp"

namespace fs = std::filesystem;

namespace sketchpriv::service {

namespace {

constexpr std::string_view kExtension = ".skp";

auto valid_dimension(std::string_view d) -> bool {
  if (d.empty() || d.size() > 128 || d.front() == '.' || d.front() == '_') {
    return false;
  }
  return std::all_of(d.begin(), d.end(), [](unsigned char c) {
    return std::isalnum(c) != 0 || c == '-' || c == '_' || c == '.';
  });
}

auto valid_period(std::string_view p) -> bool {
  if (p.size() != 10 || p[4] != '-' || p[7] != '-') {
    return false;
  }
  for (const std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (std::isdigit(static_cast<unsigned char>(p[i])) == 0) {
      return false;
    }
  }
  const int year = std::stoi(std::string(p.substr(0, 4)));
  const unsigned month = static_cast<unsigned>(std::stoi(std::string(p.substr(5, 2))));
  const unsigned day = static_cast<unsigned>(std::stoi(std::string(p.substr(8, 2))));
  if (month < 1 || month > 12 || day < 1) {
    return false;
  }
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  return day <= kDays[month - 1] + (month == 2 && leap ? 1U : 0U);
}

auto read_file(const fs::path& path) -> std::vector<std::uint8_t> {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return {};
  }
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

auto mtime(const fs::path& path) -> std::chrono::system_clock::time_point {
  std::error_code ec;
  const auto t = fs::last_write_time(path, ec);
  if (ec) {
    return {};
  }
  return std::chrono::file_clock::to_sys(t);
}

}  // namespace

void validate_key(const SketchKey& key) {
  if (!valid_dimension(key.dimension)) {
    throw Error(Errc::invalid_argument, "invalid dimension '" + key.dimension + "'");
  }
  if (!valid_period(key.period)) {
    throw Error(Errc::invalid_argument, "invalid period '" + key.period + "' (want YYYY-MM-DD)");
  }
}

SketchStore::SketchStore(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec) {
    throw Error(Errc::io_error, "cannot create store root " + root_.string() + ": " + ec.message());
  }
}

auto SketchStore::path_for(const SketchKey& key) const -> fs::path {
  validate_key(key);
  return root_ / key.dimension / (key.period + std::string(kExtension));
}

auto SketchStore::stripe_for(const SketchKey& key) const -> std::mutex& {
  const auto h = std::hash<std::string>{}(key.dimension) * 31 + std::hash<std::string>{}(key.period);
  return stripes_[h % stripes_.size()];
}

void SketchStore::put(const SketchRecord& record, bool overwrite) {
  with_key_locked(record.key, [&] { put_while_locked(record, overwrite); });
}

void SketchStore::put_while_locked(const SketchRecord& record, bool overwrite) {
  const auto target = path_for(record.key);
  if (!overwrite && fs::exists(target)) {
    throw Error(Errc::duplicate_key, record.key.to_string());
  }
  std::error_code ec;
  fs::create_directories(target.parent_path(), ec);
  if (ec) {
    throw Error(Errc::io_error, "cannot create " + target.parent_path().string());
  }

  static std::atomic<std::uint64_t> counter{0};
  const auto tmp = target.parent_path() /
                   ("." + target.filename().string() + ".tmp." + std::to_string(::getpid()) + "." +
                    std::to_string(counter.fetch_add(1)));
  const auto bytes = serialize(record.sketch);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw Error(Errc::io_error, "short write to " + tmp.string());
    }
  }
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(Errc::io_error, "cannot rename into " + target.string());
  }
}

auto SketchStore::get_bytes(const SketchKey& key) const -> std::vector<std::uint8_t> {
  const auto path = path_for(key);
  if (!fs::exists(path)) {
    throw Error(Errc::unknown_key, key.to_string());
  }
  return read_file(path);
}

auto SketchStore::get(const SketchKey& key) const -> SketchRecord {
  const auto path = path_for(key);
  const auto bytes = get_bytes(key);
  return SketchRecord{key, deserialize(bytes), mtime(path)};
}

auto SketchStore::contains(const SketchKey& key) const -> bool { return fs::exists(path_for(key)); }

auto SketchStore::list() const -> std::vector<SketchKey> {
  std::vector<SketchKey> keys;
  for (const auto& dir : fs::directory_iterator(root_)) {
    const auto dimension = dir.path().filename().string();
    if (!dir.is_directory() || !valid_dimension(dimension)) {
      continue;
    }
    for (const auto& file : fs::directory_iterator(dir.path())) {
      const auto name = file.path().filename().string();
      if (!file.is_regular_file() || file.path().extension() != kExtension) {
        continue;
      }
      SketchKey key{dimension, name.substr(0, name.size() - kExtension.size())};
      if (valid_period(key.period)) {
        keys.push_back(std::move(key));
      }
    }
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

auto SketchStore::scan(const std::string& dimension, const std::string& first,
                       const std::string& last) const -> std::vector<SketchKey> {
  std::vector<SketchKey> out;
  const auto dir = root_ / dimension;
  if (!valid_dimension(dimension) || !fs::is_directory(dir)) {
    return out;
  }
  for (const auto& file : fs::directory_iterator(dir)) {
    const auto name = file.path().filename().string();
    if (!file.is_regular_file() || file.path().extension() != kExtension) {
      continue;
    }
    auto period = name.substr(0, name.size() - kExtension.size());
    // ISO dates order lexicographically.
    if (valid_period(period) && period >= first && period <= last) {
      out.push_back({dimension, std::move(period)});
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace sketchpriv::service
