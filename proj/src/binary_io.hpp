#pragma once

// Little-endian checkpoint container: magic, version, payload, FNV-1a
// checksum of the payload.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bssimt/error.hpp"
#include "bssimt/rng.hpp"

namespace bssimt::io {

class Writer {
 public:
  template <typename T>
  void pod(const T& value) {
    const auto* p = reinterpret_cast<const char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void str(std::string_view s) {
    pod<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void doubles(std::span<const double> v) {
    pod<std::uint64_t>(v.size());
    const auto* p = reinterpret_cast<const char*>(v.data());
    bytes_.insert(bytes_.end(), p, p + v.size() * sizeof(double));
  }

  void write_file(const std::filesystem::path& path, std::string_view magic,
                  std::uint32_t version) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) data_error("cannot write " + path.string());
    out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
    const std::uint64_t sum = fnv1a64(std::string_view(bytes_.data(), bytes_.size()));
    out.write(reinterpret_cast<const char*>(&sum), sizeof(sum));
    if (!out) data_error("failed writing " + path.string());
  }

 private:
  std::vector<char> bytes_;
};

class Reader {
 public:
  Reader(const std::filesystem::path& path, std::string_view magic, std::uint32_t version)
      : path_(path.string()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) data_error("cannot open " + path_);
    std::vector<char> all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const std::size_t header = magic.size() + sizeof(std::uint32_t);
    if (all.size() < header + sizeof(std::uint64_t)) corrupt("file too short");
    if (std::string_view(all.data(), magic.size()) != magic) corrupt("bad magic");
    std::uint32_t found = 0;
    std::memcpy(&found, all.data() + magic.size(), sizeof(found));
    if (found != version) {
      data_error(path_ + ": unsupported version " + std::to_string(found) + " (expected " +
                 std::to_string(version) + ")");
    }
    bytes_.assign(all.begin() + static_cast<std::ptrdiff_t>(header),
                  all.end() - static_cast<std::ptrdiff_t>(sizeof(std::uint64_t)));
    std::uint64_t sum = 0;
    std::memcpy(&sum, all.data() + all.size() - sizeof(sum), sizeof(sum));
    if (sum != fnv1a64(std::string_view(bytes_.data(), bytes_.size()))) corrupt("checksum mismatch");
  }

  template <typename T>
  T pod() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const auto n = pod<std::uint64_t>();
    if (n > bytes_.size() / sizeof(double)) corrupt("truncated parameter block");
    need(n * sizeof(double));
    std::vector<double> v(n);
    std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return v;
  }
  void finish() const {
    if (pos_ != bytes_.size()) corrupt("trailing bytes");
  }

  [[noreturn]] void corrupt(const std::string& why) const {
    data_error(path_ + ": corrupt checkpoint (" + why + ")");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) corrupt("truncated");
  }

  std::string path_;
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace bssimt::io
