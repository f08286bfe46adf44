// Copyright 2026 The HVSARN Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Little-endian tensor blobs, JSON text files and the error types shared by
// every on-disk format.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace hvsarn {

namespace fs = std::filesystem;

class FormatError : public std::runtime_error {
 public:
  FormatError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class MissingFileError : public FormatError {
 public:
  explicit MissingFileError(const fs::path& path) : FormatError(path.filename().string(), "missing file " + path.string()) {}
};

class ShapeError : public FormatError {
 public:
  using FormatError::FormatError;
};

class InvariantError : public FormatError {
 public:
  using FormatError::FormatError;
};

namespace io {

template <class T>
void write_blob(const fs::path& path, const T* data, std::size_t count) {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  std::vector<char> bytes(count * sizeof(T));
  std::memcpy(bytes.data(), data, bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < count; ++i) {
      char* p = bytes.data() + i * sizeof(T);
      for (std::size_t a = 0, b = sizeof(T) - 1; a < b; ++a, --b) std::swap(p[a], p[b]);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

template <class T>
std::vector<T> read_blob(const fs::path& path, std::size_t expected_count, const std::string& field) {
  if (!fs::exists(path)) throw MissingFileError(path);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingFileError(path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != expected_count * sizeof(T)) {
    throw ShapeError(field, "blob holds " + std::to_string(bytes.size()) + " bytes, header implies " +
                                std::to_string(expected_count * sizeof(T)));
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < expected_count; ++i) {
      char* p = bytes.data() + i * sizeof(T);
      for (std::size_t a = 0, b = sizeof(T) - 1; a < b; ++a, --b) std::swap(p[a], p[b]);
    }
  }
  std::vector<T> out(expected_count);
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

inline std::string read_text(const fs::path& path) {
  if (!fs::exists(path)) throw MissingFileError(path);
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a sibling temporary and renames it into place.
inline void write_text_atomic(const fs::path& path, const std::string& text) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace io
}  // namespace hvsarn
