// Copyright 2026 The Biaslab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "biaslab/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "biaslab/errors.hpp"

namespace biaslab::io {
namespace fs = std::filesystem;
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

// Parses one ASCII header integer of a PNM header, skipping comments.
int header_int(std::string_view bytes, std::size_t& pos, std::string_view what) {
  while (pos < bytes.size()) {
    if (is_space(bytes[pos])) {
      ++pos;
    } else if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  int value = 0;
  auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), value);
  if (ec != std::errc() || value <= 0)
    throw DataError("pgm: expected positive " + std::string(what) + " at byte " + std::to_string(start));
  pos = static_cast<std::size_t>(ptr - bytes.data());
  return value;
}

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host required");
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view in, std::size_t& pos, std::string_view what) {
  if (pos + sizeof(T) > in.size())
    throw DataError("checkpoint: truncated " + std::string(what) + " at byte " + std::to_string(pos));
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

Image quantize8(const Image& img) {
  return img.unaryExpr([](double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; });
}

std::string encode_pgm(const Image& img) {
  std::string out = "P5\n" + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (Eigen::Index i = 0; i < img.size(); ++i)
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(img.data()[i], 0.0, 1.0) * 255.0))));
  return out;
}

Image decode_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw DataError("pgm: missing P5 magic at byte 0");
  std::size_t pos = 2;
  const int width = header_int(bytes, pos, "width");
  const int height = header_int(bytes, pos, "height");
  const int maxval = header_int(bytes, pos, "maxval");
  if (maxval > 255) throw DataError("pgm: maxval " + std::to_string(maxval) + " > 255 not supported");
  if (pos >= bytes.size() || !is_space(bytes[pos]))
    throw DataError("pgm: expected whitespace after header at byte " + std::to_string(pos));
  ++pos;
  const std::size_t need = static_cast<std::size_t>(width) * height;
  if (bytes.size() - pos < need)
    throw DataError("pgm: truncated pixel data at byte " + std::to_string(bytes.size()) + ", expected " +
                    std::to_string(pos + need));
  Image img(height, width);
  for (std::size_t i = 0; i < need; ++i)
    img.data()[i] = static_cast<unsigned char>(bytes[pos + i]) / static_cast<double>(maxval);
  return img;
}

void write_pgm(const fs::path& path, const Image& img) { write_file(path, encode_pgm(img)); }

Image read_pgm(const fs::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir / "images");
  std::string csv(kManifestHeader);
  csv += '\n';
  for (const auto& s : data.samples) {
    const std::string file = "images/" + s.id + ".pgm";
    write_pgm(dir / file, s.image);
    const auto& a = s.annotation;
    csv += s.id + "," + file + "," + std::to_string(s.label) + "," + std::string(split_name(s.split)) + "," +
           (a.frame ? "1" : "0") + "," + (a.ruler ? "1" : "0") + "," + (a.hair ? "1" : "0") + "," +
           (a.circle ? "1" : "0") + ",";
    if (a.object)
      csv += format_double(a.object->cx) + "," + format_double(a.object->cy) + "," + format_double(a.object->radius);
    else
      csv += ",,";
    csv += '\n';
  }
  write_file(dir / "manifest.csv", csv);
}

Dataset read_dataset(const fs::path& manifest_or_dir) {
  const fs::path manifest = fs::is_directory(manifest_or_dir) ? manifest_or_dir / "manifest.csv" : manifest_or_dir;
  const fs::path root = manifest.parent_path();
  std::istringstream in(read_file(manifest));
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) -> DataError {
    return DataError(manifest.string() + ":" + std::to_string(lineno) + ": " + why);
  };
  if (!std::getline(in, line)) throw DataError(manifest.string() + ":1: empty manifest");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader) throw fail("unexpected header '" + line + "'");
  Dataset data;
  int max_label = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv(line);
    if (f.size() != 11) throw fail("expected 11 fields, got " + std::to_string(f.size()));
    Sample s;
    s.id = f[0];
    auto parse_int = [&](const std::string& v, std::string_view what) {
      int out = 0;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || ptr != v.data() + v.size()) throw fail("bad " + std::string(what) + " '" + v + "'");
      return out;
    };
    auto parse_bool = [&](const std::string& v, std::string_view what) {
      if (v == "0") return false;
      if (v == "1") return true;
      throw fail("bad " + std::string(what) + " '" + v + "', expected 0 or 1");
    };
    auto parse_double = [&](const std::string& v, std::string_view what) {
      double out = 0;
      auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
      if (ec != std::errc() || ptr != v.data() + v.size()) throw fail("bad " + std::string(what) + " '" + v + "'");
      return out;
    };
    s.label = parse_int(f[2], "label");
    if (s.label < 0) throw fail("negative label");
    max_label = std::max(max_label, s.label);
    try {
      s.split = parse_split(f[3]);
    } catch (const std::invalid_argument&) {
      throw fail("bad split '" + f[3] + "'");
    }
    s.annotation.frame = parse_bool(f[4], "frame");
    s.annotation.ruler = parse_bool(f[5], "ruler");
    s.annotation.hair = parse_bool(f[6], "hair");
    s.annotation.circle = parse_bool(f[7], "circle");
    if (!f[8].empty() || !f[9].empty() || !f[10].empty())
      s.annotation.object = ObjectRegion{parse_double(f[8], "object_cx"), parse_double(f[9], "object_cy"),
                                         parse_double(f[10], "object_r")};
    s.image = read_pgm(root / f[1]);
    data.samples.push_back(std::move(s));
  }
  data.num_classes = max_label + 1;
  return data;
}

void save_checkpoint(const fs::path& path, const Network& net) {
  std::string out = "DBL1";
  put<std::uint64_t>(out, net.params().size());
  for (const auto& [name, t] : net.params()) {
    put<std::uint64_t>(out, name.size());
    out += name;
    put<std::uint64_t>(out, t.shape.size());
    for (int d : t.shape) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (Eigen::Index i = 0; i < t.data.size(); ++i) put<double>(out, t.data[i]);
  }
  write_file(path, out);
}

ParamMap load_params(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 4 || bytes.compare(0, 4, "DBL1") != 0)
    throw DataError(path.string() + ": missing DBL1 magic at byte 0");
  std::size_t pos = 4;
  ParamMap params;
  const auto count = get<std::uint64_t>(bytes, pos, "record count");
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto len = get<std::uint64_t>(bytes, pos, "name length");
    if (len > 4096 || pos + len > bytes.size())
      throw DataError(path.string() + ": bad name length at byte " + std::to_string(pos - 8));
    std::string name = bytes.substr(pos, len);
    pos += len;
    const auto rank = get<std::uint64_t>(bytes, pos, "rank");
    if (rank > 8) throw DataError(path.string() + ": bad rank at byte " + std::to_string(pos - 8));
    ad::Shape shape;
    for (std::uint64_t d = 0; d < rank; ++d) {
      const auto dim = get<std::uint64_t>(bytes, pos, "dimension");
      if (dim == 0 || dim > (1u << 24)) throw DataError(path.string() + ": bad dimension at byte " + std::to_string(pos - 8));
      shape.push_back(static_cast<int>(dim));
    }
    ad::Tensor t(shape);
    for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = get<double>(bytes, pos, "tensor data");
    params.emplace(std::move(name), std::move(t));
  }
  if (pos != bytes.size()) throw DataError(path.string() + ": trailing bytes at byte " + std::to_string(pos));
  return params;
}

Network load_tiny_cnn(const fs::path& path) {
  ParamMap params = load_params(path);
  auto need = [&](const std::string& n) -> const ad::Tensor& {
    auto it = params.find(n);
    if (it == params.end()) throw DataError(path.string() + ": checkpoint lacks '" + n + "'");
    return it->second;
  };
  const int flat = need("fc1.weight").shape.at(0);
  const int classes = need("fc2.bias").shape.at(0);
  const int side = 4 * static_cast<int>(std::lround(std::sqrt(flat / 16.0)));
  Network shell = make_tiny_cnn(side, classes, 0);
  for (const auto& [name, t] : shell.params()) {
    if (need(name).shape != t.shape)
      throw DataError(path.string() + ": tensor '" + name + "' has shape " + ad::to_string(need(name).shape) +
                      ", expected " + ad::to_string(t.shape));
  }
  if (params.size() != shell.params().size()) throw DataError(path.string() + ": unexpected extra tensors");
  return Network(side, side, shell.layers(), std::move(params));
}

}  // namespace biaslab::io
