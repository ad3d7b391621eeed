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

#pragma once

// File formats: binary PGM images, the dataset manifest, and model
// checkpoints.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "biaslab/dataset.hpp"
#include "biaslab/image.hpp"
#include "biaslab/network.hpp"

namespace biaslab::io {

// P5, maxval 255. Values are clamped to [0,1] and rounded to 8 bits.
std::string encode_pgm(const Image& img);
Image decode_pgm(std::string_view bytes);  // throws DataError with byte offsets
void write_pgm(const std::filesystem::path& path, const Image& img);
Image read_pgm(const std::filesystem::path& path);

// Rounds every pixel to the nearest multiple of 1/255.
Image quantize8(const Image& img);

inline constexpr std::string_view kManifestHeader =
    "id,filename,label,split,frame,ruler,hair,circle,object_cx,object_cy,object_r";

// Writes <dir>/manifest.csv and <dir>/images/<id>.pgm.
void write_dataset(const std::filesystem::path& dir, const Dataset& data);
// Reads a manifest; filenames are relative to the manifest's directory.
Dataset read_dataset(const std::filesystem::path& manifest_or_dir);

std::string format_double(double v);

// Flat little-endian checkpoint: "DBL1", u64 record count, then per record
// u64 name length, name bytes, u64 rank, rank x u64 dims, f64 data.
void save_checkpoint(const std::filesystem::path& path, const Network& net);
ParamMap load_params(const std::filesystem::path& path);
// Rebuilds a TinyCnn from a checkpoint (side and class count from shapes).
Network load_tiny_cnn(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace biaslab::io
