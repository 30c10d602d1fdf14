// Copyright 2026 The spoofdiar Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "spoofdiar/checkpoint.hpp"

#include <algorithm>
#include <fstream>

#include "spoofdiar/binary_io.hpp"
#include "spoofdiar/errors.hpp"

namespace spoofdiar {

namespace {
constexpr char kMagic[4] = {'S', 'D', 'C', 'K'};
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const std::string& config_ini) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write-then-rename so an interrupted save never leaves a torn file.
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot write " + tmp.string());
    os.write(kMagic, 4);
    io::write_le<std::uint32_t>(os, kCheckpointVersion);
    io::write_string(os, config_ini);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& t : params.tensors()) {
      io::write_string(os, t.name);
      io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.rows()));
      io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.value.cols()));
      for (Eigen::Index r = 0; r < t.value.rows(); ++r) {
        for (Eigen::Index c = 0; c < t.value.cols(); ++c) io::write_le<float>(os, static_cast<float>(t.value(r, c)));
      }
    }
    if (!os) throw IoError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read checkpoint " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || !std::equal(magic, magic + 4, kMagic)) throw IoError(path.string() + ": not a checkpoint");
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw IoError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.config_ini = io::read_string(is);
  const auto n = io::read_le<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < n; ++i) {
    std::string name = io::read_string(is);
    const auto rows = io::read_le<std::uint32_t>(is);
    const auto cols = io::read_le<std::uint32_t>(is);
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = io::read_le<float>(is);
    }
    ck.params.add(std::move(name), std::move(m));
  }
  return ck;
}

void round_to_float(ModelParams& params) {
  for (auto& t : params.tensors()) {
    t.value = t.value.unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
  }
}

void check_compatible(const ModelParams& params, const ModelConfig& config) {
  const ModelParams ref = init_model(config, 0);
  if (ref.size() != params.size()) {
    throw ConfigError("checkpoint has " + std::to_string(params.size()) + " tensors, config expects " +
                      std::to_string(ref.size()));
  }
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const auto& a = ref.tensors()[i];
    const auto& b = params.tensors()[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) {
      throw ConfigError("checkpoint tensor '" + b.name + "' does not match config tensor '" + a.name +
                        "' (" + std::to_string(a.value.rows()) + "x" + std::to_string(a.value.cols()) +
                        ")");
    }
  }
}

}  // namespace spoofdiar
