// Copyright 2026 The wiconet Authors. All Rights Reserved.
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

#include "wiconet/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <regex>

#include <fmt/format.h>

#include "wiconet/errors.hpp"

namespace wiconet {

namespace {

struct DtypeInfo {
  torch::ScalarType type;
  const char* npy;
  const char* name;
};

constexpr DtypeInfo kDtypes[] = {
    {torch::kFloat, "<f4", "float32"}, {torch::kDouble, "<f8", "float64"},
    {torch::kInt, "<i4", "int32"},     {torch::kLong, "<i8", "int64"},
    {torch::kByte, "|u1", "uint8"},
};

const DtypeInfo& info_for(torch::ScalarType t) {
  for (const auto& d : kDtypes) {
    if (d.type == t) return d;
  }
  throw DataError(fmt::format("unsupported tensor dtype {}", c10::toString(t)));
}

torch::ScalarType type_from_npy(const std::string& descr) {
  for (const auto& d : kDtypes) {
    if (descr == d.npy) return d.type;
  }
  // Single-byte types may be written with either byte-order marker.
  if (descr == "<u1" || descr == "=u1") return torch::kByte;
  throw DataError(fmt::format("unsupported npy dtype '{}'", descr));
}

torch::ScalarType type_from_name(const std::string& name) {
  for (const auto& d : kDtypes) {
    if (name == d.name) return d.type;
  }
  throw DataError(fmt::format("unsupported checkpoint dtype '{}'", name));
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot read '{}'", path.string()));
  return in;
}

}  // namespace

std::string dtype_name(torch::ScalarType type) { return info_for(type).name; }

void save_npy(const std::filesystem::path& path, const torch::Tensor& tensor) {
  auto t = tensor.detach().cpu().contiguous();
  const auto& info = info_for(t.scalar_type());
  std::string shape = "(";
  for (int64_t i = 0; i < t.dim(); ++i) {
    shape += std::to_string(t.size(i));
    if (t.dim() == 1 || i + 1 < t.dim()) shape += ",";
    if (i + 1 < t.dim()) shape += " ";
  }
  shape += ")";
  std::string header =
      fmt::format("{{'descr': '{}', 'fortran_order': False, 'shape': {}, }}", info.npy, shape);
  // Magic (6) + version (2) + length (2) + header + '\n' is padded to 64 bytes.
  const size_t unpadded = 10 + header.size() + 1;
  header.append((64 - unpadded % 64) % 64, ' ');
  header.push_back('\n');

  auto out = open_out(path);
  out.write("\x93NUMPY\x01\x00", 8);
  const auto len = static_cast<uint16_t>(header.size());
  const char len_bytes[2] = {static_cast<char>(len & 0xff), static_cast<char>(len >> 8)};
  out.write(len_bytes, 2);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
  if (!out) throw IoError(fmt::format("short write to '{}'", path.string()));
}

torch::Tensor load_npy(const std::filesystem::path& path) {
  auto in = open_in(path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "\x93NUMPY", 6) != 0) {
    throw DataError(fmt::format("'{}' is not an npy file", path.string()));
  }
  const int major = static_cast<unsigned char>(magic[6]);
  size_t header_len = 0;
  if (major == 1) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    header_len = b[0] | (static_cast<size_t>(b[1]) << 8);
  } else {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    header_len = b[0] | (static_cast<size_t>(b[1]) << 8) | (static_cast<size_t>(b[2]) << 16) |
                 (static_cast<size_t>(b[3]) << 24);
  }
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError(fmt::format("truncated npy header in '{}'", path.string()));

  std::smatch m;
  if (!std::regex_search(header, m, std::regex(R"('descr'\s*:\s*'([^']+)')"))) {
    throw DataError("npy header without descr");
  }
  const auto type = type_from_npy(m[1]);
  if (std::regex_search(header, m, std::regex(R"('fortran_order'\s*:\s*True)"))) {
    throw DataError(fmt::format("'{}': Fortran-ordered arrays are not supported", path.string()));
  }
  if (!std::regex_search(header, m, std::regex(R"('shape'\s*:\s*\(([^)]*)\))"))) {
    throw DataError("npy header without shape");
  }
  std::vector<int64_t> shape;
  const std::string dims = m[1];
  std::regex num(R"(\d+)");
  for (auto it = std::sregex_iterator(dims.begin(), dims.end(), num); it != std::sregex_iterator();
       ++it) {
    shape.push_back(std::stoll(it->str()));
  }
  auto t = torch::empty(shape, torch::TensorOptions().dtype(type));
  in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
  if (!in) throw DataError(fmt::format("truncated npy payload in '{}'", path.string()));
  return t;
}

// ----------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'W', 'C', 'N', 'T', 'C', 'K', 'P', 'T'};

nlohmann::json read_manifest_json(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) {
    throw DataError(fmt::format("'{}' is not a named-tensor checkpoint", path.string()));
  }
  unsigned char len_bytes[8];
  in.read(reinterpret_cast<char*>(len_bytes), 8);
  uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = (len << 8) | len_bytes[i];
  std::error_code ec;
  const auto file_size = std::filesystem::file_size(path, ec);
  if (!in || ec || len > file_size) {
    throw DataError(fmt::format("truncated checkpoint manifest in '{}'", path.string()));
  }
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(fmt::format("truncated checkpoint manifest in '{}'", path.string()));
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("corrupt checkpoint manifest in '{}': {}", path.string(),
                                e.what()));
  }
}

}  // namespace

void save_named_tensors(const std::filesystem::path& path, const NamedTensors& contents) {
  nlohmann::json records = nlohmann::json::array();
  std::vector<torch::Tensor> payload;
  uint64_t offset = 0;
  for (const auto& [name, tensor] : contents.tensors) {
    auto t = tensor.detach().cpu().contiguous();
    const auto nbytes = static_cast<uint64_t>(t.nbytes());
    records.push_back({{"name", name},
                       {"shape", t.sizes().vec()},
                       {"dtype", dtype_name(t.scalar_type())},
                       {"offset", offset},
                       {"nbytes", nbytes}});
    offset += nbytes;
    payload.push_back(std::move(t));
  }
  nlohmann::json manifest = {{"format", 1}, {"tensors", records}, {"metadata", contents.metadata}};
  const std::string text = manifest.dump();

  auto out = open_out(path);
  out.write(kMagic, 8);
  uint64_t len = text.size();
  char len_bytes[8];
  for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<char>((len >> (8 * i)) & 0xff);
  out.write(len_bytes, 8);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& t : payload) {
    out.write(static_cast<const char*>(t.data_ptr()), static_cast<std::streamsize>(t.nbytes()));
  }
  if (!out) throw IoError(fmt::format("short write to '{}'", path.string()));
}

std::vector<TensorRecord> read_manifest(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto manifest = read_manifest_json(in, path);
  std::vector<TensorRecord> out;
  for (const auto& r : manifest.at("tensors")) {
    out.push_back({r.at("name").get<std::string>(), r.at("shape").get<std::vector<int64_t>>(),
                   r.at("dtype").get<std::string>()});
  }
  return out;
}

NamedTensors load_named_tensors(const std::filesystem::path& path) {
  auto in = open_in(path);
  const auto manifest = read_manifest_json(in, path);
  const auto payload_start = in.tellg();
  NamedTensors out;
  out.metadata = manifest.value("metadata", nlohmann::json::object());
  for (const auto& r : manifest.at("tensors")) {
    const auto shape = r.at("shape").get<std::vector<int64_t>>();
    auto t = torch::empty(shape, torch::TensorOptions().dtype(
                                     type_from_name(r.at("dtype").get<std::string>())));
    const auto nbytes = r.at("nbytes").get<uint64_t>();
    if (nbytes != t.nbytes()) {
      throw DataError(fmt::format("checkpoint record '{}' has inconsistent size",
                                  r.at("name").get<std::string>()));
    }
    in.seekg(payload_start + static_cast<std::streamoff>(r.at("offset").get<uint64_t>()));
    in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(nbytes));
    if (!in) throw DataError(fmt::format("truncated checkpoint payload in '{}'", path.string()));
    out.tensors.emplace(r.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

NamedTensors module_state(const torch::nn::Module& module) {
  NamedTensors out;
  for (const auto& p : module.named_parameters(true)) {
    out.tensors.emplace(p.key(), p.value().detach().clone());
  }
  for (const auto& b : module.named_buffers(true)) {
    out.tensors.emplace(b.key(), b.value().detach().clone());
  }
  return out;
}

void load_module_state(torch::nn::Module& module, const NamedTensors& contents,
                       const std::string& prefix) {
  torch::NoGradGuard no_grad;
  size_t consumed = 0;
  auto load_one = [&](const std::string& name, torch::Tensor& target) {
    const auto it = contents.tensors.find(prefix + name);
    if (it == contents.tensors.end()) {
      throw DataError(fmt::format("checkpoint is missing tensor '{}'", prefix + name));
    }
    const auto& src = it->second;
    if (src.sizes() != target.sizes()) {
      throw DataError(fmt::format("tensor '{}': checkpoint shape {} does not match model shape {}",
                                  prefix + name, c10::str(src.sizes()), c10::str(target.sizes())));
    }
    if (src.scalar_type() != target.scalar_type()) {
      throw DataError(fmt::format("tensor '{}': checkpoint dtype {} does not match model dtype {}",
                                  prefix + name, dtype_name(src.scalar_type()),
                                  dtype_name(target.scalar_type())));
    }
    target.copy_(src);
    ++consumed;
  };
  for (auto& p : module.named_parameters(true)) load_one(p.key(), p.value());
  for (auto& b : module.named_buffers(true)) load_one(b.key(), b.value());

  size_t available = 0;
  for (const auto& [name, _] : contents.tensors) {
    if (name.rfind(prefix, 0) == 0) ++available;
  }
  if (available != consumed) {
    throw DataError(fmt::format("checkpoint holds {} tensors under '{}' but the model has {}",
                                available, prefix, consumed));
  }
}

}  // namespace wiconet
