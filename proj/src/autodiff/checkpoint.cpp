// Copyright 2026 The sase Authors.
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

#include "sase/autodiff/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <string>
#include <vector>

namespace sase {
namespace {

constexpr char kMagic[8] = {'S', 'A', 'S', 'E', 'T', 'N', 'S', 'R'};
constexpr std::uint32_t kVersion = 1;

void put_le(std::vector<char>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::string path) : buf_(buf), path_(std::move(path)) {}

  std::uint64_t le(int bytes) {
    need(bytes);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += bytes;
    return v;
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  bool done() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > buf_.size()) throw DataError("checkpoint " + path_ + ": truncated record");
  }
  const std::vector<char>& buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

std::filesystem::path with_ext(const std::filesystem::path& stem, const char* ext) {
  return stem.parent_path() / (stem.filename().string() + ext);
}

}  // namespace

void save_tensors(const std::filesystem::path& stem, const ParamStore& tensors) {
  std::vector<char> buf(kMagic, kMagic + 8);
  put_le(buf, kVersion, 4);
  put_le(buf, tensors.size(), 4);
  nlohmann::json records = nlohmann::json::array();
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& name = tensors.names()[i];
    const Tensor& t = tensors.value(i);
    put_le(buf, name.size(), 4);
    buf.insert(buf.end(), name.begin(), name.end());
    put_le(buf, t.rank(), 4);
    for (auto d : t.shape()) put_le(buf, d, 8);
    records.push_back({{"name", name}, {"shape", t.shape()}, {"offset", buf.size()}, {"count", t.size()}});
    for (double v : t.data()) put_le(buf, std::bit_cast<std::uint64_t>(v), 8);
  }

  const auto bin_path = with_ext(stem, ".bin");
  const auto json_path = with_ext(stem, ".json");
  if (!stem.parent_path().empty()) std::filesystem::create_directories(stem.parent_path());
  std::ofstream bin(bin_path, std::ios::binary | std::ios::trunc);
  bin.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!bin) throw DataError("cannot write " + bin_path.string());

  nlohmann::json index = {{"format", "sase-tensors"},
                          {"version", kVersion},
                          {"binary", bin_path.filename().string()},
                          {"records", records}};
  std::ofstream js(json_path, std::ios::trunc);
  js << index.dump(2) << '\n';
  if (!js) throw DataError("cannot write " + json_path.string());
}

ParamStore load_tensors(const std::filesystem::path& stem) {
  const auto bin_path = with_ext(stem, ".bin");
  const auto json_path = with_ext(stem, ".json");
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw DataError("cannot open " + bin_path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());

  std::ifstream js(json_path);
  if (!js) throw DataError("cannot open " + json_path.string());
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(js);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("checkpoint index " + json_path.string() + ": " + e.what());
  }

  Reader r(buf, bin_path.string());
  if (r.bytes(8) != std::string(kMagic, 8)) throw DataError(bin_path.string() + ": bad magic");
  if (r.le(4) != kVersion) throw DataError(bin_path.string() + ": unsupported version");
  const auto count = r.le(4);
  const auto& records = index.at("records");
  if (records.size() != count)
    throw DataError("checkpoint " + stem.string() + ": index lists " + std::to_string(records.size()) +
                    " records, binary holds " + std::to_string(count));

  ParamStore out;
  for (std::uint64_t i = 0; i < count; ++i) {
    const std::string name = r.bytes(r.le(4));
    Shape shape(r.le(4));
    for (auto& d : shape) d = r.le(8);
    const auto& rec = records[i];
    if (rec.at("name").get<std::string>() != name || rec.at("shape").get<Shape>() != shape ||
        rec.at("offset").get<std::size_t>() != r.pos())
      throw DataError("checkpoint " + stem.string() + ": index disagrees with record '" + name + "'");
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = std::bit_cast<double>(r.le(8));
    out.add(name, Tensor(std::move(shape), std::move(data)));
  }
  if (!r.done()) throw DataError(bin_path.string() + ": trailing bytes");
  return out;
}

}  // namespace sase
