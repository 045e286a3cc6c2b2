/* Copyright 2026 The Entropic Trees Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Tensor container used for checkpoints and feature matrices.
//
// Layout:
//   u64 (little-endian)  header length in bytes
//   header               JSON: {"meta": any,
//                               "tensors": [{"name", "shape", "dtype": "f64",
//                                            "offset"}]}
//   data                 little-endian f64 arrays; offsets count bytes from
//                        the start of this section

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "entropic_trees/error.hpp"
#include "entropic_trees/features.hpp"

namespace etrees {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  std::size_t numel() const {
    std::size_t n = 1;
    for (std::size_t s : shape) n *= s;
    return n;
  }
};

struct TensorFile {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, Tensor> tensors;  // written in name order

  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw IoError(detail::concat("tensor '", name, "' missing"));
    return it->second;
  }
};

namespace detail {

inline std::uint64_t to_le(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) return x;
  std::uint64_t y = 0;
  for (int i = 0; i < 8; ++i) y |= ((x >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return y;
}

inline void write_u64(std::ostream& out, std::uint64_t x) {
  x = to_le(x);
  out.write(reinterpret_cast<const char*>(&x), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  std::uint64_t x = 0;
  in.read(reinterpret_cast<char*>(&x), 8);
  if (!in) throw IoError("truncated tensor container");
  return to_le(x);
}

}  // namespace detail

inline void write_tensors(std::ostream& out, const TensorFile& file) {
  nlohmann::json entries = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& [name, t] : file.tensors) {
    if (t.numel() != t.data.size())
      throw IoError(detail::concat("tensor '", name, "' has ", t.data.size(), " values for its shape"));
    entries.push_back({{"name", name}, {"shape", t.shape}, {"dtype", "f64"}, {"offset", offset}});
    offset += 8 * t.data.size();
  }
  const std::string header = nlohmann::json{{"meta", file.meta}, {"tensors", entries}}.dump();
  detail::write_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto& [name, t] : file.tensors)
    for (double v : t.data) detail::write_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw IoError("failed writing tensor container");
}

inline TensorFile read_tensors(std::istream& in) {
  const std::uint64_t len = detail::read_u64(in);
  if (len > (1ull << 32)) throw IoError("tensor header too large");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw IoError("truncated tensor header");
  const std::streampos data_start = in.tellg();

  TensorFile file;
  try {
    const auto j = nlohmann::json::parse(header);
    file.meta = j.at("meta");
    for (const auto& e : j.at("tensors")) {
      if (e.at("dtype").get<std::string>() != "f64")
        throw IoError(detail::concat("unsupported dtype ", e.at("dtype")));
      Tensor t;
      t.shape = e.at("shape").get<std::vector<std::size_t>>();
      t.data.resize(t.numel());
      in.seekg(data_start + static_cast<std::streamoff>(e.at("offset").get<std::uint64_t>()));
      for (double& v : t.data) v = std::bit_cast<double>(detail::read_u64(in));
      file.tensors.emplace(e.at("name").get<std::string>(), std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(detail::concat("malformed tensor header: ", e.what()));
  }
  return file;
}

inline void save_tensors(const std::string& path, const TensorFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_tensors(out, file);
}

inline TensorFile load_tensors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  return read_tensors(in);
}

// CSR layout: indptr (rows + 1), indices, values; dim in meta.
inline TensorFile features_to_tensors(const FeatureMatrix& m) {
  TensorFile f;
  f.meta = {{"kind", "csr"}, {"dim", m.dim}, {"rows", m.rows.size()}};
  Tensor indptr{{m.rows.size() + 1}, {0.0}}, indices, values;
  for (const auto& r : m.rows) {
    for (std::size_t i = 0; i < r.index.size(); ++i) {
      indices.data.push_back(r.index[i]);
      values.data.push_back(r.value[i]);
    }
    indptr.data.push_back(static_cast<double>(indices.data.size()));
  }
  indices.shape = {indices.data.size()};
  values.shape = {values.data.size()};
  f.tensors["indptr"] = std::move(indptr);
  f.tensors["indices"] = std::move(indices);
  f.tensors["values"] = std::move(values);
  return f;
}

inline FeatureMatrix features_from_tensors(const TensorFile& f) {
  FeatureMatrix m;
  try {
    m.dim = f.meta.at("dim").get<std::size_t>();
  } catch (const nlohmann::json::exception&) {
    throw IoError("feature container lacks a dim");
  }
  const auto& indptr = f.at("indptr").data;
  const auto& indices = f.at("indices").data;
  const auto& values = f.at("values").data;
  if (indptr.empty() || indices.size() != values.size() || indptr.back() != static_cast<double>(values.size()))
    throw IoError("inconsistent CSR feature container");
  for (std::size_t r = 0; r + 1 < indptr.size(); ++r) {
    SparseVector row;
    const auto lo = static_cast<std::size_t>(indptr[r]), hi = static_cast<std::size_t>(indptr[r + 1]);
    if (lo > hi || hi > values.size()) throw IoError("inconsistent CSR feature container");
    for (std::size_t i = lo; i < hi; ++i) {
      if (!(indices[i] >= 0 && indices[i] < static_cast<double>(m.dim)))
        throw IoError("feature index out of range");
      row.index.push_back(static_cast<std::uint32_t>(indices[i]));
      row.value.push_back(values[i]);
    }
    m.rows.push_back(std::move(row));
  }
  return m;
}

}  // namespace etrees
