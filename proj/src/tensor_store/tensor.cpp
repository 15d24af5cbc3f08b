/*
 * Copyright 2026 The HELD Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "held/tensor_store/tensor.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "held/common/error.hpp"

namespace held::tensor_store {

namespace {

static_assert(std::endian::native == std::endian::little,
              "container I/O assumes a little-endian host");

template <typename T>
void AppendLe(std::vector<std::uint8_t>& out, T value) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T LoadLe(const std::vector<std::uint8_t>& in, std::size_t offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  return value;
}

}  // namespace

std::size_t DTypeWidth(DType dtype) {
  switch (dtype) {
    case DType::kFloat32:
      return 4;
    case DType::kFloat64:
      return 8;
  }
  throw FormatError("unknown dtype");
}

std::uint64_t Tensor::NumElements() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::vector<std::uint8_t> EncodeTensor(const Tensor& tensor) {
  const std::uint64_t count = tensor.NumElements();
  Require(count == tensor.values.size(),
          "tensor values do not match declared dims");
  for (double v : tensor.values) {
    Require(std::isfinite(v), "tensor contains non-finite values");
  }
  const std::size_t width = DTypeWidth(tensor.dtype);
  std::vector<std::uint8_t> out;
  out.reserve(kFixedHeaderBytes + 8 * tensor.dims.size() + width * count);
  for (auto byte : kTensorMagic) out.push_back(static_cast<std::uint8_t>(byte));
  AppendLe<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dtype));
  AppendLe<std::uint32_t>(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) AppendLe<std::uint64_t>(out, d);
  if (tensor.dtype == DType::kFloat64) {
    for (double v : tensor.values) AppendLe<double>(out, v);
  } else {
    for (double v : tensor.values) {
      const auto f = static_cast<float>(v);
      Require(static_cast<double>(f) == v,
              "value not representable as float32");
      AppendLe<float>(out, f);
    }
  }
  return out;
}

Tensor DecodeTensor(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kFixedHeaderBytes ||
      std::memcmp(bytes.data(), kTensorMagic, sizeof(kTensorMagic)) != 0) {
    throw FormatError("bad tensor magic");
  }
  Tensor t;
  const auto dtype = LoadLe<std::uint32_t>(bytes, 8);
  if (dtype != 1 && dtype != 2) throw FormatError("unknown dtype tag");
  t.dtype = static_cast<DType>(dtype);
  const auto rank = LoadLe<std::uint32_t>(bytes, 12);
  std::size_t offset = kFixedHeaderBytes;
  if (bytes.size() < offset + 8ull * rank) {
    throw FormatError("truncated tensor header");
  }
  t.dims.resize(rank);
  for (std::uint32_t i = 0; i < rank; ++i, offset += 8) {
    t.dims[i] = LoadLe<std::uint64_t>(bytes, offset);
  }
  const std::uint64_t count = t.NumElements();
  const std::size_t width = DTypeWidth(t.dtype);
  if (bytes.size() - offset != count * width) {
    throw FormatError("tensor payload length does not match dims");
  }
  t.values.resize(count);
  for (std::uint64_t i = 0; i < count; ++i, offset += width) {
    t.values[i] = t.dtype == DType::kFloat64
                      ? LoadLe<double>(bytes, offset)
                      : static_cast<double>(LoadLe<float>(bytes, offset));
  }
  return t;
}

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void WriteFileBytes(const std::filesystem::path& path,
                    const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void WriteTensor(const std::filesystem::path& path, const Tensor& tensor) {
  WriteFileBytes(path, EncodeTensor(tensor));
}

Tensor ReadTensor(const std::filesystem::path& path) {
  return DecodeTensor(ReadFileBytes(path));
}

Tensor MatrixToTensor(const Matrix& m, DType dtype) {
  Tensor t;
  t.dtype = dtype;
  t.dims = {static_cast<std::uint64_t>(m.rows()),
            static_cast<std::uint64_t>(m.cols())};
  t.values.resize(static_cast<std::size_t>(m.size()));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      t.values[k++] = dtype == DType::kFloat32
                          ? static_cast<double>(static_cast<float>(m(i, j)))
                          : m(i, j);
    }
  }
  return t;
}

Tensor VectorToTensor(const Vector& v, DType dtype) {
  Tensor t;
  t.dtype = dtype;
  t.dims = {static_cast<std::uint64_t>(v.size())};
  t.values.assign(v.data(), v.data() + v.size());
  if (dtype == DType::kFloat32) {
    for (auto& x : t.values) x = static_cast<double>(static_cast<float>(x));
  }
  return t;
}

Matrix TensorToMatrix(const Tensor& t) {
  if (t.dims.size() != 2) throw FormatError("expected a rank-2 tensor");
  Matrix m(static_cast<Eigen::Index>(t.dims[0]),
           static_cast<Eigen::Index>(t.dims[1]));
  std::size_t k = 0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = t.values[k++];
  }
  return m;
}

Vector TensorToVector(const Tensor& t) {
  if (t.dims.size() != 1) throw FormatError("expected a rank-1 tensor");
  return Eigen::Map<const Vector>(t.values.data(),
                                  static_cast<Eigen::Index>(t.values.size()));
}

void WriteMatrix(const std::filesystem::path& path, const Matrix& m,
                 DType dtype) {
  WriteTensor(path, MatrixToTensor(m, dtype));
}

Matrix ReadMatrix(const std::filesystem::path& path) {
  return TensorToMatrix(ReadTensor(path));
}

void WriteVector(const std::filesystem::path& path, const Vector& v) {
  WriteTensor(path, VectorToTensor(v));
}

Vector ReadVector(const std::filesystem::path& path) {
  return TensorToVector(ReadTensor(path));
}

void WriteLabels(const std::filesystem::path& path, const Labels& labels) {
  Tensor t;
  t.dims = {labels.size()};
  t.values.reserve(labels.size());
  for (int y : labels) {
    Require(y >= 0, "labels must be non-negative");
    t.values.push_back(static_cast<double>(y));
  }
  WriteTensor(path, t);
}

Labels ReadLabels(const std::filesystem::path& path) {
  const Tensor t = ReadTensor(path);
  if (t.dims.size() != 1) throw FormatError("labels must be rank-1");
  Labels out;
  out.reserve(t.values.size());
  for (double v : t.values) {
    if (v < 0 || v != std::floor(v) || v > 1e9) {
      throw FormatError("labels must be non-negative integers");
    }
    out.push_back(static_cast<int>(v));
  }
  return out;
}

std::string Sha256Hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw RuntimeFailure("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0')
       << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string FileSha256(const std::filesystem::path& path) {
  return Sha256Hex(ReadFileBytes(path));
}

}  // namespace held::tensor_store
