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

#ifndef HELD_TENSOR_STORE_TENSOR_HPP_
#define HELD_TENSOR_STORE_TENSOR_HPP_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "held/common/linalg.hpp"

namespace held::tensor_store {

// On-disk layout, all integers little-endian:
//
//   offset  size        field
//   0       8           magic "HELDTNS1"
//   8       4           dtype (1 = float32, 2 = float64)
//   12      4           rank
//   16      8 * rank    dims
//   ...     prod(dims) * width   IEEE-754 payload, row-major
inline constexpr char kTensorMagic[8] = {'H', 'E', 'L', 'D', 'T', 'N', 'S', '1'};
inline constexpr std::size_t kFixedHeaderBytes = 16;

enum class DType : std::uint32_t { kFloat32 = 1, kFloat64 = 2 };

std::size_t DTypeWidth(DType dtype);

// A dense tensor held as doubles in memory. Float32 tensors only ever hold
// values representable in float32, so narrowing on write is exact.
struct Tensor {
  DType dtype = DType::kFloat64;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;

  std::uint64_t NumElements() const;
  bool operator==(const Tensor& other) const = default;
};

std::vector<std::uint8_t> EncodeTensor(const Tensor& tensor);
Tensor DecodeTensor(const std::vector<std::uint8_t>& bytes);

void WriteTensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor ReadTensor(const std::filesystem::path& path);

Tensor MatrixToTensor(const Matrix& m, DType dtype = DType::kFloat64);
Tensor VectorToTensor(const Vector& v, DType dtype = DType::kFloat64);
Matrix TensorToMatrix(const Tensor& t);
Vector TensorToVector(const Tensor& t);

void WriteMatrix(const std::filesystem::path& path, const Matrix& m,
                 DType dtype = DType::kFloat64);
Matrix ReadMatrix(const std::filesystem::path& path);
void WriteVector(const std::filesystem::path& path, const Vector& v);
Vector ReadVector(const std::filesystem::path& path);

// Labels are a rank-1 float64 container of non-negative integral values.
void WriteLabels(const std::filesystem::path& path, const Labels& labels);
Labels ReadLabels(const std::filesystem::path& path);

std::vector<std::uint8_t> ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path,
                    const std::vector<std::uint8_t>& bytes);

// Lower-case hex SHA-256.
std::string Sha256Hex(std::span<const std::uint8_t> bytes);
std::string FileSha256(const std::filesystem::path& path);

}  // namespace held::tensor_store

#endif  // HELD_TENSOR_STORE_TENSOR_HPP_
