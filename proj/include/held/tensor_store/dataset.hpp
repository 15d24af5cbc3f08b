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

#ifndef HELD_TENSOR_STORE_DATASET_HPP_
#define HELD_TENSOR_STORE_DATASET_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "held/common/linalg.hpp"
#include "held/tensor_store/tensor.hpp"
#include "nlohmann/json.hpp"

namespace held::tensor_store {

enum class Split { kTrain, kTest, kPublic, kOod };
enum class Role { kTarget, kSource };

std::string ToString(Split split);
std::string ToString(Role role);
Split ParseSplit(const std::string& s);
Role ParseRole(const std::string& s);

// Sequence-level representations for one (model, dataset, split).
struct EmbeddingDataset {
  Matrix embeddings;
  std::optional<Labels> labels;
  Split split = Split::kTrain;
  std::string model_id;
  std::string dataset_id;

  Eigen::Index size() const { return embeddings.rows(); }
  Eigen::Index dim() const { return embeddings.cols(); }

  // Throws on NaN/Inf, label count mismatch, or labels >= num_classes
  // (when num_classes is given).
  void Validate(std::optional<int> num_classes = std::nullopt) const;
};

struct ManifestEntry {
  Role role = Role::kTarget;
  Split split = Split::kTrain;
  std::filesystem::path path;
  std::optional<std::filesystem::path> labels_path;
  std::string model_id;
  std::string dataset_id;
  std::string sha256;
  std::optional<std::string> labels_sha256;
  // Optional digest of the ordered sample ids; paired entries must agree.
  std::optional<std::string> order_key;
};

// Relative paths inside a manifest resolve against the manifest's directory.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::filesystem::path base_dir;

  const ManifestEntry* Find(Role role, const std::string& dataset_id,
                            Split split) const;
  std::vector<std::string> DatasetIds() const;
};

DatasetManifest ParseManifest(const nlohmann::json& doc,
                              const std::filesystem::path& base_dir);
nlohmann::json ManifestToJson(const DatasetManifest& manifest);
DatasetManifest LoadManifest(const std::filesystem::path& path);
void SaveManifest(const std::filesystem::path& path,
                  const DatasetManifest& manifest);

// Checks file checksums and the pairing contract: every (dataset_id, split)
// present for both roles has equal sample counts and matching order keys.
void ValidateManifest(const DatasetManifest& manifest);

EmbeddingDataset LoadDataset(const DatasetManifest& manifest,
                             const ManifestEntry& entry);

struct DatasetPair {
  EmbeddingDataset target;  // Party A space
  EmbeddingDataset source;  // Party B space
};

DatasetPair LoadPair(const DatasetManifest& manifest,
                     const std::string& dataset_id, Split split);

// Writes `dataset` as tensor files next to `dir` and returns the manifest
// entry describing them (checksums filled in, paths relative to `dir`).
ManifestEntry WriteDataset(const std::filesystem::path& dir, Role role,
                           const EmbeddingDataset& dataset);

// A set of named tensors with a JSON sidecar. The sidecar lives at `path`
// and names each tensor file relative to its own directory.
struct TensorBundle {
  std::string kind;
  std::map<std::string, Tensor> tensors;
  nlohmann::json metadata = nlohmann::json::object();
};

void SaveBundle(const std::filesystem::path& path, const TensorBundle& bundle);
TensorBundle LoadBundle(const std::filesystem::path& path,
                        const std::string& expected_kind);

}  // namespace held::tensor_store

#endif  // HELD_TENSOR_STORE_DATASET_HPP_
