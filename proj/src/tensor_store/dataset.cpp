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

#include "held/tensor_store/dataset.hpp"

#include <fstream>
#include <set>

#include "held/common/error.hpp"

namespace held::tensor_store {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ToString(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kTest:
      return "test";
    case Split::kPublic:
      return "public";
    case Split::kOod:
      return "ood";
  }
  return "?";
}

std::string ToString(Role role) {
  return role == Role::kTarget ? "target" : "source";
}

Split ParseSplit(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "test") return Split::kTest;
  if (s == "public") return Split::kPublic;
  if (s == "ood") return Split::kOod;
  throw FormatError("unknown split: " + s);
}

Role ParseRole(const std::string& s) {
  if (s == "target") return Role::kTarget;
  if (s == "source") return Role::kSource;
  throw FormatError("unknown role: " + s);
}

void EmbeddingDataset::Validate(std::optional<int> num_classes) const {
  if (!embeddings.allFinite()) {
    throw InvalidArgument("embeddings contain NaN or Inf (" + model_id + "/" +
                          dataset_id + ")");
  }
  if (!labels) return;
  RequireDims(static_cast<Eigen::Index>(labels->size()) == embeddings.rows(),
              "label count differs from sample count");
  for (int y : *labels) {
    Require(y >= 0, "negative label");
    if (num_classes) Require(y < *num_classes, "label out of range");
  }
}

const ManifestEntry* DatasetManifest::Find(Role role,
                                           const std::string& dataset_id,
                                           Split split) const {
  for (const auto& e : entries) {
    if (e.role == role && e.dataset_id == dataset_id && e.split == split) {
      return &e;
    }
  }
  return nullptr;
}

std::vector<std::string> DatasetManifest::DatasetIds() const {
  std::vector<std::string> ids;
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (seen.insert(e.dataset_id).second) ids.push_back(e.dataset_id);
  }
  return ids;
}

DatasetManifest ParseManifest(const json& doc, const fs::path& base_dir) {
  static const std::set<std::string> kKnown = {
      "role",     "split",  "path",          "labels_path", "model_id",
      "dataset_id", "sha256", "labels_sha256", "order_key"};
  if (!doc.is_object() || !doc.contains("entries") ||
      !doc["entries"].is_array()) {
    throw FormatError("manifest must be an object with an 'entries' array");
  }
  DatasetManifest m;
  m.base_dir = base_dir;
  for (const auto& item : doc["entries"]) {
    for (const auto& [key, _] : item.items()) {
      if (!kKnown.count(key)) throw FormatError("unknown manifest key: " + key);
    }
    try {
      ManifestEntry e;
      e.role = ParseRole(item.at("role").get<std::string>());
      e.split = ParseSplit(item.at("split").get<std::string>());
      e.path = item.at("path").get<std::string>();
      e.model_id = item.at("model_id").get<std::string>();
      e.dataset_id = item.at("dataset_id").get<std::string>();
      e.sha256 = item.value("sha256", "");
      if (item.contains("labels_path")) {
        e.labels_path = item["labels_path"].get<std::string>();
      }
      if (item.contains("labels_sha256")) {
        e.labels_sha256 = item["labels_sha256"].get<std::string>();
      }
      if (item.contains("order_key")) {
        e.order_key = item["order_key"].get<std::string>();
      }
      m.entries.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw FormatError(std::string("malformed manifest entry: ") + ex.what());
    }
  }
  return m;
}

json ManifestToJson(const DatasetManifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json item = {{"role", ToString(e.role)},
                 {"split", ToString(e.split)},
                 {"path", e.path.generic_string()},
                 {"model_id", e.model_id},
                 {"dataset_id", e.dataset_id},
                 {"sha256", e.sha256}};
    if (e.labels_path) item["labels_path"] = e.labels_path->generic_string();
    if (e.labels_sha256) item["labels_sha256"] = *e.labels_sha256;
    if (e.order_key) item["order_key"] = *e.order_key;
    entries.push_back(std::move(item));
  }
  return json{{"entries", entries}};
}

DatasetManifest LoadManifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& ex) {
    throw FormatError("manifest is not valid JSON: " + std::string(ex.what()));
  }
  return ParseManifest(doc, path.parent_path());
}

void SaveManifest(const fs::path& path, const DatasetManifest& manifest) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << ManifestToJson(manifest).dump(2) << "\n";
}

namespace {

fs::path Resolve(const DatasetManifest& m, const fs::path& p) {
  return p.is_absolute() ? p : m.base_dir / p;
}

std::uint64_t RowCount(const fs::path& path) {
  const Tensor t = ReadTensor(path);
  if (t.dims.size() != 2) throw FormatError("embeddings must be rank-2");
  return t.dims[0];
}

}  // namespace

void ValidateManifest(const DatasetManifest& manifest) {
  for (const auto& e : manifest.entries) {
    const fs::path p = Resolve(manifest, e.path);
    if (!e.sha256.empty() && FileSha256(p) != e.sha256) {
      throw FormatError("checksum mismatch for " + p.string());
    }
    if (e.labels_path && e.labels_sha256 &&
        FileSha256(Resolve(manifest, *e.labels_path)) != *e.labels_sha256) {
      throw FormatError("checksum mismatch for labels of " + p.string());
    }
  }
  for (const auto& t : manifest.entries) {
    if (t.role != Role::kTarget) continue;
    const ManifestEntry* s = manifest.Find(Role::kSource, t.dataset_id, t.split);
    if (s == nullptr) continue;
    if (RowCount(Resolve(manifest, t.path)) !=
        RowCount(Resolve(manifest, s->path))) {
      throw DimensionMismatch("paired entries for " + t.dataset_id + "/" +
                              ToString(t.split) + " differ in sample count");
    }
    if (t.order_key && s->order_key && *t.order_key != *s->order_key) {
      throw InvalidArgument("paired entries for " + t.dataset_id + "/" +
                            ToString(t.split) + " have different ordering");
    }
  }
}

EmbeddingDataset LoadDataset(const DatasetManifest& manifest,
                             const ManifestEntry& entry) {
  EmbeddingDataset d;
  d.embeddings = ReadMatrix(Resolve(manifest, entry.path));
  if (entry.labels_path) {
    d.labels = ReadLabels(Resolve(manifest, *entry.labels_path));
  }
  d.split = entry.split;
  d.model_id = entry.model_id;
  d.dataset_id = entry.dataset_id;
  d.Validate();
  return d;
}

DatasetPair LoadPair(const DatasetManifest& manifest,
                     const std::string& dataset_id, Split split) {
  const ManifestEntry* t = manifest.Find(Role::kTarget, dataset_id, split);
  const ManifestEntry* s = manifest.Find(Role::kSource, dataset_id, split);
  if (t == nullptr || s == nullptr) {
    throw InvalidArgument("manifest has no target/source pair for " +
                          dataset_id + "/" + ToString(split));
  }
  if (t->order_key && s->order_key && *t->order_key != *s->order_key) {
    throw InvalidArgument("pair " + dataset_id + "/" + ToString(split) +
                          " has mismatched ordering");
  }
  DatasetPair pair{LoadDataset(manifest, *t), LoadDataset(manifest, *s)};
  RequireDims(pair.target.size() == pair.source.size(),
              "pair " + dataset_id + "/" + ToString(split) +
                  " differs in sample count");
  return pair;
}

ManifestEntry WriteDataset(const fs::path& dir, Role role,
                           const EmbeddingDataset& dataset) {
  dataset.Validate();
  fs::create_directories(dir);
  const std::string stem = dataset.dataset_id + "." + ToString(dataset.split) +
                           "." + ToString(role);
  ManifestEntry e;
  e.role = role;
  e.split = dataset.split;
  e.model_id = dataset.model_id;
  e.dataset_id = dataset.dataset_id;
  e.path = stem + ".tns";
  WriteMatrix(dir / e.path, dataset.embeddings);
  e.sha256 = FileSha256(dir / e.path);
  if (dataset.labels) {
    e.labels_path = stem + ".labels.tns";
    WriteLabels(dir / *e.labels_path, *dataset.labels);
    e.labels_sha256 = FileSha256(dir / *e.labels_path);
  }
  return e;
}

void SaveBundle(const fs::path& path, const TensorBundle& bundle) {
  json files = json::object();
  const fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
  for (const auto& [name, tensor] : bundle.tensors) {
    const std::string file = path.filename().string() + "." + name + ".tns";
    WriteTensor(dir / file, tensor);
    files[name] = {{"path", file}, {"sha256", FileSha256(dir / file)}};
  }
  json doc = {{"kind", bundle.kind},
              {"tensors", files},
              {"metadata", bundle.metadata}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << doc.dump(2) << "\n";
}

TensorBundle LoadBundle(const fs::path& path, const std::string& expected_kind) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& ex) {
    throw FormatError("sidecar is not valid JSON: " + std::string(ex.what()));
  }
  TensorBundle b;
  b.kind = doc.value("kind", "");
  if (b.kind != expected_kind) {
    throw FormatError("expected a '" + expected_kind + "' sidecar, got '" +
                      b.kind + "'");
  }
  b.metadata = doc.value("metadata", json::object());
  const fs::path dir = path.parent_path();
  for (const auto& [name, info] : doc.at("tensors").items()) {
    const fs::path file = dir / info.at("path").get<std::string>();
    const auto bytes = ReadFileBytes(file);
    if (info.contains("sha256") && Sha256Hex(bytes) != info["sha256"]) {
      throw FormatError("checksum mismatch for " + file.string());
    }
    b.tensors[name] = DecodeTensor(bytes);
  }
  return b;
}

}  // namespace held::tensor_store
