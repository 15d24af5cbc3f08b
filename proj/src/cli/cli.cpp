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

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "held/alignment/alignment.hpp"
#include "held/classifier_ood/classifier.hpp"
#include "held/cli/cli.hpp"
#include "held/common/error.hpp"
#include "held/he_backend/backend.hpp"
#include "held/he_backend/params.hpp"
#include "held/privacy_eval/privacy_eval.hpp"
#include "held/protocol/protocol.hpp"
#include "held/protocol/transport.hpp"
#include "held/similarity/similarity.hpp"
#include "held/tensor_store/dataset.hpp"
#include "held/tensor_store/synthetic.hpp"
#include "held/tokenizer_compat/tokenizer_compat.hpp"

namespace held::cli {

namespace {

namespace fs = std::filesystem;
namespace ts = held::tensor_store;
namespace al = held::alignment;
namespace co = held::classifier_ood;
namespace pr = held::protocol;
using nlohmann::json;
using ts::Split;

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string format = "json";
  std::string report;
  bool timings = false;
};

struct DataArgs {
  std::string manifest;
  std::string dataset;
};

struct HeadArgs {
  std::string head;
  std::string save_head;
  double l2 = 1e-2;
  int max_iter = 1000;
  bool normalize = false;
};

struct ProtocolArgs {
  std::string backend = "ckks";
  std::string transport = "inproc";
};

struct Command {
  CLI::App* app = nullptr;
  std::function<json()> run;
  bool keep_timings = false;
};

std::uint64_t ParseSeed(const std::string& text) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || text.front() == '-') {
    throw InvalidArgument("HELD_SEED must be a non-negative integer, got '" + text + "'");
  }
  return v;
}

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("--seed", c.seed, "Seed for every random draw (default: HELD_SEED or 0)");
  app->add_option("--config", c.config, "JSON file whose keys override flags");
  app->add_option("--format", c.format, "Report format")->check(CLI::IsMember({"json", "csv"}));
  app->add_option("--report", c.report, "Write the report here instead of stdout");
  app->add_flag("--timings", c.timings, "Keep wall-clock fields in the report");
}

void AddData(CLI::App* app, DataArgs& d, bool required = true) {
  auto* m = app->add_option("--manifest", d.manifest, "Dataset manifest (JSON)");
  if (required) m->required();
  app->add_option("--dataset", d.dataset, "Dataset id (default: the only one in the manifest)");
}

void AddHead(CLI::App* app, HeadArgs& h) {
  app->add_option("--head", h.head, "Trained head sidecar; trained on the target train split if absent");
  app->add_option("--save-head", h.save_head, "Save the head used");
  app->add_option("--l2", h.l2, "Head L2 penalty")->check(CLI::NonNegativeNumber);
  app->add_option("--max-iter", h.max_iter, "Head optimizer iterations")->check(CLI::PositiveNumber);
  app->add_flag("--normalize", h.normalize, "L2-normalize head inputs");
}

void AddProtocol(CLI::App* app, ProtocolArgs& p) {
  app->add_option("--backend", p.backend, "Encryption backend preset (mock, ckks or a full preset name)");
  app->add_option("--transport", p.transport, "inproc or socket")
      ->check(CLI::IsMember({"inproc", "socket"}));
}

// Config keys are flag names without the leading dashes; '_' and '-' are
// interchangeable. Values replace whatever was given on the command line.
void ApplyConfig(CLI::App& app, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config " + path + " is not valid JSON: " + e.what());
  }
  Require(doc.is_object(), "config must be a JSON object");
  for (const auto& [raw_key, value] : doc.items()) {
    std::string key = raw_key;
    std::replace(key.begin(), key.end(), '_', '-');
    CLI::Option* opt = key == "config" ? nullptr : app.get_option_no_throw("--" + key);
    if (opt == nullptr) throw InvalidArgument("unknown config key '" + raw_key + "'");
    auto as_text = [&](const json& v) -> std::string {
      if (v.is_string()) return v.get<std::string>();
      if (v.is_boolean() || v.is_number()) return v.dump();
      throw InvalidArgument("config key '" + raw_key + "' has an unsupported value");
    };
    std::vector<std::string> results;
    if (value.is_array()) {
      for (const auto& v : value) results.push_back(as_text(v));
    } else {
      results.push_back(as_text(value));
    }
    opt->clear();
    for (const auto& r : results) opt->add_result(r);
    try {
      opt->run_callback();
    } catch (const CLI::Error& e) {
      throw InvalidArgument("config key '" + raw_key + "': " + e.what());
    }
  }
}

// ---- data helpers ----

struct Loaded {
  ts::DatasetManifest manifest;
  std::string dataset;
};

Loaded Open(const DataArgs& d) {
  Loaded l{ts::LoadManifest(d.manifest), d.dataset};
  ts::ValidateManifest(l.manifest);
  if (l.dataset.empty()) {
    const auto ids = l.manifest.DatasetIds();
    Require(ids.size() == 1, "manifest holds " + std::to_string(ids.size()) +
                                 " datasets; pick one with --dataset");
    l.dataset = ids.front();
  }
  return l;
}

bool HasSplit(const Loaded& l, Split s) {
  return l.manifest.Find(ts::Role::kTarget, l.dataset, s) != nullptr &&
         l.manifest.Find(ts::Role::kSource, l.dataset, s) != nullptr;
}

ts::DatasetPair Pair(const Loaded& l, Split s) { return ts::LoadPair(l.manifest, l.dataset, s); }

const Labels& RequireLabels(const ts::EmbeddingDataset& d) {
  if (!d.labels) throw InvalidArgument("split " + ts::ToString(d.split) + " has no labels");
  return *d.labels;
}

co::LinearHead GetHead(const HeadArgs& h, const Loaded& l) {
  co::LinearHead head;
  if (!h.head.empty()) {
    head = co::LoadHead(h.head);
  } else {
    const auto train = Pair(l, Split::kTrain).target;
    co::HeadConfig cfg;
    cfg.l2 = h.l2;
    cfg.max_iter = h.max_iter;
    cfg.normalize = h.normalize;
    head = co::TrainHead(train.embeddings, RequireLabels(train), cfg);
    head.model_id = train.model_id;
    head.dataset_id = train.dataset_id;
  }
  if (!h.save_head.empty()) co::SaveHead(h.save_head, head);
  return head;
}

std::unique_ptr<he::Backend> GetBackend(const std::string& name) {
  if (name == "ckks") return he::MakeBackend(he::kCkksPreset);
  return he::MakeBackend(name);
}

// ---- subcommands ----

struct SynthArgs {
  std::string out_dir;
  std::string dataset = "synthetic";
  std::string model_a = "model-a";
  std::string model_b = "model-b";
  std::int64_t n = 1000, n_test = 500, n_public = 1000, n_ood = 500;
  int latent = 8, d_a = 16, d_b = 16, classes = 4;
  double noise = 0.0;
  double public_rotation = 0.0, public_minor_scale = 1.0;
  double ood_radial = 0.25;
};

json RunSynth(const SynthArgs& a, std::uint64_t seed) {
  ts::SyntheticSpec spec;
  spec.n = a.n;
  spec.latent_dim = a.latent;
  spec.d_a = a.d_a;
  spec.d_b = a.d_b;
  spec.noise_std = a.noise;
  spec.n_classes = a.classes;
  spec.seed = seed;
  spec.Validate();
  const ts::SyntheticWorld world(spec);
  const fs::path dir(a.out_dir);
  ts::DatasetManifest manifest;
  manifest.base_dir = dir;
  json counts = json::object();
  auto emit = [&](Split split, std::int64_t n, std::uint64_t salt, const ts::LatentShift& shift) {
    if (n <= 0) return;
    const auto s = world.Sample(n, seed * 16 + salt, shift);
    for (const auto role : {ts::Role::kTarget, ts::Role::kSource}) {
      ts::EmbeddingDataset d;
      d.embeddings = role == ts::Role::kTarget ? s.z_a : s.z_b;
      d.labels = s.labels;
      d.split = split;
      d.model_id = role == ts::Role::kTarget ? a.model_a : a.model_b;
      d.dataset_id = a.dataset;
      manifest.entries.push_back(ts::WriteDataset(dir, role, d));
    }
    counts[ts::ToString(split)] = n;
  };
  emit(Split::kTrain, a.n, 1, {});
  emit(Split::kTest, a.n_test, 2, {});
  emit(Split::kPublic, a.n_public, 3, {a.public_rotation, a.public_minor_scale, 1.0});
  emit(Split::kOod, a.n_ood, 4, {0.0, 1.0, a.ood_radial});
  const fs::path path = dir / "manifest.json";
  ts::SaveManifest(path, manifest);
  return {{"manifest", path.string()}, {"dataset", a.dataset}, {"rows", counts},
          {"d_a", a.d_a}, {"d_b", a.d_b}, {"classes", a.classes}};
}

struct AlignArgs {
  DataArgs data;
  std::string split;
  double lambda = al::kDefaultLambda;
  bool no_bias = false;
  std::string out = "out.map";
};

Split DefaultFitSplit(const Loaded& l, const std::string& requested) {
  if (!requested.empty()) return ts::ParseSplit(requested);
  return HasSplit(l, Split::kPublic) ? Split::kPublic : Split::kTrain;
}

json RunAlign(const AlignArgs& a) {
  const auto l = Open(a.data);
  const Split split = DefaultFitSplit(l, a.split);
  const auto pair = Pair(l, split);
  auto fit = al::Fit(pair.source.embeddings, pair.target.embeddings, a.lambda, {!a.no_bias});
  fit.map.source_model_id = pair.source.model_id;
  fit.map.target_model_id = pair.target.model_id;
  al::SaveAffineMap(a.out, fit.map);
  return {{"split", ts::ToString(split)}, {"n_train", fit.report.n_train},
          {"train_mse", fit.report.train_mse}, {"lambda", a.lambda},
          {"source_dim", fit.map.source_dim()}, {"target_dim", fit.map.target_dim()},
          {"map", a.out}};
}

struct SweepArgs {
  DataArgs data;
  std::string split;
  std::vector<std::int64_t> sizes;
  double holdout = 0.2;
  double lambda = al::kDefaultLambda;
  bool no_bias = false;
};

json RunSweep(const SweepArgs& a) {
  const auto l = Open(a.data);
  const Split split = a.split.empty() ? Split::kTrain : ts::ParseSplit(a.split);
  const auto pair = Pair(l, split);
  const auto reports = al::SweepTrainingSize(pair.source.embeddings, pair.target.embeddings,
                                             a.lambda, a.sizes, a.holdout, {!a.no_bias});
  json rows = json::array();
  for (const auto& r : reports) {
    json row = {{"n_train", r.n_train}, {"train_mse", r.train_mse}};
    if (r.holdout_mse) row["holdout_mse"] = *r.holdout_mse;
    rows.push_back(row);
  }
  return rows;
}

struct ClassifyArgs {
  DataArgs data;
  HeadArgs head;
  std::string map;
};

json RunClassify(const ClassifyArgs& a) {
  const auto l = Open(a.data);
  const auto head = GetHead(a.head, l);
  const auto test = Pair(l, Split::kTest);
  const Labels& y = RequireLabels(test.target);
  const bool ood = HasSplit(l, Split::kOod);
  std::optional<ts::DatasetPair> ood_pair;
  if (ood) ood_pair = Pair(l, Split::kOod);

  co::EvalRow row;
  row.party_a = test.target.model_id;
  row.party_b = test.source.model_id;
  row.dataset = l.dataset;
  row.baseline_acc = co::Accuracy(co::Predict(head, test.target.embeddings), y);
  if (ood) row.auroc_baseline = co::OodEval(head, test.target.embeddings, ood_pair->target.embeddings).auroc;
  json out;
  if (!a.map.empty()) {
    const auto map = al::LoadAffineMap(a.map);
    std::optional<Matrix> src_ood;
    if (ood) src_ood = ood_pair->source.embeddings;
    const auto t = co::TransferEval(head, map, test.source.embeddings, y, src_ood);
    row.mapped_acc = t.accuracy;
    if (t.ood) row.auroc_mapped = t.ood->auroc;
    out = co::ToJson(row);
  } else {
    out = co::ToJson(row);
    out.erase("mapped_acc");
  }
  out["n_test"] = test.target.size();
  return out;
}

struct OodArgs {
  DataArgs data;
  HeadArgs head;
  std::string map;
};

json RunOod(const OodArgs& a) {
  const auto l = Open(a.data);
  const auto head = GetHead(a.head, l);
  const auto test = Pair(l, Split::kTest);
  const auto ood = Pair(l, Split::kOod);
  json out = {{"baseline", co::ToJson(co::OodEval(head, test.target.embeddings, ood.target.embeddings))}};
  if (!a.map.empty()) {
    const auto map = al::LoadAffineMap(a.map);
    out["mapped"] = co::ToJson(co::OodEval(head, al::Apply(map, test.source.embeddings),
                                           al::Apply(map, ood.source.embeddings)));
  }
  return out;
}

struct SimilarityArgs {
  DataArgs data;
  std::string split = "train";
  int components = 64;
  int repeats = 3;
  bool no_baseline = false;
};

json RunCka(const SimilarityArgs& a) {
  const auto l = Open(a.data);
  const auto pair = Pair(l, ts::ParseSplit(a.split));
  return {{"cka", similarity::LinearCka(pair.target.embeddings, pair.source.embeddings)}};
}

json RunSvcca(const SimilarityArgs& a, std::uint64_t seed) {
  const auto l = Open(a.data);
  const auto pair = Pair(l, ts::ParseSplit(a.split));
  similarity::SvccaOptions opts;
  opts.n_components = a.components;
  opts.n_repeats = a.repeats;
  opts.seed = seed;
  opts.shuffled_baseline = !a.no_baseline;
  return similarity::ToJson(similarity::Svcca(pair.target.embeddings, pair.source.embeddings, opts));
}

struct TokArgs {
  std::string records_a, records_b, vocab_a, vocab_b;
};

json RunTokcompat(const TokArgs& a) {
  namespace tc = held::tokenizer_compat;
  const auto ra = tc::ReadTokenRecords(a.records_a);
  const auto rb = tc::ReadTokenRecords(a.records_b);
  json out = {{"records", ra.size()}, {"exact_match_rate", tc::CorpusExactMatchRate(ra, rb)}};
  Require(a.vocab_a.empty() == a.vocab_b.empty(), "give both --vocab-a and --vocab-b or neither");
  if (!a.vocab_a.empty()) {
    out["vocab_jaccard"] = tc::VocabJaccard(tc::ReadVocab(a.vocab_a), tc::ReadVocab(a.vocab_b));
  }
  return out;
}

struct TrainArgs {
  DataArgs data;
  ProtocolArgs proto;
  std::string split;
  double lambda = al::kDefaultLambda;
  bool no_bias = false;
  std::size_t ack_every = 64;
  std::string out = "out.map";
};

json RunProtocolTrain(const TrainArgs& a, std::uint64_t seed) {
  const auto l = Open(a.data);
  const Split split = DefaultFitSplit(l, a.split);
  const auto pair = Pair(l, split);
  const auto backend = GetBackend(a.proto.backend);
  pr::TrainingOptions opts;
  opts.transport = pr::ParseTransport(a.proto.transport);
  opts.seed = seed;
  opts.lambda = a.lambda;
  opts.fit_bias = !a.no_bias;
  opts.ack_every = a.ack_every;
  auto result = pr::RunTraining(*backend, pair.target.embeddings, pair.source.embeddings, opts);
  result.map.source_model_id = pair.source.model_id;
  result.map.target_model_id = pair.target.model_id;
  al::SaveAffineMap(a.out, result.map);
  json out = result.ToJson();
  out["backend"] = a.proto.backend;
  out["split"] = ts::ToString(split);
  out["map"] = a.out;
  return out;
}

struct InferArgs {
  DataArgs data;
  HeadArgs head;
  ProtocolArgs proto;
  std::string map;
  std::string variant = "local";
  std::int64_t max_queries = 0;
};

json RunProtocolInfer(const InferArgs& a, std::uint64_t seed) {
  const auto l = Open(a.data);
  const auto head = GetHead(a.head, l);
  const auto map = al::LoadAffineMap(a.map);
  const auto test = Pair(l, Split::kTest);
  Require(a.max_queries >= 0, "--max-queries must be non-negative");
  const Eigen::Index n = a.max_queries > 0 ? std::min<Eigen::Index>(a.max_queries, test.source.size())
                                           : test.source.size();
  const Matrix queries = test.source.embeddings.topRows(n);
  const auto backend = GetBackend(a.proto.backend);
  pr::InferenceOptions opts;
  opts.transport = pr::ParseTransport(a.proto.transport);
  opts.seed = seed;
  opts.variant = pr::ParseVariant(a.variant);
  const auto result = pr::RunInference(*backend, queries, map, head, opts);
  const Labels plain = co::Predict(head, al::Apply(map, queries));
  std::int64_t agree = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    agree += result.predictions[static_cast<std::size_t>(i)] == plain[static_cast<std::size_t>(i)];
  }
  json out = result.ToJson();
  out["backend"] = a.proto.backend;
  out["variant"] = a.variant;
  out["plaintext_agreement"] = n > 0 ? static_cast<double>(agree) / static_cast<double>(n) : 1.0;
  if (test.source.labels) {
    const Labels truth(test.source.labels->begin(), test.source.labels->begin() + n);
    out["accuracy"] = co::Accuracy(result.predictions, truth);
  }
  return out;
}

struct BenchArgs {
  ProtocolArgs proto;
  std::vector<int> dims = {64, 256, 1024};
  std::vector<int> classes = {4, 10};
  int queries = 20;
};

json RunProtocolBench(const BenchArgs& a, std::uint64_t seed) {
  const auto backend = GetBackend(a.proto.backend);
  std::vector<pr::BenchmarkCase> cases;
  for (int d : a.dims) {
    for (int k : a.classes) cases.push_back({d, k});
  }
  pr::SessionOptions opts;
  opts.transport = pr::ParseTransport(a.proto.transport);
  opts.seed = seed;
  json rows = json::array();
  for (const auto& r : pr::Benchmark(*backend, cases, a.queries, opts)) {
    json row = r.ToJson();
    row["backend"] = a.proto.backend;
    rows.push_back(row);
  }
  return rows;
}

struct PipelineArgs {
  DataArgs data;
  HeadArgs head;
  ProtocolArgs proto;
  std::vector<int> few_shot = {0};
  double lambda = al::kDefaultLambda;
  std::string variant = "local";
  std::int64_t max_test = 0;
};

json RunPipeline(const PipelineArgs& a, std::uint64_t seed) {
  const auto l = Open(a.data);
  const auto head = GetHead(a.head, l);
  const auto pub = Pair(l, Split::kPublic);
  const auto id = Pair(l, Split::kTrain);
  const auto test = Pair(l, Split::kTest);
  pr::PipelineInputs in;
  in.public_a = pub.target.embeddings;
  in.public_b = pub.source.embeddings;
  in.id_a = id.target.embeddings;
  in.id_b = id.source.embeddings;
  in.test_a = test.target.embeddings;
  in.test_b = test.source.embeddings;
  in.test_labels = RequireLabels(test.target);
  in.head = head;
  in.party_a = test.target.model_id;
  in.party_b = test.source.model_id;
  in.dataset = l.dataset;
  pr::PipelineOptions opts;
  opts.transport = pr::ParseTransport(a.proto.transport);
  opts.seed = seed;
  opts.few_shot = a.few_shot;
  opts.lambda = a.lambda;
  opts.variant = pr::ParseVariant(a.variant);
  opts.max_test = a.max_test;
  const auto backend = GetBackend(a.proto.backend);
  return pr::RunCrossSiloPipeline(*backend, in, opts).ToJson();
}

struct MiaArgs {
  DataArgs data;
  int dim = 64, latent = 32;
  std::int64_t n_public = 2000, n_id = 400;
  double noise = 0.1;
  int shadows_in = 100, shadows_out = 100, subset = 128, folds = 5;
  std::int64_t target = 0;
  double lambda = al::kDefaultLambda;
  double attack_l2 = 1e-2;
  bool null_experiment = false;
  std::string features_out;
  bool influence = false;
  std::vector<std::int64_t> influence_sizes = {1000, 4000, 16000};
  int removals = 50;
};

json RunMia(const MiaArgs& a, std::uint64_t seed) {
  namespace pe = held::privacy_eval;
  pe::PairedPool pub, id;
  if (!a.data.manifest.empty()) {
    const auto l = Open(a.data);
    const auto p = Pair(l, Split::kPublic);
    const auto t = Pair(l, Split::kTrain);
    pub = {p.target.embeddings, p.source.embeddings};
    id = {t.target.embeddings, t.source.embeddings};
  } else {
    ts::SyntheticSpec spec;
    spec.d_a = a.dim;
    spec.d_b = a.dim;
    spec.latent_dim = a.latent;
    spec.noise_std = a.noise;
    spec.seed = seed;
    spec.Validate();
    const ts::SyntheticWorld world(spec);
    const auto p = world.Sample(a.n_public, seed * 16 + 3);
    const auto t = world.Sample(a.n_id, seed * 16 + 1);
    pub = {p.z_a, p.z_b};
    id = {t.z_a, t.z_b};
  }
  pe::MiaConfig cfg;
  cfg.n_shadow_in = a.shadows_in;
  cfg.n_shadow_out = a.shadows_out;
  cfg.id_subset_size = a.subset;
  cfg.target_index = a.target;
  cfg.lambda = a.lambda;
  cfg.folds = a.folds;
  cfg.seed = seed;
  cfg.null_experiment = a.null_experiment;
  cfg.attack_l2 = a.attack_l2;
  const auto shadows = pe::BuildShadowSet(cfg, pub, id);
  if (!a.features_out.empty()) pe::SaveShadowFeatures(a.features_out, shadows);
  json out = pe::CrossValidateAttack(shadows, cfg.folds, seed + 1, cfg.attack_l2).ToJson();
  out["null_experiment"] = a.null_experiment;
  if (a.influence) {
    pe::InfluenceConfig ic;
    ic.sizes = a.influence_sizes;
    ic.removals = a.removals;
    ic.lambda = a.lambda;
    ic.seed = seed;
    out["influence"] = pe::InfluenceScaling(ic).ToJson();
  }
  return out;
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Common common;
  if (const char* env = std::getenv("HELD_SEED"); env != nullptr && *env != '\0') {
    try {
      common.seed = ParseSeed(env);
    } catch (const InvalidArgument& e) {
      err << "error: " << e.what() << "\n";
      return kExitValidation;
    }
  }

  CLI::App app{"Cross-silo embedding alignment toolkit", "held"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  // A repeated flag overrides the earlier one.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::vector<Command> commands;
  auto add = [&](const std::string& name, const std::string& desc) {
    CLI::App* sub = app.add_subcommand(name, desc);
    AddCommon(sub, common);
    commands.push_back({sub, nullptr, false});
    return sub;
  };

  SynthArgs synth;
  {
    auto* s = add("synth", "Write a synthetic paired dataset and manifest");
    s->add_option("--out-dir", synth.out_dir, "Output directory")->required();
    s->add_option("--dataset", synth.dataset, "Dataset id");
    s->add_option("--model-a", synth.model_a, "Target model id");
    s->add_option("--model-b", synth.model_b, "Source model id");
    s->add_option("--n", synth.n, "Train rows");
    s->add_option("--n-test", synth.n_test, "Test rows");
    s->add_option("--n-public", synth.n_public, "Public rows (0 to skip)");
    s->add_option("--n-ood", synth.n_ood, "OOD rows (0 to skip)");
    s->add_option("--latent", synth.latent, "Latent dimension");
    s->add_option("--d-a", synth.d_a, "Target dimension");
    s->add_option("--d-b", synth.d_b, "Source dimension");
    s->add_option("--classes", synth.classes, "Number of classes");
    s->add_option("--noise", synth.noise, "Observation noise std");
    s->add_option("--public-rotation", synth.public_rotation, "Latent rotation of the public split (degrees)");
    s->add_option("--public-minor-scale", synth.public_minor_scale, "Minor-axis scale of the public split");
    s->add_option("--ood-radial", synth.ood_radial, "Radial scale of the OOD split");
    commands.back().run = [&] { return RunSynth(synth, common.seed); };
  }

  AlignArgs align;
  {
    auto* s = add("align", "Fit the ridge map from source to target embeddings");
    AddData(s, align.data);
    s->add_option("--split", align.split, "Split to fit on (default public, else train)");
    s->add_option("--lambda", align.lambda, "Ridge penalty")->check(CLI::NonNegativeNumber);
    s->add_flag("--no-bias", align.no_bias, "Fit without an intercept");
    s->add_option("--out", align.out, "Map sidecar path");
    commands.back().run = [&] { return RunAlign(align); };
  }

  SweepArgs sweep;
  {
    auto* s = add("sweep", "Holdout error against training size");
    AddData(s, sweep.data);
    s->add_option("--split", sweep.split, "Split to sweep (default train)");
    s->add_option("--sizes", sweep.sizes, "Training sizes")->required();
    s->add_option("--holdout", sweep.holdout, "Holdout fraction");
    s->add_option("--lambda", sweep.lambda, "Ridge penalty")->check(CLI::NonNegativeNumber);
    s->add_flag("--no-bias", sweep.no_bias, "Fit without an intercept");
    commands.back().run = [&] { return RunSweep(sweep); };
  }

  ClassifyArgs classify;
  {
    auto* s = add("classify", "Baseline and mapped accuracy of the target head on the test split");
    AddData(s, classify.data);
    AddHead(s, classify.head);
    s->add_option("--map", classify.map, "Map sidecar for the source side");
    commands.back().run = [&] { return RunClassify(classify); };
  }

  OodArgs ood;
  {
    auto* s = add("ood", "Energy-score OOD detection (test vs ood split)");
    AddData(s, ood.data);
    AddHead(s, ood.head);
    s->add_option("--map", ood.map, "Map sidecar for the source side");
    commands.back().run = [&] { return RunOod(ood); };
  }

  SimilarityArgs cka;
  {
    auto* s = add("cka", "Linear CKA between target and source embeddings");
    AddData(s, cka.data);
    s->add_option("--split", cka.split, "Split (default train)");
    commands.back().run = [&] { return RunCka(cka); };
  }

  SimilarityArgs svcca;
  {
    auto* s = add("svcca", "SVCCA between target and source embeddings");
    AddData(s, svcca.data);
    s->add_option("--split", svcca.split, "Split (default train)");
    s->add_option("--components", svcca.components, "PCA components")->check(CLI::PositiveNumber);
    s->add_option("--repeats", svcca.repeats, "Random splits")->check(CLI::PositiveNumber);
    s->add_flag("--no-baseline", svcca.no_baseline, "Skip the shuffled baseline");
    commands.back().run = [&] { return RunSvcca(svcca, common.seed); };
  }

  TokArgs tok;
  {
    auto* s = add("tokcompat", "Tokenizer exact-match rate and vocabulary Jaccard");
    s->add_option("--records-a", tok.records_a, "Token records of model A (JSONL)")->required();
    s->add_option("--records-b", tok.records_b, "Token records of model B (JSONL)")->required();
    s->add_option("--vocab-a", tok.vocab_a, "Vocabulary file of model A");
    s->add_option("--vocab-b", tok.vocab_b, "Vocabulary file of model B");
    commands.back().run = [&] { return RunTokcompat(tok); };
  }

  TrainArgs ptrain;
  {
    auto* s = add("protocol-train", "Encrypted two-party map training");
    AddData(s, ptrain.data);
    AddProtocol(s, ptrain.proto);
    s->add_option("--split", ptrain.split, "Split to train on (default public, else train)");
    s->add_option("--lambda", ptrain.lambda, "Ridge penalty")->check(CLI::NonNegativeNumber);
    s->add_flag("--no-bias", ptrain.no_bias, "Fit without an intercept");
    s->add_option("--ack-every", ptrain.ack_every, "Rows per flow-control ack")->check(CLI::PositiveNumber);
    s->add_option("--out", ptrain.out, "Map sidecar path");
    commands.back().run = [&] { return RunProtocolTrain(ptrain, common.seed); };
  }

  InferArgs pinfer;
  {
    auto* s = add("protocol-infer", "Encrypted inference of source test queries against the target head");
    AddData(s, pinfer.data);
    AddHead(s, pinfer.head);
    AddProtocol(s, pinfer.proto);
    s->add_option("--map", pinfer.map, "Map sidecar")->required();
    s->add_option("--variant", pinfer.variant, "local or encrypted alignment")
        ->check(CLI::IsMember({"local", "encrypted"}));
    s->add_option("--max-queries", pinfer.max_queries, "Cap on test queries (0 = all)");
    commands.back().run = [&] { return RunProtocolInfer(pinfer, common.seed); };
  }

  BenchArgs bench;
  {
    auto* s = add("protocol-bench", "Latency and traffic of encrypted inference");
    AddProtocol(s, bench.proto);
    s->add_option("--dims", bench.dims, "Input dimensions");
    s->add_option("--classes", bench.classes, "Class counts");
    s->add_option("--queries", bench.queries, "Queries per shape")->check(CLI::PositiveNumber);
    commands.back().run = [&] { return RunProtocolBench(bench, common.seed); };
    commands.back().keep_timings = true;
  }

  PipelineArgs pipe;
  {
    auto* s = add("pipeline", "Encrypted training plus inference with few-shot augmentation");
    AddData(s, pipe.data);
    AddHead(s, pipe.head);
    AddProtocol(s, pipe.proto);
    s->add_option("--few-shot", pipe.few_shot, "In-distribution rows added to the public split");
    s->add_option("--lambda", pipe.lambda, "Ridge penalty")->check(CLI::NonNegativeNumber);
    s->add_option("--variant", pipe.variant, "local or encrypted alignment")
        ->check(CLI::IsMember({"local", "encrypted"}));
    s->add_option("--max-test", pipe.max_test, "Cap on encrypted test queries (0 = all)");
    commands.back().run = [&] { return RunPipeline(pipe, common.seed); };
  }

  MiaArgs mia;
  {
    auto* s = add("mia", "Shadow-map membership inference against the ridge map");
    AddData(s, mia.data, false);
    s->add_option("--dim", mia.dim, "Synthetic dimension when no manifest is given");
    s->add_option("--latent", mia.latent, "Synthetic latent dimension");
    s->add_option("--n-public", mia.n_public, "Synthetic public rows");
    s->add_option("--n-id", mia.n_id, "Synthetic in-distribution rows");
    s->add_option("--noise", mia.noise, "Synthetic noise std");
    s->add_option("--shadows-in", mia.shadows_in, "IN shadow maps");
    s->add_option("--shadows-out", mia.shadows_out, "OUT shadow maps");
    s->add_option("--subset", mia.subset, "In-distribution rows per shadow");
    s->add_option("--target", mia.target, "Target row of the in-distribution pool");
    s->add_option("--folds", mia.folds, "Cross-validation folds");
    s->add_option("--lambda", mia.lambda, "Ridge penalty")->check(CLI::NonNegativeNumber);
    s->add_option("--attack-l2", mia.attack_l2, "Attack classifier L2")->check(CLI::NonNegativeNumber);
    s->add_flag("--null", mia.null_experiment, "Leave the target out of IN shadows too");
    s->add_option("--features-out", mia.features_out, "Save shadow features");
    s->add_flag("--influence", mia.influence, "Also measure leave-one-out influence scaling");
    s->add_option("--influence-sizes", mia.influence_sizes, "Sample sizes for influence scaling");
    s->add_option("--removals", mia.removals, "Removals per size");
    commands.back().run = [&] { return RunMia(mia, common.seed); };
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const auto it = std::find_if(commands.begin(), commands.end(),
                               [](const Command& c) { return c.app->parsed(); });
  try {
    if (!common.config.empty()) ApplyConfig(*it->app, common.config);
    const ReportFormat format = ParseFormat(common.format);
    json report = it->run();
    if (!it->keep_timings && !common.timings) report = StripTimings(std::move(report));
    const std::string text = Render(report, format);
    if (common.report.empty()) {
      out << text;
    } else {
      std::ofstream file(common.report, std::ios::binary);
      if (!(file << text)) throw IoError("cannot write report " + common.report);
    }
    return kExitOk;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace held::cli
