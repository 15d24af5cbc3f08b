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
#include <sstream>

#include "doctest.h"
#include "held/alignment/alignment.hpp"
#include "held/classifier_ood/classifier.hpp"
#include "held/cli/cli.hpp"
#include "held/privacy_eval/privacy_eval.hpp"
#include "held/tensor_store/dataset.hpp"
#include "held/tensor_store/synthetic.hpp"
#include "test_util.hpp"

namespace cli = held::cli;
namespace ts = held::tensor_store;
using nlohmann::json;

namespace {

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
  json Json() const { return json::parse(out); }
};

Outcome Held(std::vector<std::string> args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::Run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

std::string Slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void WriteText(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

// Synthetic dataset written through the CLI; returns the manifest path.
std::string Synth(const held::testing::ScratchDir& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> args = {"synth", "--out-dir", (dir / "data").string(), "--seed", "3",
                                   "--n", "400", "--n-test", "200", "--n-public", "400",
                                   "--n-ood", "200"};
  args.insert(args.end(), extra.begin(), extra.end());
  const auto o = Held(args);
  REQUIRE(o.code == 0);
  return (dir / "data" / "manifest.json").string();
}

}  // namespace

TEST_CASE("cka on self-paired data") {
  held::testing::ScratchDir dir("cli_cka");
  std::mt19937_64 rng(1);
  ts::EmbeddingDataset d;
  d.embeddings = held::testing::UniformMatrix(300, 12, rng);
  d.dataset_id = "self";
  d.model_id = "m";
  ts::DatasetManifest m;
  m.entries.push_back(ts::WriteDataset(dir.path(), ts::Role::kTarget, d));
  m.entries.push_back(ts::WriteDataset(dir.path(), ts::Role::kSource, d));
  ts::SaveManifest(dir / "m.json", m);
  const auto o = Held({"cka", "--manifest", (dir / "m.json").string()});
  REQUIRE(o.code == 0);
  const json j = o.Json();
  CHECK(j.size() == 1);
  CHECK(std::abs(j.at("cka").get<double>() - 1.0) <= 1e-9);
}

TEST_CASE("align then classify matches the library composition") {
  held::testing::ScratchDir dir("cli_align");
  const auto manifest = Synth(dir, {"--noise", "0.05"});
  const auto map_path = (dir / "out.map").string();
  const auto a = Held({"align", "--manifest", manifest, "--lambda", "1e-4", "--out", map_path});
  REQUIRE(a.code == 0);
  CHECK(a.Json().at("split") == "public");
  const auto c = Held({"classify", "--manifest", manifest, "--map", map_path});
  REQUIRE(c.code == 0);
  const json report = c.Json();

  const auto m = ts::LoadManifest(manifest);
  const auto pub = ts::LoadPair(m, "synthetic", ts::Split::kPublic);
  const auto train = ts::LoadPair(m, "synthetic", ts::Split::kTrain);
  const auto test = ts::LoadPair(m, "synthetic", ts::Split::kTest);
  const auto fit = held::alignment::Fit(pub.source.embeddings, pub.target.embeddings, 1e-4);
  const auto head = held::classifier_ood::TrainHead(train.target.embeddings, *train.target.labels);
  const double oracle = held::classifier_ood::Accuracy(
      held::classifier_ood::Predict(head, held::alignment::Apply(fit.map, test.source.embeddings)),
      *test.source.labels);
  CHECK(report.at("mapped_acc").get<double>() == oracle);
  CHECK(report.at("baseline_acc").get<double>() > 0.8);
  CHECK(report.contains("auroc_mapped"));
}

TEST_CASE("exit codes and usage") {
  auto o = Held({"align", "--manifest", "m.json", "--bogus"});
  CHECK(o.code == cli::kExitValidation);
  CHECK(o.err.find("Usage:") != std::string::npos);
  CHECK(Held({}).code == cli::kExitValidation);
  CHECK(Held({"nosuch"}).code == cli::kExitValidation);
  CHECK(Held({"--help"}).code == cli::kExitOk);
  CHECK(Held({"align", "--manifest", "m.json", "--lambda", "-1"}).code == cli::kExitValidation);
  CHECK(Held({"protocol-infer", "--manifest", "m.json", "--map", "x", "--variant", "weird"}).code ==
        cli::kExitValidation);
  // A missing input file is a runtime failure.
  o = Held({"cka", "--manifest", "/nonexistent/manifest.json"});
  CHECK(o.code == cli::kExitRuntime);
  CHECK(o.err.find("error:") != std::string::npos);
}

TEST_CASE("validation errors inside a run") {
  held::testing::ScratchDir dir("cli_val");
  const auto manifest = Synth(dir, {"--n-public", "0"});
  // No public split for the pipeline.
  CHECK(Held({"pipeline", "--manifest", manifest, "--backend", "mock"}).code == cli::kExitValidation);
  CHECK(Held({"cka", "--manifest", manifest, "--split", "sideways"}).code == cli::kExitValidation);
  CHECK(Held({"protocol-bench", "--backend", "nosuch"}).code == cli::kExitValidation);
}

TEST_CASE("seed from the environment") {
  held::testing::ScratchDir dir("cli_seed");
  const std::vector<std::string> small = {"--n", "30", "--n-test", "10", "--n-public", "0", "--n-ood", "0"};
  auto args = std::vector<std::string>{"synth", "--out-dir", (dir / "e").string()};
  args.insert(args.end(), small.begin(), small.end());
  ::setenv("HELD_SEED", "7", 1);
  CHECK(Held(args).code == 0);
  ::setenv("HELD_SEED", "seven", 1);
  CHECK(Held(args).code == cli::kExitValidation);
  ::unsetenv("HELD_SEED");
  args = {"synth", "--out-dir", (dir / "f").string(), "--seed", "7"};
  args.insert(args.end(), small.begin(), small.end());
  CHECK(Held(args).code == 0);
  args = {"synth", "--out-dir", (dir / "g").string(), "--seed", "8"};
  args.insert(args.end(), small.begin(), small.end());
  CHECK(Held(args).code == 0);
  const auto e = Slurp(dir / "e" / "synthetic.train.target.tns");
  CHECK(e == Slurp(dir / "f" / "synthetic.train.target.tns"));
  CHECK(e != Slurp(dir / "g" / "synthetic.train.target.tns"));
}

TEST_CASE("config overrides flags and rejects unknown keys") {
  held::testing::ScratchDir dir("cli_cfg");
  const auto manifest = Synth(dir);
  WriteText(dir / "c.json", R"({"lambda": 0.5, "no_bias": true, "out": ")" +
                                (dir / "cfg.map").string() + R"("})");
  const auto o = Held({"align", "--manifest", manifest, "--lambda", "1e-4", "--config",
                       (dir / "c.json").string()});
  REQUIRE(o.code == 0);
  CHECK(o.Json().at("lambda").get<double>() == 0.5);
  const auto map = held::alignment::LoadAffineMap(dir / "cfg.map");
  CHECK(!map.fit_bias);

  WriteText(dir / "bad.json", R"({"lambda": 0.5, "lamda": 1})");
  CHECK(Held({"align", "--manifest", manifest, "--config", (dir / "bad.json").string()}).code ==
        cli::kExitValidation);
  WriteText(dir / "nested.json", R"({"lambda": {"x": 1}})");
  CHECK(Held({"align", "--manifest", manifest, "--config", (dir / "nested.json").string()}).code ==
        cli::kExitValidation);
  WriteText(dir / "list.json", R"({"sizes": [20, 100]})");
  const auto s = Held({"sweep", "--manifest", manifest, "--sizes", "50", "--config",
                       (dir / "list.json").string()});
  REQUIRE(s.code == 0);
  CHECK(s.Json().size() == 2);
}

TEST_CASE("csv reports and report files") {
  held::testing::ScratchDir dir("cli_csv");
  const auto manifest = Synth(dir);
  const auto o = Held({"sweep", "--manifest", manifest, "--sizes", "20", "100", "--format", "csv"});
  REQUIRE(o.code == 0);
  CHECK(o.out.rfind("holdout_mse,n_train,train_mse\n", 0) == 0);
  CHECK(std::count(o.out.begin(), o.out.end(), '\n') == 3);

  const auto path = (dir / "ood.csv").string();
  REQUIRE(Held({"ood", "--manifest", manifest, "--format", "csv", "--report", path}).code == 0);
  const auto text = Slurp(path);
  CHECK(text.rfind("baseline.auroc,baseline.fpr_at_95_tpr", 0) == 0);

  CHECK(cli::ToCsv(json::array({{{"a", 1}, {"b", "x,y"}}, {{"a", 2}}})) == "a,b\n1,\"x,y\"\n2,\n");
  CHECK(cli::StripTimings(json{{"seconds", 1}, {"x", {{"median_s", 2}, {"n", 3}}}}) ==
        json{{"x", {{"n", 3}}}});
}

TEST_CASE("tokenizer compatibility") {
  held::testing::ScratchDir dir("cli_tok");
  WriteText(dir / "a.jsonl",
            R"({"text_id":"t","tokens":[["Hello",0,5],[" w",5,7],["orld",7,11]]})" "\n");
  WriteText(dir / "b.jsonl", R"({"text_id":"t","tokens":[["Hello",0,5],[" world",5,11]]})" "\n");
  WriteText(dir / "va.txt", "a\nb\nc\n");
  WriteText(dir / "vb.txt", "b\nc\nd\n");
  const auto o = Held({"tokcompat", "--records-a", (dir / "a.jsonl").string(), "--records-b",
                       (dir / "b.jsonl").string(), "--vocab-a", (dir / "va.txt").string(),
                       "--vocab-b", (dir / "vb.txt").string()});
  REQUIRE(o.code == 0);
  const json j = o.Json();
  CHECK(j.at("vocab_jaccard").get<double>() == doctest::Approx(0.5));
  CHECK(j.at("records") == 1);
  CHECK(j.at("exact_match_rate").get<double>() == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("protocol subcommands on the mock backend") {
  held::testing::ScratchDir dir("cli_proto");
  const auto manifest = Synth(dir, {"--noise", "0.05", "--n-public", "200"});
  const auto map_path = (dir / "p.map").string();
  const auto t = Held({"protocol-train", "--manifest", manifest, "--backend", "mock", "--out", map_path});
  REQUIRE(t.code == 0);
  const json tj = t.Json();
  CHECK(tj.at("audit").at("clean") == true);
  CHECK(tj.at("a_side_decrypts") == 0);
  CHECK(!tj.contains("seconds"));

  const auto m = ts::LoadManifest(manifest);
  const auto pub = ts::LoadPair(m, "synthetic", ts::Split::kPublic);
  const auto plain = held::alignment::Fit(pub.source.embeddings, pub.target.embeddings);
  const auto enc = held::alignment::LoadAffineMap(map_path);
  CHECK(held::testing::RelFrobenius(enc.weight, plain.map.weight) <= 1e-9);

  const std::vector<std::string> infer = {"protocol-infer", "--manifest", manifest, "--backend", "mock",
                                          "--map", map_path, "--max-queries", "40", "--seed", "5"};
  const auto i1 = Held(infer);
  const auto i2 = Held(infer);
  REQUIRE(i1.code == 0);
  CHECK(i1.out == i2.out);
  CHECK(i1.Json().at("plaintext_agreement").get<double>() == 1.0);
  CHECK(i1.Json().at("queries") == 40);

  const auto b = Held({"protocol-bench", "--backend", "mock", "--dims", "32", "--classes", "4",
                       "--queries", "3", "--format", "csv"});
  REQUIRE(b.code == 0);
  CHECK(b.out.find("phases.end_to_end.median_s") != std::string::npos);

  const std::vector<std::string> pipe = {"pipeline", "--manifest", manifest, "--backend", "mock",
                                         "--few-shot", "0", "32", "--max-test", "30", "--transport", "socket"};
  const auto p1 = Held(pipe);
  REQUIRE(p1.code == 0);
  CHECK(p1.out == Held(pipe).out);
  const json pj = p1.Json();
  REQUIRE(pj.size() == 2);
  CHECK(pj[1].at("n_train") == 232);
  CHECK(pj[0].at("prediction_agreement").get<double>() == 1.0);
}

TEST_CASE("membership inference subcommand") {
  held::testing::ScratchDir dir("cli_mia");
  const auto features = (dir / "f.bin").string();
  const std::vector<std::string> args = {"mia", "--dim", "8", "--latent", "4", "--n-public", "200",
                                         "--n-id", "60", "--subset", "16", "--shadows-in", "10",
                                         "--shadows-out", "10", "--null", "--features-out", features,
                                         "--influence", "--influence-sizes", "200", "800",
                                         "--removals", "5"};
  const auto o = Held(args);
  REQUIRE(o.code == 0);
  CHECK(o.out == Held(args).out);
  const json j = o.Json();
  CHECK(j.at("total") == 20);
  CHECK(j.at("null_experiment") == true);
  CHECK(j.at("influence").at("points").size() == 2);
  const auto shadows = held::privacy_eval::LoadShadowFeatures(features);
  CHECK(shadows.features.rows() == 20);
  CHECK(shadows.n_train == 216);
}
