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

#include "held/privacy_eval/privacy_eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "held/classifier_ood/classifier.hpp"
#include "held/common/error.hpp"
#include "held/tensor_store/dataset.hpp"
#include "held/tensor_store/synthetic.hpp"
#include "held/tensor_store/tensor.hpp"

namespace held::privacy_eval {

namespace {

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Population mean and std of a vector of values.
std::pair<double, double> MeanStd(const Vector& v) {
  if (v.size() == 0) return {0.0, 0.0};
  const double mean = v.mean();
  const double var = (v.array() - mean).square().mean();
  return {mean, std::sqrt(std::max(0.0, var))};
}

// Per-row mean and std of `m`, then summarized by their own mean and std.
void LineStats(const Matrix& m, double* out) {
  Vector means(m.rows()), stds(m.rows());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto [mu, sd] = MeanStd(m.row(i).transpose());
    means(i) = mu;
    stds(i) = sd;
  }
  std::tie(out[0], out[1]) = MeanStd(means);
  std::tie(out[2], out[3]) = MeanStd(stds);
}

// k distinct draws from `pool` by partial Fisher-Yates.
std::vector<std::int64_t> Draw(std::vector<std::int64_t> pool, std::size_t k,
                               std::mt19937_64& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace

std::vector<std::string> FeatureNames() {
  std::vector<std::string> names = {"frobenius", "spectral",
                                    "row_mean_mean", "row_mean_std", "row_std_mean", "row_std_std",
                                    "col_mean_mean", "col_mean_std", "col_std_mean", "col_std_std"};
  for (int i = 0; i < kTopSingularValues; ++i) names.push_back("sv_" + std::to_string(i));
  names.push_back("effective_rank");
  names.push_back("bias_norm");
  return names;
}

double SpectralNorm(const Matrix& w, int max_iter, double tol) {
  Require(max_iter >= 1 && tol > 0.0, "power iteration needs max_iter >= 1 and tol > 0");
  if (w.size() == 0 || w.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const Matrix g = w.transpose() * w;
  // Start from the column of largest norm so the start is never orthogonal
  // to every dominant direction by construction.
  Eigen::Index best = 0;
  g.diagonal().maxCoeff(&best);
  Vector v = g.col(best).normalized();
  double estimate = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    Vector next = g * v;
    const double norm = next.norm();
    if (norm == 0.0) break;
    next /= norm;
    const double rayleigh = next.dot(g * next);
    const bool done = std::abs(rayleigh - estimate) <= tol * std::max(1.0, rayleigh);
    v = std::move(next);
    estimate = rayleigh;
    if (done) break;
  }
  return std::sqrt(std::max(0.0, estimate));
}

double EffectiveRank(const Vector& singular_values) {
  Require((singular_values.array() >= 0.0).all(), "singular values must be non-negative");
  const double total = singular_values.sum();
  if (total <= 0.0) return 0.0;
  double entropy = 0.0;
  for (Eigen::Index i = 0; i < singular_values.size(); ++i) {
    const double p = singular_values(i) / total;
    if (p > 0.0) entropy -= p * std::log(p);
  }
  return std::exp(entropy);
}

Vector WStarFeatures(const alignment::AffineMap& map) {
  map.Validate();
  const Matrix& w = map.weight;
  Vector f = Vector::Zero(kFeatureCount);
  f(0) = w.norm();
  f(1) = SpectralNorm(w);
  LineStats(w, f.data() + 2);
  LineStats(w.transpose(), f.data() + 6);
  const Vector sv = Eigen::BDCSVD<Matrix>(w).singularValues();
  const Eigen::Index top = std::min<Eigen::Index>(kTopSingularValues, sv.size());
  f.segment(10, top) = sv.head(top);
  f(74) = EffectiveRank(sv);
  f(75) = map.bias.norm();
  return f;
}

double TheoreticalAdvantage(std::int64_t d_a, std::int64_t d_b, std::int64_t n) {
  Require(d_a >= 1 && d_b >= 1 && n >= 1, "dimensions and N must be positive");
  return std::sqrt(static_cast<double>(d_a) * static_cast<double>(d_b)) / static_cast<double>(n);
}

double TheoreticalAccuracyBound(std::int64_t d_a, std::int64_t d_b, std::int64_t n) {
  return std::min(1.0, 0.5 + TheoreticalAdvantage(d_a, d_b, n));
}

double BinomialTwoSidedP(std::int64_t k, std::int64_t n, double p) {
  Require(n >= 0 && k >= 0 && k <= n, "binomial test needs 0 <= k <= n");
  Require(p > 0.0 && p < 1.0, "binomial test needs 0 < p < 1");
  auto log_pmf = [&](std::int64_t i) {
    return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(i) + 1) -
           std::lgamma(static_cast<double>(n - i) + 1) + static_cast<double>(i) * std::log(p) +
           static_cast<double>(n - i) * std::log1p(-p);
  };
  const double observed = log_pmf(k);
  double total = 0.0;
  for (std::int64_t i = 0; i <= n; ++i) {
    const double lp = log_pmf(i);
    if (lp <= observed + 1e-7) total += std::exp(lp);
  }
  return std::min(1.0, total);
}

void MiaConfig::Validate() const {
  Require(n_shadow_in >= 1 && n_shadow_out >= 1, "need at least one IN and one OUT shadow");
  Require(id_subset_size >= 1, "id_subset_size must be positive");
  Require(folds >= 2, "folds must be at least 2");
  Require(n_shadow_in >= folds && n_shadow_out >= folds,
          "each class needs at least one shadow per fold");
  Require(lambda >= 0.0, "lambda must be non-negative");
}

ShadowSet BuildShadowSet(const MiaConfig& config, const PairedPool& pub,
                         const PairedPool& id) {
  config.Validate();
  RequireDims(pub.a.rows() == pub.b.rows() && id.a.rows() == id.b.rows(),
              "pools must be row-paired");
  RequireDims(pub.a.cols() == id.a.cols() && pub.b.cols() == id.b.cols(),
              "public and in-distribution pools differ in width");
  Require(config.target_index >= 0 && config.target_index < id.rows(),
          "target index outside the in-distribution pool");
  Require(id.rows() - 1 >= config.id_subset_size,
          "in-distribution pool too small for disjoint subset draws");

  alignment::SufficientStats base(pub.b.cols(), pub.a.cols());
  if (pub.rows() > 0) base.Accumulate(pub.b, pub.a);

  std::vector<std::int64_t> others;
  for (std::int64_t i = 0; i < id.rows(); ++i) {
    if (i != config.target_index) others.push_back(i);
  }

  const int total = config.n_shadow_in + config.n_shadow_out;
  ShadowSet out;
  out.features.resize(total, kFeatureCount);
  out.membership.resize(static_cast<std::size_t>(total));
  out.n_train = pub.rows() + config.id_subset_size;
  out.d_a = pub.a.cols();
  out.d_b = pub.b.cols();
  const auto k = static_cast<std::size_t>(config.id_subset_size);
  for (int s = 0; s < total; ++s) {
    const bool in = s < config.n_shadow_in;
    std::mt19937_64 rng(SplitMix(config.seed ^ SplitMix(static_cast<std::uint64_t>(s))));
    std::vector<std::int64_t> rows;
    if (in && !config.null_experiment) {
      rows = Draw(others, k - 1, rng);
      rows.push_back(config.target_index);
    } else {
      rows = Draw(others, k, rng);
    }
    alignment::SufficientStats stats = base;
    alignment::SufficientStats extra(pub.b.cols(), pub.a.cols());
    extra.Accumulate(TakeRows(id.b, rows), TakeRows(id.a, rows));
    stats.Merge(extra);
    out.features.row(s) = WStarFeatures(alignment::Solve(stats, config.lambda)).transpose();
    out.membership[static_cast<std::size_t>(s)] = in ? 1 : 0;
  }
  return out;
}

MiaReport CrossValidateAttack(const ShadowSet& shadows, int folds, std::uint64_t seed, double l2) {
  Require(folds >= 2, "folds must be at least 2");
  RequireDims(static_cast<std::size_t>(shadows.features.rows()) == shadows.membership.size(),
              "one membership label per shadow");
  std::vector<std::int64_t> by_class[2];
  for (std::size_t i = 0; i < shadows.membership.size(); ++i) {
    const int y = shadows.membership[i];
    Require(y == 0 || y == 1, "membership labels must be 0 or 1");
    by_class[y].push_back(static_cast<std::int64_t>(i));
  }
  Require(static_cast<int>(by_class[0].size()) >= folds &&
              static_cast<int>(by_class[1].size()) >= folds,
          "each class needs at least one shadow per fold");

  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(shadows.membership.size());
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) {
      fold_of[static_cast<std::size_t>(members[j])] = static_cast<int>(j % static_cast<std::size_t>(folds));
    }
  }

  MiaReport report;
  report.feature_importances = Vector::Zero(shadows.features.cols());
  classifier_ood::HeadConfig config;
  config.l2 = l2;
  for (int f = 0; f < folds; ++f) {
    std::vector<std::int64_t> train, test;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
      (fold_of[i] == f ? test : train).push_back(static_cast<std::int64_t>(i));
    }
    Matrix x_train = TakeRows(shadows.features, train);
    Matrix x_test = TakeRows(shadows.features, test);
    const RowVector mean = x_train.colwise().mean();
    RowVector sd = ((x_train.rowwise() - mean).array().square().colwise().mean()).sqrt();
    for (Eigen::Index j = 0; j < sd.size(); ++j) {
      if (sd(j) < 1e-12) sd(j) = 1.0;
    }
    x_train = (x_train.rowwise() - mean).array().rowwise() / sd.array();
    x_test = (x_test.rowwise() - mean).array().rowwise() / sd.array();

    const auto head = classifier_ood::TrainHead(x_train, TakeLabels(shadows.membership, train), config, 2);
    const auto predicted = classifier_ood::Predict(head, x_test);
    const auto truth = TakeLabels(shadows.membership, test);
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) correct += predicted[i] == truth[i];
    report.correct += correct;
    report.total += static_cast<std::int64_t>(truth.size());
    report.fold_accuracies.push_back(static_cast<double>(correct) / static_cast<double>(truth.size()));
    report.feature_importances += (head.V.col(1) - head.V.col(0)).cwiseAbs() / folds;
  }
  const Vector acc = Eigen::Map<const Vector>(report.fold_accuracies.data(),
                                              static_cast<Eigen::Index>(report.fold_accuracies.size()));
  std::tie(report.accuracy_mean, report.accuracy_std) = MeanStd(acc);
  report.binomial_p = BinomialTwoSidedP(report.correct, report.total);
  report.n_train = shadows.n_train;
  if (shadows.n_train > 0 && shadows.d_a > 0 && shadows.d_b > 0) {
    report.theoretical_advantage = TheoreticalAdvantage(shadows.d_a, shadows.d_b, shadows.n_train);
    report.theoretical_bound = TheoreticalAccuracyBound(shadows.d_a, shadows.d_b, shadows.n_train);
  }
  return report;
}

MiaReport ShadowExperiment(const MiaConfig& config, const PairedPool& public_pool,
                           const PairedPool& id_pool) {
  const ShadowSet shadows = BuildShadowSet(config, public_pool, id_pool);
  return CrossValidateAttack(shadows, config.folds, SplitMix(config.seed + 1), config.attack_l2);
}

nlohmann::json MiaReport::ToJson() const {
  const auto names = FeatureNames();
  nlohmann::json importances = nlohmann::json::object();
  for (Eigen::Index i = 0; i < feature_importances.size(); ++i) {
    const std::string name = i < static_cast<Eigen::Index>(names.size())
                                 ? names[static_cast<std::size_t>(i)]
                                 : "f" + std::to_string(i);
    importances[name] = feature_importances(i);
  }
  return {{"accuracy_mean", accuracy_mean},
          {"accuracy_std", accuracy_std},
          {"fold_accuracies", fold_accuracies},
          {"correct", correct},
          {"total", total},
          {"binomial_p", binomial_p},
          {"theoretical_advantage", theoretical_advantage},
          {"theoretical_bound", theoretical_bound},
          {"n_train", n_train},
          {"feature_importances", importances}};
}

void SaveShadowFeatures(const std::filesystem::path& path, const ShadowSet& shadows) {
  RequireDims(static_cast<std::size_t>(shadows.features.rows()) == shadows.membership.size(),
              "one membership label per shadow");
  tensor_store::TensorBundle bundle;
  bundle.kind = "mia_features";
  bundle.tensors["features"] = tensor_store::MatrixToTensor(shadows.features);
  Vector y(static_cast<Eigen::Index>(shadows.membership.size()));
  for (std::size_t i = 0; i < shadows.membership.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = shadows.membership[i];
  }
  bundle.tensors["membership"] = tensor_store::VectorToTensor(y);
  bundle.metadata = {{"feature_names", FeatureNames()},
                     {"n_train", shadows.n_train},
                     {"d_a", shadows.d_a},
                     {"d_b", shadows.d_b}};
  tensor_store::SaveBundle(path, bundle);
}

ShadowSet LoadShadowFeatures(const std::filesystem::path& path) {
  const auto bundle = tensor_store::LoadBundle(path, "mia_features");
  ShadowSet out;
  try {
    out.features = tensor_store::TensorToMatrix(bundle.tensors.at("features"));
    const Vector y = tensor_store::TensorToVector(bundle.tensors.at("membership"));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y(i) != 0.0 && y(i) != 1.0) throw FormatError("membership labels must be 0 or 1");
      out.membership.push_back(static_cast<int>(y(i)));
    }
    out.n_train = bundle.metadata.at("n_train").get<std::int64_t>();
    out.d_a = bundle.metadata.at("d_a").get<Eigen::Index>();
    out.d_b = bundle.metadata.at("d_b").get<Eigen::Index>();
  } catch (const std::out_of_range&) {
    throw FormatError("mia_features bundle is missing a tensor");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("mia_features metadata: ") + e.what());
  }
  RequireDims(static_cast<std::size_t>(out.features.rows()) == out.membership.size(),
              "one membership label per shadow");
  return out;
}

nlohmann::json InfluenceReport::ToJson() const {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : points) {
    pts.push_back({{"n", p.n},
                   {"mean_influence", p.mean_influence},
                   {"c_sqrt", p.c_sqrt},
                   {"c_linear", p.c_linear}});
  }
  return {{"points", pts},
          {"loglog_slope", loglog_slope},
          {"stable_sqrt", stable_sqrt},
          {"stable_linear", stable_linear}};
}

InfluenceReport InfluenceScaling(const InfluenceConfig& config) {
  Require(config.sizes.size() >= 2, "need at least two sample sizes");
  Require(config.removals >= 1, "need at least one removal");
  tensor_store::SyntheticSpec spec;
  spec.d_a = config.d_a;
  spec.d_b = config.d_b;
  spec.latent_dim = config.latent_dim;
  spec.noise_std = config.noise_std;
  spec.seed = config.seed;
  const tensor_store::SyntheticWorld world(spec);

  InfluenceReport report;
  for (const std::int64_t n : config.sizes) {
    Require(n > config.removals, "sample size must exceed the number of removals");
    const auto data = world.Sample(n, SplitMix(config.seed ^ static_cast<std::uint64_t>(n)));
    alignment::SufficientStats full(config.d_b, config.d_a);
    full.Accumulate(data.z_b, data.z_a);
    const Matrix w_full = alignment::Solve(full, config.lambda).weight;

    std::vector<std::int64_t> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), 0);
    std::mt19937_64 rng(SplitMix(config.seed + static_cast<std::uint64_t>(n)));
    const auto removed = Draw(all, static_cast<std::size_t>(config.removals), rng);
    double sum = 0.0;
    for (const auto i : removed) {
      const Vector x = data.z_b.row(i).transpose();
      const Vector y = data.z_a.row(i).transpose();
      const auto minus = alignment::SufficientStats::FromParts(
          full.gram() - x * x.transpose(), full.cross() - x * y.transpose(),
          full.sum_source() - x, full.sum_target() - y, n - 1);
      sum += (w_full - alignment::Solve(minus, config.lambda).weight).norm();
    }
    InfluencePoint p;
    p.n = n;
    p.mean_influence = sum / config.removals;
    p.c_sqrt = p.mean_influence * std::sqrt(static_cast<double>(n));
    p.c_linear = p.mean_influence * static_cast<double>(n);
    report.points.push_back(p);
  }

  auto stable = [&](auto get) {
    double mean = 0.0;
    for (const auto& p : report.points) mean += get(p) / static_cast<double>(report.points.size());
    return std::all_of(report.points.begin(), report.points.end(), [&](const InfluencePoint& p) {
      return std::abs(get(p) - mean) <= config.tolerance * mean;
    });
  };
  report.stable_sqrt = stable([](const InfluencePoint& p) { return p.c_sqrt; });
  report.stable_linear = stable([](const InfluencePoint& p) { return p.c_linear; });

  double mx = 0, my = 0;
  for (const auto& p : report.points) {
    mx += std::log(static_cast<double>(p.n));
    my += std::log(p.mean_influence);
  }
  mx /= static_cast<double>(report.points.size());
  my /= static_cast<double>(report.points.size());
  double sxy = 0, sxx = 0;
  for (const auto& p : report.points) {
    const double dx = std::log(static_cast<double>(p.n)) - mx;
    sxy += dx * (std::log(p.mean_influence) - my);
    sxx += dx * dx;
  }
  report.loglog_slope = sxy / sxx;
  return report;
}

}  // namespace held::privacy_eval
