#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>

#include <Eigen/QR>

#include "semantify/error.hpp"
#include "semantify/mapper.hpp"
#include "semantify/mlp.hpp"
#include "semantify/procedural.hpp"
#include "semantify/rng.hpp"
#include "support/support.hpp"

using namespace semantify;

namespace {

struct Pair {
  ScoreTable scores;
  CoefficientTable coeffs;
};

// Rows xi uniform in [-2, 2]^10 and omega = f(xi).
template <typename F>
Pair make_pair(std::size_t n, std::size_t d, std::uint64_t seed, F f) {
  Rng rng(seed);
  Pair p;
  p.scores.scores.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) p.scores.descriptors.push_back(Descriptor::from_text("w" + std::to_string(j)));
  for (std::size_t i = 0; i < n; ++i) {
    CoefficientVector xi;
    for (auto& v : xi) v = rng.uniform(-2.0, 2.0);
    const std::string id = "s" + std::to_string(i);
    p.scores.sample_ids.push_back(id);
    p.scores.scores.row(static_cast<Eigen::Index>(i)) = f(xi, rng).transpose();
    p.coeffs.sample_ids.push_back(id);
    p.coeffs.rows.push_back(xi);
  }
  p.scores.recompute_stats();
  return p;
}

MapperConfig small_config(int epochs = 20) {
  MapperConfig cfg;
  cfg.hidden = {32, 32};
  cfg.epochs = epochs;
  cfg.seed = 3;
  return cfg;
}

double numeric_loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& t) {
  return 0.5 * (net.forward(x) - t).squaredNorm();
}

}  // namespace

TEST_CASE("backprop matches finite differences") {
  Rng rng(1);
  Mlp net({3, 4, 5, 10}, rng);
  for (auto& l : net.layers()) l.bias.setConstant(0.05);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 3);
  Eigen::MatrixXd t = Eigen::MatrixXd::Random(6, 10);
  Mlp::Cache cache;
  const Eigen::MatrixXd y = net.forward(x, cache);
  const auto grads = net.backward(cache, y - t);
  const Eigen::MatrixXd gx = net.input_gradient(cache, y - t);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    for (Eigen::Index k = 0; k < net.layers()[l].weight.size(); ++k) {
      Mlp plus = net, minus = net;
      plus.layers()[l].weight(k) += h;
      minus.layers()[l].weight(k) -= h;
      const double fd = (numeric_loss(plus, x, t) - numeric_loss(minus, x, t)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grads[l].weight(k)) / std::max(1.0, std::abs(fd)));
    }
    for (Eigen::Index k = 0; k < net.layers()[l].bias.size(); ++k) {
      Mlp plus = net, minus = net;
      plus.layers()[l].bias(k) += h;
      minus.layers()[l].bias(k) -= h;
      const double fd = (numeric_loss(plus, x, t) - numeric_loss(minus, x, t)) / (2 * h);
      worst = std::max(worst, std::abs(fd - grads[l].bias(k)) / std::max(1.0, std::abs(fd)));
    }
  }
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    Eigen::MatrixXd xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    const double fd = (numeric_loss(net, xp, t) - numeric_loss(net, xm, t)) / (2 * h);
    worst = std::max(worst, std::abs(fd - gx(k)) / std::max(1.0, std::abs(fd)));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("network shape helpers") {
  Rng rng(2);
  const Mlp net({6, 500, 800, 10}, rng);
  CHECK(net.input_width() == 6);
  CHECK(net.output_width() == 10);
  CHECK(net.sizes() == std::vector<int>{6, 500, 800, 10});
  CHECK(net.parameter_count() == 6 * 500 + 500 + 500 * 800 + 800 + 800 * 10 + 10);
}

TEST_CASE("config validation") {
  MapperConfig cfg;
  CHECK(cfg.hidden == std::vector<int>{500, 800});
  CHECK(cfg.epochs == 50);
  CHECK_NOTHROW(cfg.validate());
  cfg.epochs = 0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = MapperConfig{};
  cfg.val_fraction = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
  cfg = MapperConfig{};
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ArgumentError);
}

TEST_CASE("training input errors") {
  auto p = make_pair(20, 2, 1, [](const CoefficientVector& xi, Rng&) {
    return Eigen::VectorXd(xi.head(2));
  });
  ScoreTable empty = p.scores;
  empty.sample_ids.clear();
  empty.scores.resize(0, 2);
  CHECK_THROWS_AS(train_mapper(empty, p.coeffs, small_config(), "m"), DataError);

  CoefficientTable missing = p.coeffs;
  missing.sample_ids.pop_back();
  missing.rows.pop_back();
  CHECK_THROWS_AS(train_mapper(p.scores, missing, small_config(), "m"), DataError);

  ScoreTable flat = p.scores;
  flat.scores.col(1).setConstant(0.5);
  flat.recompute_stats();
  CHECK_THROWS_AS(train_mapper(flat, p.coeffs, small_config(), "m"), DataError);

  MapperConfig explode = small_config(5);
  explode.learning_rate = 1e300;
  ScoreTable huge = p.scores;
  huge.scores *= 1e300;
  huge.recompute_stats();
  CHECK_THROWS_AS(train_mapper(huge, p.coeffs, explode, "m"), NumericError);
}

TEST_CASE("constant targets are learned") {
  CoefficientVector c;
  for (int i = 0; i < 10; ++i) c[i] = 0.1 * (i - 4);
  auto p = make_pair(3000, 3, 4, [](const CoefficientVector&, Rng& rng) {
    return Eigen::VectorXd(Eigen::Vector3d(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)));
  });
  for (auto& row : p.coeffs.rows) row = c;
  MapperConfig cfg;
  cfg.batch_size = 8;
  cfg.cosine_decay = true;
  const auto art = train_mapper(p.scores, p.coeffs, cfg, "m");
  Rng rng(77);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Eigen::Vector3d omega(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1));
    worst = std::max(worst, (predict(art, omega) - c).cwiseAbs().maxCoeff());
  }
  MESSAGE("constant-target max error " << worst);
  CHECK(worst < 1e-3);
}

TEST_CASE("training reduces the loss and is deterministic") {
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(10, 10) * 0.3 + Eigen::MatrixXd::Random(10, 10) * 0.05;
  auto f = [&](const CoefficientVector& xi, Rng&) { return Eigen::VectorXd((a * xi).array().tanh()); };
  const auto p = make_pair(400, 10, 5, f);
  const auto art = train_mapper(p.scores, p.coeffs, small_config(), "m");
  const auto& log = art.training_log.epochs;
  REQUIRE(log.size() == 20);
  CHECK(log.back().train_loss <= 0.5 * log.front().train_loss);
  CHECK(log.back().val_loss.has_value());
  CHECK(art.training_log.val_rows == 40);
  CHECK(art.training_log.train_rows == 360);
  const auto again = train_mapper(p.scores, p.coeffs, small_config(), "m");
  CHECK(again.net.layers()[1].weight == art.net.layers()[1].weight);

  // The residual stats bound the error on every training row.
  const auto& res = art.training_log.residual;
  CHECK(res.p50 <= res.p95);
  CHECK(res.p95 <= res.max);
  const Eigen::MatrixXd pred = predict_batch(art, p.scores.scores);
  std::size_t within = 0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i)
    if ((pred.row(i).transpose() - p.coeffs.rows[static_cast<std::size_t>(i)]).norm() <= res.max) ++within;
  CHECK(within >= art.training_log.train_rows);
}

TEST_CASE("invertible linear data is recovered in vertex space") {
  const auto model = make_toy_body_model();
  Rng arng(12);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(10, 10);
  for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += 0.2 * arng.normal();
  a *= 0.1;
  auto f = [&](const CoefficientVector& xi, Rng&) { return Eigen::VectorXd(a * xi); };
  const auto train = make_pair(3000, 10, 20, f);
  const auto test = make_pair(200, 10, 21, f);
  const auto art = train_mapper(train.scores, train.coeffs, MapperConfig{}, model.model_id());

  // Oracle: the least-squares inverse recovers xi exactly.
  const Eigen::MatrixXd a_inv = a.completeOrthogonalDecomposition().pseudoInverse();
  double mlp_err = 0.0, oracle_err = 0.0;
  for (std::size_t i = 0; i < test.coeffs.rows.size(); ++i) {
    const Eigen::VectorXd omega = test.scores.scores.row(static_cast<Eigen::Index>(i)).transpose();
    const auto truth = synthesize(model, test.coeffs.rows[i]).vertices;
    const auto mlp = synthesize(model, predict(art, omega)).vertices;
    const auto oracle = synthesize(model, CoefficientVector(a_inv * omega)).vertices;
    mlp_err += (mlp - truth).rowwise().norm().mean();
    oracle_err += (oracle - truth).rowwise().norm().mean();
  }
  mlp_err /= static_cast<double>(test.coeffs.rows.size());
  oracle_err /= static_cast<double>(test.coeffs.rows.size());
  MESSAGE("held-out mean vertex error " << mlp_err << " (oracle " << oracle_err << ")");
  CHECK(oracle_err < 1e-9);
  CHECK(mlp_err < 1e-2);
}

TEST_CASE("predict is a pure forward pass") {
  Eigen::MatrixXd w = Eigen::MatrixXd::Random(10, 3);
  CoefficientVector b = CoefficientVector::LinSpaced(-1, 1);
  const auto art = testing::linear_mapper("m", w, b);
  const Eigen::Vector3d omega(0.1, -0.2, 0.3);
  CHECK(predict(art, omega) == predict(art, omega));
  CHECK((predict(art, omega) - (w * omega + b)).norm() < 1e-12);
  CHECK_THROWS_AS(predict(art, Eigen::Vector2d(0, 0)), DimensionError);
  CHECK_THROWS_AS(predict(art, Eigen::Vector3d(0, std::nan(""), 0)), ArgumentError);

  // Zeroed final layer yields the final bias.
  Rng rng(3);
  MapperArtifact deep = art;
  deep.net = Mlp({3, 8, 10}, rng);
  deep.net.layers().back().weight.setZero();
  deep.net.layers().back().bias = b;
  CHECK(predict(deep, omega) == b);
}

TEST_CASE("slider ranges come from the training stats") {
  auto p = make_pair(50, 2, 7, [](const CoefficientVector& xi, Rng&) {
    return Eigen::VectorXd(Eigen::Vector2d(0.1 * xi[0], 0.05 * xi[1] + 0.2));
  });
  const auto art = train_mapper(p.scores, p.coeffs, small_config(2), "m");
  const auto ranges = slider_ranges(art);
  REQUIRE(ranges.size() == 2);
  for (std::size_t j = 0; j < 2; ++j) {
    const auto col = p.scores.scores.col(static_cast<Eigen::Index>(j));
    CHECK(ranges[j].id == p.scores.descriptors[j].id);
    CHECK(ranges[j].lo == col.minCoeff());
    CHECK(ranges[j].hi == col.maxCoeff());
    CHECK(ranges[j].default_value == doctest::Approx(col.mean()));
    CHECK(ranges[j].lo < ranges[j].hi);
  }
}

TEST_CASE("save and load are bit-identical") {
  auto p = make_pair(80, 3, 9, [](const CoefficientVector& xi, Rng&) {
    return Eigen::VectorXd(xi.head(3) * 0.1);
  });
  const auto art = train_mapper(p.scores, p.coeffs, small_config(3), "model-x", "mx");
  testing::TempDir dir;
  save_mapper(art, dir / "m");
  const auto back = load_mapper(dir / "m");
  CHECK(back.mapper_id == "mx");
  CHECK(back.model_id == "model-x");
  CHECK(back.descriptor_ids() == art.descriptor_ids());
  CHECK(back.training_log.epochs.size() == 3);
  CHECK(back.training_log.residual.max == art.training_log.residual.max);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d omega(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const CoefficientVector a = predict(art, omega), b = predict(back, omega);
    CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * 10) == 0);
  }
  save_mapper(back, dir / "again");
  CHECK(testing::slurp(dir / "m" / "weights.bin") == testing::slurp(dir / "again" / "weights.bin"));
  CHECK(testing::slurp(dir / "m" / "mapper.json") == testing::slurp(dir / "again" / "mapper.json"));

  CHECK_THROWS_AS(load_mapper(dir / "absent"), IoError);
  testing::spit(dir / "m" / "weights.bin", "abc");
  CHECK_THROWS_AS(load_mapper(dir / "m"), DataError);
}

TEST_CASE("artifact validation") {
  auto art = testing::linear_mapper("m", Eigen::MatrixXd::Zero(10, 2));
  CHECK_NOTHROW(art.validate());
  art.score_stats[1].max = art.score_stats[1].min;
  CHECK_THROWS_AS(art.validate(), DataError);
  art = testing::linear_mapper("m", Eigen::MatrixXd::Zero(10, 2));
  art.descriptors.pop_back();
  CHECK_THROWS_AS(art.validate(), DataError);
}
