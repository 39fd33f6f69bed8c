#include "semantify/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include "json.hpp"

#include "semantify/archive.hpp"
#include "semantify/error.hpp"
#include "semantify/rng.hpp"

namespace semantify {

using nlohmann::json;

void MapperConfig::validate() const {
  if (epochs < 1) throw ArgumentError("epochs must be >= 1");
  if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ArgumentError("validation fraction must be in [0, 1)");
  for (const int h : hidden)
    if (h < 1) throw ArgumentError(fmt::format("invalid hidden width {}", h));
}

std::vector<std::string> MapperArtifact::descriptor_ids() const {
  std::vector<std::string> ids;
  for (const auto& d : descriptors) ids.push_back(d.id);
  return ids;
}

Eigen::VectorXd MapperArtifact::mean_scores() const {
  Eigen::VectorXd m(static_cast<Eigen::Index>(score_stats.size()));
  for (std::size_t j = 0; j < score_stats.size(); ++j) m[static_cast<Eigen::Index>(j)] = score_stats[j].mean;
  return m;
}

void MapperArtifact::validate() const {
  if (score_stats.size() != descriptors.size()) throw DataError("score stats do not match the descriptor set");
  if (net.input_width() != static_cast<int>(descriptors.size()))
    throw DataError(fmt::format("network input width {} != {} descriptors", net.input_width(), descriptors.size()));
  if (net.output_width() != kNumCoefficients)
    throw DataError(fmt::format("network output width {} != {}", net.output_width(), kNumCoefficients));
  for (std::size_t j = 0; j < score_stats.size(); ++j)
    if (!(score_stats[j].min < score_stats[j].max))
      throw DataError(fmt::format("descriptor '{}' has an empty score range", descriptors[j].id));
}

namespace {

// Mean loss over the rows and its gradient with respect to the prediction.
double loss_and_grad(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, bool squared,
                     Eigen::MatrixXd* grad) {
  const Eigen::MatrixXd r = pred - target;
  const auto n = static_cast<double>(r.rows());
  double loss = 0.0;
  if (grad) grad->resize(r.rows(), r.cols());
  for (Eigen::Index i = 0; i < r.rows(); ++i) {
    const double sq = r.row(i).squaredNorm();
    if (squared) {
      loss += sq;
      if (grad) grad->row(i) = 2.0 * r.row(i) / n;
    } else {
      const double norm = std::sqrt(sq);
      loss += norm;
      if (grad) grad->row(i) = norm > 0.0 ? Eigen::RowVectorXd(r.row(i) / (n * norm)) : Eigen::RowVectorXd::Zero(r.cols());
    }
  }
  return loss / n;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, const std::vector<Eigen::Index>& rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

MapperArtifact train_mapper(const ScoreTable& scores, const CoefficientTable& coeffs, const MapperConfig& cfg,
                            const std::string& model_id, const std::string& mapper_id) {
  cfg.validate();
  const auto n = scores.scores.rows();
  const auto d = scores.scores.cols();
  if (n == 0) throw DataError("no training rows");
  if (d == 0) throw DataError("no descriptors to train on");
  if (static_cast<std::size_t>(d) != scores.descriptors.size() ||
      scores.sample_ids.size() != static_cast<std::size_t>(n))
    throw DimensionError("score table shape is inconsistent");

  std::map<std::string, std::size_t> coeff_row;
  for (std::size_t i = 0; i < coeffs.sample_ids.size(); ++i) coeff_row[coeffs.sample_ids[i]] = i;
  Eigen::MatrixXd x = scores.scores;
  Eigen::MatrixXd y(n, kNumCoefficients);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& id = scores.sample_ids[static_cast<std::size_t>(i)];
    const auto it = coeff_row.find(id);
    if (it == coeff_row.end()) throw DataError(fmt::format("no coefficients for sample '{}'", id));
    y.row(i) = coeffs.rows[it->second].transpose();
  }
  if (!x.allFinite()) throw DataError("scores contain non-finite values");

  MapperArtifact art;
  art.mapper_id = mapper_id;
  art.model_id = model_id;
  art.descriptors = scores.descriptors;
  art.config = cfg;
  for (Eigen::Index j = 0; j < d; ++j) {
    const auto col = x.col(j);
    ScoreStat s{col.minCoeff(), col.maxCoeff(), col.mean()};
    if (!(s.min < s.max))
      throw DataError(fmt::format("descriptor '{}' has zero variance in the training scores",
                                  scores.descriptors[static_cast<std::size_t>(j)].id));
    art.score_stats.push_back(s);
  }

  Rng split_rng(cfg.seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  split_rng.shuffle(order.begin(), order.end());
  auto n_val = static_cast<std::size_t>(std::llround(cfg.val_fraction * static_cast<double>(n)));
  n_val = std::min(n_val, static_cast<std::size_t>(n) - 1);
  std::vector<Eigen::Index> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<Eigen::Index> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val_rows.begin(), val_rows.end());
  std::sort(train_rows.begin(), train_rows.end());
  const Eigen::MatrixXd x_val = take_rows(x, val_rows);
  const Eigen::MatrixXd y_val = take_rows(y, val_rows);

  std::vector<int> sizes{static_cast<int>(d)};
  sizes.insert(sizes.end(), cfg.hidden.begin(), cfg.hidden.end());
  sizes.push_back(kNumCoefficients);
  Rng init_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  art.net = Mlp(sizes, init_rng);
  Adam adam(art.net, cfg.learning_rate);
  Rng batch_rng(cfg.seed + 1);

  const auto batches_per_epoch =
      (train_rows.size() + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);
  const double total_steps = static_cast<double>(batches_per_epoch) * cfg.epochs;
  double step = 0.0;

  Mlp::Cache cache;
  Eigen::MatrixXd grad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    batch_rng.shuffle(train_rows.begin(), train_rows.end());
    double total = 0.0;
    for (std::size_t start = 0; start < train_rows.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const auto end = std::min(train_rows.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::vector<Eigen::Index> batch(train_rows.begin() + static_cast<std::ptrdiff_t>(start),
                                            train_rows.begin() + static_cast<std::ptrdiff_t>(end));
      const Eigen::MatrixXd xb = take_rows(x, batch);
      const Eigen::MatrixXd yb = take_rows(y, batch);
      const Eigen::MatrixXd pred = art.net.forward(xb, cache);
      const double loss = loss_and_grad(pred, yb, cfg.squared_loss, &grad);
      if (!std::isfinite(loss))
        throw NumericError(fmt::format("non-finite training loss at epoch {}, batch starting at row {}", epoch, start));
      total += loss * static_cast<double>(batch.size());
      if (cfg.cosine_decay)
        adam.set_learning_rate(0.5 * cfg.learning_rate * (1.0 + std::cos(std::numbers::pi * step / total_steps)));
      step += 1.0;
      adam.step(art.net, art.net.backward(cache, grad));
    }
    EpochLog log{epoch, total / static_cast<double>(train_rows.size()), std::nullopt};
    if (n_val > 0) log.val_loss = loss_and_grad(art.net.forward(x_val), y_val, cfg.squared_loss, nullptr);
    spdlog::debug("epoch {} train {:.6g}", epoch, log.train_loss);
    art.training_log.epochs.push_back(log);
  }

  art.net.round_to_float();
  std::sort(train_rows.begin(), train_rows.end());
  const Eigen::MatrixXd r = art.net.forward(take_rows(x, train_rows)) - take_rows(y, train_rows);
  std::vector<double> err(static_cast<std::size_t>(r.rows()));
  for (Eigen::Index i = 0; i < r.rows(); ++i) err[static_cast<std::size_t>(i)] = r.row(i).norm();
  auto& res = art.training_log.residual;
  res.mean = std::accumulate(err.begin(), err.end(), 0.0) / static_cast<double>(err.size());
  res.p50 = percentile(err, 0.5);
  res.p95 = percentile(err, 0.95);
  res.max = *std::max_element(err.begin(), err.end());
  art.training_log.train_rows = train_rows.size();
  art.training_log.val_rows = n_val;
  return art;
}

Eigen::MatrixXd predict_batch(const MapperArtifact& artifact, const Eigen::MatrixXd& omega) {
  if (omega.cols() != static_cast<Eigen::Index>(artifact.d()))
    throw DimensionError(fmt::format("mapper expects {} scores, got {}", artifact.d(), omega.cols()));
  if (!omega.allFinite()) throw ArgumentError("scores must be finite");
  return artifact.net.forward(omega);
}

CoefficientVector predict(const MapperArtifact& artifact, const Eigen::VectorXd& omega) {
  return predict_batch(artifact, omega.transpose()).row(0).transpose();
}

std::vector<SliderRange> slider_ranges(const MapperArtifact& artifact) {
  std::vector<SliderRange> out;
  for (std::size_t j = 0; j < artifact.d(); ++j)
    out.push_back({artifact.descriptors[j].id, artifact.descriptors[j].text, artifact.score_stats[j].min,
                   artifact.score_stats[j].max, artifact.score_stats[j].mean});
  return out;
}

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void save_mapper(const MapperArtifact& art, const std::filesystem::path& dir) {
  art.validate();
  Bytes weights;
  for (const auto& l : art.net.layers()) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) append_f32_le(weights, static_cast<float>(l.weight(r, c)));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) append_f32_le(weights, static_cast<float>(l.bias[r]));
  }

  json descriptors = json::array();
  json stats = json::array();
  for (std::size_t j = 0; j < art.d(); ++j) {
    descriptors.push_back({{"id", art.descriptors[j].id}, {"text", art.descriptors[j].text}});
    stats.push_back({{"id", art.descriptors[j].id},
                     {"min", art.score_stats[j].min},
                     {"max", art.score_stats[j].max},
                     {"mean", art.score_stats[j].mean}});
  }
  json epochs = json::array();
  for (const auto& e : art.training_log.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", optional_json(e.val_loss)}});
  const auto& res = art.training_log.residual;
  const auto& c = art.config;
  const json j = {
      {"mapper_id", art.mapper_id},
      {"model_id", art.model_id},
      {"descriptors", descriptors},
      {"score_stats", stats},
      {"layers", art.net.sizes()},
      {"activation", "relu"},
      {"weights_file", "weights.bin"},
      {"weights_dtype", "f32le"},
      {"config",
       {{"hidden", c.hidden},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"learning_rate", c.learning_rate},
        {"val_fraction", c.val_fraction},
        {"seed", c.seed},
        {"loss", c.squared_loss ? "squared_l2" : "l2"},
        {"lr_schedule", c.cosine_decay ? "cosine" : "constant"}}},
      {"training_log",
       {{"epochs", epochs},
        {"train_rows", art.training_log.train_rows},
        {"val_rows", art.training_log.val_rows},
        {"residual", {{"mean", res.mean}, {"p50", res.p50}, {"p95", res.p95}, {"max", res.max}}}}}};
  std::filesystem::create_directories(dir);
  write_file(dir / "weights.bin", weights);
  write_text_file(dir / "mapper.json", j.dump(1) + "\n");
}

MapperArtifact load_mapper(const std::filesystem::path& dir) {
  const auto meta_path = dir / "mapper.json";
  if (!std::filesystem::exists(meta_path)) throw IoError(fmt::format("'{}' does not exist", meta_path.string()));
  MapperArtifact art;
  try {
    const json j = json::parse(read_text_file(meta_path));
    art.mapper_id = j.at("mapper_id").get<std::string>();
    art.model_id = j.at("model_id").get<std::string>();
    for (const auto& d : j.at("descriptors"))
      art.descriptors.push_back({d.at("text").get<std::string>(), d.at("id").get<std::string>()});
    for (const auto& s : j.at("score_stats"))
      art.score_stats.push_back({s.at("min").get<double>(), s.at("max").get<double>(), s.at("mean").get<double>()});
    const auto& c = j.at("config");
    art.config.hidden = c.at("hidden").get<std::vector<int>>();
    art.config.epochs = c.at("epochs").get<int>();
    art.config.batch_size = c.at("batch_size").get<int>();
    art.config.learning_rate = c.at("learning_rate").get<double>();
    art.config.val_fraction = c.at("val_fraction").get<double>();
    art.config.seed = c.at("seed").get<std::uint64_t>();
    art.config.squared_loss = c.at("loss").get<std::string>() == "squared_l2";
    art.config.cosine_decay = c.value("lr_schedule", std::string("constant")) == "cosine";
    const auto& log = j.at("training_log");
    for (const auto& e : log.at("epochs")) {
      EpochLog el{e.at("epoch").get<int>(), e.at("train_loss").get<double>(), std::nullopt};
      if (!e.at("val_loss").is_null()) el.val_loss = e.at("val_loss").get<double>();
      art.training_log.epochs.push_back(el);
    }
    art.training_log.train_rows = log.at("train_rows").get<std::size_t>();
    art.training_log.val_rows = log.at("val_rows").get<std::size_t>();
    const auto& res = log.at("residual");
    art.training_log.residual = {res.at("mean").get<double>(), res.at("p50").get<double>(),
                                 res.at("p95").get<double>(), res.at("max").get<double>()};

    const auto sizes = j.at("layers").get<std::vector<int>>();
    if (sizes.size() < 2) throw DataError("mapper needs at least two layer widths");
    const auto w = decode_f32_le(read_file(dir / j.value("weights_file", std::string("weights.bin"))));
    std::size_t expected = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      expected += static_cast<std::size_t>(sizes[l + 1]) * static_cast<std::size_t>(sizes[l] + 1);
    if (w.size() != expected)
      throw DataError(fmt::format("weights.bin holds {} values, expected {}", w.size(), expected));
    std::vector<DenseLayer> layers;
    std::size_t pos = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      DenseLayer layer{Eigen::MatrixXd(sizes[l + 1], sizes[l]), Eigen::VectorXd(sizes[l + 1])};
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
        for (Eigen::Index col = 0; col < layer.weight.cols(); ++col) layer.weight(r, col) = w[pos++];
      for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias[r] = w[pos++];
      layers.push_back(std::move(layer));
    }
    art.net = Mlp(std::move(layers));
  } catch (const json::exception& e) {
    throw DataError(fmt::format("'{}': {}", meta_path.string(), e.what()));
  }
  art.validate();
  return art;
}

}  // namespace semantify
