#include "semantify/scorer.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <mutex>
#include <optional>
#include <set>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include "json.hpp"

#include "semantify/archive.hpp"
#include "semantify/csv.hpp"
#include "semantify/error.hpp"

namespace semantify {

using nlohmann::json;

Descriptor Descriptor::from_text(std::string_view raw) {
  std::string text;
  for (const char c : raw) text += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) throw ArgumentError("descriptor text is empty");
  text = text.substr(first, text.find_last_not_of(" \t\r\n") - first + 1);

  std::string id;
  for (const char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      id += c;
    } else if ((c == ' ' || c == '-' || c == '_') && !id.empty() && id.back() != '_') {
      id += '_';
    }
  }
  while (!id.empty() && id.back() == '_') id.pop_back();
  if (id.empty()) throw ArgumentError(fmt::format("descriptor '{}' has no usable characters", text));
  return {text, id};
}

std::vector<Descriptor> read_descriptor_list(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<Descriptor> out;
  std::set<std::string> seen;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    const auto line = std::string_view(text).substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto d = Descriptor::from_text(line);
    if (!seen.insert(d.id).second)
      throw DataError(fmt::format("'{}': duplicate descriptor '{}'", path.string(), d.id));
    out.push_back(std::move(d));
  }
  if (out.empty()) throw DataError(fmt::format("'{}' lists no descriptors", path.string()));
  return out;
}

Embedding Embedding::normalized(Eigen::VectorXd v) {
  const double n = v.norm();
  if (!std::isfinite(n) || n == 0.0) throw NumericError("cannot normalize a zero or non-finite embedding");
  return Embedding(v / n);
}

Embedding Embedding::from_unit(Eigen::VectorXd v) {
  if (!(std::abs(v.norm() - 1.0) <= 1e-6)) throw NumericError("embedding is not unit-norm");
  return Embedding(std::move(v));
}

double score(const Embedding& image_emb, const Embedding& text_emb) {
  if (image_emb.dim() != text_emb.dim())
    throw DimensionError(fmt::format("embedding dims differ: {} vs {}", image_emb.dim(), text_emb.dim()));
  return std::clamp(image_emb.vector().dot(text_emb.vector()), -1.0, 1.0);
}

std::string_view to_string(ViewAggregation agg) { return agg == ViewAggregation::mean ? "mean" : "max"; }

ViewAggregation parse_view_aggregation(std::string_view text) {
  if (text == "mean") return ViewAggregation::mean;
  if (text == "max") return ViewAggregation::max;
  throw ArgumentError(fmt::format("unknown view aggregation '{}'", text));
}

std::size_t ScoreTable::descriptor_index(std::string_view id) const {
  for (std::size_t i = 0; i < descriptors.size(); ++i)
    if (descriptors[i].id == id) return i;
  throw ArgumentError(fmt::format("descriptor '{}' is not in the score table", id));
}

void ScoreTable::recompute_stats() {
  stats.assign(descriptors.size(), {});
  const auto n = scores.rows();
  if (n == 0) return;
  for (Eigen::Index j = 0; j < scores.cols(); ++j) {
    const auto col = scores.col(j);
    auto& s = stats[static_cast<std::size_t>(j)];
    s.min = col.minCoeff();
    s.max = col.maxCoeff();
    s.mean = col.mean();
    s.variance = (col.array() - s.mean).square().sum() / static_cast<double>(n);
  }
}

ScoreTable ScoreTable::restricted(const std::vector<std::string>& ids) const {
  ScoreTable out;
  out.sample_ids = sample_ids;
  out.dropped = dropped;
  out.view_agg = view_agg;
  out.scores.resize(scores.rows(), static_cast<Eigen::Index>(ids.size()));
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const auto j = descriptor_index(ids[k]);
    out.descriptors.push_back(descriptors[j]);
    out.scores.col(static_cast<Eigen::Index>(k)) = scores.col(static_cast<Eigen::Index>(j));
    if (j < stats.size()) out.stats.push_back(stats[j]);
  }
  if (out.stats.size() != ids.size()) out.recompute_stats();
  return out;
}

void ScoreTable::validate() const {
  if (scores.rows() != static_cast<Eigen::Index>(sample_ids.size()))
    throw DimensionError("score table row count differs from sample ids");
  if (scores.cols() != static_cast<Eigen::Index>(descriptors.size()))
    throw DimensionError("score table width differs from descriptor count");
  if (stats.size() != descriptors.size()) throw DataError("score table stats are missing");
  ScoreTable copy = *this;
  copy.recompute_stats();
  for (std::size_t j = 0; j < stats.size(); ++j) {
    const auto& a = stats[j];
    const auto& b = copy.stats[j];
    if (a.min != b.min || a.max != b.max || std::abs(a.mean - b.mean) > 1e-12 ||
        std::abs(a.variance - b.variance) > 1e-12)
      throw DataError(fmt::format("stats of '{}' disagree with its column", descriptors[j].id));
  }
}

std::string apply_prompt_template(const std::string& prompt_template, const Descriptor& d) {
  if (prompt_template.empty()) return d.text;
  const auto at = prompt_template.find("{descriptor}");
  if (at == std::string::npos) throw ArgumentError("prompt template lacks a {descriptor} placeholder");
  std::string out = prompt_template;
  out.replace(at, 12, d.text);
  return out;
}

ScoredDataset score_dataset_with_embeddings(const DatasetManifest& manifest,
                                            const std::vector<Descriptor>& descriptors,
                                            const ScorerBackend& backend,
                                            const ScoringOptions& options) {
  if (descriptors.empty()) throw ArgumentError("no descriptors to score");

  std::vector<Embedding> text_embs;
  for (const auto& d : descriptors) text_embs.push_back(backend.embed_text(apply_prompt_template(options.prompt_template, d)));
  const Eigen::Index dim = text_embs.front().dim();
  const auto n_desc = static_cast<Eigen::Index>(descriptors.size());

  struct Row {
    std::optional<std::string> failure;
    Eigen::VectorXd scores;
    Eigen::VectorXd embedding;
  };
  std::vector<Row> rows(manifest.records.size());

  auto work = [&](std::size_t i) {
    const auto& rec = manifest.records[i];
    Row& row = rows[i];
    if (rec.image_paths.empty()) {
      row.failure = "record has no images";
      return;
    }
    Eigen::MatrixXd per_view(static_cast<Eigen::Index>(rec.image_paths.size()), n_desc);
    Eigen::VectorXd emb_sum = Eigen::VectorXd::Zero(dim);
    for (std::size_t v = 0; v < rec.image_paths.size(); ++v) {
      const auto path = manifest.root / rec.image_paths[v];
      if (!std::filesystem::exists(path)) {
        row.failure = fmt::format("missing image '{}'", rec.image_paths[v]);
        return;
      }
      Image image;
      try {
        image = read_png(path);
      } catch (const Error& e) {
        row.failure = e.what();
        return;
      }
      const Embedding e = backend.embed_image(image);
      if (e.dim() != dim) throw DimensionError("image and text embedding dims differ");
      emb_sum += e.vector();
      for (Eigen::Index j = 0; j < n_desc; ++j)
        per_view(static_cast<Eigen::Index>(v), j) = score(e, text_embs[static_cast<std::size_t>(j)]);
    }
    row.scores = options.view_agg == ViewAggregation::mean ? Eigen::VectorXd(per_view.colwise().mean().transpose())
                                                           : Eigen::VectorXd(per_view.colwise().maxCoeff().transpose());
    const double norm = emb_sum.norm();
    row.embedding = norm > 0.0 ? Eigen::VectorXd(emb_sum / norm) : emb_sum;
  };

  const unsigned workers = backend.parallel_safe() ? std::max(1u, std::thread::hardware_concurrency()) : 1u;
  if (workers <= 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    {
      std::vector<std::jthread> pool;
      for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t i = next++; i < rows.size(); i = next++) {
            try {
              work(i);
            } catch (...) {
              std::lock_guard lock(error_mutex);
              if (!error) error = std::current_exception();
            }
          }
        });
    }
    if (error) std::rethrow_exception(error);
  }

  ScoredDataset out;
  ScoreTable& table = out.table;
  table.descriptors = descriptors;
  table.view_agg = options.view_agg;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].failure) {
      spdlog::warn("sample {} dropped: {}", manifest.records[i].sample_id, *rows[i].failure);
      table.dropped.push_back({manifest.records[i].sample_id, *rows[i].failure});
    } else {
      kept.push_back(i);
    }
  }
  const auto n = static_cast<Eigen::Index>(kept.size());
  table.scores.resize(n, n_desc);
  out.image_embeddings.resize(n, dim);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = kept[static_cast<std::size_t>(r)];
    table.sample_ids.push_back(manifest.records[i].sample_id);
    table.scores.row(r) = rows[i].scores.transpose();
    out.image_embeddings.row(r) = rows[i].embedding.transpose();
  }
  out.text_embeddings.resize(n_desc, dim);
  for (Eigen::Index j = 0; j < n_desc; ++j)
    out.text_embeddings.row(j) = text_embs[static_cast<std::size_t>(j)].vector().transpose();
  table.recompute_stats();
  return out;
}

ScoreTable score_dataset(const DatasetManifest& manifest, const std::vector<Descriptor>& descriptors,
                         const ScorerBackend& backend, const ScoringOptions& options) {
  return score_dataset_with_embeddings(manifest, descriptors, backend, options).table;
}

void write_score_table(const ScoreTable& table, const std::filesystem::path& dir) {
  std::string csv = "sample_id";
  for (const auto& d : table.descriptors) csv += "," + d.id;
  csv += '\n';
  for (Eigen::Index r = 0; r < table.scores.rows(); ++r) {
    csv += table.sample_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index j = 0; j < table.scores.cols(); ++j) csv += "," + format_real(table.scores(r, j));
    csv += '\n';
  }
  write_text_file(dir / "scores.csv", csv);

  json descs = json::array();
  for (std::size_t j = 0; j < table.descriptors.size(); ++j) {
    const auto& s = table.stats.at(j);
    descs.push_back({{"id", table.descriptors[j].id},
                     {"text", table.descriptors[j].text},
                     {"min", s.min},
                     {"max", s.max},
                     {"mean", s.mean},
                     {"variance", s.variance}});
  }
  json dropped = json::array();
  for (const auto& d : table.dropped) dropped.push_back({{"sample_id", d.sample_id}, {"reason", d.reason}});
  const json stats = {{"n_samples", table.sample_ids.size()},
                      {"view_agg", std::string(to_string(table.view_agg))},
                      {"descriptors", descs},
                      {"dropped", dropped}};
  write_text_file(dir / "score_stats.json", stats.dump(1) + "\n");
}

ScoreTable read_score_table(const std::filesystem::path& scores_csv) {
  if (!std::filesystem::exists(scores_csv))
    throw IoError(fmt::format("'{}' does not exist", scores_csv.string()));
  const CsvTable csv = read_csv(scores_csv);
  if (csv.header.empty() || csv.header[0] != "sample_id")
    throw DataError(fmt::format("'{}' is not a score table", scores_csv.string()));
  ScoreTable table;
  for (std::size_t j = 1; j < csv.header.size(); ++j) {
    std::string text = csv.header[j];
    std::replace(text.begin(), text.end(), '_', ' ');
    table.descriptors.push_back({text, csv.header[j]});
  }
  const auto width = static_cast<Eigen::Index>(table.descriptors.size());
  table.scores.resize(static_cast<Eigen::Index>(csv.rows.size()), width);
  for (std::size_t r = 0; r < csv.rows.size(); ++r) {
    table.sample_ids.push_back(csv.rows[r][0]);
    for (Eigen::Index j = 0; j < width; ++j)
      table.scores(static_cast<Eigen::Index>(r), j) = parse_real(csv.rows[r][static_cast<std::size_t>(j) + 1]);
  }

  const auto stats_path = scores_csv.parent_path() / "score_stats.json";
  if (std::filesystem::exists(stats_path)) {
    try {
      const json j = json::parse(read_text_file(stats_path));
      table.view_agg = parse_view_aggregation(j.value("view_agg", std::string("mean")));
      for (const auto& d : j.at("descriptors")) {
        const auto id = d.at("id").get<std::string>();
        for (auto& desc : table.descriptors)
          if (desc.id == id) desc.text = d.at("text").get<std::string>();
      }
      for (const auto& d : j.value("dropped", json::array()))
        table.dropped.push_back({d.at("sample_id").get<std::string>(), d.at("reason").get<std::string>()});
    } catch (const json::exception& e) {
      throw DataError(fmt::format("'{}': {}", stats_path.string(), e.what()));
    }
  }
  table.recompute_stats();
  return table;
}

void write_embeddings(const ScoredDataset& scored, const std::filesystem::path& dir) {
  Bytes bin;
  for (Eigen::Index r = 0; r < scored.image_embeddings.rows(); ++r)
    for (Eigen::Index c = 0; c < scored.image_embeddings.cols(); ++c)
      append_f32_le(bin, static_cast<float>(scored.image_embeddings(r, c)));
  for (Eigen::Index r = 0; r < scored.text_embeddings.rows(); ++r)
    for (Eigen::Index c = 0; c < scored.text_embeddings.cols(); ++c)
      append_f32_le(bin, static_cast<float>(scored.text_embeddings(r, c)));
  write_file(dir / "embeddings.bin", bin);
  std::vector<std::string> desc_ids;
  for (const auto& d : scored.table.descriptors) desc_ids.push_back(d.id);
  const json meta = {{"dim", scored.text_embeddings.cols()},
                     {"sample_ids", scored.table.sample_ids},
                     {"descriptor_ids", desc_ids},
                     {"dtype", "f32"},
                     {"endianness", "little"}};
  write_text_file(dir / "embeddings.json", meta.dump(1) + "\n");
}

EmbeddingFile read_embeddings(const std::filesystem::path& dir) {
  EmbeddingFile out;
  Eigen::Index dim = 0;
  try {
    const json meta = json::parse(read_text_file(dir / "embeddings.json"));
    dim = meta.at("dim").get<Eigen::Index>();
    out.sample_ids = meta.at("sample_ids").get<std::vector<std::string>>();
    out.descriptor_ids = meta.at("descriptor_ids").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(fmt::format("embeddings.json: {}", e.what()));
  }
  const auto values = decode_f32_le(read_file(dir / "embeddings.bin"));
  const auto n = static_cast<Eigen::Index>(out.sample_ids.size());
  const auto m = static_cast<Eigen::Index>(out.descriptor_ids.size());
  if (static_cast<Eigen::Index>(values.size()) != (n + m) * dim)
    throw DimensionError("embeddings.bin size does not match embeddings.json");
  out.image_embeddings.resize(n, dim);
  out.text_embeddings.resize(m, dim);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) out.image_embeddings(r, c) = values[k++];
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < dim; ++c) out.text_embeddings(r, c) = values[k++];
  return out;
}

}  // namespace semantify
