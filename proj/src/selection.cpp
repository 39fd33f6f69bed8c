#include "semantify/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include "json.hpp"

#include "semantify/archive.hpp"
#include "semantify/error.hpp"

namespace semantify {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Lexicon

Lexicon::Pair Lexicon::ordered(const std::string& a, const std::string& b) {
  return a < b ? Pair{a, b} : Pair{b, a};
}

void Lexicon::add_synonyms(const std::string& a, const std::string& b) {
  const auto p = ordered(a, b);
  if (a == b) throw DataError(fmt::format("lexicon pair ({}, {}) repeats a descriptor", a, b));
  if (antonyms_.contains(p)) throw DataError(fmt::format("({}, {}) is both synonym and antonym", a, b));
  synonyms_.insert(p);
}

void Lexicon::add_antonyms(const std::string& a, const std::string& b) {
  const auto p = ordered(a, b);
  if (a == b) throw DataError(fmt::format("lexicon pair ({}, {}) repeats a descriptor", a, b));
  if (synonyms_.contains(p)) throw DataError(fmt::format("({}, {}) is both synonym and antonym", a, b));
  antonyms_.insert(p);
}

Lexicon::Relation Lexicon::relation(const std::string& a, const std::string& b) const {
  const auto p = ordered(a, b);
  if (synonyms_.contains(p)) return Relation::synonym;
  if (antonyms_.contains(p)) return Relation::antonym;
  return Relation::none;
}

void Lexicon::validate(const std::vector<std::string>& known_ids) const {
  const std::set<std::string> known(known_ids.begin(), known_ids.end());
  for (const auto* pairs : {&synonyms_, &antonyms_})
    for (const auto& [a, b] : *pairs)
      for (const auto& id : {a, b})
        if (!known.contains(id)) throw DataError(fmt::format("lexicon references unknown descriptor '{}'", id));
}

Lexicon Lexicon::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(fmt::format("'{}' does not exist", path.string()));
  Lexicon lex;
  try {
    const json j = json::parse(read_text_file(path));
    for (const auto& p : j.value("synonyms", json::array())) {
      const auto pair = p.get<std::vector<std::string>>();
      if (pair.size() != 2) throw DataError("lexicon pairs must have two entries");
      lex.add_synonyms(Descriptor::from_text(pair[0]).id, Descriptor::from_text(pair[1]).id);
    }
    for (const auto& p : j.value("antonyms", json::array())) {
      const auto pair = p.get<std::vector<std::string>>();
      if (pair.size() != 2) throw DataError("lexicon pairs must have two entries");
      lex.add_antonyms(Descriptor::from_text(pair[0]).id, Descriptor::from_text(pair[1]).id);
    }
  } catch (const json::exception& e) {
    throw DataError(fmt::format("'{}': {}", path.string(), e.what()));
  }
  return lex;
}

// ---------------------------------------------------------------------------
// Voting

DescriptorClusters assign_descriptors_to_clusters(const Eigen::MatrixXd& image_embeddings,
                                                  const Eigen::MatrixXd& text_embeddings,
                                                  const ClusterAssignment& assignment, int top) {
  const auto n = image_embeddings.rows();
  const auto m = text_embeddings.rows();
  if (static_cast<Eigen::Index>(assignment.labels.size()) != n)
    throw DimensionError("cluster assignment does not cover every image");
  if (image_embeddings.cols() != text_embeddings.cols()) throw DimensionError("embedding dims differ");
  const int k = std::max(1, assignment.k);
  const auto take = static_cast<Eigen::Index>(std::min<Eigen::Index>(top, m));

  Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(k, m);
  std::vector<Eigen::Index> sizes(static_cast<std::size_t>(k), 0);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = assignment.labels[static_cast<std::size_t>(i)];
    if (c < 0 || c >= k) throw ArgumentError("cluster label out of range");
    ++sizes[static_cast<std::size_t>(c)];
    const Eigen::VectorXd sims = text_embeddings * image_embeddings.row(i).transpose();
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + take, order.end(), [&](Eigen::Index a, Eigen::Index b) {
      return sims[a] > sims[b] || (sims[a] == sims[b] && a < b);
    });
    for (Eigen::Index t = 0; t < take; ++t) votes(c, order[static_cast<std::size_t>(t)]) += 1.0;
  }
  for (int c = 0; c < k; ++c)
    if (sizes[static_cast<std::size_t>(c)] > 0) votes.row(c) /= static_cast<double>(sizes[static_cast<std::size_t>(c)]);

  DescriptorClusters out;
  out.normalized_votes = votes;
  out.cluster_of.resize(static_cast<std::size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) {
    int best = 0;
    for (int c = 1; c < k; ++c)
      if (votes(c, j) > votes(best, j)) best = c;
    out.cluster_of[static_cast<std::size_t>(j)] = best;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Correlation

CorrelationMatrix correlation_matrix(const ScoreTable& table) {
  const auto n = table.scores.rows();
  if (n < 2) throw ArgumentError("correlation needs at least two samples");
  CorrelationMatrix out;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index j = 0; j < table.scores.cols(); ++j) {
    const auto col = table.scores.col(j);
    if (col.maxCoeff() == col.minCoeff()) {
      out.zero_variance.push_back(table.descriptors[static_cast<std::size_t>(j)].id);
    } else {
      cols.push_back(j);
      out.ids.push_back(table.descriptors[static_cast<std::size_t>(j)].id);
    }
  }
  const auto m = static_cast<Eigen::Index>(cols.size());
  Eigen::MatrixXd centered(n, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto col = table.scores.col(cols[static_cast<std::size_t>(k)]);
    centered.col(k) = col.array() - col.mean();
  }
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  out.values.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) {
      out.values(a, b) = a == b ? 1.0 : std::clamp(cov(a, b) / std::sqrt(cov(a, a) * cov(b, b)), -1.0, 1.0);
    }
  }
  return out;
}

double median_abs_correlation(const CorrelationMatrix& corr) {
  std::vector<double> values;
  const auto m = corr.values.rows();
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = a + 1; b < m; ++b) values.push_back(std::abs(corr.values(a, b)));
  if (values.empty()) return 1.0;
  std::sort(values.begin(), values.end());
  const auto mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::string_view to_string(FilterReason reason) {
  switch (reason) {
    case FilterReason::correlated_with: return "correlated_with";
    case FilterReason::synonym_of: return "synonym_of";
    case FilterReason::antonym_of: return "antonym_of";
    case FilterReason::below_cut: return "below_cut";
    case FilterReason::zero_variance: return "zero_variance";
  }
  return "below_cut";
}

namespace {

FilterReason parse_filter_reason(std::string_view s) {
  for (const auto r : {FilterReason::correlated_with, FilterReason::synonym_of, FilterReason::antonym_of,
                       FilterReason::below_cut, FilterReason::zero_variance})
    if (to_string(r) == s) return r;
  throw DataError(fmt::format("unknown filter reason '{}'", s));
}

// Perfectly collinear columns always count as correlated, even when the
// median threshold itself is 1.
constexpr double kCollinear = 1.0 - 1e-12;

}  // namespace

std::vector<std::string> SelectionResult::chosen_ids() const {
  std::vector<std::string> ids;
  for (const auto& d : chosen) ids.push_back(d.id);
  return ids;
}

SelectionResult select_descriptors(const ScoreTable& table, const ClusterAssignment& assignment,
                                   const DescriptorClusters& desc_clusters, const Lexicon& lexicon,
                                   const SelectionOptions& options) {
  const std::size_t n_desc = table.descriptors.size();
  if (desc_clusters.cluster_of.size() != n_desc)
    throw DimensionError("descriptor cluster map does not match the score table");
  if (table.stats.size() != n_desc) throw DataError("score table stats are missing");
  std::vector<std::string> all_ids;
  for (const auto& d : table.descriptors) all_ids.push_back(d.id);
  lexicon.validate(all_ids);

  SelectionResult result;
  result.k = assignment.k;
  result.silhouette = assignment.silhouette;
  std::map<std::string, std::size_t> pos;
  for (std::size_t j = 0; j < n_desc; ++j) {
    pos[all_ids[j]] = j;
    result.info.push_back({all_ids[j], table.stats[j].variance, desc_clusters.cluster_of[j]});
  }

  const CorrelationMatrix corr = correlation_matrix(table);
  std::map<std::string, Eigen::Index> cidx;
  for (std::size_t k = 0; k < corr.ids.size(); ++k) cidx[corr.ids[k]] = static_cast<Eigen::Index>(k);
  const auto abs_corr = [&](const std::string& a, const std::string& b) {
    return std::abs(corr.values(cidx.at(a), cidx.at(b)));
  };
  const double threshold = median_abs_correlation(corr);
  result.median_threshold = threshold;
  result.applied_threshold = threshold;
  for (const auto& id : corr.zero_variance) result.filtered.push_back({id, FilterReason::zero_variance, {}});

  // Presets.
  std::vector<std::string> presets;
  for (const auto& raw : options.preset) {
    const auto id = Descriptor::from_text(raw).id;
    if (!pos.contains(id)) throw ArgumentError(fmt::format("preset descriptor '{}' is not in the score table", raw));
    if (!cidx.contains(id)) throw ArgumentError(fmt::format("preset descriptor '{}' has zero variance", raw));
    if (std::find(presets.begin(), presets.end(), id) != presets.end()) continue;
    for (const auto& other : presets)
      if (lexicon.relation(id, other) != Lexicon::Relation::none)
        throw ArgumentError(fmt::format("preset descriptors '{}' and '{}' form a lexicon pair", other, id));
    presets.push_back(id);
  }
  result.preset_count = presets.size();
  if (options.target_d) {
    if (*options.target_d > n_desc)
      throw ArgumentError(fmt::format("target d = {} exceeds the {} available descriptors", *options.target_d, n_desc));
    if (*options.target_d < presets.size())
      throw ArgumentError(fmt::format("target d = {} is smaller than the {} preset descriptors", *options.target_d,
                                      presets.size()));
  }

  const auto by_variance = [&](const std::string& a, const std::string& b) {
    const double va = table.stats[pos.at(a)].variance;
    const double vb = table.stats[pos.at(b)].variance;
    return va > vb || (va == vb && a < b);
  };

  // Greedy admission against the already-kept set (seeded with presets).
  const auto admit = [&](const std::vector<std::string>& candidates) {
    std::vector<std::string> kept = presets;
    for (const auto& cand : candidates) {
      std::optional<FilteredDescriptor> reject;
      for (const auto& k : kept) {
        const double r = abs_corr(cand, k);
        if (r > threshold || r >= kCollinear) {
          reject = FilteredDescriptor{cand, FilterReason::correlated_with, k};
          break;
        }
      }
      if (!reject) {
        for (const auto& k : kept) {
          const auto rel = lexicon.relation(cand, k);
          if (rel != Lexicon::Relation::none) {
            reject = FilteredDescriptor{
                cand, rel == Lexicon::Relation::synonym ? FilterReason::synonym_of : FilterReason::antonym_of, k};
            break;
          }
        }
      }
      if (reject) {
        result.filtered.push_back(*reject);
      } else {
        kept.push_back(cand);
      }
    }
    kept.erase(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(presets.size()));
    return kept;
  };

  const int k = std::max(1, assignment.k);
  std::vector<std::string> merged;
  for (int c = 0; c < k; ++c) {
    std::vector<std::string> cands;
    for (std::size_t j = 0; j < n_desc; ++j)
      if (desc_clusters.cluster_of[j] == c && cidx.contains(all_ids[j]) &&
          std::find(presets.begin(), presets.end(), all_ids[j]) == presets.end())
        cands.push_back(all_ids[j]);
    std::sort(cands.begin(), cands.end(), by_variance);
    const auto kept = admit(cands);
    merged.insert(merged.end(), kept.begin(), kept.end());
  }
  std::sort(merged.begin(), merged.end(), by_variance);
  std::vector<std::string> chosen = admit(merged);

  if (options.target_d) {
    const std::size_t want = *options.target_d - presets.size();
    while (chosen.size() > want) {
      result.filtered.push_back({chosen.back(), FilterReason::below_cut, {}});
      chosen.pop_back();
    }
    if (chosen.size() < want) {
      std::vector<std::string> pool;
      for (const auto& f : result.filtered)
        if (f.reason == FilterReason::correlated_with) pool.push_back(f.id);
      std::sort(pool.begin(), pool.end(), by_variance);
      for (const auto& cand : pool) {
        if (chosen.size() >= want) break;
        bool conflict = false;
        for (const auto* group : {&presets, &chosen})
          for (const auto& kept : *group)
            if (lexicon.relation(cand, kept) != Lexicon::Relation::none) conflict = true;
        if (conflict) continue;
        chosen.push_back(cand);
        std::erase_if(result.filtered, [&](const FilteredDescriptor& f) { return f.id == cand; });
      }
      if (chosen.size() < want)
        throw DataError(fmt::format("cannot reach d = {}: remaining descriptors conflict through the lexicon "
                                    "or have zero variance",
                                    *options.target_d));
      std::sort(chosen.begin(), chosen.end(), by_variance);
      std::vector<std::string> all = presets;
      all.insert(all.end(), chosen.begin(), chosen.end());
      for (std::size_t a = 0; a < all.size(); ++a)
        for (std::size_t b = a + 1; b < all.size(); ++b)
          result.applied_threshold = std::max(result.applied_threshold, abs_corr(all[a], all[b]));
    }
  }

  for (const auto& id : presets) result.chosen.push_back(table.descriptors[pos.at(id)]);
  for (const auto& id : chosen) result.chosen.push_back(table.descriptors[pos.at(id)]);
  result.d = result.chosen.size();
  return result;
}

SelectionResult run_selection(const ScoreTable& table, const Eigen::MatrixXd& image_embeddings,
                              const Eigen::MatrixXd& text_embeddings, const Lexicon& lexicon,
                              const SelectionOptions& options, int k_min, int k_max, std::uint64_t seed) {
  const ClusterAssignment assignment = cluster_images(image_embeddings, k_min, k_max, seed);
  const DescriptorClusters clusters = assign_descriptors_to_clusters(image_embeddings, text_embeddings, assignment);
  return select_descriptors(table, assignment, clusters, lexicon, options);
}

void write_selection(const SelectionResult& r, const std::filesystem::path& path) {
  json chosen = json::array();
  for (const auto& d : r.chosen) chosen.push_back({{"id", d.id}, {"text", d.text}});
  json info = json::array();
  for (const auto& i : r.info)
    info.push_back({{"id", i.id}, {"variance", i.variance}, {"home_cluster", i.home_cluster}});
  json filtered = json::array();
  for (const auto& f : r.filtered)
    filtered.push_back({{"id", f.id}, {"reason", std::string(to_string(f.reason))}, {"other", f.other}});
  const json j = {{"chosen", chosen},
                  {"d", r.d},
                  {"preset_count", r.preset_count},
                  {"median_threshold", r.median_threshold},
                  {"applied_threshold", r.applied_threshold},
                  {"threshold_scope", "global"},
                  {"voting", "per_image_top5"},
                  {"clusters", {{"k", r.k}, {"silhouette", r.silhouette}}},
                  {"descriptors", info},
                  {"filtered", filtered}};
  write_text_file(path, j.dump(1) + "\n");
}

SelectionResult read_selection(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError(fmt::format("'{}' does not exist", path.string()));
  SelectionResult r;
  try {
    const json j = json::parse(read_text_file(path));
    for (const auto& d : j.at("chosen")) r.chosen.push_back({d.at("text").get<std::string>(), d.at("id").get<std::string>()});
    r.d = j.at("d").get<std::size_t>();
    r.preset_count = j.value("preset_count", std::size_t{0});
    r.median_threshold = j.at("median_threshold").get<double>();
    r.applied_threshold = j.at("applied_threshold").get<double>();
    r.k = j.at("clusters").at("k").get<int>();
    r.silhouette = j.at("clusters").at("silhouette").get<double>();
    for (const auto& i : j.at("descriptors"))
      r.info.push_back({i.at("id").get<std::string>(), i.at("variance").get<double>(), i.at("home_cluster").get<int>()});
    for (const auto& f : j.at("filtered"))
      r.filtered.push_back({f.at("id").get<std::string>(), parse_filter_reason(f.at("reason").get<std::string>()),
                            f.at("other").get<std::string>()});
  } catch (const json::exception& e) {
    throw DataError(fmt::format("'{}': {}", path.string(), e.what()));
  }
  if (r.d != r.chosen.size()) throw DataError(fmt::format("'{}': d does not match chosen list", path.string()));
  return r;
}

}  // namespace semantify
