#include "semantify/pipeline.hpp"

#include <algorithm>
#include <map>
#include <memory>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "semantify/archive.hpp"
#include "semantify/error.hpp"
#include "semantify/external_backend.hpp"
#include "semantify/plot.hpp"

namespace semantify {

using nlohmann::json;

namespace {

std::string path_string(const std::filesystem::path& p) { return p.generic_string(); }

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void require_exists(const std::filesystem::path& p, const std::string& what) {
  if (!std::filesystem::exists(p)) throw IoError(fmt::format("{} '{}' does not exist", what, p.string()));
}

}  // namespace

void write_run_record(const std::filesystem::path& out, const std::string& command, std::uint64_t seed,
                      const json& parameters) {
  std::vector<std::string> files;
  if (std::filesystem::exists(out)) {
    for (const auto& e : std::filesystem::recursive_directory_iterator(out)) {
      if (!e.is_regular_file()) continue;
      const auto rel = std::filesystem::relative(e.path(), out).generic_string();
      if (rel != "run.json") files.push_back(rel);
    }
  }
  std::sort(files.begin(), files.end());
  const json j = {{"command", command},
                  {"version", kVersion},
                  {"seed", seed},
                  {"parameters", parameters},
                  {"outputs", files}};
  write_text_file(out / "run.json", j.dump(1) + "\n");
}

DatasetManifest run_build_dataset(const BuildDatasetArgs& args) {
  require_exists(args.model, "model");
  const MorphableModel model = load_model(args.model);
  RenderConfig cfg = RenderConfig::defaults_for(model.family());
  if (args.views) cfg.views = RenderConfig::orbit_views(*args.views);
  cfg.image_size = args.image_size;
  cfg.texture_pool_size = args.texture_pool_size;
  cfg.validate();
  const SoftwareRasterizer renderer;
  DatasetManifest manifest = build_dataset(model, args.n, cfg, renderer, args.out, args.seed, args.distribution);
  write_run_record(args.out, "build-dataset", args.seed,
                   {{"model", path_string(args.model)},
                    {"n", args.n},
                    {"views", cfg.views.size()},
                    {"image_size", cfg.image_size},
                    {"texture_pool_size", cfg.texture_pool_size},
                    {"distribution", args.distribution == SamplingDistribution::uniform ? "uniform" : "truncated_normal"},
                    {"records", manifest.records.size()},
                    {"gaps", manifest.gaps.size()}});
  return manifest;
}

ScoredDataset run_score(const ScoreArgs& args) {
  require_exists(args.dataset, "dataset");
  require_exists(args.descriptors, "descriptor list");
  const DatasetManifest manifest = load_manifest(args.dataset);
  const auto descriptors = read_descriptor_list(args.descriptors);
  const ScoringOptions options{args.view_agg, args.prompt_template};

  std::unique_ptr<ScorerBackend> backend;
  json backend_params;
  if (args.backend == "synthetic") {
    std::unique_ptr<SyntheticBackend> synth;
    if (args.synthetic_config && !args.gain) {
      require_exists(*args.synthetic_config, "synthetic backend config");
      const SyntheticBackend loaded = load_synthetic_backend(*args.synthetic_config, {args.dataset});
      CoefficientProxy proxy;
      proxy.add_manifest(manifest);
      synth = std::make_unique<SyntheticBackend>(descriptors, loaded.gain(), loaded.bias(), std::move(proxy),
                                                 args.prompt_template);
    } else {
      const SyntheticGain g =
          args.gain ? *args.gain
                    : random_synthetic_gain(descriptors.size(), args.seed, args.gain_scale, args.gain_bias);
      CoefficientProxy proxy;
      proxy.add_manifest(manifest);
      synth = std::make_unique<SyntheticBackend>(descriptors, g.gain, g.bias, std::move(proxy), args.prompt_template);
    }
    std::filesystem::create_directories(args.out);
    save_synthetic_backend_config(args.out / "synthetic_backend.json", *synth, {args.dataset});
    backend_params = {{"kind", "synthetic"}, {"alpha", synth->alpha()}};
    backend = std::move(synth);
  } else if (args.backend == "external") {
    backend = std::make_unique<ExternalBackend>(args.endpoint);
    backend_params = {{"kind", "external"}, {"endpoint", args.endpoint}};
  } else {
    throw ArgumentError(fmt::format("unknown scorer backend '{}' (synthetic|external)", args.backend));
  }

  ScoredDataset scored = score_dataset_with_embeddings(manifest, descriptors, *backend, options);
  write_score_table(scored.table, args.out);
  write_embeddings(scored, args.out);
  write_run_record(args.out, "score", args.seed,
                   {{"dataset", path_string(args.dataset)},
                    {"descriptors", path_string(args.descriptors)},
                    {"backend", backend_params},
                    {"view_agg", std::string(to_string(args.view_agg))},
                    {"prompt_template", args.prompt_template},
                    {"samples", scored.table.sample_ids.size()},
                    {"dropped", scored.table.dropped.size()}});
  return scored;
}

SelectionResult run_select(const SelectArgs& args) {
  require_exists(args.scores, "scores");
  const ScoreTable table = read_score_table(args.scores);
  const auto emb_dir = args.embeddings.value_or(args.scores.parent_path());

  Eigen::MatrixXd image_emb;
  Eigen::MatrixXd text_emb;
  std::string features;
  if (std::filesystem::exists(emb_dir / "embeddings.bin")) {
    const EmbeddingFile emb = read_embeddings(emb_dir);
    std::map<std::string, Eigen::Index> row_of;
    for (std::size_t i = 0; i < emb.sample_ids.size(); ++i) row_of[emb.sample_ids[i]] = static_cast<Eigen::Index>(i);
    image_emb.resize(static_cast<Eigen::Index>(table.sample_ids.size()), emb.image_embeddings.cols());
    for (std::size_t i = 0; i < table.sample_ids.size(); ++i) {
      const auto it = row_of.find(table.sample_ids[i]);
      if (it == row_of.end()) throw DataError(fmt::format("no embedding for sample '{}'", table.sample_ids[i]));
      image_emb.row(static_cast<Eigen::Index>(i)) = emb.image_embeddings.row(it->second);
    }
    std::map<std::string, Eigen::Index> desc_row;
    for (std::size_t j = 0; j < emb.descriptor_ids.size(); ++j)
      desc_row[emb.descriptor_ids[j]] = static_cast<Eigen::Index>(j);
    text_emb.resize(static_cast<Eigen::Index>(table.descriptors.size()), emb.text_embeddings.cols());
    for (std::size_t j = 0; j < table.descriptors.size(); ++j) {
      const auto it = desc_row.find(table.descriptors[j].id);
      if (it == desc_row.end())
        throw DataError(fmt::format("no embedding for descriptor '{}'", table.descriptors[j].id));
      text_emb.row(static_cast<Eigen::Index>(j)) = emb.text_embeddings.row(it->second);
    }
    features = "embeddings";
  } else {
    // Score rows stand in for image embeddings; voting then ranks descriptors
    // by score directly.
    image_emb = table.scores;
    text_emb = Eigen::MatrixXd::Identity(table.scores.cols(), table.scores.cols());
    features = "scores";
    spdlog::warn("no embeddings next to '{}'; clustering on score rows", args.scores.string());
  }

  Lexicon lexicon;
  if (args.lexicon) lexicon = Lexicon::load(*args.lexicon);
  const SelectionOptions options{args.preset, args.target_d};
  const SelectionResult result =
      run_selection(table, image_emb, text_emb, lexicon, options, args.k_min, args.k_max, args.seed);

  write_selection(result, args.out / "selection.json");
  const CorrelationMatrix corr = correlation_matrix(table);
  write_png(args.out / "correlation.png", correlation_heatmap(corr.values));
  json preset = args.preset;
  write_run_record(args.out, "select", args.seed,
                   {{"scores", path_string(args.scores)},
                    {"lexicon", args.lexicon ? json(path_string(*args.lexicon)) : json(nullptr)},
                    {"preset", preset},
                    {"target_d", args.target_d ? json(*args.target_d) : json(nullptr)},
                    {"k_range", {args.k_min, args.k_max}},
                    {"cluster_features", features},
                    {"correlation_png_order", corr.ids}});
  return result;
}

MapperArtifact run_train(const TrainArgs& args) {
  require_exists(args.scores, "scores");
  require_exists(args.selection, "selection");
  require_exists(args.dataset, "dataset");
  const SelectionResult selection = read_selection(args.selection);
  const ScoreTable table = read_score_table(args.scores).restricted(selection.chosen_ids());
  const DatasetManifest manifest = load_manifest(args.dataset);
  const CoefficientTable coeffs = read_coefficients_csv(args.dataset / "coeffs.csv");
  MapperArtifact art = train_mapper(table, coeffs, args.config, manifest.model_id, args.mapper_id);
  save_mapper(art, args.out);
  write_png(args.out / "training_curve.png", training_curve(art.training_log));
  const auto& c = args.config;
  write_run_record(args.out, "train", c.seed,
                   {{"scores", path_string(args.scores)},
                    {"selection", path_string(args.selection)},
                    {"dataset", path_string(args.dataset)},
                    {"mapper_id", args.mapper_id},
                    {"hidden", c.hidden},
                    {"epochs", c.epochs},
                    {"batch_size", c.batch_size},
                    {"learning_rate", c.learning_rate},
                    {"val_fraction", c.val_fraction},
                    {"loss", c.squared_loss ? "squared_l2" : "l2"},
                    {"lr_schedule", c.cosine_decay ? "cosine" : "constant"}});
  return art;
}

CoverageReport run_coverage(const CoverageArgs& args) {
  require_exists(args.mapper, "mapper");
  require_exists(args.model, "model");
  const MapperArtifact art = load_mapper(args.mapper);
  const MorphableModel model = load_model(args.model);
  if (art.model_id != model.model_id())
    throw DataError(fmt::format("mapper '{}' was trained on model '{}', not '{}'", art.mapper_id, art.model_id,
                                model.model_id()));
  std::vector<EffectField> fields;
  for (const auto& id : art.descriptor_ids()) fields.push_back(effect_field(art, model, id));
  const CoverageReport report = coverage_from_fields(fields, static_cast<std::size_t>(model.vertex_count()), args.tau);
  std::filesystem::create_directories(args.out);
  write_text_file(args.out / "coverage.json", to_json(report).dump(1) + "\n");
  const SoftwareRasterizer renderer;
  for (const auto& f : fields) {
    write_effect_csv(f, args.out / fmt::format("effect_{}.csv", f.descriptor_id));
    if (args.render)
      write_png(args.out / fmt::format("effect_{}.png", f.descriptor_id),
                effect_render(art, model, f, renderer, {}, args.image_size));
  }
  write_run_record(args.out, "coverage", 0,
                   {{"mapper", path_string(args.mapper)}, {"model", path_string(args.model)}, {"tau", args.tau}});
  return report;
}

FitResult run_fit_target(const FitTargetArgs& args) {
  require_exists(args.mapper, "mapper");
  require_exists(args.model, "model");
  const MapperArtifact art = load_mapper(args.mapper);
  const MorphableModel model = load_model(args.model);
  if (args.xi.has_value() == args.omega.has_value())
    throw ArgumentError("give exactly one of a target coefficient vector or a target score vector");
  const CoefficientVector target = args.xi ? *args.xi : predict(art, *args.omega);
  const FitResult r = fit_target(art, model, target, args.options);
  std::filesystem::create_directories(args.out);
  json j = to_json(r);
  j["target_xi"] = std::vector<double>(target.data(), target.data() + target.size());
  write_text_file(args.out / "fit.json", j.dump(1) + "\n");
  write_run_record(args.out, "fit-target", 0,
                   {{"mapper", path_string(args.mapper)},
                    {"model", path_string(args.model)},
                    {"target_omega", args.omega ? json(to_vector(*args.omega)) : json(nullptr)},
                    {"lr", args.options.lr},
                    {"max_steps", args.options.max_steps},
                    {"tol", args.options.tol},
                    {"adaptive", args.options.adaptive}});
  return r;
}

ZeroShotResult run_fit_image(const FitImageArgs& args) {
  require_exists(args.mapper, "mapper");
  require_exists(args.image, "image");
  const MapperArtifact art = load_mapper(args.mapper);
  const Image image = read_png(args.image);

  std::unique_ptr<ScorerBackend> backend;
  std::string prompt_template;
  if (args.backend == "synthetic") {
    if (!args.synthetic_config) throw ArgumentError("the synthetic backend needs its config file");
    require_exists(*args.synthetic_config, "synthetic backend config");
    auto synth = std::make_unique<SyntheticBackend>(load_synthetic_backend(*args.synthetic_config, args.proxy_datasets));
    prompt_template = synth->prompt_template();
    backend = std::move(synth);
  } else if (args.backend == "external") {
    backend = std::make_unique<ExternalBackend>(args.endpoint);
  } else {
    throw ArgumentError(fmt::format("unknown scorer backend '{}' (synthetic|external)", args.backend));
  }
  const ZeroShotResult r = zero_shot_fit(image, *backend, art, prompt_template);

  std::filesystem::create_directories(args.out);
  const json j = {{"mapper_id", art.mapper_id},
                  {"descriptors", art.descriptor_ids()},
                  {"scores", to_vector(r.omega)},
                  {"xi", std::vector<double>(r.xi.data(), r.xi.data() + r.xi.size())}};
  write_text_file(args.out / "zero_shot.json", j.dump(1) + "\n");
  if (args.model) {
    const MorphableModel model = load_model(*args.model);
    RenderRequest req;
    req.image_size = image.width;
    write_png(args.out / "prediction.png", SoftwareRasterizer().render(synthesize(model, r.xi), req));
  }
  write_run_record(args.out, "fit-image", 0,
                   {{"mapper", path_string(args.mapper)}, {"image", path_string(args.image)}, {"backend", args.backend}});
  return r;
}

}  // namespace semantify
