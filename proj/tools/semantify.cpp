// Command line driver for the descriptor-to-shape pipeline.
//
// Exit codes: 0 success, 2 usage or missing input, 3 data error, 1 anything
// else.

#include <csignal>
#include <iostream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>
#include "CLI11.hpp"

#include "semantify/error.hpp"
#include "semantify/pipeline.hpp"
#include "semantify/procedural.hpp"
#include "semantify/service.hpp"

namespace {

using namespace semantify;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

SamplingDistribution parse_distribution(const std::string& s) {
  if (s == "uniform") return SamplingDistribution::uniform;
  if (s == "truncated_normal") return SamplingDistribution::truncated_normal;
  throw ArgumentError(fmt::format("unknown distribution '{}' (uniform|truncated_normal)", s));
}

CoefficientVector to_coefficients(const std::vector<double>& v) {
  if (v.size() != static_cast<std::size_t>(kNumCoefficients))
    throw ArgumentError(fmt::format("--xi needs {} values, got {}", kNumCoefficients, v.size()));
  return Eigen::Map<const CoefficientVector>(v.data());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic descriptor sliders for 3D morphable models"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  // make-toy-model
  std::filesystem::path toy_out;
  int toy_rings = 60, toy_segments = 32;
  std::string toy_dtype = "f32";
  auto* toy = app.add_subcommand("make-toy-model", "Write the procedural demo body model");
  toy->add_option("--out", toy_out, "Archive path (directory or .zip)")->required();
  toy->add_option("--rings", toy_rings, "Latitude rings")->check(CLI::Range(4, 2000));
  toy->add_option("--segments", toy_segments, "Longitude segments")->check(CLI::Range(3, 2000));
  toy->add_option("--dtype", toy_dtype, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));

  // build-dataset
  BuildDatasetArgs bd;
  int bd_views = 0;
  std::string bd_dist = "uniform";
  auto* build = app.add_subcommand("build-dataset", "Sample coefficients and render views");
  build->add_option("--model", bd.model, "Model archive")->required();
  build->add_option("--n", bd.n, "Number of samples");
  build->add_option("--views", bd_views, "Views per sample (family default when omitted)");
  build->add_option("--image-size", bd.image_size, "Square image size in pixels");
  build->add_option("--texture-pool", bd.texture_pool_size, "Number of skin textures to cycle");
  build->add_option("--seed", bd.seed, "Random seed");
  build->add_option("--distribution", bd_dist, "uniform or truncated_normal");
  build->add_option("--out", bd.out, "Output directory")->required();

  // score
  ScoreArgs sc;
  std::string sc_agg = "mean";
  std::filesystem::path sc_config;
  auto* score_cmd = app.add_subcommand("score", "Score every sample against the descriptor list");
  score_cmd->add_option("--dataset", sc.dataset, "Dataset directory")->required();
  score_cmd->add_option("--descriptors", sc.descriptors, "words.txt, one descriptor per line")->required();
  score_cmd->add_option("--backend", sc.backend, "synthetic or external")->check(CLI::IsMember({"synthetic", "external"}));
  score_cmd->add_option("--endpoint", sc.endpoint, "External embedding server base URL");
  score_cmd->add_option("--synthetic-config", sc_config, "Reuse the gain of an existing synthetic_backend.json");
  score_cmd->add_option("--gain-scale", sc.gain_scale, "Std-dev of the random synthetic gain");
  score_cmd->add_option("--gain-bias", sc.gain_bias, "Constant synthetic bias");
  score_cmd->add_option("--view-agg", sc_agg, "mean or max")->check(CLI::IsMember({"mean", "max"}));
  score_cmd->add_option("--prompt-template", sc.prompt_template, "Text with a {descriptor} placeholder");
  score_cmd->add_option("--seed", sc.seed, "Seed for the synthetic gain");
  score_cmd->add_option("--out", sc.out, "Output directory")->required();

  // select
  SelectArgs se;
  std::filesystem::path se_lexicon, se_embeddings;
  std::size_t se_d = 0;
  auto* select = app.add_subcommand("select", "Choose a disentangled descriptor subset");
  select->add_option("--scores", se.scores, "scores.csv")->required();
  select->add_option("--lexicon", se_lexicon, "Synonym/antonym JSON");
  select->add_option("--embeddings", se_embeddings, "Directory with embeddings.bin");
  select->add_option("--preset", se.preset, "Descriptors that are always kept")->delimiter(',');
  select->add_option("--d", se_d, "Exact number of descriptors");
  select->add_option("--k-min", se.k_min, "Smallest cluster count");
  select->add_option("--k-max", se.k_max, "Largest cluster count");
  select->add_option("--seed", se.seed, "Clustering seed");
  select->add_option("--out", se.out, "Output directory")->required();

  // train
  TrainArgs tr;
  std::string tr_loss = "l2";
  auto* train = app.add_subcommand("train", "Fit the score-to-coefficient network");
  train->add_option("--scores", tr.scores, "scores.csv")->required();
  train->add_option("--selection", tr.selection, "selection.json")->required();
  train->add_option("--dataset", tr.dataset, "Dataset directory (coefficients)")->required();
  train->add_option("--hidden", tr.config.hidden, "Hidden widths")->delimiter(',');
  train->add_option("--epochs", tr.config.epochs, "Epochs");
  train->add_option("--batch-size", tr.config.batch_size, "Mini-batch size");
  train->add_option("--lr", tr.config.learning_rate, "Learning rate");
  train->add_option("--val-fraction", tr.config.val_fraction, "Held-out fraction");
  train->add_option("--loss", tr_loss, "l2 or squared_l2")->check(CLI::IsMember({"l2", "squared_l2"}));
  train->add_flag("--cosine-decay", tr.config.cosine_decay, "Anneal the learning rate to zero");
  train->add_option("--seed", tr.config.seed, "Training seed");
  train->add_option("--id", tr.mapper_id, "Mapper id");
  train->add_option("--out", tr.out, "Output directory")->required();

  // coverage
  CoverageArgs cv;
  bool cv_no_render = false;
  auto* coverage = app.add_subcommand("coverage", "Per-descriptor effect fields, coverage and overlap");
  coverage->add_option("--mapper", cv.mapper, "Mapper directory")->required();
  coverage->add_option("--model", cv.model, "Model archive")->required();
  coverage->add_option("--tau", cv.tau, "Coverage threshold in (0, 1)");
  coverage->add_flag("--no-render", cv_no_render, "Skip the heat renders");
  coverage->add_option("--image-size", cv.image_size, "Heat render size");
  coverage->add_option("--out", cv.out, "Output directory")->required();

  // fit-target
  FitTargetArgs ft;
  std::vector<double> ft_xi, ft_omega;
  bool ft_fixed = false;
  auto* fit_target_cmd = app.add_subcommand("fit-target", "Optimize descriptor scores towards a coefficient target");
  fit_target_cmd->add_option("--mapper", ft.mapper, "Mapper directory")->required();
  fit_target_cmd->add_option("--model", ft.model, "Model archive")->required();
  auto* xi_opt = fit_target_cmd->add_option("--xi", ft_xi, "Target coefficients (10 values)")->delimiter(',');
  auto* omega_opt =
      fit_target_cmd->add_option("--omega", ft_omega, "Target = prediction at these scores")->delimiter(',');
  xi_opt->excludes(omega_opt);
  fit_target_cmd->add_option("--lr", ft.options.lr, "Initial step size");
  fit_target_cmd->add_option("--max-steps", ft.options.max_steps, "Step cap")->check(CLI::Range(0, kMaxFitSteps));
  fit_target_cmd->add_option("--tol", ft.options.tol, "Stop when the error is below this");
  fit_target_cmd->add_flag("--fixed-step", ft_fixed, "Plain gradient descent with constant step");
  fit_target_cmd->add_option("--out", ft.out, "Output directory")->required();

  // fit-image
  FitImageArgs fi;
  std::filesystem::path fi_config, fi_model;
  auto* fit_image = app.add_subcommand("fit-image", "Zero-shot coefficients for one image");
  fit_image->add_option("--mapper", fi.mapper, "Mapper directory")->required();
  fit_image->add_option("--image", fi.image, "PNG image")->required();
  fit_image->add_option("--backend", fi.backend, "synthetic or external")->check(CLI::IsMember({"synthetic", "external"}));
  fit_image->add_option("--synthetic-config", fi_config, "synthetic_backend.json");
  fit_image->add_option("--proxy-dataset", fi.proxy_datasets, "Extra datasets the synthetic backend may see");
  fit_image->add_option("--endpoint", fi.endpoint, "External embedding server base URL");
  fit_image->add_option("--model", fi_model, "Model archive; renders the prediction");
  fit_image->add_option("--out", fi.out, "Output directory")->required();

  // serve
  std::filesystem::path sv_config, sv_artifacts, sv_mapper, sv_model, sv_synth;
  std::string sv_backend, sv_endpoint, sv_host;
  int sv_port = -1;
  auto* serve = app.add_subcommand("serve", "HTTP service for the slider UI");
  serve->add_option("--config", sv_config, "Service config JSON");
  serve->add_option("--artifact-dir", sv_artifacts, "Artifact directory");
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--port", sv_port, "Port (0 picks a free one)");
  serve->add_option("--scorer-backend", sv_backend, "none, external or synthetic");
  serve->add_option("--scorer-endpoint", sv_endpoint, "External embedding server base URL");
  serve->add_option("--synthetic-config", sv_synth, "synthetic_backend.json");
  serve->add_option("--mapper", sv_mapper, "Publish this mapper directory before serving");
  serve->add_option("--model", sv_model, "Publish this model archive before serving");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*toy) {
      save_model(make_toy_body_model(toy_rings, toy_segments), toy_out,
                 toy_dtype == "f64" ? ArchiveDtype::f64 : ArchiveDtype::f32);
      std::cout << fmt::format("wrote {}\n", toy_out.string());
    } else if (*build) {
      if (bd_views > 0) bd.views = bd_views;
      bd.distribution = parse_distribution(bd_dist);
      const auto m = run_build_dataset(bd);
      std::cout << fmt::format("{} samples ({} gaps) in {}\n", m.records.size(), m.gaps.size(), bd.out.string());
    } else if (*score_cmd) {
      sc.view_agg = parse_view_aggregation(sc_agg);
      if (!sc_config.empty()) sc.synthetic_config = sc_config;
      const auto s = run_score(sc);
      std::cout << fmt::format("scored {} samples x {} descriptors\n", s.table.sample_ids.size(),
                               s.table.descriptors.size());
    } else if (*select) {
      if (!se_lexicon.empty()) se.lexicon = se_lexicon;
      if (!se_embeddings.empty()) se.embeddings = se_embeddings;
      if (se_d > 0) se.target_d = se_d;
      const auto r = run_select(se);
      std::cout << fmt::format("chose d={} (K={}, median |corr| {:.4f})\n", r.d, r.k, r.median_threshold);
      for (const auto& d : r.chosen) std::cout << "  " << d.text << "\n";
    } else if (*train) {
      tr.config.squared_loss = tr_loss == "squared_l2";
      const auto art = run_train(tr);
      const auto& last = art.training_log.epochs.back();
      std::cout << fmt::format("trained {} on {} rows: final train loss {:.6g}, val loss {}\n", art.mapper_id,
                               art.training_log.train_rows, last.train_loss,
                               last.val_loss ? fmt::format("{:.6g}", *last.val_loss) : "n/a");
    } else if (*coverage) {
      cv.render = !cv_no_render;
      const auto r = run_coverage(cv);
      std::cout << fmt::format("tau {}: coverage {:.2f}%, overlap {:.2f}%\n", r.tau, r.coverage_pct, r.overlap_pct);
    } else if (*fit_target_cmd) {
      if (!ft_xi.empty()) ft.xi = to_coefficients(ft_xi);
      if (!ft_omega.empty())
        ft.omega = Eigen::Map<const Eigen::VectorXd>(ft_omega.data(), static_cast<Eigen::Index>(ft_omega.size()));
      ft.options.adaptive = !ft_fixed;
      const auto r = run_fit_target(ft);
      std::cout << fmt::format("error {:.6g} after {} steps ({})\n", r.error, r.steps,
                               r.converged ? "converged" : "not converged");
    } else if (*fit_image) {
      if (!fi_config.empty()) fi.synthetic_config = fi_config;
      if (!fi_model.empty()) fi.model = fi_model;
      const auto r = run_fit_image(fi);
      std::cout << "xi:";
      for (Eigen::Index i = 0; i < r.xi.size(); ++i) std::cout << fmt::format(" {:.5f}", r.xi[i]);
      std::cout << "\n";
    } else if (*serve) {
      ServiceConfig cfg = ServiceConfig::load(sv_config.empty() ? std::nullopt
                                                                : std::optional<std::filesystem::path>(sv_config));
      if (!sv_artifacts.empty()) cfg.artifact_dir = sv_artifacts;
      if (!sv_host.empty()) cfg.host = sv_host;
      if (sv_port >= 0) cfg.port = sv_port;
      if (!sv_backend.empty()) cfg.scorer_backend = sv_backend;
      if (!sv_endpoint.empty()) cfg.scorer_endpoint = sv_endpoint;
      if (!sv_synth.empty()) cfg.synthetic_config = sv_synth;
      cfg.validate();
      if (!sv_mapper.empty()) {
        if (!std::filesystem::exists(sv_mapper))
          throw IoError(fmt::format("mapper '{}' does not exist", sv_mapper.string()));
        if (!sv_model.empty() && !std::filesystem::exists(sv_model))
          throw IoError(fmt::format("model '{}' does not exist", sv_model.string()));
        publish_mapper(cfg.artifact_dir, load_mapper(sv_mapper), sv_mapper,
                       sv_model.empty() ? std::nullopt : std::optional<std::filesystem::path>(sv_model));
      }
      Service service(cfg, make_scorer_backend(cfg));
      const int port = service.bind();
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << fmt::format("listening on http://{}:{}\n", cfg.host, port) << std::flush;
      service.listen();
      g_service = nullptr;
    }
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
