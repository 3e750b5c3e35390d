#include "argf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace argf {

using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

constexpr std::size_t kEvalChunk = 256;

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

// -- RunConfig ------------------------------------------------------------------

void RunConfig::validate() const {
  if (k == 0) throw std::runtime_error("config: k must be >= 1");
  if (lambda < 0.0 || lambda > 1.0) throw std::runtime_error("config: lambda must be in [0,1]");
  if (!(lr_embedding > 0.0)) throw std::runtime_error("config: lr_embedding must be > 0");
  if (!(lr_gfn > 0.0)) throw std::runtime_error("config: lr_gfn must be > 0");
  if (batch_size == 0) throw std::runtime_error("config: batch_size must be >= 1");
  if (similarity_offset < 0.0) {
    throw std::runtime_error("config: similarity_offset must be >= 0");
  }
  if (lmf_rank == 0) throw std::runtime_error("config: lmf_rank must be >= 1");
  if (target_modality != "a" && target_modality != "v" && target_modality != "l") {
    throw std::runtime_error("config: target_modality must be one of a|v|l, got '" +
                             target_modality + "'");
  }
  try {
    fusion_kind_from_name(fusion);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
}

json config_to_json(const RunConfig& c) {
  return json{{"k", c.k},
              {"lambda", c.lambda},
              {"lr_embedding", c.lr_embedding},
              {"lr_gfn", c.lr_gfn},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"patience", c.patience},
              {"target_modality", c.target_modality},
              {"fusion", c.fusion},
              {"no_adv", c.no_adv},
              {"no_decoder", c.no_decoder},
              {"no_classifier", c.no_classifier},
              {"seed", c.seed},
              {"similarity_offset", c.similarity_offset},
              {"lmf_rank", c.lmf_rank},
              {"task_update_encoders", c.task_update_encoders},
              {"gfn_per_vertex_params", c.gfn_per_vertex_params}};
}

RunConfig config_from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("config: expected a JSON object");
  RunConfig c;
  const json defaults = config_to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (!defaults.contains(key)) {
      throw std::runtime_error("config: unknown key '" + key + "'");
    }
  }
  try {
    if (j.contains("k")) c.k = j.at("k").get<std::size_t>();
    if (j.contains("lambda")) c.lambda = j.at("lambda").get<double>();
    if (j.contains("lr_embedding")) c.lr_embedding = j.at("lr_embedding").get<double>();
    if (j.contains("lr_gfn")) c.lr_gfn = j.at("lr_gfn").get<double>();
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("epochs")) c.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("patience")) c.patience = j.at("patience").get<std::size_t>();
    if (j.contains("target_modality")) c.target_modality = j.at("target_modality").get<std::string>();
    if (j.contains("fusion")) c.fusion = j.at("fusion").get<std::string>();
    if (j.contains("no_adv")) c.no_adv = j.at("no_adv").get<bool>();
    if (j.contains("no_decoder")) c.no_decoder = j.at("no_decoder").get<bool>();
    if (j.contains("no_classifier")) c.no_classifier = j.at("no_classifier").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("similarity_offset")) c.similarity_offset = j.at("similarity_offset").get<double>();
    if (j.contains("lmf_rank")) c.lmf_rank = j.at("lmf_rank").get<std::size_t>();
    if (j.contains("task_update_encoders"))
      c.task_update_encoders = j.at("task_update_encoders").get<bool>();
    if (j.contains("gfn_per_vertex_params"))
      c.gfn_per_vertex_params = j.at("gfn_per_vertex_params").get<bool>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

// -- report serialization -----------------------------------------------------------

static json metrics_to_json(const Metrics& m) {
  return json{{"accuracy", m.accuracy},
              {"avg_f1", m.avg_f1},
              {"per_class_f1", m.per_class_f1},
              {"confusion", m.confusion}};
}

json report_to_json(const MetricsReport& r) {
  json history = json::array();
  for (const auto& e : r.history) {
    history.push_back(json{{"fal", e.losses.fal},
                           {"tal", e.losses.tal},
                           {"rl", e.losses.rl},
                           {"cl", e.losses.cl},
                           {"total", e.losses.total},
                           {"task_mse", e.task_mse},
                           {"val_accuracy", e.val_accuracy}});
  }
  return json{{"config", config_to_json(r.config)},
              {"history", history},
              {"metrics", metrics_to_json(r.test)},
              {"eval_split", r.eval_split},
              {"best_epoch", r.best_epoch},
              {"best_val_accuracy", r.best_val_accuracy},
              {"diverged", r.diverged},
              {"divergence_note", r.divergence_note}};
}

std::string report_summary(const MetricsReport& r) {
  std::ostringstream os;
  os << "split=" << r.eval_split << " accuracy=" << r.test.accuracy << " avg_f1=" << r.test.avg_f1
     << " epochs=" << r.history.size() << " best_epoch=" << r.best_epoch;
  if (r.diverged) os << " DIVERGED (" << r.divergence_note << ")";
  os << " wall_clock=" << r.wall_clock_seconds << "s";
  return os.str();
}

// -- model construction ----------------------------------------------------------

TrainedModel make_model(const RunConfig& config, std::size_t input_dim, std::size_t num_classes) {
  config.validate();
  TrainedModel model;
  model.config = config;
  model.input_dim = input_dim;
  model.num_classes = num_classes;
  Rng stage_rng(sub_seed(config.seed, 1));
  model.stage = std::make_unique<EmbeddingStage>(input_dim, config.k, num_classes,
                                                 config.target(), stage_rng);
  Rng fusion_rng(sub_seed(config.seed, 2));
  FusionOptions options;
  options.gfn.similarity_offset = config.similarity_offset;
  options.gfn.per_vertex_params = config.gfn_per_vertex_params;
  options.lmf_rank = config.lmf_rank;
  model.fusion = make_fusion(config.fusion_kind(), config.k, num_classes, options, fusion_rng);
  return model;
}

std::array<Tensor, 3> TrainedModel::embed(const ModalityBatch& batch) const {
  std::array<Tensor, 3> out;
  for (Modality m : kModalities) {
    out[index_of(m)] = stage->encode(batch.features(m), m);
  }
  return out;
}

Tensor TrainedModel::decide(const ModalityBatch& batch) const {
  auto e = embed(batch);
  return fusion->fuse(e[0], e[1], e[2]);
}

std::vector<int> TrainedModel::predict(const ModalityBatch& batch) const {
  Tensor decision = decide(batch);
  const std::size_t B = decision.rows(), N = decision.cols();
  std::vector<int> out(B, 0);
  for (std::size_t r = 0; r < B; ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < N; ++c) {
      if (decision.values()[r * N + c] > decision.values()[r * N + best]) best = c;
    }
    out[r] = static_cast<int>(best);
  }
  return out;
}

std::vector<NamedParam> TrainedModel::named_params() const {
  std::vector<NamedParam> out = stage->named_params();
  auto fp = fusion->named_params();
  out.insert(out.end(), fp.begin(), fp.end());
  return out;
}

// -- evaluation -------------------------------------------------------------------

Metrics evaluate(const TrainedModel& model, const FeatureBundle& bundle, Split split) {
  const auto indices = bundle.indices_of(split);
  std::vector<int> truth, predicted;
  truth.reserve(indices.size());
  predicted.reserve(indices.size());
  for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
    const std::size_t end = std::min(indices.size(), start + kEvalChunk);
    std::vector<std::size_t> chunk(indices.begin() + start, indices.begin() + end);
    ModalityBatch batch = make_batch(bundle, chunk);
    auto preds = model.predict(batch);
    truth.insert(truth.end(), batch.labels.begin(), batch.labels.end());
    predicted.insert(predicted.end(), preds.begin(), preds.end());
  }
  return Metrics::from_predictions(truth, predicted, bundle.num_classes);
}

// -- training ---------------------------------------------------------------------

TrainResult train(const RunConfig& config, const FeatureBundle& bundle, bool eval_test) {
  config.validate();
  bundle.validate();
  const auto t0 = std::chrono::steady_clock::now();

  TrainResult result{make_model(config, bundle.dim(), bundle.num_classes), {}};
  TrainedModel& model = result.model;
  MetricsReport& report = result.report;
  report.config = config;

  StageTrainer trainer(*model.stage, config.lr_embedding, config.ablation());
  std::vector<Tensor> task_params = model.fusion->params();
  if (config.task_update_encoders) {
    auto enc = model.stage->encoder_params();
    task_params.insert(task_params.end(), enc.begin(), enc.end());
  }
  Adam opt_task(task_params, config.lr_gfn);

  Batcher batcher(bundle, Split::Train, config.batch_size, sub_seed(config.seed, 3));

  const std::vector<Tensor> all_params = model.params();
  ParamSnapshot best = snapshot_values(all_params);
  double best_val = -1.0;
  double best_val_mse = std::numeric_limits<double>::infinity();
  std::size_t stale_epochs = 0;

  const auto val_indices = bundle.indices_of(Split::Val);
  auto val_mse = [&] {
    double total = 0.0;
    std::size_t rows = 0;
    for (std::size_t start = 0; start < val_indices.size(); start += kEvalChunk) {
      const std::size_t end = std::min(val_indices.size(), start + kEvalChunk);
      std::vector<std::size_t> chunk(val_indices.begin() + start, val_indices.begin() + end);
      ModalityBatch batch = make_batch(bundle, chunk);
      auto e = model.embed(batch);
      for (auto& t : e) t = t.detach();
      total += mse_loss(model.fusion->fuse(e[0], e[1], e[2]), batch.y).item() * chunk.size();
      rows += chunk.size();
    }
    return rows ? total / static_cast<double>(rows) : 0.0;
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    EpochRecord record;
    std::size_t batches = 0;
    try {
      for (const auto& batch : batcher.epoch()) {
        LossBreakdown lb = trainer.train_step(batch, config.lambda);

        // Task phase: MSE of the fusion decision, end to end.
        std::array<Tensor, 3> e = model.embed(batch);
        if (!config.task_update_encoders) {
          for (auto& t : e) t = t.detach();
        }
        Tensor decision = model.fusion->fuse(e[0], e[1], e[2]);
        Tensor task = mse_loss(decision, batch.y);
        const double task_value = task.item();
        if (!std::isfinite(task_value)) {
          throw DivergenceError("non-finite task mse; " + lb.str(), lb);
        }
        backward(task);
        opt_task.step();

        record.losses.fal += lb.fal;
        record.losses.tal += lb.tal;
        record.losses.rl += lb.rl;
        record.losses.cl += lb.cl;
        record.losses.total += lb.total;
        record.task_mse += task_value;
        ++batches;
      }
    } catch (const std::runtime_error& e) {
      // Divergence (non-finite loss or gradient): keep the best checkpoint.
      restore_values(all_params, best);
      report.diverged = true;
      report.divergence_note = e.what();
      break;
    }
    if (batches > 0) {
      const double inv = 1.0 / static_cast<double>(batches);
      record.losses.fal *= inv;
      record.losses.tal *= inv;
      record.losses.rl *= inv;
      record.losses.cl *= inv;
      record.losses.total *= inv;
      record.task_mse *= inv;
    }
    record.val_accuracy = evaluate(model, bundle, Split::Val).accuracy;
    report.history.push_back(record);

    // Early stopping on validation accuracy; ties go to the epoch with the
    // lower validation task MSE, so saturated runs still pick the
    // best-converged checkpoint.
    const double epoch_val_mse = val_mse();
    const bool improved = record.val_accuracy > best_val ||
                          (record.val_accuracy == best_val && epoch_val_mse < best_val_mse);
    if (improved) {
      best_val = record.val_accuracy;
      best_val_mse = epoch_val_mse;
      best = snapshot_values(all_params);
      report.best_epoch = epoch;
      stale_epochs = 0;
    } else {
      ++stale_epochs;
      if (stale_epochs >= config.patience) break;
    }
  }

  restore_values(all_params, best);
  report.best_val_accuracy = best_val < 0.0 ? 0.0 : best_val;
  if (eval_test) report.test = evaluate(model, bundle, Split::Test);
  report.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// -- grid search --------------------------------------------------------------------

std::vector<RunConfig> expand_grid(const json& grid_json) {
  if (!grid_json.is_object()) throw std::runtime_error("grid: expected a JSON object");
  std::vector<json> points{json::object()};
  for (const auto& [key, value] : grid_json.items()) {
    if (value.is_array()) {
      if (value.empty()) throw std::runtime_error("grid: key '" + key + "' has no values");
      std::vector<json> expanded;
      expanded.reserve(points.size() * value.size());
      for (const auto& p : points) {
        for (const auto& v : value) {
          json q = p;
          q[key] = v;
          expanded.push_back(std::move(q));
        }
      }
      points = std::move(expanded);
    } else {
      for (auto& p : points) p[key] = value;
    }
  }
  std::vector<RunConfig> configs;
  configs.reserve(points.size());
  for (const auto& p : points) configs.push_back(config_from_json(p));
  return configs;
}

GridSearchResult grid_search(const std::vector<RunConfig>& grid, const FeatureBundle& bundle,
                             std::size_t jobs) {
  if (grid.empty()) throw std::runtime_error("grid: no configurations");
  jobs = std::max<std::size_t>(1, std::min(jobs, grid.size()));

  std::vector<GridPoint> points(grid.size());
  std::vector<std::unique_ptr<TrainResult>> results(grid.size());
  std::vector<std::exception_ptr> errors(jobs);

  auto run_range = [&](std::size_t worker) {
    try {
      for (std::size_t i = worker; i < grid.size(); i += jobs) {
        auto r = std::make_unique<TrainResult>(train(grid[i], bundle, /*eval_test=*/false));
        points[i] = {grid[i], r->report.best_val_accuracy, r->report.diverged};
        results[i] = std::move(r);
      }
    } catch (...) {
      errors[worker] = std::current_exception();
    }
  };
  if (jobs == 1) {
    run_range(0);
  } else {
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) workers.emplace_back(run_range, w);
    for (auto& t : workers) t.join();
  }
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }

  // Rank by validation accuracy; break ties on the canonical config text so
  // the result does not depend on enumeration order.
  std::vector<std::size_t> order(grid.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].val_accuracy != points[b].val_accuracy) {
      return points[a].val_accuracy > points[b].val_accuracy;
    }
    return config_to_json(points[a].config).dump() < config_to_json(points[b].config).dump();
  });

  GridSearchResult out;
  for (std::size_t i : order) out.ranking.push_back(points[i]);
  TrainResult& winner = *results[order[0]];
  winner.report.test = evaluate(winner.model, bundle, Split::Test);
  out.best_report = std::move(winner.report);
  return out;
}

json grid_result_to_json(const GridSearchResult& result) {
  json ranking = json::array();
  for (const auto& p : result.ranking) {
    ranking.push_back(json{{"config", config_to_json(p.config)},
                           {"val_accuracy", p.val_accuracy},
                           {"diverged", p.diverged}});
  }
  return json{{"ranking", ranking}, {"best", report_to_json(result.best_report)}};
}

// -- ablations & comparison ------------------------------------------------------------

std::vector<NamedReport> run_ablations(const RunConfig& base, const FeatureBundle& bundle) {
  std::vector<NamedReport> rows;
  auto run_with = [&](const std::string& name, auto mutate) {
    RunConfig cfg = base;
    mutate(cfg);
    rows.push_back({name, train(cfg, bundle).report});
  };
  run_with("full", [](RunConfig&) {});
  run_with("no_adv", [](RunConfig& c) { c.no_adv = true; });
  run_with("no_classifier", [](RunConfig& c) { c.no_classifier = true; });
  run_with("no_decoder", [](RunConfig& c) { c.no_decoder = true; });
  return rows;
}

std::vector<NamedReport> run_comparison(const RunConfig& base, const FeatureBundle& bundle) {
  std::vector<NamedReport> rows;
  for (FusionKind kind : all_fusion_kinds()) {
    RunConfig cfg = base;
    cfg.fusion = fusion_kind_name(kind);
    rows.push_back({cfg.fusion, train(cfg, bundle).report});
  }
  return rows;
}

json named_reports_to_json(const std::vector<NamedReport>& rows) {
  json out = json::array();
  for (const auto& row : rows) {
    out.push_back(json{{"name", row.name}, {"report", report_to_json(row.report)}});
  }
  return out;
}

std::string named_reports_table(const std::vector<NamedReport>& rows) {
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%-16s %10s %10s %8s\n", "variant", "accuracy", "avg_f1",
                "epochs");
  os << buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%-16s %10.4f %10.4f %8zu%s\n", row.name.c_str(),
                  row.report.test.accuracy, row.report.test.avg_f1, row.report.history.size(),
                  row.report.diverged ? "  (diverged)" : "");
    os << buf;
  }
  return os.str();
}

// -- exports ------------------------------------------------------------------------------

namespace {

std::vector<std::size_t> export_indices(const FeatureBundle& bundle, std::optional<Split> split) {
  if (split) return bundle.indices_of(*split);
  std::vector<std::size_t> all(bundle.count);
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return all;
}

}  // namespace

void export_embeddings(const TrainedModel& model, const FeatureBundle& bundle,
                       const std::string& path, std::optional<Split> split) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto indices = export_indices(bundle, split);
  for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
    const std::size_t end = std::min(indices.size(), start + kEvalChunk);
    std::vector<std::size_t> chunk(indices.begin() + start, indices.begin() + end);
    ModalityBatch batch = make_batch(bundle, chunk);
    auto e = model.embed(batch);
    const std::size_t B = chunk.size(), k = model.config.k;
    for (std::size_t r = 0; r < B; ++r) {
      for (std::size_t m = 0; m < 3; ++m) {
        for (std::size_t c = 0; c < k; ++c) {
          if (m || c) out << ',';
          out << fmt_double(e[m].values()[r * k + c]);
        }
      }
      out << ',' << batch.labels[r] << '\n';
    }
  }
}

void export_graph_weights(const TrainedModel& model, const FeatureBundle& bundle,
                          const std::string& path, std::optional<Split> split) {
  const auto* gfn = dynamic_cast<const GraphFusion*>(model.fusion.get());
  if (!gfn) {
    throw std::runtime_error("export_graph_weights: model uses fusion '" +
                             model.fusion->kind() + "', need gfn");
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  const auto indices = export_indices(bundle, split);
  for (std::size_t start = 0; start < indices.size(); start += kEvalChunk) {
    const std::size_t end = std::min(indices.size(), start + kEvalChunk);
    std::vector<std::size_t> chunk(indices.begin() + start, indices.begin() + end);
    ModalityBatch batch = make_batch(bundle, chunk);
    auto e = model.embed(batch);
    GfnGraph graph = gfn->forward(e[0], e[1], e[2]);
    const auto weights = graph.vertex_weight_rows();
    for (std::size_t r = 0; r < chunk.size(); ++r) {
      for (std::size_t c = 0; c < 12; ++c) {
        if (c) out << ',';
        out << fmt_double(weights[r * 12 + c]);
      }
      out << '\n';
    }
  }
}

// -- persistence ----------------------------------------------------------------------------

void save_model(const TrainedModel& model, const std::string& path) {
  json params = json::object();
  for (const auto& np : model.named_params()) {
    params[np.name] = np.tensor.values();
  }
  json doc{{"format", "argf-model"},
           {"input_dim", model.input_dim},
           {"num_classes", model.num_classes},
           {"config", config_to_json(model.config)},
           {"params", params}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

TrainedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  if (!doc.contains("format") || doc["format"] != "argf-model") {
    throw std::runtime_error(path + ": not an argf model file");
  }
  RunConfig config = config_from_json(doc.at("config"));
  TrainedModel model = make_model(config, doc.at("input_dim").get<std::size_t>(),
                                  doc.at("num_classes").get<std::size_t>());
  const json& params = doc.at("params");
  auto named = model.named_params();
  for (const auto& np : named) {
    if (!params.contains(np.name)) {
      throw std::runtime_error(path + ": missing parameter '" + np.name + "'");
    }
    const auto values = params.at(np.name).get<std::vector<double>>();
    Tensor handle = np.tensor;
    handle.set_values(values);
  }
  if (params.size() != named.size()) {
    throw std::runtime_error(path + ": parameter count mismatch (file has " +
                             std::to_string(params.size()) + ", model expects " +
                             std::to_string(named.size()) + ")");
  }
  return model;
}

}  // namespace argf
