#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "argf/data.hpp"
#include "argf/metrics.hpp"
#include "argf/model.hpp"
#include "argf/zoo.hpp"

namespace argf {

/// All hyperparameters of one run. JSON keys match the field names; any key
/// can also be given as a same-named CLI flag.
struct RunConfig {
  std::size_t k = 50;
  double lambda = 0.5;
  double lr_embedding = 1e-3;
  double lr_gfn = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 200;
  std::size_t patience = 20;
  std::string target_modality = "l";
  std::string fusion = "gfn";
  bool no_adv = false;
  bool no_decoder = false;
  bool no_classifier = false;
  std::uint64_t seed = 0;
  double similarity_offset = 0.5;
  std::size_t lmf_rank = 4;
  bool task_update_encoders = true;
  bool gfn_per_vertex_params = false;

  void validate() const;
  AblationFlags ablation() const { return {no_adv, no_decoder, no_classifier}; }
  Modality target() const { return modality_from_tag(target_modality.at(0)); }
  FusionKind fusion_kind() const { return fusion_kind_from_name(fusion); }
};

nlohmann::json config_to_json(const RunConfig& config);
/// Overlays `j` onto defaults. Unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);

/// Per-epoch training record.
struct EpochRecord {
  LossBreakdown losses;   // batch means of the embedding-stage losses
  double task_mse = 0.0;  // batch mean of the fusion MSE
  double val_accuracy = 0.0;
};

struct MetricsReport {
  RunConfig config;
  std::vector<EpochRecord> history;
  Metrics test;
  std::string eval_split = "test";
  std::size_t best_epoch = 0;  // 1-based; 0 = untrained
  double best_val_accuracy = 0.0;
  bool diverged = false;
  std::string divergence_note;  // diagnostic dump of the aborting loss
  /// Measured but not serialized, so identical runs emit identical JSON.
  double wall_clock_seconds = 0.0;
};

nlohmann::json report_to_json(const MetricsReport& report);
std::string report_summary(const MetricsReport& report);

/// The embedding stage plus a fusion head, as trained or loaded from disk.
struct TrainedModel {
  RunConfig config;
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::unique_ptr<EmbeddingStage> stage;
  std::unique_ptr<Fusion> fusion;

  std::array<Tensor, 3> embed(const ModalityBatch& batch) const;
  Tensor decide(const ModalityBatch& batch) const;  // (B,N) decision distribution
  std::vector<int> predict(const ModalityBatch& batch) const;
  std::vector<NamedParam> named_params() const;
  std::vector<Tensor> params() const { return tensors_of(named_params()); }
};

/// Fresh model with seeded initialization (deterministic per config.seed).
TrainedModel make_model(const RunConfig& config, std::size_t input_dim, std::size_t num_classes);

struct TrainResult {
  TrainedModel model;
  MetricsReport report;
};

/// Full training loop: per batch the three embedding-stage phases followed
/// by a task update minimizing MSE of the fusion output; early stopping on
/// validation accuracy; best-validation parameters restored at the end.
/// On divergence the best checkpoint is retained and report.diverged set.
TrainResult train(const RunConfig& config, const FeatureBundle& bundle, bool eval_test = true);

Metrics evaluate(const TrainedModel& model, const FeatureBundle& bundle, Split split);

// -- grid search ---------------------------------------------------------------

struct GridPoint {
  RunConfig config;
  double val_accuracy = 0.0;
  bool diverged = false;
};

struct GridSearchResult {
  std::vector<GridPoint> ranking;  // best first
  MetricsReport best_report;       // test metrics for the top config only
};

/// Expands a config JSON whose values may be arrays into the cross product.
std::vector<RunConfig> expand_grid(const nlohmann::json& grid_json);
GridSearchResult grid_search(const std::vector<RunConfig>& grid, const FeatureBundle& bundle,
                             std::size_t jobs = 1);
nlohmann::json grid_result_to_json(const GridSearchResult& result);

// -- ablations & strategy comparison ---------------------------------------------

struct NamedReport {
  std::string name;
  MetricsReport report;
};

/// Four rows: full, no_adv, no_classifier, no_decoder.
std::vector<NamedReport> run_ablations(const RunConfig& base, const FeatureBundle& bundle);
/// Six rows: every fusion strategy under the same embedding stage setup.
std::vector<NamedReport> run_comparison(const RunConfig& base, const FeatureBundle& bundle);
nlohmann::json named_reports_to_json(const std::vector<NamedReport>& rows);
std::string named_reports_table(const std::vector<NamedReport>& rows);

// -- exports ---------------------------------------------------------------------

/// CSV of per-sample encoder outputs: 3k embedding values then the label.
void export_embeddings(const TrainedModel& model, const FeatureBundle& bundle,
                       const std::string& path, std::optional<Split> split = std::nullopt);
/// CSV of per-sample GFN vertex weights, 12 columns in kVertexNames order.
/// Requires a gfn fusion head.
void export_graph_weights(const TrainedModel& model, const FeatureBundle& bundle,
                          const std::string& path, std::optional<Split> split = std::nullopt);

// -- model persistence -------------------------------------------------------------

void save_model(const TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

}  // namespace argf
