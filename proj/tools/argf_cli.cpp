// argf command-line interface: training, evaluation, grid search, the
// ablation and fusion-comparison tables, gradient checking, synthetic data
// generation and the embedding/graph exports.
//
// Exit codes: 0 success, 1 error or failed validation, 2 divergence.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "argf/gradcheck.hpp"
#include "argf/harness.hpp"

using namespace argf;
using nlohmann::json;

namespace {

struct ConfigArgs {
  std::string config_path;
  json overrides = json::object();
};

// Every RunConfig key is overridable by a same-named flag; flags beat the
// config file, the file beats the defaults.
void add_config_flags(CLI::App* cmd, const std::shared_ptr<ConfigArgs>& args) {
  cmd->add_option("--config", args->config_path, "JSON config file (RunConfig keys)");
  auto opt_u64 = [cmd, args](const std::string& name, const char* desc) {
    cmd->add_option_function<std::uint64_t>(
        "--" + name, [args, name](std::uint64_t v) { args->overrides[name] = v; }, desc);
  };
  auto opt_double = [cmd, args](const std::string& name, const char* desc) {
    cmd->add_option_function<double>(
        "--" + name, [args, name](double v) { args->overrides[name] = v; }, desc);
  };
  auto opt_string = [cmd, args](const std::string& name, const char* desc) {
    cmd->add_option_function<std::string>(
        "--" + name, [args, name](const std::string& v) { args->overrides[name] = v; }, desc);
  };
  auto opt_bool = [cmd, args](const std::string& name, const char* desc) {
    cmd->add_flag_function(
        "--" + name + ",!--no-" + name,
        [args, name](std::int64_t count) { args->overrides[name] = count > 0; }, desc);
  };
  opt_u64("k", "embedding dimensionality");
  opt_double("lambda", "weight of the adversarial loss against reconstruction, in [0,1]");
  opt_double("lr_embedding", "learning rate of the embedding-stage phases");
  opt_double("lr_gfn", "learning rate of the fusion/task update");
  opt_u64("batch_size", "minibatch size");
  opt_u64("epochs", "maximum training epochs");
  opt_u64("patience", "early-stopping patience (epochs without validation improvement)");
  opt_string("target_modality", "adversarial target modality: a, v or l");
  opt_string("fusion", "fusion strategy: gfn|concat_fc|mult_fc|weighted_avg|tensor|lmf");
  opt_bool("no_adv", "ablation: drop the adversarial losses");
  opt_bool("no_decoder", "ablation: drop the reconstruction loss");
  opt_bool("no_classifier", "ablation: drop the classification loss");
  opt_u64("seed", "run seed");
  opt_double("similarity_offset", "constant added to the similarity in vertex weights");
  opt_u64("lmf_rank", "rank of the low-rank fusion factors");
  opt_bool("task_update_encoders", "let the task MSE update the encoders");
  opt_bool("gfn_per_vertex_params", "per-vertex fusion MLP parameters");
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": invalid JSON: " + e.what());
  }
  return j;
}

json merged_config_json(const ConfigArgs& args) {
  json merged = args.config_path.empty() ? json::object() : load_config_file(args.config_path);
  for (const auto& [key, value] : args.overrides.items()) merged[key] = value;
  return merged;
}

RunConfig resolve_config(const ConfigArgs& args) { return config_from_json(merged_config_json(args)); }

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::optional<Split> parse_split(const std::string& name) {
  if (name == "all") return std::nullopt;
  return split_from_name(name);
}

void print_report(const MetricsReport& report) {
  std::cout << report_summary(report) << '\n';
  std::cout << "confusion (rows = truth):\n";
  for (const auto& row : report.test.confusion) {
    for (std::size_t v : row) std::cout << '\t' << v;
    std::cout << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial multimodal fusion (ARGF): embedding stage + graph fusion network"};
  app.require_subcommand(1);

  int exit_code = 0;

  // -- synth ----------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic feature bundle");
  auto synth_spec = std::make_shared<SyntheticSpec>();
  auto synth_out = std::make_shared<std::string>();
  auto synth_noise = std::make_shared<std::vector<double>>();
  synth->add_option("--out", *synth_out, "output bundle directory")->required();
  synth->add_option("--classes", synth_spec->num_classes, "number of classes");
  synth->add_option("--dim", synth_spec->dim, "feature dimensionality per modality");
  synth->add_option("--count", synth_spec->count, "sample count");
  synth->add_option("--separation", synth_spec->separation, "class-mean separation scale");
  synth->add_option("--noise", *synth_noise, "per-modality noise sigma (1 or 3 values)")
      ->expected(1, 3);
  synth->add_option("--redundancy", synth_spec->redundancy,
                    "shared vs modality-private signal, in [0,1]");
  synth->add_option("--seed", synth_spec->seed, "generator seed");
  synth->callback([=] {
    if (synth_noise->size() == 1) {
      synth_spec->noise = {(*synth_noise)[0], (*synth_noise)[0], (*synth_noise)[0]};
    } else if (synth_noise->size() == 3) {
      synth_spec->noise = {(*synth_noise)[0], (*synth_noise)[1], (*synth_noise)[2]};
    } else if (!synth_noise->empty()) {
      throw CLI::ValidationError("--noise takes 1 or 3 values");
    }
    FeatureBundle bundle = generate_synthetic(*synth_spec);
    save_bundle(bundle, *synth_out);
    std::cout << "wrote bundle: " << *synth_out << " (" << bundle.count << " samples, "
              << bundle.num_classes << " classes, dim " << bundle.dim() << ")\n";
  });

  // -- train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a model on a bundle");
  auto train_args = std::make_shared<ConfigArgs>();
  auto train_bundle = std::make_shared<std::string>();
  auto train_out = std::make_shared<std::string>();
  auto train_save = std::make_shared<std::string>();
  train_cmd->add_option("--bundle", *train_bundle, "bundle directory")->required();
  train_cmd->add_option("--out", *train_out, "write the metrics report JSON here");
  train_cmd->add_option("--save-model", *train_save, "write the trained model here");
  add_config_flags(train_cmd, train_args);
  train_cmd->callback([=, &exit_code] {
    RunConfig config = resolve_config(*train_args);
    FeatureBundle bundle = load_bundle(*train_bundle);
    TrainResult result = train(config, bundle);
    print_report(result.report);
    if (!train_out->empty()) write_json(report_to_json(result.report), *train_out);
    if (!train_save->empty()) save_model(result.model, *train_save);
    if (result.report.diverged) exit_code = 2;
  });

  // -- eval ---------------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on a bundle split");
  auto eval_model = std::make_shared<std::string>();
  auto eval_bundle = std::make_shared<std::string>();
  auto eval_split = std::make_shared<std::string>("test");
  auto eval_out = std::make_shared<std::string>();
  eval_cmd->add_option("--model", *eval_model, "model file from train --save-model")->required();
  eval_cmd->add_option("--bundle", *eval_bundle, "bundle directory")->required();
  eval_cmd->add_option("--split", *eval_split, "train|val|test");
  eval_cmd->add_option("--out", *eval_out, "write the metrics report JSON here");
  eval_cmd->callback([=] {
    TrainedModel model = load_model(*eval_model);
    FeatureBundle bundle = load_bundle(*eval_bundle);
    MetricsReport report;
    report.config = model.config;
    report.eval_split = *eval_split;
    report.test = evaluate(model, bundle, split_from_name(*eval_split));
    print_report(report);
    if (!eval_out->empty()) write_json(report_to_json(report), *eval_out);
  });

  // -- gridsearch ------------------------------------------------------------------
  auto* grid_cmd = app.add_subcommand(
      "gridsearch", "train every config in a grid (array-valued keys) and rank by validation");
  auto grid_args = std::make_shared<ConfigArgs>();
  auto grid_bundle = std::make_shared<std::string>();
  auto grid_out = std::make_shared<std::string>();
  auto grid_jobs = std::make_shared<std::size_t>(1);
  grid_cmd->add_option("--bundle", *grid_bundle, "bundle directory")->required();
  grid_cmd->add_option("--out", *grid_out, "write the ranked results JSON here");
  grid_cmd->add_option("--jobs", *grid_jobs, "concurrent grid points");
  add_config_flags(grid_cmd, grid_args);
  grid_cmd->callback([=] {
    std::vector<RunConfig> grid = expand_grid(merged_config_json(*grid_args));
    FeatureBundle bundle = load_bundle(*grid_bundle);
    GridSearchResult result = grid_search(grid, bundle, *grid_jobs);
    std::cout << "grid points: " << result.ranking.size() << '\n';
    for (std::size_t i = 0; i < result.ranking.size(); ++i) {
      const auto& p = result.ranking[i];
      std::cout << (i == 0 ? "best " : "     ") << "val_accuracy=" << p.val_accuracy
                << (p.diverged ? " (diverged)" : "") << "  "
                << config_to_json(p.config).dump() << '\n';
    }
    std::cout << "test metrics of the best config:\n";
    print_report(result.best_report);
    if (!grid_out->empty()) write_json(grid_result_to_json(result), *grid_out);
  });

  // -- ablate ---------------------------------------------------------------------
  auto* ablate_cmd =
      app.add_subcommand("ablate", "train full, no_adv, no_classifier and no_decoder variants");
  auto ablate_args = std::make_shared<ConfigArgs>();
  auto ablate_bundle = std::make_shared<std::string>();
  auto ablate_out = std::make_shared<std::string>();
  ablate_cmd->add_option("--bundle", *ablate_bundle, "bundle directory")->required();
  ablate_cmd->add_option("--out", *ablate_out, "write the four reports as JSON here");
  add_config_flags(ablate_cmd, ablate_args);
  ablate_cmd->callback([=] {
    RunConfig config = resolve_config(*ablate_args);
    FeatureBundle bundle = load_bundle(*ablate_bundle);
    auto rows = run_ablations(config, bundle);
    std::cout << named_reports_table(rows);
    if (!ablate_out->empty()) write_json(named_reports_to_json(rows), *ablate_out);
  });

  // -- compare ----------------------------------------------------------------------
  auto* compare_cmd =
      app.add_subcommand("compare", "train every fusion strategy under the same setup");
  auto compare_args = std::make_shared<ConfigArgs>();
  auto compare_bundle = std::make_shared<std::string>();
  auto compare_out = std::make_shared<std::string>();
  compare_cmd->add_option("--bundle", *compare_bundle, "bundle directory")->required();
  compare_cmd->add_option("--out", *compare_out, "write the six reports as JSON here");
  add_config_flags(compare_cmd, compare_args);
  compare_cmd->callback([=] {
    RunConfig config = resolve_config(*compare_args);
    FeatureBundle bundle = load_bundle(*compare_bundle);
    auto rows = run_comparison(config, bundle);
    std::cout << named_reports_table(rows);
    if (!compare_out->empty()) write_json(named_reports_to_json(rows), *compare_out);
  });

  // -- gradcheck -----------------------------------------------------------------------
  auto* grad_cmd =
      app.add_subcommand("gradcheck", "run every finite-difference gradient suite");
  auto grad_eps = std::make_shared<double>(1e-5);
  auto grad_tol = std::make_shared<double>(1e-4);
  grad_cmd->add_option("--eps", *grad_eps, "finite-difference step");
  grad_cmd->add_option("--tol", *grad_tol, "max relative error tolerance");
  grad_cmd->callback([=, &exit_code] {
    auto checks = gradcheck_all(*grad_eps, *grad_tol);
    std::cout << gradcheck_table(checks);
    if (!gradcheck_passed(checks)) {
      std::cout << "gradient check FAILED\n";
      exit_code = 1;
    } else {
      std::cout << "all " << checks.size() << " suites passed\n";
    }
  });

  // -- exports -----------------------------------------------------------------------
  auto* emb_cmd = app.add_subcommand(
      "export-embeddings", "write per-sample concatenated encoder outputs plus labels (CSV)");
  auto emb_model = std::make_shared<std::string>();
  auto emb_bundle = std::make_shared<std::string>();
  auto emb_out = std::make_shared<std::string>();
  auto emb_split = std::make_shared<std::string>("all");
  emb_cmd->add_option("--model", *emb_model, "model file")->required();
  emb_cmd->add_option("--bundle", *emb_bundle, "bundle directory")->required();
  emb_cmd->add_option("--out", *emb_out, "output CSV path")->required();
  emb_cmd->add_option("--split", *emb_split, "train|val|test|all");
  emb_cmd->callback([=] {
    TrainedModel model = load_model(*emb_model);
    FeatureBundle bundle = load_bundle(*emb_bundle);
    export_embeddings(model, bundle, *emb_out, parse_split(*emb_split));
    std::cout << "wrote " << *emb_out << '\n';
  });

  auto* graph_cmd = app.add_subcommand(
      "export-graph", "write per-sample GFN vertex weights, 12 columns per row (CSV)");
  auto graph_model = std::make_shared<std::string>();
  auto graph_bundle = std::make_shared<std::string>();
  auto graph_out = std::make_shared<std::string>();
  auto graph_split = std::make_shared<std::string>("all");
  graph_cmd->add_option("--model", *graph_model, "model file")->required();
  graph_cmd->add_option("--bundle", *graph_bundle, "bundle directory")->required();
  graph_cmd->add_option("--out", *graph_out, "output CSV path")->required();
  graph_cmd->add_option("--split", *graph_split, "train|val|test|all");
  graph_cmd->callback([=] {
    TrainedModel model = load_model(*graph_model);
    FeatureBundle bundle = load_bundle(*graph_bundle);
    export_graph_weights(model, bundle, *graph_out, parse_split(*graph_split));
    std::cout << "wrote " << *graph_out << '\n';
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return exit_code;
}