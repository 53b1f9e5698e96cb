#include "mrot/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <optional>
#include <string>

#include "mrot/diagnostics.hpp"
#include "mrot/errors.hpp"
#include "mrot/eval_harness.hpp"
#include "mrot/io.hpp"
#include "mrot/score_model.hpp"
#include "mrot/simd/kernels.hpp"

namespace mrot {

namespace {

struct Options {
  std::string simd = "auto";

  // shared
  std::string input;
  std::string output;
  std::string label_col;
  bool no_header = false;
  std::uint64_t seed = 0;

  // fit
  std::size_t k = 10;
  double epsilon = 0.1;
  std::string cost = "engineered";
  std::string cap = "row-max";
  std::string regressor = "kernel-ridge";
  int max_iters = 10000;
  bool no_standardize = false;

  // score / eval
  std::string model;
  std::string scores;
  std::string labels;
  std::string metric = "both";

  // synth
  std::size_t n_normal = 500;
  std::size_t n_anom = 25;

  // windows
  std::size_t window_len = 60;
  std::size_t stride = 0;

  // ablate
  std::string grid = "default";
  std::string json_output;
  bool with_runtime = false;
};

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  return out;
}

CsvOptions csv_options(const Options& o, bool with_label) {
  CsvOptions c;
  c.has_header = !o.no_header;
  if (with_label && !o.label_col.empty()) c.label_column = o.label_col;
  return c;
}

void apply_simd(const std::string& name) {
  if (name == "auto") return;
  const auto b = name == "scalar" ? simd::Backend::Scalar : simd::Backend::Avx2;
  if (!simd::backend_supported(b)) throw DataError("SIMD backend '" + name + "' is not available on this machine");
  simd::force_backend(b);
}

void cmd_fit(const Options& o, std::ostream& err) {
  const auto table = load_csv(o.input, csv_options(o, true));
  MrotConfig cfg;
  cfg.k = o.k;
  cfg.solver.epsilon = o.epsilon;
  cfg.solver.max_iters = o.max_iters;
  cfg.cost = cost_kind_from_string(o.cost);
  cfg.cap = cap_rule_from_string(o.cap);
  cfg.regressor.kind = regressor_kind_from_string(o.regressor);
  cfg.standardize = !o.no_standardize;
  cfg.seed = o.seed;
  Dataset data(table.features);
  if (data.size() > kMaxFitSamples) {
    // Labels are not used by fit; the placeholder only carries the rows.
    const LabeledDataset all(std::move(data), std::vector<int>(table.features.rows(), 0));
    data = subsample_rows(all, kMaxFitSamples, o.seed).dataset;
    warn("fit: subsampled " + std::to_string(table.features.rows()) + " rows to " + std::to_string(data.size()));
  }
  const auto start = std::chrono::steady_clock::now();
  auto model = MrotModel::fit(data, cfg);
  model.set_column_names(table.columns);
  save_model(model, o.output);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto& d = model.diagnostics();
  err << "fit: n=" << data.size() << " d=" << model.dim() << " converged=" << (d.converged ? "yes" : "no")
      << " iterations=" << d.iterations << " runtime=" << secs << "s\n";
}

void cmd_score(const Options& o) {
  const auto model = load_model(o.model);
  const auto table = load_csv(o.input, csv_options(o, true));
  const auto scores = model.predict(table.features);
  auto out = open_output(o.output);
  write_scores_csv(out, scores);
}

std::vector<double> read_scores(const std::string& path) {
  CsvOptions c;
  const auto table = load_csv(path, c);
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (table.columns[i] == "score") {
      std::vector<double> s;
      for (std::size_t r = 0; r < table.features.rows(); ++r) s.push_back(table.features(r, i));
      return s;
    }
  }
  throw DataError(path + ": no 'score' column");
}

void cmd_eval(const Options& o, std::ostream& out) {
  const auto scores = read_scores(o.scores);
  CsvOptions c;
  c.label_column = o.label_col.empty() ? std::string("label") : o.label_col;
  const auto labels = *load_csv(o.labels, c).labels;
  if (labels.size() != scores.size()) {
    throw DataError("scores file has " + std::to_string(scores.size()) + " rows but labels file has " +
                    std::to_string(labels.size()));
  }
  nlohmann::json j;
  j["n"] = scores.size();
  j["n_anomalies"] = std::count(labels.begin(), labels.end(), 1);
  if (o.metric == "auc-roc" || o.metric == "both") j["auc_roc"] = auc_roc(scores, labels);
  if (o.metric == "auc-pr" || o.metric == "both") j["auc_pr"] = auc_pr(scores, labels);
  out << j.dump() << '\n';
}

void cmd_synth_toy(const Options& o) {
  const auto data = synth_toy(o.n_normal, o.n_anom, o.seed);
  auto out = open_output(o.output);
  const std::vector<std::string> cols{"x0", "x1"};
  write_csv(out, data.dataset.features(), cols, std::span<const int>(data.labels));
}

void cmd_windows(const Options& o) {
  const auto table = load_csv(o.input, csv_options(o, false));
  WindowConfig cfg;
  cfg.window_len = o.window_len;
  cfg.stride = o.stride == 0 ? std::max<std::size_t>(1, o.window_len / 2) : o.stride;
  const auto features = window_features(table.features, cfg);
  auto out = open_output(o.output);
  write_csv(out, features, window_feature_names(table.columns));
}

void cmd_ablate(const Options& o, std::ostream& err) {
  if (o.grid != "default") throw DataError("unknown grid '" + o.grid + "' (only 'default' is defined)");
  const auto table = load_csv(o.input, csv_options(o, true));
  if (!table.labels) throw DataError("ablate needs --label-col");
  const LabeledDataset data(Dataset(table.features), *table.labels);
  AblationOptions opts;
  opts.seed = o.seed;
  opts.base.solver.max_iters = o.max_iters;
  const auto start = std::chrono::steady_clock::now();
  const auto rows = ablation_run(data, AblationGrid{}, opts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  auto out = open_output(o.output);
  write_ablation_csv(out, rows, o.with_runtime);
  if (!o.json_output.empty()) {
    auto js = open_output(o.json_output);
    js << ablation_to_json(rows, o.with_runtime).dump(1) << '\n';
  }
  for (const auto& r : rows) {
    err << "ablate: eps=" << r.epsilon << " k=" << r.k << " " << to_string(r.regressor)
        << " runtime=" << r.runtime_seconds << "s\n";
  }
  err << "ablate: total runtime=" << secs << "s\n";
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Mass-repulsing optimal transport anomaly detection", "mrot"};
  app.require_subcommand(1);
  app.add_option("--simd", o.simd, "Kernel backend")->check(CLI::IsMember({"auto", "scalar", "avx2"}));

  auto* fit = app.add_subcommand("fit", "Fit a model on a CSV of samples");
  fit->add_option("--input", o.input, "Training CSV")->required();
  fit->add_option("--label-col", o.label_col, "Label column to drop from the features");
  fit->add_flag("--no-header", o.no_header, "Input has no header line");
  fit->add_option("--k", o.k, "Neighborhood size")->required()->check(CLI::PositiveNumber);
  fit->add_option("--epsilon", o.epsilon, "Entropic regularization (0 = exact)")->required()->check(CLI::NonNegativeNumber);
  fit->add_option("--cost", o.cost, "engineered|coulomb")->check(CLI::IsMember({"engineered", "coulomb"}));
  fit->add_option("--cap", o.cap, "row-max|global-max|fixed:L")
      ->check(CLI::Validator(
          [](std::string& v) -> std::string {
            try {
              cap_rule_from_string(v);
            } catch (const DataError& e) {
              return e.what();
            }
            return {};
          },
          "CAP"));
  fit->add_option("--regressor", o.regressor, "kernel-ridge|knn|gbt")->check(CLI::IsMember({"kernel-ridge", "knn", "gbt"}));
  fit->add_option("--max-iters", o.max_iters, "Sinkhorn iteration cap")->check(CLI::PositiveNumber);
  fit->add_flag("--no-standardize", o.no_standardize, "Compute costs on raw features");
  fit->add_option("--seed", o.seed, "Random seed");
  fit->add_option("--output", o.output, "Model JSON path")->required();

  auto* score = app.add_subcommand("score", "Score a CSV with a fitted model");
  score->add_option("--model", o.model, "Model JSON")->required();
  score->add_option("--input", o.input, "CSV to score")->required();
  score->add_option("--label-col", o.label_col, "Label column to drop from the features");
  score->add_flag("--no-header", o.no_header, "Input has no header line");
  score->add_option("--output", o.output, "Scores CSV path")->required();

  auto* eval = app.add_subcommand("eval", "Compute ranking metrics");
  eval->add_option("--scores", o.scores, "Scores CSV (sample_index,score)")->required();
  eval->add_option("--labels", o.labels, "CSV holding the label column")->required();
  eval->add_option("--label-col", o.label_col, "Label column name (default: label)");
  eval->add_option("--metric", o.metric, "auc-roc|auc-pr|both")->check(CLI::IsMember({"auc-roc", "auc-pr", "both"}));

  auto* synth = app.add_subcommand("synth", "Generate synthetic data");
  synth->require_subcommand(1);
  auto* toy = synth->add_subcommand("toy", "Two Gaussian clusters");
  toy->add_option("--n-normal", o.n_normal, "Normal samples")->check(CLI::PositiveNumber);
  toy->add_option("--n-anom", o.n_anom, "Anomalous samples")->check(CLI::PositiveNumber);
  toy->add_option("--seed", o.seed, "Random seed");
  toy->add_option("--output", o.output, "Output CSV")->required();

  auto* windows = app.add_subcommand("windows", "Sliding-window mean/std features");
  windows->add_option("--input", o.input, "Series CSV (rows = time)")->required();
  windows->add_flag("--no-header", o.no_header, "Input has no header line");
  windows->add_option("--window-len", o.window_len, "Samples per window")->check(CLI::Range(2, 1 << 30));
  windows->add_option("--stride", o.stride, "Step between windows (default: window-len / 2)")->check(CLI::PositiveNumber);
  windows->add_option("--output", o.output, "Output CSV")->required();

  auto* ablate = app.add_subcommand("ablate", "Run the epsilon x k ablation grid");
  ablate->add_option("--input", o.input, "Labeled CSV")->required();
  ablate->add_option("--label-col", o.label_col, "Label column")->required();
  ablate->add_flag("--no-header", o.no_header, "Input has no header line");
  ablate->add_option("--grid", o.grid, "Grid name");
  ablate->add_option("--seed", o.seed, "Random seed");
  ablate->add_option("--max-iters", o.max_iters, "Sinkhorn iteration cap")->check(CLI::PositiveNumber);
  ablate->add_option("--output", o.output, "Results CSV")->required();
  ablate->add_option("--json", o.json_output, "Also write results as JSON");
  ablate->add_flag("--with-runtime", o.with_runtime, "Include wall-clock runtime columns in the outputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    apply_simd(o.simd);
    ScopedWarningSink sink([&err](std::string_view msg) { err << "warning: " << msg << '\n'; });
    if (fit->parsed()) {
      cmd_fit(o, err);
    } else if (score->parsed()) {
      cmd_score(o);
    } else if (eval->parsed()) {
      cmd_eval(o, out);
    } else if (toy->parsed()) {
      cmd_synth_toy(o);
    } else if (windows->parsed()) {
      cmd_windows(o);
    } else if (ablate->parsed()) {
      cmd_ablate(o, err);
    }
    return kExitOk;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace mrot
