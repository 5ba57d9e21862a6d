#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "bsord/bsord.hpp"

namespace bsord::cli {
namespace {

// Name of the step currently running, reported with any failure.
std::string g_stage = "startup";

void stage(std::string name) { g_stage = std::move(name); }

std::vector<std::string> split_order(const std::string& order) {
  std::vector<std::string> out;
  std::stringstream in(order);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
  }
  return out;
}

Dataset load_dataset(const DataArgs& a) {
  stage("load");
  if (a.data.empty()) throw UsageError("--data is required");
  if (a.target.empty()) throw UsageError("--target is required");
  std::optional<std::vector<std::string>> order;
  if (!a.order.empty()) order = split_order(a.order);
  return load_csv(a.data, a.target, order);
}

TrainConfig resolve_config(const DataArgs& a) {
  stage("config");
  TrainConfig c = a.config.empty() ? TrainConfig{} : load_config(a.config);
  if (a.seed) c.seed = *a.seed;
  if (a.hidden) c.h_hidden = static_cast<Eigen::Index>(*a.hidden);
  c.validate();
  return c;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  return f;
}

Vector row_of(const Matrix& X, Eigen::Index i) { return X.row(i).transpose(); }

struct Features {
  Matrix X;
  std::vector<std::string> names;
  std::vector<std::string> targets;
};

// Feature matrix of an arbitrary CSV, checked against a trained model.
Features read_features(const std::string& path, const std::string& target, const OrdinalModel& m) {
  stage("load");
  if (path.empty()) throw UsageError("--data is required");
  const CsvTable table = read_csv(path);
  std::optional<std::size_t> exclude;
  if (!target.empty()) {
    exclude = table.column(target);
    if (!exclude) throw SchemaError("target column '" + target + "' not found in " + path);
  }
  Features f;
  f.X = parse_features(table, exclude, &f.names);
  if (f.X.cols() != m.d_features) {
    throw SchemaError("feature count mismatch: model expects " + std::to_string(m.d_features) +
                      ", found " + std::to_string(f.X.cols()) + " in " + path);
  }
  if (!m.feature_names.empty() && f.names != m.feature_names) {
    warn("feature names in " + path + " differ from those seen in training");
  }
  if (exclude) {
    for (const auto& row : table.rows) f.targets.push_back(row[*exclude]);
  }
  return f;
}

std::int64_t rank_in_dictionary(const OrdinalModel& m, const std::string& value) {
  const auto it = std::find(m.label_dictionary.begin(), m.label_dictionary.end(), value);
  if (it == m.label_dictionary.end()) {
    throw LabelError("label '" + value + "' is not one of the model's " +
                     std::to_string(m.k_states) + " states");
  }
  return static_cast<std::int64_t>(it - m.label_dictionary.begin());
}

std::string label_of(const OrdinalModel& m, std::int64_t rank) {
  const auto r = static_cast<std::size_t>(rank);
  return r < m.label_dictionary.size() ? m.label_dictionary[r] : std::to_string(rank);
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

}  // namespace

int cmd_evaluate(const EvaluateArgs& args, std::ostream& out) {
  const Dataset ds = load_dataset(args.input);
  const TrainConfig config = resolve_config(args.input);
  CvOptions options;
  options.k_folds = args.folds;
  options.n_resamples = args.resamples;
  options.jobs = args.jobs;
  stage("cross-validation");
  const CvReport report = cross_validate(ds, config, args.input.seed.value_or(config.seed), options);
  stage("write");
  if (!args.out.empty()) {
    auto f = open_output(args.out);
    f << report_to_json(report).dump(2) << '\n';
  }
  out << render_report_table(report);
  return kExitOk;
}

int cmd_train(const TrainArgs& args, std::ostream& out) {
  if (args.out.empty()) throw UsageError("--out is required");
  const Dataset ds = load_dataset(args.input);
  const TrainConfig config = resolve_config(args.input);
  stage("training");
  const FitResult r = fit(ds, config);
  stage("write");
  save_model(r.model, args.out);
  out << "trained " << r.model.k_states << "-state model (d=" << r.model.d_features
      << ", h=" << r.model.h_hidden << ") for " << r.history.epochs_completed
      << " epochs, loss " << r.history.initial_loss << " -> " << r.history.epoch_loss.back()
      << "\nwrote " << args.out << '\n';
  return kExitOk;
}

int cmd_predict(const PredictArgs& args, std::ostream& out) {
  stage("load model");
  if (args.model.empty()) throw UsageError("--model is required");
  const OrdinalModel m = load_model(args.model);
  const Features f = read_features(args.data, args.target, m);

  stage("predict");
  std::ostringstream csv;
  if (!args.target.empty()) csv << args.target << ',';
  csv << "predicted_rank,predicted_label";
  for (std::int64_t k = 0; k < m.k_states; ++k) csv << ",p_" << k;
  csv << '\n';
  for (Eigen::Index i = 0; i < f.X.rows(); ++i) {
    const Vector raw = row_of(f.X, i);
    const auto dist = predict_distribution(m, m.standardize({raw.data(), static_cast<std::size_t>(raw.size())}));
    const auto rank = argmax(dist);
    if (!args.target.empty()) csv << f.targets[static_cast<std::size_t>(i)] << ',';
    csv << rank << ',' << label_of(m, rank);
    for (double p : dist) csv << ',' << detail::format_double(p);
    csv << '\n';
  }

  stage("write");
  if (args.out.empty()) {
    out << csv.str();
  } else {
    auto file = open_output(args.out);
    file << csv.str();
    out << "wrote " << f.X.rows() << " predictions to " << args.out << '\n';
  }
  return kExitOk;
}

int cmd_project(const ProjectArgs& args, std::ostream& out) {
  stage("config");
  const std::string& fmt = args.format;
  if (fmt != "auto" && fmt != "csv" && fmt != "svg" && fmt != "both") {
    throw UsageError("--format must be auto, csv, svg or both (got '" + fmt + "')");
  }
  if (args.out.empty()) throw UsageError("--out prefix is required");
  const bool svg_required = fmt == "svg" || fmt == "both";
  auto require_2d = [&](Eigen::Index h) {
    if (svg_required && h != 2) {
      throw UsageError("SVG scatter needs a 2-D embedding but h_hidden = " + std::to_string(h) +
                       "; use --format csv");
    }
  };

  OrdinalModel m;
  Matrix X;
  std::vector<std::int64_t> ranks;
  if (!args.model.empty()) {
    stage("load model");
    m = load_model(args.model);
    require_2d(m.h_hidden);
    const Features f = read_features(args.input.data, args.input.target, m);
    X = f.X;
    for (const auto& t : f.targets) ranks.push_back(rank_in_dictionary(m, t));
  } else {
    const Dataset ds = load_dataset(args.input);
    TrainConfig config = resolve_config(args.input);
    // A projection is meant to be looked at: default to a plane.
    if (!config.h_hidden) config.h_hidden = 2;
    require_2d(*config.h_hidden);
    stage("training");
    m = fit(ds, config).model;
    X = ds.features;
    ranks = ds.labels;
  }

  stage("project");
  const Matrix E = project(m, m.standardizer.transform(X));
  const bool truth = !ranks.empty();
  if (!truth) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const Vector raw = row_of(X, i);
      ranks.push_back(predict_class(m, m.standardize({raw.data(), static_cast<std::size_t>(raw.size())})));
    }
  }

  stage("write");
  const bool want_csv = fmt != "svg";
  const bool want_svg = svg_required || (fmt == "auto" && m.h_hidden == 2);
  if (want_csv) {
    const std::string path = args.out + ".csv";
    auto f = open_output(path);
    for (Eigen::Index j = 0; j < E.cols(); ++j) f << 'e' << j << ',';
    f << (truth ? "rank" : "predicted_rank") << '\n';
    for (Eigen::Index i = 0; i < E.rows(); ++i) {
      for (Eigen::Index j = 0; j < E.cols(); ++j) f << detail::format_double(E(i, j)) << ',';
      f << ranks[static_cast<std::size_t>(i)] << '\n';
    }
    out << "wrote " << path << '\n';
  }
  if (want_svg) {
    SvgScatter plot;
    plot.k_states = m.k_states;
    plot.class_names = m.label_dictionary;
    plot.title = truth ? "initial-state projection" : "initial-state projection (predicted states)";
    for (Eigen::Index i = 0; i < E.rows(); ++i) {
      plot.points.push_back({E(i, 0), E(i, 1), ranks[static_cast<std::size_t>(i)]});
    }
    const std::string path = args.out + ".svg";
    auto f = open_output(path);
    f << render_svg(plot);
    out << "wrote " << path << '\n';
  }
  return kExitOk;
}

int cmd_synth(const SynthArgs& args, std::ostream& out) {
  if (args.out.empty()) throw UsageError("--out is required");
  stage("synthesize");
  const Dataset ds = synthesize(args.samples, args.features, args.states, args.noise, args.seed);
  stage("write");
  write_csv(ds, args.out, args.target);
  out << "wrote " << ds.size() << " rows to " << args.out << '\n';
  return kExitOk;
}

int cmd_gradcheck(const GradcheckArgs& args, std::ostream& out) {
  struct Case {
    OrdinalModel model;
    Vector x;
    std::int64_t y;
  };
  std::vector<Case> cases;
  if (!args.model.empty()) {
    stage("load model");
    const OrdinalModel m = load_model(args.model);
    const Features f = read_features(args.data, args.target, m);
    const auto rows = std::min<std::size_t>(args.trials, static_cast<std::size_t>(f.X.rows()));
    for (std::size_t i = 0; i < rows; ++i) {
      const Vector raw = row_of(f.X, static_cast<Eigen::Index>(i));
      const std::int64_t y = f.targets.empty() ? static_cast<std::int64_t>(i) % m.k_states
                                               : rank_in_dictionary(m, f.targets[i]);
      cases.push_back({m, m.standardize({raw.data(), static_cast<std::size_t>(raw.size())}), y});
    }
  } else {
    stage("generate");
    std::mt19937_64 rng(args.seed);
    std::uniform_int_distribution<int> small(1, 4);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t t = 0; t < args.trials; ++t) {
      const int d = small(rng);
      const int h = small(rng);
      const int n = small(rng);
      const std::int64_t lo = std::max<std::int64_t>(2, (std::int64_t{1} << (n - 1)) + 1);
      const std::int64_t k = std::uniform_int_distribution<std::int64_t>(lo, std::int64_t{1} << n)(rng);
      auto m = OrdinalModel::zeros(k, d, h);
      m.params = init_params(d, h, derive_seed(args.seed, t));
      for (Vector* b : {&m.params.b_e, &m.params.gru.b_z, &m.params.gru.b_r, &m.params.gru.b_h}) {
        for (auto& v : *b) v = 0.5 * normal(rng);
      }
      m.params.b_o = 0.5 * normal(rng);
      Vector x(d);
      for (auto& v : x) v = normal(rng);
      const auto y = std::uniform_int_distribution<std::int64_t>(0, k - 1)(rng);
      cases.push_back({std::move(m), std::move(x), y});
    }
  }
  if (cases.empty()) throw DataError("no cases to check");

  stage("gradient check");
  GradientCheckReport worst;
  for (const auto& c : cases) {
    const auto r = gradient_check(c.model, c.x, c.y, args.tolerance);
    if (r.max_relative_error >= worst.max_relative_error) worst = r;
  }
  const bool passed = worst.max_relative_error < args.tolerance;
  out << "gradient check over " << cases.size() << " cases: max relative error "
      << worst.max_relative_error << " at " << worst.worst_parameter << '[' << worst.worst_index
      << "] (analytic " << worst.analytic << ", numeric " << worst.numeric << "), tolerance "
      << args.tolerance << ": " << (passed ? "PASS" : "FAIL") << '\n';
  return passed ? kExitOk : kExitRuntime;
}

namespace {

void add_data_options(CLI::App* cmd, DataArgs& a) {
  cmd->add_option("--data", a.data, "input CSV");
  cmd->add_option("--target", a.target, "target column");
  cmd->add_option("--order", a.order, "explicit label order, comma separated (lowest first)");
  cmd->add_option("--config", a.config, "training config JSON");
  cmd->add_option("--seed", a.seed, "master seed (overrides the config)");
  cmd->add_option("--hidden", a.hidden, "hidden size h (overrides the config)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ordinal regression with a binary-search-tree encoding and a GRU decoder", "bsord"};
  app.require_subcommand(1);

  EvaluateArgs evaluate;
  auto* ev = app.add_subcommand("evaluate", "k-fold cross-validation with bootstrap intervals");
  add_data_options(ev, evaluate.input);
  ev->add_option("--folds", evaluate.folds, "number of folds")->capture_default_str();
  ev->add_option("--resamples", evaluate.resamples, "bootstrap resamples")->capture_default_str();
  ev->add_option("--jobs", evaluate.jobs, "folds trained concurrently")->capture_default_str();
  ev->add_option("--out", evaluate.out, "JSON report path");

  TrainArgs train;
  auto* tr = app.add_subcommand("train", "fit a model on a whole dataset");
  add_data_options(tr, train.input);
  tr->add_option("--out", train.out, "model JSON path");

  PredictArgs predict;
  auto* pr = app.add_subcommand("predict", "predict states and distributions");
  pr->add_option("--model", predict.model, "model JSON");
  pr->add_option("--data", predict.data, "input CSV");
  pr->add_option("--target", predict.target, "target column to pass through (not used as a feature)");
  pr->add_option("--out", predict.out, "predictions CSV (stdout if omitted)");

  ProjectArgs proj;
  auto* pj = app.add_subcommand("project", "export the initial-state embedding");
  pj->add_option("--model", proj.model, "trained model (otherwise trains on --data)");
  add_data_options(pj, proj.input);
  pj->add_option("--out", proj.out, "output prefix for .csv and .svg");
  pj->add_option("--format", proj.format, "auto, csv, svg or both")->capture_default_str();

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "write a synthetic monotone dataset");
  sy->add_option("--samples", synth.samples)->capture_default_str();
  sy->add_option("--features", synth.features)->capture_default_str();
  sy->add_option("--states", synth.states)->capture_default_str();
  sy->add_option("--noise", synth.noise, "latent noise standard deviation")->capture_default_str();
  sy->add_option("--seed", synth.seed)->capture_default_str();
  sy->add_option("--target", synth.target, "name of the label column")->capture_default_str();
  sy->add_option("--out", synth.out, "output CSV");

  GradcheckArgs gc;
  auto* gk = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  gk->add_option("--model", gc.model, "check a trained model on rows of --data");
  gk->add_option("--data", gc.data);
  gk->add_option("--target", gc.target);
  gk->add_option("--trials", gc.trials, "random configurations or data rows")->capture_default_str();
  gk->add_option("--seed", gc.seed)->capture_default_str();
  gk->add_option("--tolerance", gc.tolerance)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "bsord: usage: " << one_line(e.what()) << " (see bsord --help)\n";
    return kExitUsage;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  stage("startup");
  auto sink = warning_sink();
  warning_sink() = [&err](std::string_view msg) { err << "warning: " << msg << '\n'; };
  int code = kExitRuntime;
  std::string failure;
  try {
    if (name == "evaluate") code = cmd_evaluate(evaluate, out);
    else if (name == "train") code = cmd_train(train, out);
    else if (name == "predict") code = cmd_predict(predict, out);
    else if (name == "project") code = cmd_project(proj, out);
    else if (name == "synth") code = cmd_synth(synth, out);
    else code = cmd_gradcheck(gc, out);
  } catch (const UsageError& e) {
    failure = e.what();
    code = kExitUsage;
  } catch (const SchemaError& e) {
    failure = e.what();
    code = kExitUsage;
  } catch (const ConfigError& e) {
    failure = e.what();
    code = kExitUsage;
  } catch (const LabelError& e) {
    failure = e.what();
    code = kExitUsage;
  } catch (const std::exception& e) {
    failure = e.what();
    code = kExitRuntime;
  }
  warning_sink() = sink;
  if (!failure.empty()) err << "bsord " << name << ": " << g_stage << ": " << one_line(failure) << '\n';
  return code;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"bsord"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace bsord::cli
