// SPDX-License-Identifier: Apache-2.0
// gennv: simulation, training, decision and real-data front end.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "gennv/config.hpp"
#include "gennv/decisions.hpp"
#include "gennv/error.hpp"
#include "gennv/harness.hpp"
#include "gennv/ingest.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gennv;

namespace {

constexpr int kExitUsage = 64;
constexpr int kExitConfig = 65;
constexpr int kExitRuntime = 70;
constexpr int kExitIo = 74;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config:
    case ErrorKind::domain:
    case ErrorKind::dimension:
    case ErrorKind::format:
    case ErrorKind::version: return kExitConfig;
    case ErrorKind::io: return kExitIo;
    default: return kExitRuntime;
  }
}

std::string category_for(int code) {
  switch (code) {
    case kExitUsage: return "usage";
    case kExitConfig: return "config";
    case kExitIo: return "io";
    default: return "runtime";
  }
}

// Single-line so scripts can split on the first two colons.
int fail(int code, std::string_view detail, std::string message) {
  for (char& ch : message) {
    if (ch == '\n') ch = ' ';
  }
  std::cerr << "gennv: error:" << category_for(code) << ":" << detail << ": " << message << '\n';
  return code;
}

std::string default_out_dir() {
  const char* env = std::getenv("GENNV_OUT_DIR");
  return env && *env ? env : "results";
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, "config file " + path + " is not valid JSON: " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_doubles(const std::string& text, std::string_view what) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != item.size()) throw Error(ErrorKind::config, std::string(what) + ": '" + item + "' is not a number");
    out.push_back(v);
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::io, "failed writing " + path.string());
}

void write_both(const ExperimentReport& report, const fs::path& stem, const std::string& format) {
  if (format == "csv" || format == "both") write_report(report, stem.string() + ".csv", ReportFormat::csv);
  if (format == "json" || format == "both") write_report(report, stem.string() + ".json", ReportFormat::json);
  std::cout << "wrote " << stem.string() << (format == "both" ? ".{csv,json}" : "." + format) << '\n';
}

// Options shared by the simulation-style subcommands.
struct SimOptions {
  std::string config;
  std::optional<std::string> dgp, mode, methods;
  std::optional<std::uint64_t> seed;
  std::optional<int> reps;
  std::optional<std::size_t> n, n_test, m;
  std::string out = default_out_dir();
  std::string format = "both";
  int threads = 0;

  void attach(CLI::App* app, bool with_methods) {
    app->add_option("--config", config, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--dgp", dgp, "DGP kind (a-e)");
    app->add_option("--mode", mode, "Price mode (discrete, continuous)");
    if (with_methods) app->add_option("--methods", methods, "Comma-separated method list");
    app->add_option("--seed", seed, "Master seed");
    app->add_option("--reps", reps, "Replications");
    app->add_option("--n", n, "Training corpus size");
    app->add_option("--n-test", n_test, "Test size");
    app->add_option("--m", m, "Generator draws per decision");
    app->add_option("--out", out, "Output directory (default $GENNV_OUT_DIR or ./results)");
    app->add_option("--format", format, "Report format")->check(CLI::IsMember({"csv", "json", "both"}));
    app->add_option("--threads", threads, "Worker threads (0 = all cores)");
  }

  // Defaults, then the config file, then flags.
  ExperimentConfig resolve(ExperimentConfig cfg, const json& file_extra_allowed, json* extras) const {
    if (!config.empty()) {
      json doc = read_json_file(config);
      if (!doc.is_object()) throw Error(ErrorKind::config, "config file must hold a JSON object");
      for (auto& [key, value] : file_extra_allowed.items()) {
        if (doc.contains(key)) {
          (*extras)[key] = doc[key];
          doc.erase(key);
        }
      }
      apply_json(doc, cfg);
    }
    if (dgp) cfg.dgp = parse_dgp_kind(*dgp);
    if (mode) cfg.mode = parse_price_mode(*mode);
    if (methods) cfg.methods = split_list(*methods);
    if (seed) cfg.seed = *seed;
    if (reps) cfg.replications = *reps;
    if (n) cfg.n = *n;
    if (n_test) cfg.n_test = *n_test;
    if (m) cfg.m = *m;
    return cfg;
  }
};

int run_simulate(const SimOptions& opt, const std::string& experiment_flag) {
  json extras = json::object();
  ExperimentConfig cfg = opt.resolve({}, json{{"experiment", nullptr}}, &extras);
  std::string experiment = experiment_flag;
  if (experiment.empty()) experiment = extras.value("experiment", "inventory");
  Experiment e;
  if (experiment == "inventory") {
    e = Experiment::inventory;
  } else if (experiment == "joint") {
    e = Experiment::joint;
  } else {
    throw Error(ErrorKind::config, "unknown experiment '" + experiment + "' (inventory or joint)");
  }
  if (cfg.methods.empty()) {
    cfg.methods = e == Experiment::inventory ? default_inventory_methods(cfg.dgp) : default_joint_methods(cfg.dgp);
  }
  const ExperimentReport report =
      e == Experiment::inventory ? run_inventory_experiment(cfg, opt.threads) : run_joint_experiment(cfg, opt.threads);
  const fs::path stem = fs::path(opt.out) / (experiment + "_" + std::string(to_string(cfg.dgp)) + "_" +
                                             std::string(to_string(cfg.mode)));
  write_both(report, stem, opt.format);
  return 0;
}

int run_convergence(const SimOptions& opt, const std::string& sizes_flag) {
  json extras = json::object();
  ExperimentConfig base;
  base.dgp = DgpKind::c;
  const ExperimentConfig cfg = opt.resolve(base, json{{"sizes", nullptr}}, &extras);
  std::vector<std::size_t> sizes{200, 2000};
  if (extras.contains("sizes")) {
    try {
      sizes = extras["sizes"].get<std::vector<std::size_t>>();
    } catch (const json::exception& ex) {
      throw Error(ErrorKind::config, std::string("sizes: ") + ex.what());
    }
  }
  if (!sizes_flag.empty()) {
    sizes.clear();
    for (double v : parse_doubles(sizes_flag, "--sizes")) {
      if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw Error(ErrorKind::config, "--sizes must list positive integers");
      }
      sizes.push_back(static_cast<std::size_t>(v));
    }
  }
  const ConvergenceResult res = convergence_probe(cfg, sizes, opt.threads);
  const fs::path stem = fs::path(opt.out) / ("convergence_" + std::string(to_string(cfg.dgp)) + "_" +
                                             std::string(to_string(cfg.mode)));
  write_both(res.report, stem, opt.format);
  if (sizes.size() > 1) {
    std::cout << "gap decreased in " << res.decreasing_replications << "/" << cfg.replications
              << " replications; on average: " << (res.decreasing_on_average ? "yes" : "no") << '\n';
  }
  return 0;
}

int run_train(const SimOptions& opt, const std::string& data_path, const std::string& model_path) {
  json extras = json::object();
  const ExperimentConfig cfg = opt.resolve({}, json::object(), &extras);
  Dataset data;
  if (!data_path.empty()) {
    data = read_dataset_csv(fs::path(data_path));
  } else {
    const RngStream root(cfg.seed);
    const OracleModel model = OracleModel::make(cfg.dgp, root.derive("oracle"));
    data = make_dataset(model, cfg.n, cfg.mode, root.derive("train"));
    std::error_code ec;
    fs::create_directories(opt.out, ec);
    write_dataset_csv(data, fs::path(opt.out) / "train.csv");
  }
  TrainConfig tc = cfg.cdgm;
  tc.seed = RngStream(cfg.seed).derive("cdgm").derive(cfg.cdgm.seed).next_u64();
  TrainLog log;
  const Generator gen = train(data, tc, &log);
  const fs::path out = model_path.empty() ? fs::path(opt.out) / "generator.json" : fs::path(model_path);
  write_text(out, gen.save());
  std::cout << "trained on " << data.size() << " records, final loss " << log.epoch_loss.back() << "; wrote "
            << out.string() << '\n';
  return 0;
}

struct DecideOptions {
  std::string model;
  std::string x;
  std::string text;
  std::optional<double> price;
  std::string prices;
  std::string grid;
  std::size_t m = 1000;
  double c = 1.0;
  double s = 0.5;
  std::uint64_t seed = 1;
};

int run_decide(const DecideOptions& o) {
  std::ifstream in(o.model, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open model file " + o.model);
  std::stringstream buf;
  buf << in.rdbuf();
  const Generator gen = Generator::load(buf.str());
  Features x;
  x.numeric = parse_doubles(o.x, "--x");
  std::stringstream words(o.text);
  for (std::string w; words >> w;) x.words.push_back(w);
  if (x.numeric.size() != gen.schema().numeric_dim()) {
    throw Error(ErrorKind::dimension, "--x has " + std::to_string(x.numeric.size()) + " values, model expects " +
                                          std::to_string(gen.schema().numeric_dim()));
  }
  const CostParams costs{o.c, o.s};
  costs.validate();
  const int chosen = (o.price ? 1 : 0) + (o.prices.empty() ? 0 : 1) + (o.grid.empty() ? 0 : 1);
  if (chosen != 1) throw Error(ErrorKind::config, "give exactly one of --price, --prices, --grid");
  const RngStream rng = RngStream(o.seed).derive("decide");
  json out;
  if (o.price) {
    RngStream r = rng;
    const auto samples = gen.generate(x, *o.price, o.m, r);
    const double q = inventory_decision(samples, *o.price, costs);
    out = {{"price", *o.price}, {"quantity", q}, {"expected_profit", estimate_profit(samples, *o.price, q, costs)}};
  } else {
    std::vector<double> grid;
    if (!o.prices.empty()) {
      grid = build_price_grid(parse_doubles(o.prices, "--prices"));
    } else {
      const auto g = parse_doubles(o.grid, "--grid");
      if (g.size() != 3 || g[2] < 1 || g[2] != static_cast<double>(static_cast<int>(g[2]))) {
        throw Error(ErrorKind::config, "--grid expects lo,hi,J with integer J >= 1");
      }
      grid = build_price_grid(g[0], g[1], static_cast<int>(g[2]));
    }
    const JointDecision d = joint_decision(gen, x, grid, o.m, costs, rng);
    out = {{"price", d.price}, {"quantity", d.quantity}, {"expected_profit", d.profit}};
  }
  std::cout << out.dump() << '\n';
  return 0;
}

int run_real(const std::string& csv, const std::string& config, const std::string& meals,
             std::optional<std::uint64_t> seed, const std::string& out_dir, const std::string& format) {
  RealDataConfig cfg;
  if (!config.empty()) apply_json(read_json_file(config), cfg);
  if (!meals.empty()) {
    cfg.meals.clear();
    for (double v : parse_doubles(meals, "--meals")) cfg.meals.push_back(static_cast<std::int64_t>(v));
  }
  if (seed) cfg.seed = *seed;
  const MealLoad load = load_meal_csv(fs::path(csv));
  if (load.skipped > 0) {
    std::cerr << "gennv: skipped " << load.skipped << " malformed rows";
    if (!load.problems.empty()) std::cerr << " (first: " << load.problems.front() << ")";
    std::cerr << '\n';
  }
  ExperimentReport report = run_real_data(load.records, cfg);
  report.config["input"] = {{"path", fs::path(csv).filename().string()},
                            {"records", load.records.size()},
                            {"skipped", load.skipped}};
  write_both(report, fs::path(out_dir) / "real_data", format);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-driven newsvendor decisions with conditional generative models"};
  app.set_version_flag("--version", std::string(GENNV_VERSION));
  app.require_subcommand(1);

  SimOptions sim_opts, conv_opts, train_opts;
  std::string experiment;
  auto* simulate = app.add_subcommand("simulate", "Run a replicated synthetic experiment");
  sim_opts.attach(simulate, true);
  simulate->add_option("--experiment", experiment, "inventory (default) or joint")
      ->check(CLI::IsMember({"inventory", "joint"}));

  std::string sizes;
  auto* convergence = app.add_subcommand("convergence", "cDGM excess risk against training size");
  conv_opts.attach(convergence, false);
  convergence->add_option("--sizes", sizes, "Comma-separated ascending sizes (default 200,2000)");

  std::string data_path, model_path;
  auto* train_cmd = app.add_subcommand("train", "Train a generator and save it");
  train_opts.attach(train_cmd, false);
  train_cmd->add_option("--data", data_path, "Dataset CSV (default: simulate from --dgp)")->check(CLI::ExistingFile);
  train_cmd->add_option("--model", model_path, "Output model file (default <out>/generator.json)");

  DecideOptions dopt;
  auto* decide = app.add_subcommand("decide", "Decide from a saved generator without the training data");
  decide->add_option("--model", dopt.model, "Model file")->required()->check(CLI::ExistingFile);
  decide->add_option("--x", dopt.x, "Comma-separated numeric features");
  decide->add_option("--text", dopt.text, "Free-text description");
  decide->add_option("--price", dopt.price, "Given price: print the order quantity");
  decide->add_option("--prices", dopt.prices, "Comma-separated candidate prices");
  decide->add_option("--grid", dopt.grid, "lo,hi,J evenly spaced candidate prices");
  decide->add_option("--m", dopt.m, "Generator draws per price");
  decide->add_option("--c", dopt.c, "Retail cost");
  decide->add_option("--s", dopt.s, "Salvage value");
  decide->add_option("--seed", dopt.seed, "Seed for the generator draws");

  std::string real_csv, real_config, real_meals, real_out = default_out_dir(), real_format = "both";
  std::optional<std::uint64_t> real_seed;
  auto* real = app.add_subcommand("real-data", "Per-meal profit tables from the food-demand CSV");
  real->add_option("--csv", real_csv, "Food-demand CSV")->required();
  real->add_option("--config", real_config, "JSON config file")->check(CLI::ExistingFile);
  real->add_option("--meals", real_meals, "Comma-separated meal ids");
  real->add_option("--seed", real_seed, "Master seed");
  real->add_option("--out", real_out, "Output directory (default $GENNV_OUT_DIR or ./results)");
  real->add_option("--format", real_format, "Report format")->check(CLI::IsMember({"csv", "json", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(kExitUsage, "flags", e.what());
  }

  try {
    if (*simulate) return run_simulate(sim_opts, experiment);
    if (*convergence) return run_convergence(conv_opts, sizes);
    if (*train_cmd) return run_train(train_opts, data_path, model_path);
    if (*decide) return run_decide(dopt);
    if (*real) return run_real(real_csv, real_config, real_meals, real_seed, real_out, real_format);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    return fail(code, to_string(e.kind()), e.what());
  } catch (const std::exception& e) {
    return fail(kExitRuntime, "internal", e.what());
  }
  return kExitUsage;
}
