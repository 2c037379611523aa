#pragma once

// Command-line driver: gen, train, eval, score, serve.

#include <csignal>
#include <cstdint>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tacdss/datagen.hpp"
#include "tacdss/persist.hpp"
#include "tacdss/pipeline.hpp"
#include "tacdss/service.hpp"

namespace tacdss::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

namespace detail {

struct GenOptions {
  std::size_t size = 1000;
  std::uint64_t seed = 42;
  std::string out;
};

struct TrainOptions {
  std::string data;
  std::string split = "A";
  std::uint64_t seed = 1;
  int epochs = 1500;
  int hidden = 16;
  int repeats = 3;
  double m = 2.0;
  double fcm_tol = 1e-5;
  int fcm_max_iter = 100;
  bool harden = false;
  std::string out_model;
  std::string report;
  std::string loss_csv;
  std::string rows_csv;
  std::string timestamp;
};

struct EvalOptions {
  std::string model;
  std::string data;
  std::string report;
  std::string rows_csv;
};

struct ScoreOptions {
  std::string model;
  double fuel = 0.0;
  double time = 0.0;
  double weapon = 0.0;
  double danger = 0.0;
};

struct ServeOptions {
  std::string model;
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string static_dir;
};

inline void write_output(const std::string& path, const std::string& contents, std::ostream& out) {
  if (path == "-") {
    out << contents;
  } else {
    persist::write_file_atomic(path, contents);
  }
}

inline int run_gen(const GenOptions& o, std::ostream& out) {
  const MasterDataset master = generate_master(o.size, o.seed);
  std::ostringstream csv;
  write_csv(csv, master.events);
  write_output(o.out, csv.str(), out);
  if (o.out != "-") out << "wrote " << master.size() << " events to " << o.out << "\n";
  return kExitOk;
}

inline int run_train(const TrainOptions& o, std::ostream& out) {
  const std::string csv = persist::read_file(o.data);
  std::istringstream in(csv);
  const std::vector<ScenarioEvent> events = read_csv(in);

  ExperimentConfig config;
  config.hidden = o.hidden;
  config.harden_targets = o.harden;
  config.fcm.c = kRegionCount;
  config.fcm.m = o.m;
  config.fcm.tol = o.fcm_tol;
  config.fcm.max_iter = o.fcm_max_iter;
  config.lm.max_epochs = o.epochs;

  const Split split = split_from_string(o.split);
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < o.repeats; ++k) seeds.push_back(o.seed + static_cast<std::uint64_t>(k));
  const RepeatedResult result = run_repeated(events, split, seeds, config);
  const ExperimentResult& first = result.runs.front();

  if (!o.out_model.empty()) {
    persist::ModelFile file;
    file.model = first.model;
    file.fcm_config = experiment_fcm_config(config, first.seed);
    file.fcm_iterations = first.fcm_iterations;
    file.network_seed = first.network_seed;
    file.lm_config = config.lm;
    file.training = persist::TrainSummary::of(first.training);
    file.provenance.dataset_fingerprint = persist::fingerprint(csv);
    file.provenance.dataset_rows = events.size();
    file.provenance.split = to_string(split);
    file.provenance.seed = first.seed;
    if (!o.timestamp.empty()) file.provenance.timestamp = o.timestamp;
    persist::save_model(file, o.out_model);
  }
  if (!o.report.empty()) write_output(o.report, persist::dump(persist::to_json(result)), out);
  if (!o.loss_csv.empty()) write_output(o.loss_csv, persist::loss_trace_csv(result), out);
  if (!o.rows_csv.empty()) write_output(o.rows_csv, persist::rows_csv(first.eval), out);

  out << "split " << to_string(split) << ": " << first.train_size << " train / " << first.test_size
      << " test rows, " << result.runs.size() << " run(s)\n"
      << "mean train mse " << format_number(result.mean_train_mse) << ", rmse "
      << format_number(result.mean_train_rmse) << "\n"
      << "mean test mse " << format_number(result.mean_test_mse) << ", rmse "
      << format_number(result.mean_test_rmse) << "\n";
  return kExitOk;
}

inline int run_eval(const EvalOptions& o, std::ostream& out) {
  const persist::ModelFile file = persist::load_model(o.model);
  const EvalReport report = evaluate(file.model, read_csv_file(o.data));
  if (!o.report.empty()) write_output(o.report, persist::dump(persist::to_json(report)), out);
  if (!o.rows_csv.empty()) write_output(o.rows_csv, persist::rows_csv(report), out);
  out << "evaluated " << report.test_rows.size() << " rows: mse " << format_number(report.test_mse) << ", rmse "
      << format_number(report.test_rmse) << "\n";
  return kExitOk;
}

inline int run_score(const ScoreOptions& o, std::ostream& out) {
  const service::ScoringService svc(persist::load_model(o.model));
  const service::Json request{{"fuel", o.fuel}, {"intercept_time", o.time}, {"weapon", o.weapon}, {"danger", o.danger}};
  const service::Reply reply = svc.score(request.dump());
  if (reply.status != 200) throw InvalidArgument(reply.body);
  out << reply.body;
  return kExitOk;
}

inline httplib::Server* g_server = nullptr;

inline int run_serve(const ServeOptions& o, std::ostream& out) {
  auto svc = std::make_shared<const service::ScoringService>(persist::load_model(o.model));
  httplib::Server server;
  service::install_routes(server, svc, o.static_dir);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  if (!server.bind_to_port(o.host, o.port)) {
    g_server = nullptr;
    throw std::runtime_error("cannot bind " + o.host + ":" + std::to_string(o.port));
  }
  out << "serving model " << svc->model_id() << " on http://" << o.host << ":" << o.port << "\n" << std::flush;
  server.listen_after_bind();
  g_server = nullptr;
  return kExitOk;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. args[0] is the program name.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Fuzzy-neural tactical decision scoring", "tacdss"};
  app.require_subcommand(1);

  detail::GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Write a synthetic master dataset as CSV");
  gen_cmd->add_option("--size", gen.size, "Number of events")->capture_default_str()->check(CLI::Range(10, 100000000));
  gen_cmd->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "Output CSV path ('-' for stdout)")->required();

  detail::TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "Cluster, train and evaluate on a dataset split");
  train_cmd->add_option("--data", train.data, "Master dataset CSV")->required();
  train_cmd->add_option("--split", train.split, "A (90/10) or B (80/20)")
      ->capture_default_str()
      ->check(CLI::IsMember({"A", "B"}));
  train_cmd->add_option("--seed", train.seed, "First experiment seed")->capture_default_str();
  train_cmd->add_option("--epochs", train.epochs, "Levenberg-Marquardt epochs")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--hidden", train.hidden, "Hidden tanh units")->capture_default_str()->check(CLI::PositiveNumber);
  train_cmd->add_option("--repeats", train.repeats, "Runs with consecutive seeds to average")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--m", train.m, "FCM fuzziness exponent")->capture_default_str();
  train_cmd->add_option("--fcm-tol", train.fcm_tol, "FCM membership-change tolerance")->capture_default_str();
  train_cmd->add_option("--fcm-max-iter", train.fcm_max_iter, "FCM iteration cap")->capture_default_str();
  train_cmd->add_flag("--harden", train.harden, "Train on one-hot targets instead of memberships");
  train_cmd->add_option("--out-model", train.out_model, "Model JSON written from the first run");
  train_cmd->add_option("--report", train.report, "Averaged report JSON");
  train_cmd->add_option("--loss-csv", train.loss_csv, "Loss trace CSV for all runs");
  train_cmd->add_option("--rows-csv", train.rows_csv, "Actual/predicted rows CSV of the first run");
  train_cmd->add_option("--timestamp", train.timestamp, "Timestamp recorded in the model provenance");

  detail::EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a model on a dataset");
  eval_cmd->add_option("--model", eval.model, "Model JSON")->required();
  eval_cmd->add_option("--data", eval.data, "Dataset CSV")->required();
  eval_cmd->add_option("--report", eval.report, "Report JSON");
  eval_cmd->add_option("--rows-csv", eval.rows_csv, "Actual/predicted rows CSV");

  detail::ScoreOptions score;
  auto* score_cmd = app.add_subcommand("score", "Score one event and print JSON");
  score_cmd->add_option("--model", score.model, "Model JSON")->required();
  score_cmd->add_option("--fuel", score.fuel, "Fuel, litres")->required()->check(CLI::Range(0.0, 1000.0));
  score_cmd->add_option("--time", score.time, "Intercept time, minutes")->required()->check(CLI::Range(0.0, 60.0));
  score_cmd->add_option("--weapon", score.weapon, "Weapon status, percent")->required()->check(CLI::Range(0.0, 100.0));
  score_cmd->add_option("--danger", score.danger, "Danger, points")->required()->check(CLI::Range(0.0, 10.0));

  detail::ServeOptions serve;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the scoring API over HTTP");
  serve_cmd->add_option("--model", serve.model, "Model JSON")->required();
  serve_cmd->add_option("--port", serve.port, "TCP port")->capture_default_str()->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", serve.host, "Bind address")->capture_default_str();
  serve_cmd->add_option("--static-dir", serve.static_dir, "Console assets served under /");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return detail::run_gen(gen, out);
    if (*train_cmd) return detail::run_train(train, out);
    if (*eval_cmd) return detail::run_eval(eval, out);
    if (*score_cmd) return detail::run_score(score, out);
    if (*serve_cmd) return detail::run_serve(serve, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace tacdss::cli
