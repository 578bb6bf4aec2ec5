// smnist: generate, validate, train and evaluate counting datasets; run the
// subitizing test service; simulate players and aggregate their logs.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include "smnist/combinatorics.hpp"
#include "smnist/dataset_io.hpp"
#include "smnist/generator.hpp"
#include "smnist/service.hpp"
#include "smnist/session.hpp"
#include "smnist/trainer.hpp"

namespace fs = std::filesystem;
using namespace smnist;

namespace {

void print_histogram(const char* name, const Histogram& h) {
  std::cout << name << ':';
  for (int n = 0; n < 10; ++n) {
    if (h[n] > 0) std::cout << ' ' << n << ':' << h[n];
  }
  std::cout << '\n';
}

struct GenArgs {
  std::string series = "m1";
  std::string variant = "naive";
  std::string stamp;
  std::string dist;
  std::string catalog_name;
  int m = 9;
  std::optional<std::size_t> train;
  std::optional<std::size_t> test;
  std::optional<std::size_t> test_pixels;
  std::uint64_t seed = 1;
  std::string out;
  bool gzip = false;
};

int run_gen(const GenArgs& a) {
  DatasetSpec spec;
  if (!a.catalog_name.empty()) {
    bool found = false;
    for (auto& e : catalog(a.seed)) {
      if (e.name == a.catalog_name) {
        spec = e.spec;
        found = true;
      }
    }
    if (!found) throw std::invalid_argument("unknown catalog entry '" + a.catalog_name + "'");
  } else {
    const CountKind kind = a.dist.empty() ? CountKind::kUniform : parse_count_kind(a.dist);
    spec = make_spec(parse_series(a.series), parse_variant(a.variant), a.m, kind, a.seed);
    if (!a.stamp.empty()) spec.stamp = parse_stamp(a.stamp);
  }
  if (a.train) spec.train_count = *a.train;
  if (a.test) spec.test_count = *a.test;
  if (a.test_pixels) spec.test_positions = *a.test_pixels;
  validate(spec);

  const DatasetPair pair = generate_pair(spec);
  write_dataset(a.out, pair, a.gzip);
  std::cout << "wrote " << pair.train.size() << " train and " << pair.test.size()
            << " test images (" << spec.width() << 'x' << spec.height() << ") to " << a.out
            << '\n';
  print_histogram("train", histogram(pair.train));
  print_histogram("test", histogram(pair.test));
  for (const auto& e : pair.exhausted) {
    std::cout << "label " << e.label << " exhausted ("
              << (e.scope == ExhaustionScope::kShared ? "shared"
                  : e.scope == ExhaustionScope::kTrain ? "train"
                                                       : "test")
              << (e.complete ? ", full supply used" : ", rejection limit") << ")\n";
  }
  const auto report = verify_dataset(pair);
  std::cout << render_supply_table(report.table);
  if (!report.passed()) {
    std::cout << render_report(report);
    return 1;
  }
  return 0;
}

int run_validate(const std::string& dir) {
  const DatasetPair pair = load_dataset(dir);
  const auto report = verify_dataset(pair);
  print_histogram("train", histogram(pair.train));
  print_histogram("test", histogram(pair.test));
  std::cout << render_report(report);
  return report.passed() ? 0 : 1;
}

void print_metrics(const train::Metrics& m) {
  std::printf("accuracy %.4f\n", m.accuracy);
  std::cout << "confusion (rows: true label, columns: predicted)\n";
  for (int t = 0; t < train::kClasses; ++t) {
    std::size_t row = 0;
    for (auto c : m.confusion[t]) row += c;
    if (row == 0) continue;
    std::printf("%d:", t);
    for (auto c : m.confusion[t]) std::printf(" %6zu", c);
    std::printf("\n");
  }
}

struct TrainArgs {
  std::string data;
  std::string model = "softmax";
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> epochs;
  int hidden = 128;
  std::uint64_t seed = 1;
  std::string out;
  std::string weights_dir;
};

int run_train(const TrainArgs& a) {
  const auto kind = train::parse_model_kind(a.model);
  auto cfg = kind == train::ModelKind::kSoftmax ? train::TrainConfig::softmax_defaults()
                                                : train::TrainConfig::mlp_defaults();
  if (a.lr) cfg.learning_rate = *a.lr;
  if (a.batch) cfg.batch_size = *a.batch;
  if (a.epochs) {
    cfg.epochs = *a.epochs;
    cfg.steps = 0;
  }
  if (a.steps) cfg.steps = *a.steps;
  cfg.hidden = a.hidden;
  cfg.seed = a.seed;

  const DatasetPair pair = load_dataset(a.data);
  auto result = train::train(pair.train, pair.test, kind, cfg);
  std::cout << "epoch losses:";
  for (double l : result.metrics.epoch_losses) std::printf(" %.5f", l);
  std::cout << '\n';
  print_metrics(result.metrics);
  if (!a.out.empty()) {
    train::save_model(a.out, result.params);
    std::cout << "model written to " << a.out << '\n';
  }
  if (!a.weights_dir.empty()) {
    fs::create_directories(a.weights_dir);
    const auto images = train::export_weight_images(result.params);
    for (std::size_t k = 0; k < images.size(); ++k) {
      write_pgm(fs::path(a.weights_dir) / ("weights-" + std::to_string(k) + ".pgm"), images[k]);
    }
    std::cout << "weight images written to " << a.weights_dir << '\n';
  }
  return 0;
}

int run_eval(const std::string& data, const std::string& model_file) {
  const auto params = train::load_model(model_file);
  const DatasetPair pair = load_dataset(data);
  print_metrics(train::evaluate(params, pair.test));
  return 0;
}

std::vector<std::vector<session::LevelChangeRecord>> read_logs(const fs::path& dir) {
  std::vector<std::vector<session::LevelChangeRecord>> all;
  for (const fs::path& d : {dir, dir / "sessions"}) {
    if (!fs::is_directory(d)) continue;
    for (const auto& entry : fs::directory_iterator(d)) {
      if (entry.path().extension() != ".jsonl") continue;
      std::ifstream in(entry.path());
      all.push_back(session::records_from_log(in));
    }
  }
  return all;
}

void print_aggregate(const std::vector<session::AggregateRow>& rows, bool csv) {
  if (csv) {
    std::cout << session::aggregate_csv(rows);
    return;
  }
  std::printf("%5s %10s %12s %7s\n", "label", "measured", "theoretical", "n");
  for (const auto& r : rows) {
    std::printf("%5d %10.4f %12.4f %7zu\n", r.level_label, r.measured, r.theoretical, r.n);
  }
}

struct SimArgs {
  std::size_t players = 100;
  std::string capacity = "inf";
  std::int64_t reaction_ms = 500;
  std::int64_t answer_window_ms = session::kDefaultAnswerWindowMs;
  std::size_t max_trials = 200000;
  std::uint64_t seed = 1;
  std::string out;
  bool csv = false;
};

int run_simulate(const SimArgs& a) {
  session::Agent agent;
  if (a.capacity != "inf") {
    agent.capacity = std::stoi(a.capacity);
    if (agent.capacity < 0) throw std::invalid_argument("capacity must be non-negative");
  }
  agent.reaction_ms = a.reaction_ms;
  fs::path dir;
  if (!a.out.empty()) {
    dir = fs::path(a.out) / "sessions";
    fs::create_directories(dir);
  }
  std::vector<std::vector<session::LevelChangeRecord>> all;
  std::size_t completed = 0;
  for (std::size_t k = 0; k < a.players; ++k) {
    session::SessionConfig cfg;
    cfg.seed = Rng(a.seed, k).next();
    cfg.answer_window_ms = a.answer_window_ms;
    char id[32];
    std::snprintf(id, sizeof id, "sim-%06zu", k);
    std::ofstream log;
    session::Session::Sink sink;
    if (!dir.empty()) {
      log.open(dir / (std::string(id) + ".jsonl"), std::ios::trunc);
      sink = [&log](const std::string& line) { log << line << '\n'; };
    }
    auto s = session::simulate(agent, id, cfg, a.max_trials, sink);
    if (s.state().status == session::Status::kCompleted) ++completed;
    all.push_back(s.state().records);
  }
  if (!a.csv) {
    std::cout << a.players << " players, " << completed << " completed level "
              << session::kFinalLevel << '\n';
  }
  print_aggregate(session::aggregate(all), a.csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Counting-dataset workbench and subitizing test service"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a dataset pair");
  g->add_option("--series", gen.series, "m1|m2|a1|a2")->capture_default_str();
  g->add_option("--variant", gen.variant, "naive|no-centering|disjunct|hard")
      ->capture_default_str();
  g->add_option("--stamp", gen.stamp, "3x3|1px|glyphs (default follows the series)");
  g->add_option("--m", gen.m, "Maximum count (3..9)")->capture_default_str();
  g->add_option("--dist", gen.dist, "Train count law: uniform|pow102x");
  g->add_option("--train", gen.train, "Train images");
  g->add_option("--test", gen.test, "Test images");
  g->add_option("--test-pixels", gen.test_pixels, "HARD: positions on the test side");
  g->add_option("--catalog", gen.catalog_name, "Use a named catalog entry instead");
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_flag("--gzip", gen.gzip, "Write .gz IDX files");

  std::string validate_dir;
  auto* v = app.add_subcommand("validate", "Check a generated directory against its manifest");
  v->add_option("--dir", validate_dir)->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train softmax regression or an MLP");
  t->add_option("--data", tr.data, "Dataset directory")->required();
  t->add_option("--model", tr.model, "softmax|mlp")->capture_default_str();
  t->add_option("--lr", tr.lr);
  t->add_option("--batch", tr.batch);
  t->add_option("--steps", tr.steps, "Mini-batch steps (softmax default 1000)");
  t->add_option("--epochs", tr.epochs, "Epochs (MLP default 10)");
  t->add_option("--hidden", tr.hidden)->capture_default_str();
  t->add_option("--seed", tr.seed)->capture_default_str();
  t->add_option("--out", tr.out, "Model checkpoint file");
  t->add_option("--weights-dir", tr.weights_dir, "Write per-class weight PGMs (softmax)");

  std::string eval_data, eval_model;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a test split");
  e->add_option("--data", eval_data)->required();
  e->add_option("--model-file", eval_model)->required();

  service::ServiceConfig svc;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "smnist-data", datasets_dir, static_dir;
  std::optional<std::uint64_t> svc_seed;
  auto* sv = app.add_subcommand("serve", "Run the HTTP service");
  sv->add_option("--host", host)->capture_default_str()->envname("SMNIST_HOST");
  sv->add_option("--port", port)->capture_default_str()->envname("SMNIST_PORT");
  sv->add_option("--data-dir", data_dir)->capture_default_str()->envname("SMNIST_DATA_DIR");
  sv->add_option("--datasets-dir", datasets_dir, "Default: <data-dir>/datasets");
  sv->add_option("--static-dir", static_dir, "Web client assets served at /");
  sv->add_option("--answer-window-ms", svc.answer_window_ms)
      ->capture_default_str()
      ->envname("SMNIST_ANSWER_WINDOW_MS");
  sv->add_option("--seed", svc_seed, "Fix session ids and trial streams");

  SimArgs sim;
  auto* si = app.add_subcommand("simulate", "Play synthetic sessions through the engine");
  si->add_option("--players", sim.players)->capture_default_str();
  si->add_option("--capacity", sim.capacity, "Largest count answered exactly, or inf")
      ->capture_default_str();
  si->add_option("--reaction-ms", sim.reaction_ms)->capture_default_str();
  si->add_option("--answer-window-ms", sim.answer_window_ms)->capture_default_str();
  si->add_option("--max-trials", sim.max_trials)->capture_default_str();
  si->add_option("--seed", sim.seed)->capture_default_str();
  si->add_option("--out", sim.out, "Write logs to <out>/sessions");
  si->add_flag("--csv", sim.csv);

  std::string logs_dir;
  bool agg_csv = false;
  auto* ag = app.add_subcommand("aggregate", "Measured vs theoretical streak means from logs");
  ag->add_option("--logs", logs_dir, "Directory of .jsonl logs (or a data dir)")->required();
  ag->add_flag("--csv", agg_csv);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*g) return run_gen(gen);
    if (*v) return run_validate(validate_dir);
    if (*t) return run_train(tr);
    if (*e) return run_eval(eval_data, eval_model);
    if (*si) return run_simulate(sim);
    if (*ag) {
      print_aggregate(session::aggregate(read_logs(logs_dir)), agg_csv);
      return 0;
    }
    if (*sv) {
      svc.data_dir = data_dir;
      if (!datasets_dir.empty()) svc.datasets_dir = datasets_dir;
      if (!static_dir.empty()) svc.static_dir = static_dir;
      svc.seed = svc_seed;
      service::Service service(svc);
      std::cout << "restored " << service.restored() << " sessions from " << data_dir
                << "; listening on " << host << ':' << port << std::endl;
      if (!service.listen(host, port)) {
        std::cerr << "smnist: cannot listen on " << host << ':' << port << '\n';
        return 1;
      }
      return 0;
    }
  } catch (const std::exception& ex) {
    std::cerr << "smnist: error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}
