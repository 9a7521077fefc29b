// evabs: supervised event abstraction from the command line.
//
//   evabs generate --traces 100 --seed 7 -o generated.xes
//   evabs train -l generated.xes -m model.json --l1 0.1
//   evabs annotate -m model.json -l unlabeled.xes -o labeled.xes --collapse
//   evabs evaluate -l generated.xes --protocol kfold --folds 10 --report report.json
//   evabs convert -i sensors.csv -o days.xes --day-boundary 00:00
//
// Options may also come from a key-value file given with --config; sections name the
// subcommand ([train], [evaluate], ...).

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "evabs/abstraction.hpp"
#include "evabs/eval.hpp"
#include "evabs/petri.hpp"
#include "evabs/xes.hpp"

namespace {

using namespace evabs;

struct ModelOptions {
  double l1 = 0.1;
  std::vector<std::size_t> ngrams{1, 2, 3};
  std::size_t kmax = 3;
  std::vector<std::string> views{"day", "week", "month"};
  double alpha = 1.0;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t max_iterations = 500;

  abstraction::AbstractionConfig config() const {
    abstraction::AbstractionConfig c;
    c.features.ngram_sizes = ngrams;
    c.features.k_max = kmax;
    c.features.alpha = alpha;
    c.features.seed = seed;
    c.features.views.clear();
    for (const auto& v : views) c.features.views.push_back(features::parse_time_view(v));
    c.training.l1 = l1;
    c.training.threads = threads;
    c.training.optimizer.max_iterations = max_iterations;
    return c;
  }
};

void add_model_options(CLI::App* cmd, ModelOptions& o) {
  cmd->add_option("--l1", o.l1, "L1 regularization coefficient")->check(CLI::NonNegativeNumber);
  cmd->add_option("--ngrams", o.ngrams, "n-gram sizes")->delimiter(',');
  cmd->add_option("--kmax", o.kmax, "largest mixture size tried by BIC")->check(CLI::PositiveNumber);
  cmd->add_option("--views", o.views, "time views (day, week, month)")->delimiter(',');
  cmd->add_option("--alpha", o.alpha, "additive smoothing for n-gram tables");
  cmd->add_option("--seed", o.seed, "seed for mixture initialization");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--max-iterations", o.max_iterations, "optimizer iteration cap");
}

void print_diagnostics(const Diagnostics& d) {
  for (const auto& m : d.messages) std::cerr << "warning: " << m << "\n";
}

std::int64_t parse_day_boundary(const std::string& s) {
  int h = 0, m = 0;
  char colon = 0;
  std::istringstream in(s);
  if (s.find(':') != std::string::npos) {
    if (!(in >> h >> colon >> m) || colon != ':' || h < 0 || h > 23 || m < 0 || m > 59)
      throw ConfigError("day boundary must be HH:MM or seconds, got '" + s + "'");
    return h * 3600 + m * 60;
  }
  std::int64_t secs = 0;
  if (!(in >> secs) || secs < 0 || secs >= 86400)
    throw ConfigError("day boundary must be HH:MM or seconds, got '" + s + "'");
  return secs;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised event abstraction with linear-chain CRFs"};
  app.set_config("--config", "", "key-value configuration file");
  app.require_subcommand(1);

  // generate
  std::string process = "medicine-eating", high_level_file, gen_out;
  std::vector<std::string> subprocess_files;
  std::size_t num_traces = 100;
  std::uint64_t gen_seed = 7;
  double mean_delay = 60.0, stop_probability = 0.5;
  auto* gen = app.add_subcommand("generate", "play out a hierarchical process into an annotated log");
  gen->add_option("--process", process, "built-in process name");
  gen->add_option("--high-level", high_level_file, "high-level net file (replaces --process)");
  gen->add_option("--subprocess", subprocess_files, "LABEL=net file, one per high-level label");
  gen->add_option("--traces", num_traces, "number of traces");
  gen->add_option("--seed", gen_seed, "random seed");
  gen->add_option("--mean-delay", mean_delay, "mean seconds between events")->check(CLI::PositiveNumber);
  gen->add_option("--stop-probability", stop_probability, "chance of ending at a final marking")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("-o,--output", gen_out, "output XES")->required();

  // convert
  std::string csv_in, conv_out, day_boundary = "00:00";
  auto* conv = app.add_subcommand("convert", "turn binary sensor readings into a day-per-trace log");
  conv->add_option("-i,--input", csv_in, "CSV with header sensor,timestamp,value")->required();
  conv->add_option("-o,--output", conv_out, "output XES")->required();
  conv->add_option("--day-boundary", day_boundary, "time of day that separates traces (HH:MM)");

  // train
  std::string train_log, model_path;
  ModelOptions train_opts;
  auto* train = app.add_subcommand("train", "fit a model on an annotated log");
  train->add_option("-l,--log", train_log, "annotated XES")->required();
  train->add_option("-m,--model", model_path, "model output")->required();
  add_model_options(train, train_opts);

  // annotate
  std::string ann_model, ann_log, ann_out;
  bool collapse = false;
  auto* ann = app.add_subcommand("annotate", "label a log with a trained model");
  ann->add_option("-m,--model", ann_model, "model file")->required();
  ann->add_option("-l,--log", ann_log, "input XES")->required();
  ann->add_option("-o,--output", ann_out, "output XES")->required();
  ann->add_flag("--collapse", collapse, "write the collapsed high-level log instead");

  // evaluate
  std::string eval_log, protocol = "loocv", report_path, mode = "events";
  std::size_t folds = 10;
  std::uint64_t fold_seed = 1;
  ModelOptions eval_opts;
  auto* ev = app.add_subcommand("evaluate", "cross-validate on an annotated log");
  ev->add_option("-l,--log", eval_log, "annotated XES")->required();
  ev->add_option("--protocol", protocol, "loocv or kfold")->check(CLI::IsMember({"loocv", "kfold"}));
  ev->add_option("--folds", folds, "k for kfold");
  ev->add_option("--fold-seed", fold_seed, "seed for the fold shuffle");
  ev->add_option("--similarity-mode", mode, "events or runs")->check(CLI::IsMember({"events", "runs"}));
  ev->add_option("--report", report_path, "JSON report output");
  add_model_options(ev, eval_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*gen) {
      if (num_traces == 0) throw ConfigError("--traces must be at least 1");
      petri::HierarchicalProcess proc;
      if (!high_level_file.empty()) {
        proc.high_level = petri::read_net_file(high_level_file);
        for (const auto& arg : subprocess_files) {
          auto eq = arg.find('=');
          if (eq == std::string::npos) throw ConfigError("--subprocess expects LABEL=FILE, got '" + arg + "'");
          proc.subprocesses[arg.substr(0, eq)] = petri::read_net_file(arg.substr(eq + 1));
        }
      } else if (process == "medicine-eating") {
        proc = petri::medicine_eating_process();
      } else {
        throw ConfigError("unknown built-in process '" + process + "'");
      }
      proc.check();
      petri::GeneratorOptions opts;
      opts.num_traces = num_traces;
      opts.seed = gen_seed;
      opts.timestamps.mean_delay_seconds = mean_delay;
      opts.playout.stop_probability = stop_probability;
      auto log = petri::generate_annotated_log(proc, opts);
      xes::write_xes_file(log, gen_out);
      std::cout << "traces: " << log.traces.size() << "\nevents: " << log.event_count() << "\n";
    } else if (*conv) {
      std::ifstream in(csv_in);
      if (!in) throw Error("cannot open '" + csv_in + "'");
      Diagnostics d;
      auto log = xes::sensor_series_to_log(xes::read_sensor_csv(in), parse_day_boundary(day_boundary), &d);
      print_diagnostics(d);
      xes::write_xes_file(log, conv_out);
      std::cout << "traces: " << log.traces.size() << "\nevents: " << log.event_count() << "\n";
    } else if (*train) {
      auto log = xes::read_xes_file(train_log);
      auto model = abstraction::fit(log, train_opts.config());
      abstraction::save_model_file(model, model_path);
      const auto features = model.weights.size();
      const auto nz = model.summary.nonzero_weights;
      std::cout << "labels: " << model.labels().size() << "\nfeature families: " << model.catalog.families.size()
                << "\nweights: " << features << "\nnonzero weights: " << nz << " ("
                << std::fixed << std::setprecision(1)
                << (features ? 100.0 * static_cast<double>(nz) / static_cast<double>(features) : 0.0)
                << "%)\n" << std::setprecision(6) << "objective: " << model.summary.objective
                << "\niterations: " << model.summary.iterations << " (" << model.summary.status << ")\n";
    } else if (*ann) {
      auto model = abstraction::load_model_file(ann_model);
      auto log = xes::read_xes_file(ann_log);
      Diagnostics d;
      auto labeled = abstraction::annotate(model, log, &d);
      print_diagnostics(d);
      xes::write_xes_file(collapse ? abstraction::collapse(labeled) : labeled, ann_out);
      std::cout << "traces: " << log.traces.size() << "\nevents: " << log.event_count() << "\n";
    } else if (*ev) {
      auto log = xes::read_xes_file(eval_log);
      eval::EvalConfig cfg;
      cfg.abstraction = eval_opts.config();
      cfg.mode = eval::parse_similarity_mode(mode);
      cfg.threads = eval_opts.threads;
      cfg.abstraction.training.threads = 1;
      auto report = protocol == "loocv" ? eval::leave_one_trace_out(log, cfg)
                                        : eval::k_fold(log, folds, fold_seed, cfg);
      for (const auto& m : report.diagnostics) std::cerr << "warning: " << m << "\n";
      if (!report_path.empty()) {
        std::ostringstream json;
        eval::write_report_json(report, json);
        write_text(report_path, json.str());
      }
      eval::write_report_table(report, std::cout);
    }
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
