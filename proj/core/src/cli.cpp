#include "vapo/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "vapo/errors.hpp"
#include "vapo/metrics_io.hpp"

namespace vapo::cli {

namespace fs = std::filesystem;

namespace {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write '" + path.string() + "'");
  return os;
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

bool wants(const config::OutputConfig& out, const std::string& format) {
  for (const auto& f : out.formats) {
    if (f == format) return true;
  }
  return false;
}

std::string checkpoint_name(long step) {
  std::ostringstream name;
  name << "step_" << std::setw(6) << std::setfill('0') << step << ".json";
  return name.str();
}

// Streams rows to the metrics files of one run directory.
class MetricsSink {
 public:
  MetricsSink(const fs::path& dir, const config::OutputConfig& out) {
    if (wants(out, "jsonl")) jsonl_ = open_out(dir / "metrics.jsonl");
    if (wants(out, "csv")) {
      csv_ = open_out(dir / "metrics.csv");
      metrics_io::write_csv_header(csv_);
    }
  }

  void write(const trainer::MetricsRow& row) {
    if (jsonl_.is_open()) metrics_io::write_jsonl_row(jsonl_, row);
    if (csv_.is_open()) metrics_io::write_csv_row(csv_, row);
  }

  void close() {
    for (auto* os : {&jsonl_, &csv_}) {
      if (!os->is_open()) continue;
      os->flush();
      if (!*os) throw IoError("failed writing metrics");
      os->close();
    }
  }

 private:
  std::ofstream jsonl_;
  std::ofstream csv_;
};

trainer::RunResult run_into(const fs::path& dir, const config::ExperimentConfig& cfg) {
  make_dirs(dir);
  {
    auto os = open_out(dir / "config.json");
    os << config::serialize(cfg);
  }
  MetricsSink sink(dir, cfg.output);
  trainer::RunCallbacks callbacks;
  callbacks.on_row = [&](const trainer::MetricsRow& row) { sink.write(row); };
  callbacks.checkpoint_interval = cfg.output.checkpoint_interval;
  if (cfg.output.checkpoint_interval > 0) {
    make_dirs(dir / "checkpoints");
    callbacks.on_checkpoint = [&](long step, const model::Snapshot& snap) {
      auto os = open_out(dir / "checkpoints" / checkpoint_name(step));
      model::save_snapshot(os, snap);
    };
  }
  auto result = trainer::run_experiment(cfg.experiment, callbacks);
  sink.close();
  auto params = open_out(dir / "params.json");
  model::save_snapshot(params, result.final_params);
  return result;
}

nlohmann::json summary_json(const trainer::RunResult& result, std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["rows"] = result.rows.size();
  j["final_success"] = trainer::final_success(result.rows);
  if (!result.rows.empty()) {
    const auto& last = result.rows.back();
    j["last_step"] = last.step;
    j["last_success_rate"] = last.success_rate;
    j["last_mean_length"] = last.mean_length;
    j["last_entropy"] = last.entropy;
    j["last_explained_variance"] = last.explained_variance;
  }
  return j;
}

std::string slug(const std::string& name) {
  std::string s;
  for (char c : name) {
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9');
    if (alnum) {
      s.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    } else if (!s.empty() && s.back() != '_') {
      s.push_back('_');
    }
  }
  while (!s.empty() && s.back() == '_') s.pop_back();
  return s;
}

std::string fixed4(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4) << v;
  return os.str();
}

// Runs `body`, mapping exceptions to one diagnostic line and an exit code.
template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const NumericalError& e) {
    err << "error: numerical failure: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& plot_quantities() {
  static const std::vector<std::pair<std::string, std::string>> q{
      {"length", "mean_length"},
      {"reward", "success_rate"},
      {"entropy", "entropy"},
      {"explained_variance", "explained_variance"},
  };
  return q;
}

config::ExperimentConfig resolve_config(const CommonOptions& opts) {
  config::ExperimentConfig cfg =
      opts.config_path.empty() ? config::ExperimentConfig{} : config::load_file(opts.config_path);
  cfg = config::apply_overrides(cfg, opts.overrides);
  if (opts.seed) cfg.experiment.train.seed = *opts.seed;
  if (!opts.out_dir.empty()) cfg.output.dir = opts.out_dir;
  cfg.validate();
  return cfg;
}

std::string resolve_output_dir(const std::string& dir) {
  const fs::path p(dir);
  const char* root = std::getenv(kOutputRootEnv);
  if (p.is_absolute() || root == nullptr || *root == '\0') return p.string();
  return (fs::path(root) / p).string();
}

int cmd_run(const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto cfg = resolve_config(opts);
    const fs::path dir = resolve_output_dir(cfg.output.dir);
    const auto result = run_into(dir, cfg);
    const auto summary = summary_json(result, cfg.experiment.train.seed);
    auto os = open_out(dir / "summary.json");
    os << summary.dump(2) << '\n';
    out << "run: " << result.rows.size() << " rows, final success " << fixed4(summary["final_success"].get<double>())
        << " -> " << dir.string() << '\n';
    return kOk;
  });
}

int cmd_ablate(const CommonOptions& opts, const std::vector<std::uint64_t>& seeds, std::ostream& out,
               std::ostream& err) {
  return guarded(err, [&] {
    if (seeds.empty()) throw ConfigError("ablate: at least one seed is required");
    const auto cfg = resolve_config(opts);
    const fs::path dir = resolve_output_dir(cfg.output.dir);
    make_dirs(dir);

    auto runner = [&](const std::string& variant, std::uint64_t seed, const trainer::Experiment& e) {
      config::ExperimentConfig run_cfg = cfg;
      run_cfg.experiment = e;
      const auto run_dir = dir / "runs" / slug(variant) / ("seed_" + std::to_string(seed));
      auto result = run_into(run_dir, run_cfg);
      out << "ablate: " << variant << " seed " << seed << " final success "
          << fixed4(trainer::final_success(result.rows)) << '\n';
      return result;
    };
    const auto table = trainer::ablation_suite(cfg.experiment, seeds, runner);

    auto md = open_out(dir / "ablation.md");
    auto csv = open_out(dir / "ablation.csv");
    md << "| Variant |";
    csv << "variant";
    for (auto s : seeds) {
      md << " seed " << s << " |";
      csv << ",seed_" << s;
    }
    md << " mean |\n|---|";
    csv << ",mean\n";
    for (std::size_t i = 0; i < seeds.size(); ++i) md << "---:|";
    md << "---:|\n";
    for (const auto& row : table) {
      md << "| " << row.name << " |";
      csv << '"' << row.name << '"';
      for (double v : row.final_success) {
        md << ' ' << fixed4(v) << " |";
        csv << ',' << fixed4(v);
      }
      md << ' ' << fixed4(row.mean) << " |\n";
      csv << ',' << fixed4(row.mean) << '\n';
    }
    out << "ablate: " << table.size() * seeds.size() << " runs -> " << (dir / "ablation.md").string() << '\n';
    return kOk;
  });
}

int cmd_plotdata(const PlotOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::string field;
    for (const auto& [name, f] : plot_quantities()) {
      if (name == opts.quantity) field = f;
    }
    if (field.empty()) {
      std::string valid;
      for (const auto& [name, f] : plot_quantities()) valid += (valid.empty() ? "" : ", ") + name;
      throw ConfigError("plotdata: unknown quantity '" + opts.quantity + "' (valid: " + valid + ")");
    }
    if (opts.files.empty()) throw ConfigError("plotdata: no metrics files given");

    std::map<long, std::vector<std::optional<double>>> series;
    for (std::size_t i = 0; i < opts.files.size(); ++i) {
      std::ifstream in(opts.files[i]);
      if (!in) throw ConfigError("plotdata: cannot read '" + opts.files[i] + "'");
      std::vector<trainer::MetricsRow> rows;
      try {
        rows = metrics_io::read_jsonl(in);
      } catch (const ConfigError& e) {
        throw ConfigError(opts.files[i] + ": " + e.what());
      }
      if (rows.empty()) throw ConfigError("plotdata: '" + opts.files[i] + "' has no rows");
      for (const auto& row : rows) {
        auto& cells = series[row.step];
        cells.resize(opts.files.size());
        cells[i] = metrics_io::field(row, field);
      }
    }

    std::ofstream file;
    std::ostream* os = &out;
    if (!opts.out_dir.empty()) {
      const fs::path dir = resolve_output_dir(opts.out_dir);
      make_dirs(dir);
      file = open_out(dir / ("plot_" + opts.quantity + ".csv"));
      os = &file;
    }
    *os << "step";
    for (const auto& f : opts.files) *os << ",\"" << f << '"';
    *os << '\n';
    for (const auto& [step, cells] : series) {
      *os << step;
      for (std::size_t i = 0; i < opts.files.size(); ++i) {
        *os << ',';
        if (i < cells.size() && cells[i]) *os << nlohmann::json(*cells[i]).dump();
      }
      *os << '\n';
    }
    return kOk;
  });
}

}  // namespace vapo::cli
