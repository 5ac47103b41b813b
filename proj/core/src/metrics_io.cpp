#include "vapo/metrics_io.hpp"

#include <istream>
#include <ostream>

#include "vapo/errors.hpp"

namespace vapo::metrics_io {

using nlohmann::json;
using trainer::MetricsRow;

namespace {

struct ScalarField {
  const char* name;
  double MetricsRow::*member;
};

constexpr ScalarField kScalars[] = {
    {"success_rate", &MetricsRow::success_rate},
    {"mean_length", &MetricsRow::mean_length},
    {"entropy", &MetricsRow::entropy},
    {"explained_variance", &MetricsRow::explained_variance},
    {"ppo_loss", &MetricsRow::ppo_loss},
    {"value_loss", &MetricsRow::value_loss},
    {"nll_loss", &MetricsRow::nll_loss},
    {"kl_loss", &MetricsRow::kl_loss},
    {"clip_fraction", &MetricsRow::clip_fraction},
    {"lambda_policy_mean", &MetricsRow::lambda_policy_mean},
};

// Shortest round-trip representation, identical for JSON and CSV output.
std::string number(double v) { return json(v).dump(); }

}  // namespace

const std::vector<std::string>& field_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n{"step", "phase"};
    for (const auto& f : kScalars) n.emplace_back(f.name);
    return n;
  }();
  return names;
}

json to_json(const MetricsRow& row) {
  json j;
  j["step"] = row.step;
  j["phase"] = row.phase;
  for (const auto& f : kScalars) j[f.name] = row.*f.member;
  return j;
}

MetricsRow from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("metrics: expected object");
  MetricsRow row;
  try {
    row.step = j.at("step").get<long>();
    row.phase = j.at("phase").get<std::string>();
    for (const auto& f : kScalars) row.*f.member = j.at(f.name).get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("metrics: ") + e.what());
  }
  return row;
}

void write_jsonl_row(std::ostream& os, const MetricsRow& row) {
  os << "{\"step\":" << row.step << ",\"phase\":" << json(row.phase).dump();
  for (const auto& f : kScalars) os << ",\"" << f.name << "\":" << number(row.*f.member);
  os << "}\n";
}

std::vector<MetricsRow> read_jsonl(std::istream& is) {
  std::vector<MetricsRow> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw ConfigError("metrics: line " + std::to_string(lineno) + ": invalid JSON");
    try {
      rows.push_back(from_json(j));
    } catch (const ConfigError& e) {
      throw ConfigError("metrics: line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_csv_header(std::ostream& os) {
  const auto& names = field_names();
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << '\n';
}

void write_csv_row(std::ostream& os, const MetricsRow& row) {
  os << row.step << ',' << row.phase;
  for (const auto& f : kScalars) os << ',' << number(row.*f.member);
  os << '\n';
}

double field(const MetricsRow& row, const std::string& name) {
  if (name == "step") return static_cast<double>(row.step);
  for (const auto& f : kScalars) {
    if (name == f.name) return row.*f.member;
  }
  throw ConfigError("metrics: unknown field '" + name + "'");
}

}  // namespace vapo::metrics_io
