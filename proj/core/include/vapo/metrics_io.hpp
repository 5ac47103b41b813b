#ifndef VAPO_METRICS_IO_HPP_
#define VAPO_METRICS_IO_HPP_

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vapo/trainer.hpp"

namespace vapo::metrics_io {

// Field names, in output order. Shared by the JSON-lines and CSV writers.
const std::vector<std::string>& field_names();

nlohmann::json to_json(const trainer::MetricsRow& row);
trainer::MetricsRow from_json(const nlohmann::json& j);

// One compact JSON object per line, keys in field_names() order.
void write_jsonl_row(std::ostream& os, const trainer::MetricsRow& row);
// Throws ConfigError naming the 1-based line number on malformed input.
std::vector<trainer::MetricsRow> read_jsonl(std::istream& is);

void write_csv_header(std::ostream& os);
void write_csv_row(std::ostream& os, const trainer::MetricsRow& row);

// Value of a named scalar field ("success_rate", "entropy", ...).
double field(const trainer::MetricsRow& row, const std::string& name);

}  // namespace vapo::metrics_io

#endif  // VAPO_METRICS_IO_HPP_
