#include <algorithm>
#include <sstream>

#include <gtest/gtest.h>

#include "vapo/errors.hpp"
#include "vapo/metrics_io.hpp"

namespace vapo::metrics_io {
namespace {

trainer::MetricsRow sample_row(long step) {
  trainer::MetricsRow r;
  r.step = step;
  r.phase = step < 2 ? "pretrain" : "train";
  r.success_rate = 0.1 + 0.2;
  r.mean_length = 12.125;
  r.entropy = 1.0 / 3.0;
  r.explained_variance = -0.5;
  r.ppo_loss = 1e-17;
  r.value_loss = 0.25;
  r.nll_loss = 0.0;
  r.kl_loss = 2.0;
  r.clip_fraction = 0.03125;
  r.lambda_policy_mean = 0.8;
  return r;
}

void expect_same(const trainer::MetricsRow& a, const trainer::MetricsRow& b) {
  EXPECT_EQ(a.step, b.step);
  EXPECT_EQ(a.phase, b.phase);
  for (const auto& name : field_names()) {
    if (name == "step" || name == "phase") continue;
    EXPECT_EQ(field(a, name), field(b, name)) << name;
  }
}

TEST(MetricsIo, FieldOrderStartsWithStep) {
  const auto& names = field_names();
  ASSERT_GE(names.size(), 3u);
  EXPECT_EQ(names[0], "step");
  EXPECT_EQ(names[1], "phase");
  EXPECT_EQ(names[2], "success_rate");
}

TEST(MetricsIo, JsonlRoundTripIsExact) {
  std::stringstream ss;
  for (long s = 0; s < 4; ++s) write_jsonl_row(ss, sample_row(s));
  const auto rows = read_jsonl(ss);
  ASSERT_EQ(rows.size(), 4u);
  for (long s = 0; s < 4; ++s) expect_same(rows[static_cast<std::size_t>(s)], sample_row(s));
}

TEST(MetricsIo, JsonlKeysInFieldOrder) {
  std::stringstream ss;
  write_jsonl_row(ss, sample_row(3));
  const std::string line = ss.str();
  EXPECT_EQ(line.back(), '\n');
  std::size_t pos = 0;
  for (const auto& name : field_names()) {
    const auto at = line.find("\"" + name + "\"", pos);
    ASSERT_NE(at, std::string::npos) << name;
    pos = at;
  }
}

TEST(MetricsIo, MalformedLineNamesLineNumber) {
  std::stringstream ss;
  write_jsonl_row(ss, sample_row(0));
  ss << "{not json\n";
  try {
    read_jsonl(ss);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(MetricsIo, CsvHeaderMatchesFields) {
  std::stringstream ss;
  write_csv_header(ss);
  std::string expected;
  for (const auto& name : field_names()) expected += (expected.empty() ? "" : ",") + name;
  EXPECT_EQ(ss.str(), expected + "\n");
}

TEST(MetricsIo, CsvRowHasOneCellPerField) {
  std::stringstream ss;
  write_csv_row(ss, sample_row(5));
  const auto line = ss.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')), field_names().size() - 1);
  EXPECT_EQ(line.rfind("5,train,", 0), 0u);
}

TEST(MetricsIo, UnknownFieldIsConfigError) { EXPECT_THROW(field(sample_row(0), "reward"), ConfigError); }

}  // namespace
}  // namespace vapo::metrics_io
