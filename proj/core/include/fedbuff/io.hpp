#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "fedbuff/run_record.hpp"

namespace fedbuff {

uint64_t fnv1a64(std::string_view s);
// Order-sensitive, endianness-independent hash of raw double bits.
uint64_t hash_doubles(const std::vector<double>& v);
std::string hex64(uint64_t x);

// Shortest round-trippable decimal ("%.17g"); the byte-stability anchor for
// CSV and JSONL output.
std::string format_g17(double x);

// Metrics CSV. Column order is fixed; downstream diff-based checks depend on
// byte-identical output for identical runs.
extern const char* const kMetricsCsvHeader;
void write_metrics_csv(std::ostream& out, const RunRecord& record);

struct ParsedMetrics {
  std::vector<MetricRow> rows;
  std::string algorithm;
};
ParsedMetrics read_metrics_csv(std::istream& in);
ParsedMetrics read_metrics_csv_file(const std::string& path);

// Event log: one JSON object per line, fixed key order
// {"time":...,"seq":...,"kind":"download"|"upload","client":...,"step":...}
class EventLogWriter {
 public:
  explicit EventLogWriter(std::ostream& out) : out_(out) {}
  void write(double time, uint64_t seq, const char* kind, int client, int64_t step);

 private:
  std::ostream& out_;
};

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace fedbuff
