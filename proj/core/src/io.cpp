#include "fedbuff/io.hpp"

#include <bit>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "fedbuff/errors.hpp"

namespace fedbuff {

uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t hash_doubles(const std::vector<double>& v) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (double x : v) {
    uint64_t bits = std::bit_cast<uint64_t>(x);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffULL;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

std::string hex64(uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, x);
  return std::string(buf);
}

std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

const char* const kMetricsCsvHeader =
    "t,grad_norm_sq,f_value,max_staleness_so_far,uploads_so_far,wall_events,algorithm";

void write_metrics_csv(std::ostream& out, const RunRecord& record) {
  out << kMetricsCsvHeader << '\n';
  char buf[256];
  for (const MetricRow& r : record.rows) {
    std::snprintf(buf, sizeof(buf), "%" PRId64 ",%.17g,%.17g,%" PRId64 ",%" PRId64 ",%" PRId64 ",%s\n",
                  r.t, r.grad_norm_sq, r.f_value, r.max_staleness_so_far, r.uploads_so_far,
                  r.wall_events, record.algorithm.c_str());
    out << buf;
  }
}

ParsedMetrics read_metrics_csv(std::istream& in) {
  ParsedMetrics out;
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("metrics csv: empty file");
  if (line != kMetricsCsvHeader) throw ConfigError("metrics csv: unexpected header: " + line);
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MetricRow r;
    char algo[64] = {0};
    const int got = std::sscanf(line.c_str(),
                                "%" SCNd64 ",%lg,%lg,%" SCNd64 ",%" SCNd64 ",%" SCNd64 ",%63s",
                                &r.t, &r.grad_norm_sq, &r.f_value, &r.max_staleness_so_far,
                                &r.uploads_so_far, &r.wall_events, algo);
    if (got != 7) {
      throw ConfigError("metrics csv: malformed line " + std::to_string(line_no));
    }
    if (out.rows.empty()) out.algorithm = algo;
    out.rows.push_back(r);
  }
  return out;
}

ParsedMetrics read_metrics_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics csv: " + path);
  return read_metrics_csv(in);
}

void EventLogWriter::write(double time, uint64_t seq, const char* kind, int client,
                           int64_t step) {
  char buf[192];
  std::snprintf(buf, sizeof(buf),
                "{\"time\":%.17g,\"seq\":%" PRIu64 ",\"kind\":\"%s\",\"client\":%d,\"step\":%" PRId64 "}\n",
                time, seq, kind, client, step);
  out_ << buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write file: " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

}  // namespace fedbuff
