#include "sgfd/trace_io.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sgfd {

namespace {

constexpr const char* kHeader = "k,alpha_k,mean_gap,mean_grad_sq,var_mk,replications";

[[noreturn]] void fail(const std::string& context, long line,
                       const std::string& what) {
  std::ostringstream msg;
  msg << context << ": line " << line << ": " << what;
  throw std::runtime_error(msg.str());
}

double parse_full_double(const std::string& field, const std::string& context,
                         long line) {
  if (field.empty()) fail(context, line, "empty numeric field");
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || errno == ERANGE)
    fail(context, line, "malformed number '" + field + "'");
  return v;
}

long parse_full_long(const std::string& field, const std::string& context,
                     long line) {
  if (field.empty()) fail(context, line, "empty integer field");
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(field.c_str(), &end, 10);
  if (end != field.c_str() + field.size() || errno == ERANGE)
    fail(context, line, "malformed integer '" + field + "'");
  return v;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
  return fields;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_trace_csv(const Trace& trace) {
  std::string out = kHeader;
  out += '\n';
  char buf[256];
  for (const auto& row : trace.rows) {
    const double gap = row.mean_gap ? *row.mean_gap : row.mean_objective;
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%.17g,", row.k, row.alpha,
                  gap, row.mean_grad_sq);
    out += buf;
    if (row.var_direction) out += format_double(*row.var_direction);
    std::snprintf(buf, sizeof(buf), ",%ld\n",
                  static_cast<long>(trace.replications));
    out += buf;
  }
  return out;
}

void write_trace_csv(const Trace& trace, const std::string& path) {
  const std::string body = format_trace_csv(trace);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw std::runtime_error("short write: " + path);
}

TraceTable parse_trace_csv(std::istream& in) {
  const std::string context = "trace csv";
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) fail(context, 1, "missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader)
    fail(context, line_no,
         "unexpected header '" + line + "' (want '" + kHeader + "')");
  TraceTable table;
  bool have_replications = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 6)
      fail(context, line_no,
           "expected 6 fields, found " + std::to_string(fields.size()));
    table.k.push_back(parse_full_long(fields[0], context, line_no));
    table.alpha.push_back(parse_full_double(fields[1], context, line_no));
    table.mean_gap.push_back(parse_full_double(fields[2], context, line_no));
    table.mean_grad_sq.push_back(parse_full_double(fields[3], context, line_no));
    if (fields[4].empty())
      table.var_mk.emplace_back();
    else
      table.var_mk.emplace_back(parse_full_double(fields[4], context, line_no));
    const long reps = parse_full_long(fields[5], context, line_no);
    if (have_replications && reps != table.replications)
      fail(context, line_no, "replication count changed mid-file");
    table.replications = reps;
    have_replications = true;
  }
  return table;
}

TraceTable parse_trace_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  try {
    return parse_trace_csv(in);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace sgfd
