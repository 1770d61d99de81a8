#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sgfd/runner.hpp"

namespace sgfd {

// Parsed form of a trace CSV. Column layout is fixed:
//   k, alpha_k, mean_gap, mean_grad_sq, var_mk, replications
// mean_gap holds E[F(x_k)] - F* when the optimal value is known and the raw
// mean objective otherwise; var_mk is populated only by momentum runs.
// Missing values are empty fields in the file and empty optionals here.
struct TraceTable {
  std::vector<long> k;
  std::vector<double> alpha;
  std::vector<double> mean_gap;
  std::vector<double> mean_grad_sq;
  std::vector<std::optional<double>> var_mk;
  long replications = 0;

  std::size_t rows() const { return k.size(); }
};

// Render a trace to CSV text. Doubles are printed with 17 significant
// digits, so parsing the output recovers them bit-for-bit.
std::string format_trace_csv(const Trace& trace);

// format_trace_csv + atomic-ish write (whole string, single ofstream).
void write_trace_csv(const Trace& trace, const std::string& path);

// Strict parsers: exact header required, every row must have six fields,
// numeric fields must parse completely. Throws std::runtime_error with a
// line number on malformed input.
TraceTable parse_trace_csv(std::istream& in);
TraceTable parse_trace_csv_file(const std::string& path);

// Format one double exactly as the CSV writer does ("%.17g").
std::string format_double(double v);

}  // namespace sgfd
