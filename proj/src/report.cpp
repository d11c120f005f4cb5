#include "driftbench/report.hpp"

#include "driftbench/csv.hpp"
#include "driftbench/error.hpp"
#include "driftbench/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <tuple>

namespace driftbench {

namespace {

std::size_t parse_index(std::string_view text, const char* column, std::size_t line) {
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(std::string("bad ") + column + " '" + std::string(text) + "'", line);
  }
  return value;
}

struct FinalPoint {
  std::string head, mask, scenario;
  std::size_t task = 0, epoch = 0;
  double accuracy = 0.0;
};

}  // namespace

std::vector<SummaryRow> summarize_results(const std::filesystem::path& results_csv) {
  std::ifstream in(results_csv);
  if (!in) throw IoError("cannot open " + results_csv.string());

  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty results file", line_no);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kResultsHeader) throw ParseError("unexpected header", line_no);

  std::map<std::string, FinalPoint> finals;  // by run_id
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != 9) {
      throw ParseError("expected 9 fields, found " + std::to_string(f.size()), line_no);
    }
    if (f[7] != "overall_accuracy") continue;
    const std::size_t task = parse_index(f[5], "task_index", line_no);
    const std::size_t epoch = parse_index(f[6], "epoch", line_no);
    parse_index(f[1], "seed", line_no);
    double value;
    try {
      value = parse_real(f[8]);
    } catch (const ValidationError&) {
      throw ParseError("bad metric_value '" + std::string(f[8]) + "'", line_no);
    }
    auto [it, inserted] = finals.try_emplace(std::string(f[0]));
    FinalPoint& p = it->second;
    if (inserted || std::tie(task, epoch) >= std::tie(p.task, p.epoch)) {
      p = {std::string(f[3]), std::string(f[4]), std::string(f[2]), task, epoch, value};
    }
  }

  std::map<std::tuple<std::string, std::string, std::string>, std::vector<double>> groups;
  for (const auto& [run, p] : finals) groups[{p.head, p.mask, p.scenario}].push_back(p.accuracy);

  std::vector<SummaryRow> rows;
  for (const auto& [key, values] : groups) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    rows.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), values.size(), mean, std::sqrt(var / n)});
  }
  return rows;
}

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "head,mask,scenario,runs,mean_final_accuracy,std_final_accuracy_population\n";
  for (const auto& r : rows) {
    out << r.head << ',' << r.mask << ',' << r.scenario << ',' << r.runs << ',' << format_real(r.mean) << ','
        << format_real(r.std_population) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string format_summary_table(const std::vector<SummaryRow>& rows) {
  std::ostringstream out;
  out << std::left << std::setw(22) << "head" << std::setw(8) << "mask" << std::setw(26) << "scenario"
      << std::right << std::setw(6) << "runs" << "   accuracy (mean +- population std)\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& r : rows) {
    out << std::left << std::setw(22) << r.head << std::setw(8) << r.mask << std::setw(26) << r.scenario << std::right
        << std::setw(6) << r.runs << "   " << 100.0 * r.mean << " +- " << 100.0 * r.std_population << '\n';
  }
  return out.str();
}

}  // namespace driftbench
