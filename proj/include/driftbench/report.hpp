#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace driftbench {

struct SummaryRow {
  std::string head;
  std::string mask;
  std::string scenario;
  std::size_t runs = 0;
  double mean = 0.0;
  double std_population = 0.0;
};

// Mean and population standard deviation (divides by n) of each run's final
// overall accuracy, grouped by (head, mask, scenario) and sorted by that key.
// The final accuracy of a run is its overall_accuracy at the largest
// (task_index, epoch). Malformed input throws ParseError with a line number.
std::vector<SummaryRow> summarize_results(const std::filesystem::path& results_csv);

void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path);
std::string format_summary_table(const std::vector<SummaryRow>& rows);

}  // namespace driftbench
