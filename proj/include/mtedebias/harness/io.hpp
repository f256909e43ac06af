#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mtedebias/dgp.hpp"

namespace mte::harness {

// Shortest decimal text that reads back to the same double; "nan", "inf" and
// "-inf" for non-finite values.
std::string format_number(double value);
std::string format_number(std::size_t value);

// CSV with a leading "# mtedebias <kind> schema <version>" line.
struct CsvTable {
  std::string kind;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }
  std::string render() const;
};

std::string render_json(const nlohmann::json& doc);

// JSON helper: null for non-finite values.
nlohmann::json number_or_null(double value);

std::string sample_csv(const dgp::Sample& sample, bool latent);
// Reads the observed columns (y, d_star, x, z) of a sample CSV. Throws IoError.
dgp::ObservedData read_sample_csv(const std::string& path);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

}  // namespace mte::harness
