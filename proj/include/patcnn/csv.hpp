#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "patcnn/stats.hpp"

namespace patcnn {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column position by name; throws FormatError when absent.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;
};

// Plain comma-separated text without quoting; blank lines are skipped and
// every row must have the header's width.
CsvTable parse_csv(const std::string& text, const std::string& source = "<csv>");
CsvTable read_csv(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// case_id,age,sex,bmi,deceased,cvd_diagnosis
std::string format_records_csv(const std::vector<PatientRecord>& records);
// patv is left at 0; join with read_patv_csv.
std::vector<PatientRecord> read_records_csv(const std::filesystem::path& path);

// case_id,patv_cm3 (patv_pred_cm3 is accepted as the value column too).
std::map<std::string, double> read_patv_csv(const std::filesystem::path& path);
std::string format_patv_csv(const std::vector<std::pair<std::string, double>>& rows);

// Every record must have a PATV entry.
std::vector<PatientRecord> join_patv(std::vector<PatientRecord> records, const std::map<std::string, double>& patv);

}  // namespace patcnn
