#include "patcnn/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "patcnn/kv.hpp"

namespace patcnn {
namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double number(const std::string& s, const std::string& what) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw FormatError(what + ": expected a number, got '" + s + "'");
  return v;
}

int integer(const std::string& s, const std::string& what) {
  const double v = number(s, what);
  if (v != static_cast<int>(v)) throw FormatError(what + ": expected an integer, got '" + s + "'");
  return static_cast<int>(v);
}

std::string fmt(double v, const char* f) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw FormatError("csv: missing column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto row = split_row(line);
    if (t.header.empty()) {
      t.header = std::move(row);
      continue;
    }
    if (row.size() != t.header.size())
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(row.size()));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw FormatError(source + ": empty CSV");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str(), path.string());
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

std::string format_records_csv(const std::vector<PatientRecord>& records) {
  std::string out = "case_id,age,sex,bmi,deceased,cvd_diagnosis\n";
  for (const auto& r : records)
    out += r.case_id + "," + fmt(r.age, "%.4f") + "," + std::to_string(r.sex) + "," + fmt(r.bmi, "%.4f") + "," +
           std::to_string(r.deceased) + "," + std::to_string(r.cvd_diagnosis) + "\n";
  return out;
}

std::vector<PatientRecord> read_records_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto id = t.column("case_id"), age = t.column("age"), sex = t.column("sex"), bmi = t.column("bmi"),
             dead = t.column("deceased"), cvd = t.column("cvd_diagnosis");
  std::vector<PatientRecord> out;
  for (const auto& row : t.rows) {
    PatientRecord r;
    const std::string what = path.string() + " (" + row[id] + ")";
    r.case_id = row[id];
    r.age = number(row[age], what);
    r.sex = integer(row[sex], what);
    r.bmi = number(row[bmi], what);
    r.deceased = integer(row[dead], what);
    r.cvd_diagnosis = integer(row[cvd], what);
    out.push_back(r);
  }
  return out;
}

std::map<std::string, double> read_patv_csv(const std::filesystem::path& path) {
  const CsvTable t = read_csv(path);
  const auto id = t.column("case_id");
  const auto val = t.has_column("patv_cm3") ? t.column("patv_cm3") : t.column("patv_pred_cm3");
  std::map<std::string, double> out;
  for (const auto& row : t.rows) {
    if (!out.emplace(row[id], number(row[val], path.string())).second)
      throw FormatError(path.string() + ": duplicate case_id " + row[id]);
  }
  return out;
}

std::string format_patv_csv(const std::vector<std::pair<std::string, double>>& rows) {
  std::string out = "case_id,patv_cm3\n";
  for (const auto& [id, v] : rows) out += id + "," + fmt(v, "%.4f") + "\n";
  return out;
}

std::vector<PatientRecord> join_patv(std::vector<PatientRecord> records, const std::map<std::string, double>& patv) {
  for (auto& r : records) {
    const auto it = patv.find(r.case_id);
    if (it == patv.end()) throw DomainError("no PATV value for case " + r.case_id);
    r.patv = it->second;
  }
  return records;
}

}  // namespace patcnn
