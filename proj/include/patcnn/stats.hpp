#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "patcnn/volume.hpp"

namespace patcnn {

struct PatientRecord {
  std::string case_id;
  double age = 0;
  int sex = 0;  // 0 male, 1 female
  double bmi = 0;
  int deceased = 0;
  int cvd_diagnosis = 0;
  double patv = 0;  // cm3

  void validate() const;
};

struct Correlation {
  double r = 0;
  double p_value = 1;
};

Correlation pearson(std::span<const double> x, std::span<const double> y);
// Both series must be 0/1 with both values present.
Correlation phi(std::span<const double> x, std::span<const double> y);

enum class ModelKind { Ols, Logistic };
std::string to_string(ModelKind k);

inline constexpr double kAlpha = 0.01;

struct Coefficient {
  std::string name;
  double estimate = 0;
  double std_error = 0;
  double statistic = 0;  // t for OLS, Wald z for logistic
  double p_value = 1;
  bool significant = false;  // p < kAlpha
};

struct ScreenEntry {
  std::string name;
  std::string method;  // pearson, phi or point-biserial
  double r = 0;
  double p_value = 1;
  bool passed = false;
};

struct RegressionReport {
  std::string outcome;
  ModelKind model_kind = ModelKind::Ols;
  std::size_t n = 0;
  std::optional<Coefficient> intercept;
  std::vector<Coefficient> regressors;
  std::vector<ScreenEntry> screening;
  std::string error;  // non-empty when the fit failed
  // Fit diagnostics.
  int iterations = 0;
  double residual_variance = 0;

  const Coefficient* find(const std::string& name) const;
};

// design must already contain the intercept column (column 0) if one is
// wanted. names has one entry per column.
RegressionReport ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                         const std::vector<std::string>& names, const std::string& outcome = "y");
RegressionReport logistic_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                              const std::vector<std::string>& names, const std::string& outcome = "y");

// Builds [1, columns...] from records for the named fields.
Eigen::MatrixXd design_matrix(const std::vector<PatientRecord>& records, const std::vector<std::string>& fields);
std::vector<double> field_values(const std::vector<PatientRecord>& records, const std::string& field);
bool is_binary_field(const std::string& field);

// Univariate screen at kAlpha, then OLS (patv, cvd_diagnosis) or logistic
// (deceased) on the regressors that passed. Fit errors are captured in the
// report instead of aborting the other outcomes.
std::vector<RegressionReport> run_paper_analysis(const std::vector<PatientRecord>& records);

inline const std::vector<std::string>& analysis_outcomes() {
  static const std::vector<std::string> v{"patv", "cvd_diagnosis", "deceased"};
  return v;
}
inline const std::vector<std::string>& candidate_regressors() {
  static const std::vector<std::string> v{"sex", "age", "bmi", "patv"};
  return v;
}

// Long-form CSV: one row per (outcome, term).
std::string format_report_csv(const std::vector<RegressionReport>& reports);
// Text table with regressors as rows and outcomes as columns; cells for
// regressors that were not entered are "excluded".
std::string format_report_table(const std::vector<RegressionReport>& reports);

}  // namespace patcnn
