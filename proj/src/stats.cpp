#include "patcnn/stats.hpp"

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace patcnn {
namespace {

void check_series(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) throw DomainError(std::string(what) + ": series lengths differ");
  if (x.size() < 3) throw DomainError(std::string(what) + ": need at least 3 observations");
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DomainError(std::string(what) + ": non-finite value");
}

bool is_zero_one(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double a) { return a == 0.0 || a == 1.0; });
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Coefficient make_coefficient(const std::string& name, double est, double se, bool z_test, double dof) {
  Coefficient c;
  c.name = name;
  c.estimate = est;
  c.std_error = se;
  if (se > 0) {
    c.statistic = est / se;
    const double a = std::abs(c.statistic);
    if (z_test) {
      c.p_value = 2 * boost::math::cdf(boost::math::complement(boost::math::normal(), a));
    } else {
      c.p_value = 2 * boost::math::cdf(boost::math::complement(boost::math::students_t(dof), a));
    }
  } else {
    // Exact fit: the estimate carries no sampling error.
    c.statistic = est == 0 ? 0.0 : std::copysign(INFINITY, est);
    c.p_value = est == 0 ? 1.0 : 0.0;
  }
  c.p_value = std::clamp(c.p_value, 0.0, 1.0);
  c.significant = c.p_value < kAlpha;
  return c;
}

void check_design(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::string>& names,
                  const char* what) {
  if (x.rows() != y.size()) throw DomainError(std::string(what) + ": design and outcome lengths differ");
  if (static_cast<std::size_t>(x.cols()) != names.size())
    throw DomainError(std::string(what) + ": one name per design column required");
  if (x.cols() == 0) throw DomainError(std::string(what) + ": empty design");
  if (x.rows() <= x.cols()) throw DomainError(std::string(what) + ": need more observations than columns");
  if (!x.allFinite() || !y.allFinite()) throw DomainError(std::string(what) + ": non-finite input");
}

// Householder QR without pivoting: R(j,j) measures what column j adds
// beyond the columns before it, which names the offending column directly.
Eigen::HouseholderQR<Eigen::MatrixXd> checked_qr(const Eigen::MatrixXd& x, const std::vector<std::string>& names,
                                                 const char* what) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(x.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double norm = x.col(j).norm();
    if (norm == 0 || std::abs(r(j, j)) <= 1e-10 * norm)
      throw DomainError(std::string(what) + ": design is rank deficient at column '" + names[j] + "'");
  }
  return qr;
}

void fill_coefficients(RegressionReport& rep, const std::vector<std::string>& names, const Eigen::VectorXd& beta,
                       const Eigen::VectorXd& se, bool z_test, double dof) {
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    Coefficient c = make_coefficient(names[j], beta[j], se[j], z_test, dof);
    if (names[j] == "intercept")
      rep.intercept = c;
    else
      rep.regressors.push_back(c);
  }
}

}  // namespace

void PatientRecord::validate() const {
  if (!(age > 0)) throw DomainError("record " + case_id + ": age must be positive");
  if (!(bmi > 0)) throw DomainError("record " + case_id + ": bmi must be positive");
  if (sex != 0 && sex != 1) throw DomainError("record " + case_id + ": sex must be 0 or 1");
  if (deceased != 0 && deceased != 1) throw DomainError("record " + case_id + ": deceased must be 0 or 1");
  if (cvd_diagnosis < 0) throw DomainError("record " + case_id + ": cvd_diagnosis must be >= 0");
  if (!(patv >= 0) || !std::isfinite(patv)) throw DomainError("record " + case_id + ": patv must be >= 0");
}

Correlation pearson(std::span<const double> x, std::span<const double> y) {
  check_series(x, y, "pearson");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0 || syy == 0) throw DomainError("pearson: constant series");
  Correlation c;
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  if (std::abs(c.r) == 1.0) {
    c.p_value = 0;
  } else {
    const double t = c.r * std::sqrt((n - 2) / (1 - c.r * c.r));
    c.p_value = 2 * boost::math::cdf(boost::math::complement(boost::math::students_t(n - 2), std::abs(t)));
  }
  return c;
}

Correlation phi(std::span<const double> x, std::span<const double> y) {
  check_series(x, y, "phi");
  if (!is_zero_one(x) || !is_zero_one(y)) throw DomainError("phi: series must be binary 0/1");
  double a = 0, b = 0, c = 0, d = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] == 1 && y[i] == 1) ++a;
    else if (x[i] == 1) ++b;
    else if (y[i] == 1) ++c;
    else ++d;
  }
  const double denom = (a + b) * (c + d) * (a + c) * (b + d);
  if (denom == 0) throw DomainError("phi: each series needs both values present");
  Correlation out;
  out.r = std::clamp((a * d - b * c) / std::sqrt(denom), -1.0, 1.0);
  const double chi2 = static_cast<double>(x.size()) * out.r * out.r;
  out.p_value = boost::math::cdf(boost::math::complement(boost::math::chi_squared(1), chi2));
  return out;
}

std::string to_string(ModelKind k) { return k == ModelKind::Ols ? "ols" : "logistic"; }

const Coefficient* RegressionReport::find(const std::string& name) const {
  if (name == "intercept") return intercept ? &*intercept : nullptr;
  for (const auto& c : regressors)
    if (c.name == name) return &c;
  return nullptr;
}

RegressionReport ols_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const std::vector<std::string>& names,
                         const std::string& outcome) {
  check_design(x, y, names, "ols_fit");
  const auto qr = checked_qr(x, names, "ols_fit");
  const Eigen::Index p = x.cols();
  const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  Eigen::VectorXd beta = qr.solve(y);
  // A constant outcome is fitted exactly by the intercept alone; the QR
  // solution would leave roundoff slopes with roundoff standard errors.
  const auto icpt = std::find(names.begin(), names.end(), "intercept");
  if (icpt != names.end() && (y.array() == y[0]).all()) {
    beta.setZero();
    beta[icpt - names.begin()] = y[0];
  }
  const Eigen::VectorXd resid = y - x * beta;
  const double dof = static_cast<double>(x.rows() - p);
  const double s2 = resid.squaredNorm() / dof;
  // (X'X)^-1 = R^-1 R^-T
  const Eigen::MatrixXd rinv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd se = (s2 * (rinv * rinv.transpose()).diagonal()).cwiseSqrt();

  RegressionReport rep;
  rep.outcome = outcome;
  rep.model_kind = ModelKind::Ols;
  rep.n = static_cast<std::size_t>(x.rows());
  rep.residual_variance = s2;
  fill_coefficients(rep, names, beta, se, false, dof);
  return rep;
}

RegressionReport logistic_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const std::vector<std::string>& names, const std::string& outcome) {
  check_design(x, y, names, "logistic_fit");
  const std::span<const double> ys(y.data(), static_cast<std::size_t>(y.size()));
  if (!is_zero_one(ys)) throw DomainError("logistic_fit: outcome must be 0/1");
  const double ones = y.sum();
  if (ones == 0 || ones == static_cast<double>(y.size()))
    throw DomainError("logistic_fit: outcome has a single class");
  checked_qr(x, names, "logistic_fit");

  const Eigen::Index p = x.cols();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd prob(y.size()), w(y.size());
  std::ostringstream trace;
  int iter = 0;
  bool converged = false;
  for (iter = 1; iter <= 100; ++iter) {
    const Eigen::VectorXd eta = x * beta;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      prob[i] = 1.0 / (1.0 + std::exp(-eta[i]));
      w[i] = prob[i] * (1 - prob[i]);
    }
    const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
    const Eigen::VectorXd score = x.transpose() * (y - prob);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
      throw DomainError("logistic_fit: information matrix is singular (perfect separation?)");
    const Eigen::VectorXd step = ldlt.solve(score);
    beta += step;
    const double change = step.cwiseAbs().maxCoeff();
    trace << " iter " << iter << ": max|step|=" << change << ";";
    if (!beta.allFinite() || beta.cwiseAbs().maxCoeff() > 1e3)
      throw DomainError("logistic_fit: coefficients diverge beyond 1e3 (perfect separation)");
    if (change < 1e-8) {
      converged = true;
      break;
    }
  }
  if (!converged) throw Error("logistic_fit: no convergence after 100 iterations;" + trace.str());

  const Eigen::VectorXd eta = x * beta;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    prob[i] = 1.0 / (1.0 + std::exp(-eta[i]));
    w[i] = prob[i] * (1 - prob[i]);
  }
  const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::VectorXd se = cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  RegressionReport rep;
  rep.outcome = outcome;
  rep.model_kind = ModelKind::Logistic;
  rep.n = static_cast<std::size_t>(x.rows());
  rep.iterations = iter;
  fill_coefficients(rep, names, beta, se, true, 0);
  return rep;
}

bool is_binary_field(const std::string& field) { return field == "sex" || field == "deceased"; }

std::vector<double> field_values(const std::vector<PatientRecord>& records, const std::string& field) {
  std::vector<double> v;
  v.reserve(records.size());
  for (const auto& r : records) {
    if (field == "age") v.push_back(r.age);
    else if (field == "sex") v.push_back(r.sex);
    else if (field == "bmi") v.push_back(r.bmi);
    else if (field == "deceased") v.push_back(r.deceased);
    else if (field == "cvd_diagnosis") v.push_back(r.cvd_diagnosis);
    else if (field == "patv") v.push_back(r.patv);
    else throw DomainError("unknown record field '" + field + "'");
  }
  return v;
}

Eigen::MatrixXd design_matrix(const std::vector<PatientRecord>& records, const std::vector<std::string>& fields) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(fields.size() + 1));
  x.col(0).setOnes();
  for (std::size_t j = 0; j < fields.size(); ++j) {
    const auto v = field_values(records, fields[j]);
    for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = v[i];
  }
  return x;
}

std::vector<RegressionReport> run_paper_analysis(const std::vector<PatientRecord>& records) {
  if (records.size() < 10) throw DomainError("run_paper_analysis: need at least 10 records");
  for (const auto& r : records) r.validate();

  std::vector<RegressionReport> reports;
  for (const auto& outcome : analysis_outcomes()) {
    const bool logistic = outcome == "deceased";
    const auto yv = field_values(records, outcome);
    std::vector<ScreenEntry> screen;
    std::vector<std::string> entered;
    for (const auto& cand : candidate_regressors()) {
      if (cand == outcome) continue;
      ScreenEntry e;
      e.name = cand;
      const bool bx = is_binary_field(cand), by = is_binary_field(outcome);
      e.method = bx && by ? "phi" : (bx || by) ? "point-biserial" : "pearson";
      const auto xv = field_values(records, cand);
      try {
        const Correlation c = bx && by ? phi(xv, yv) : pearson(xv, yv);
        e.r = c.r;
        e.p_value = c.p_value;
        e.passed = c.p_value < kAlpha;
      } catch (const DomainError&) {
        e.r = NAN;
        e.p_value = 1;
        e.passed = false;
      }
      if (e.passed) entered.push_back(cand);
      screen.push_back(e);
    }

    RegressionReport rep;
    try {
      std::vector<std::string> names{"intercept"};
      names.insert(names.end(), entered.begin(), entered.end());
      const Eigen::MatrixXd x = design_matrix(records, entered);
      const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(yv.data(), static_cast<Eigen::Index>(yv.size()));
      rep = logistic ? logistic_fit(x, y, names, outcome) : ols_fit(x, y, names, outcome);
    } catch (const Error& e) {
      rep = RegressionReport{};
      rep.outcome = outcome;
      rep.model_kind = logistic ? ModelKind::Logistic : ModelKind::Ols;
      rep.n = records.size();
      rep.error = e.what();
    }
    rep.screening = std::move(screen);
    reports.push_back(std::move(rep));
  }
  return reports;
}

std::string format_report_csv(const std::vector<RegressionReport>& reports) {
  std::ostringstream out;
  out << "outcome,model,n,term,screen_method,screen_r,screen_p,entered,coefficient,std_error,statistic,p_value,"
         "significant,error\n";
  for (const auto& rep : reports) {
    std::string err = rep.error;
    std::replace(err.begin(), err.end(), ',', ';');
    std::replace(err.begin(), err.end(), '\n', ' ');
    auto coef_cols = [&](const Coefficient* c) {
      if (!c) return std::string(",,,,");
      return format_double(c->estimate) + "," + format_double(c->std_error) + "," + format_double(c->statistic) +
             "," + format_double(c->p_value) + "," + (c->significant ? "1" : "0");
    };
    const std::string head = rep.outcome + "," + to_string(rep.model_kind) + "," + std::to_string(rep.n) + ",";
    out << head << "intercept,,,,1," << coef_cols(rep.find("intercept")) << "," << err << "\n";
    for (const auto& s : rep.screening) {
      const Coefficient* c = rep.find(s.name);
      out << head << s.name << "," << s.method << "," << format_double(s.r) << "," << format_double(s.p_value) << ","
          << (c ? "1" : "0") << "," << coef_cols(c) << "," << err << "\n";
    }
  }
  return out.str();
}

std::string format_report_table(const std::vector<RegressionReport>& reports) {
  auto cell = [](const std::string& s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-18s", s.c_str());
    return std::string(buf);
  };
  std::ostringstream out;
  out << cell("Regressor");
  for (const auto& rep : reports) out << cell(rep.outcome + " (" + to_string(rep.model_kind) + ")");
  out << "\n";
  for (const auto& name : candidate_regressors()) {
    out << cell(name);
    for (const auto& rep : reports) {
      const Coefficient* c = rep.error.empty() ? rep.find(name) : nullptr;
      if (!c) {
        out << cell("excluded");
      } else {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4g%s", c->estimate, c->significant ? "*" : "");
        out << cell(buf);
      }
    }
    out << "\n";
  }
  out << cell("n");
  for (const auto& rep : reports) out << cell(std::to_string(rep.n));
  out << "\n";
  for (const auto& rep : reports)
    if (!rep.error.empty()) out << rep.outcome << ": fit failed: " << rep.error << "\n";
  out << "* p < 0.01\n";
  return out.str();
}

}  // namespace patcnn
