#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "recap/likelihood.hpp"
#include "recap/partitions.hpp"
#include "recap/selection.hpp"
#include "recap/simulation.hpp"

namespace recap {

namespace detail {

inline std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace detail

inline nlohmann::json to_json(const FitResult& r) {
  nlohmann::json j{
      {"model", r.model},
      {"n_hat", r.n_hat},
      {"coefficients", r.coefficients},
      {"p0", r.p0},
      {"loglik", r.loglik},
      {"aic", r.aic},
      {"ci", {r.ci_lo, r.ci_hi ? nlohmann::json(*r.ci_hi) : nlohmann::json(nullptr)}},
      {"failure", r.failure},
      {"params", r.params},
  };
  if (!r.class_probs.empty()) j["class_probs"] = r.class_probs;
  if (!r.warnings.empty()) j["warnings"] = r.warnings;
  return j;
}

inline nlohmann::json to_json(const Partition& p) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& cls : p.classes()) {
    nlohmann::json members = nlohmann::json::array();
    for (const auto& h : cls) members.push_back(h.to_string());
    classes.push_back(members);
  }
  return nlohmann::json{{"label", p.label()}, {"t", p.t()}, {"classes", classes}};
}

inline nlohmann::json to_json(const CutRecipe& r) {
  nlohmann::json cuts = nlohmann::json::array();
  for (const auto& e : r.cutpoints) cuts.push_back(e.to_double());
  return nlohmann::json{{"quantifier", r.quantifier.label()}, {"cutpoints", cuts}};
}

inline nlohmann::json to_json(const RankingReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : report.rows) {
    if (row.error.empty()) {
      rows.push_back(to_json(*row.fit));
    } else {
      rows.push_back(nlohmann::json{{"model", row.spec.label()}, {"error", row.error}});
    }
  }
  return rows;
}

inline nlohmann::json to_json(const CutSearchResult& r) {
  nlohmann::json cuts = nlohmann::json::array();
  nlohmann::json exact = nlohmann::json::array();
  for (const auto& e : r.cuts) {
    cuts.push_back(e.to_double());
    exact.push_back(e.to_string());
  }
  return nlohmann::json{{"cuts", cuts}, {"cuts_exact", exact}, {"fit", to_json(r.fit)}};
}

inline nlohmann::json to_json(const TrialReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& c : r.candidates) {
    nlohmann::json row{{"model", c.model},
                       {"coverage_pct", c.coverage_pct},
                       {"pct_aic_best", c.pct_aic_best},
                       {"failures", c.failures}};
    if (c.included > 0) {
      row["mean_nhat"] = c.mean_nhat;
      row["rmse"] = c.rmse;
      row["mean_ci_length"] = c.mean_ci_length;
    } else {
      row["mean_nhat"] = nullptr;
      row["rmse"] = nullptr;
      row["mean_ci_length"] = nullptr;
    }
    rows.push_back(row);
  }
  return nlohmann::json{{"generator", r.generator}, {"n_true", r.n_true},
                        {"t", r.t},                 {"k", r.k},
                        {"seed", r.base_seed},      {"expected_m", r.expected_m},
                        {"candidates", rows}};
}

inline constexpr const char* kFitCsvHeader = "model,params,n_hat,ci_lo,ci_hi,aic,failure";

// Table-style row: AIC to two decimals, open upper interval as "inf".
inline std::string fit_csv_row(const FitResult& r) {
  std::string out = r.model;
  out += "," + std::to_string(r.params);
  out += "," + std::to_string(r.n_hat);
  out += "," + std::to_string(r.ci_lo);
  out += ",";
  out += r.ci_hi ? std::to_string(*r.ci_hi) : "inf";
  out += "," + detail::fmt("%.2f", r.aic);
  out += ",";
  out += r.failure ? "1" : "0";
  return out;
}

inline void write_ranking_csv(std::ostream& os, const RankingReport& report) {
  os << kFitCsvHeader << "\n";
  for (const auto& row : report.rows) {
    if (row.error.empty())
      os << fit_csv_row(*row.fit) << "\n";
    else
      os << row.spec.label() << ",,,,,," << "error" << "\n";
  }
}

inline void write_trial_csv(std::ostream& os, const TrialReport& r) {
  os << "# generator=" << r.generator << " n=" << r.n_true << " t=" << r.t << " k=" << r.k
     << " seed=" << r.base_seed << " expected_m=" << detail::fmt("%.1f", r.expected_m) << "\n";
  os << "model,mean_nhat,rmse,coverage_pct,mean_ci_length,pct_aic_best,failures\n";
  for (const auto& c : r.candidates) {
    os << c.model << ",";
    if (c.included > 0)
      os << detail::fmt("%.2f", c.mean_nhat) << "," << detail::fmt("%.2f", c.rmse);
    else
      os << ",";
    os << "," << detail::fmt("%.1f", c.coverage_pct) << ",";
    if (c.included > 0) os << detail::fmt("%.2f", c.mean_ci_length);
    os << "," << detail::fmt("%.1f", c.pct_aic_best) << "," << c.failures << "\n";
  }
}

}  // namespace recap
