// recap: capture-recapture behavioural model fitting from the command line.
//
// Subcommands: quantify, fit, select, cutsearch, simulate, check.
// Exit codes: 0 success, 2 usage or input error, 3 fit finished with a
// likelihood failure (estimate at the grid upper bound).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "recap/csv.hpp"
#include "recap/likelihood.hpp"
#include "recap/selection.hpp"
#include "recap/serialize.hpp"
#include "recap/simulation.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitLikelihoodFailure = 3;

recap::CaptureMatrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open input file: " + path);
  return recap::read_capture_csv(in);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

recap::GridStrategy parse_grid(const std::string& s) {
  if (s == "full") return recap::GridStrategy::Full;
  if (s == "coarse") return recap::GridStrategy::CoarseFine;
  throw std::invalid_argument("grid must be 'full' or 'coarse'");
}

recap::CutSearchStrategy parse_strategy(const std::string& s) {
  if (s == "auto") return recap::CutSearchStrategy::Auto;
  if (s == "full") return recap::CutSearchStrategy::Full;
  if (s == "reduced") return recap::CutSearchStrategy::Reduced;
  if (s == "greedy") return recap::CutSearchStrategy::Greedy;
  throw std::invalid_argument("strategy must be auto|full|reduced|greedy");
}

std::uint64_t env_or_default_seed() {
  if (const char* env = std::getenv("RECAP_SEED")) return std::strtoull(env, nullptr, 10);
  return 0;
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty()) {
    std::cout << content;
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open output file: " + path);
  out << content;
}

struct FitFlags {
  std::string input;
  std::string model;
  std::int64_t nupp = -1;
  std::string grid = "coarse";
  double level = 0.95;
  bool csv = false;
  std::string config;
};

recap::FitOptions to_options(const FitFlags& f) {
  recap::FitOptions opts;
  if (f.nupp >= 0) opts.n_upp = f.nupp;
  opts.grid = parse_grid(f.grid);
  opts.level = f.level;
  return opts;
}

// --config JSON carries the same fields as the flags; explicit flags win.
void apply_config(const CLI::App& cmd, FitFlags& f) {
  if (f.config.empty()) return;
  std::ifstream in(f.config);
  if (!in) throw std::invalid_argument("cannot open config file: " + f.config);
  nlohmann::json j;
  in >> j;
  if (cmd.count("--input") == 0 && j.contains("input")) f.input = j["input"].get<std::string>();
  if (cmd.count("--model") == 0 && j.contains("model")) f.model = j["model"].get<std::string>();
  if (cmd.count("--nupp") == 0 && j.contains("nupp")) f.nupp = j["nupp"].get<std::int64_t>();
  if (cmd.count("--grid") == 0 && j.contains("grid")) f.grid = j["grid"].get<std::string>();
  if (cmd.count("--level") == 0 && j.contains("level")) f.level = j["level"].get<double>();
  if (cmd.count("--csv") == 0 && j.contains("format")) f.csv = j["format"] == "csv";
}

int run(int argc, char** argv) {
  CLI::App app{"capture-recapture behavioural model toolkit"};
  app.require_subcommand(1);

  // ---- quantify ----
  auto* quantify = app.add_subcommand("quantify", "emit the behavioural covariate matrix");
  std::string q_input, q_quant, q_output;
  quantify->add_option("--input", q_input, "capture matrix CSV")->required();
  quantify->add_option("--quantifier", q_quant, "f|g|gn|gtilde|gaug:k")->required();
  quantify->add_option("--output", q_output, "output CSV (stdout if omitted)");

  // ---- fit ----
  auto* fit = app.add_subcommand("fit", "fit one model by unconditional maximum likelihood");
  FitFlags ff;
  fit->add_option("--input", ff.input, "capture matrix CSV");
  fit->add_option("--model", ff.model, "model spec, e.g. mz, mb, mc:2, cut:g:0.25,0.5");
  fit->add_option("--nupp", ff.nupp, "upper bound of the population size grid");
  fit->add_option("--grid", ff.grid, "full|coarse (default coarse)");
  fit->add_option("--level", ff.level, "confidence level (default 0.95)");
  fit->add_flag("--csv", ff.csv, "table-style CSV instead of JSON");
  fit->add_option("--config", ff.config, "JSON file with the same fields");

  // ---- select ----
  auto* select = app.add_subcommand("select", "fit candidate models and rank by AIC");
  std::string s_input, s_models, s_grid = "coarse";
  std::int64_t s_nupp = -1;
  double s_level = 0.95;
  bool s_json = false;
  select->add_option("--input", s_input)->required();
  select->add_option("--models", s_models, "comma-separated model specs")->required();
  select->add_option("--nupp", s_nupp);
  select->add_option("--grid", s_grid);
  select->add_option("--level", s_level);
  select->add_flag("--json", s_json, "JSON instead of table CSV");

  // ---- cutsearch ----
  auto* cutsearch = app.add_subcommand("cutsearch", "grid search for optimal cutpoints");
  std::string c_input, c_quant, c_strategy = "auto", c_grid = "coarse";
  int c_cuts = 1;
  std::int64_t c_nupp = -1;
  double c_level = 0.95;
  bool c_csv = false;
  cutsearch->add_option("--input", c_input)->required();
  cutsearch->add_option("--quantifier", c_quant)->required();
  cutsearch->add_option("--cuts", c_cuts, "number of cutpoints")->required();
  cutsearch->add_option("--strategy", c_strategy, "auto|full|reduced|greedy");
  cutsearch->add_option("--nupp", c_nupp);
  cutsearch->add_option("--grid", c_grid);
  cutsearch->add_option("--level", c_level);
  cutsearch->add_flag("--csv", c_csv);

  // ---- simulate ----
  auto* simulate = app.add_subcommand("simulate", "replicated estimation study");
  std::string m_model, m_candidates, m_out, m_dump, m_probs, m_grid = "coarse";
  double m_alpha = 0, m_beta = 0, m_level = 0.95;
  std::int64_t m_n = 0, m_nupp = -1;
  int m_t = 0, m_k = 100;
  std::uint64_t m_seed = 0;
  bool m_json = false;
  int m_threads = static_cast<int>(std::thread::hardware_concurrency());
  simulate->add_option("--model", m_model, "generating model spec")->required();
  simulate->add_option("--alpha", m_alpha, "intercept (logit scale) for linear/constant models");
  simulate->add_option("--beta", m_beta, "slope for linear models");
  simulate->add_option("--probs", m_probs, "per-class capture probabilities for factor models");
  simulate->add_option("--n", m_n, "true population size")->required();
  simulate->add_option("--t", m_t, "capture occasions")->required();
  simulate->add_option("--k", m_k, "replicates (default 100)");
  auto* seed_opt = simulate->add_option("--seed", m_seed, "base seed (RECAP_SEED env fallback)");
  simulate->add_option("--candidates", m_candidates, "models fitted on each replicate");
  simulate->add_option("--out", m_out, "report file (stdout if omitted)");
  simulate->add_option("--dump", m_dump, "dump replicate matrices to <prefix><r>.csv");
  simulate->add_option("--threads", m_threads, "worker threads (default: cores)");
  simulate->add_option("--nupp", m_nupp);
  simulate->add_option("--grid", m_grid);
  simulate->add_option("--level", m_level);
  simulate->add_flag("--json", m_json);

  // ---- check ----
  auto* check = app.add_subcommand("check", "verify the Markov correspondence exhaustively");
  int k_t = 0, k_kmax = 1;
  check->add_option("--t", k_t, "occasions (<= 16)")->required();
  check->add_option("--kmax", k_kmax, "check orders k = 1..kmax");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*quantify) {
      const auto data = load_csv(q_input);
      const auto q = recap::Quantifier::parse(q_quant);
      const auto z = recap::covariate_matrix(data, q, data.m());
      std::ostringstream os;
      recap::write_covariate_csv(os, z);
      write_output(q_output, os.str());
      return kExitOk;
    }

    if (*fit) {
      apply_config(*fit, ff);
      if (ff.input.empty() || ff.model.empty())
        throw std::invalid_argument("--input and --model are required (flag or config)");
      const auto data = load_csv(ff.input);
      const auto spec = recap::ModelSpec::parse(ff.model);
      recap::FitResult result;
      if (spec.kind == recap::ModelSpec::Kind::CutSearch) {
        result = recap::cut_search(data, *spec.quant, spec.order,
                                   recap::CutSearchStrategy::Auto, to_options(ff))
                     .fit;
      } else {
        result = recap::fit_model(data, spec, to_options(ff));
      }
      if (ff.csv) {
        std::cout << recap::kFitCsvHeader << "\n" << recap::fit_csv_row(result) << "\n";
      } else {
        std::cout << recap::to_json(result).dump(2) << "\n";
      }
      return result.failure ? kExitLikelihoodFailure : kExitOk;
    }

    if (*select) {
      const auto data = load_csv(s_input);
      std::vector<recap::ModelSpec> specs;
      for (const auto& tok : split_list(s_models)) specs.push_back(recap::ModelSpec::parse(tok));
      recap::FitOptions opts;
      if (s_nupp >= 0) opts.n_upp = s_nupp;
      opts.grid = parse_grid(s_grid);
      opts.level = s_level;
      const auto report = recap::rank_models(data, specs, opts);
      if (s_json) {
        std::cout << recap::to_json(report).dump(2) << "\n";
      } else {
        recap::write_ranking_csv(std::cout, report);
      }
      return kExitOk;
    }

    if (*cutsearch) {
      const auto data = load_csv(c_input);
      recap::FitOptions opts;
      if (c_nupp >= 0) opts.n_upp = c_nupp;
      opts.grid = parse_grid(c_grid);
      opts.level = c_level;
      const auto res = recap::cut_search(data, recap::Quantifier::parse(c_quant), c_cuts,
                                         parse_strategy(c_strategy), opts);
      if (c_csv) {
        std::cout << recap::kFitCsvHeader << "\n" << recap::fit_csv_row(res.fit) << "\n";
      } else {
        std::cout << recap::to_json(res).dump(2) << "\n";
      }
      return kExitOk;
    }

    if (*simulate) {
      recap::GeneratorSpec gen;
      gen.model = recap::ModelSpec::parse(m_model);
      gen.n_true = m_n;
      gen.t = m_t;
      const recap::Design design = recap::build_design(gen.model, m_t);
      if (design.kind() == recap::DesignKind::Linear) {
        if (simulate->count("--alpha") == 0 || simulate->count("--beta") == 0)
          throw std::invalid_argument("linear generating models need --alpha and --beta");
        gen.coefficients = {m_alpha, m_beta};
      } else if (!m_probs.empty()) {
        for (const auto& tok : split_list(m_probs)) {
          const double p = std::stod(tok);
          if (!(p > 0.0 && p < 1.0))
            throw std::invalid_argument("class probabilities must lie strictly in (0,1)");
          gen.coefficients.push_back(recap::logit(p));
        }
      } else if (design.kind() == recap::DesignKind::Constant &&
                 simulate->count("--alpha") != 0) {
        gen.coefficients = {m_alpha};
      } else {
        throw std::invalid_argument(
            "this generating model needs --probs p1,...,pd (or --alpha for intercept-only)");
      }
      const std::uint64_t seed = seed_opt->count() ? m_seed : env_or_default_seed();
      recap::FitOptions opts;
      if (m_nupp >= 0) opts.n_upp = m_nupp;
      opts.grid = parse_grid(m_grid);
      opts.level = m_level;

      if (!m_dump.empty()) {
        for (int r = 0; r < m_k; ++r) {
          recap::GeneratorSpec draw = gen;
          draw.seed = seed ^ static_cast<std::uint64_t>(r);
          const auto data = recap::generate(draw);
          std::ofstream out(m_dump + std::to_string(r) + ".csv");
          if (!out) throw std::invalid_argument("cannot open dump file");
          recap::write_capture_csv(out, data);
        }
      }

      std::vector<recap::ModelSpec> specs;
      for (const auto& tok : split_list(m_candidates)) specs.push_back(recap::ModelSpec::parse(tok));
      if (specs.empty()) specs.push_back(gen.model);

      const auto report = recap::run_trial(gen, specs, m_k, seed, opts, m_threads);
      std::ostringstream os;
      if (m_json)
        os << recap::to_json(report).dump(2) << "\n";
      else
        recap::write_trial_csv(os, report);
      write_output(m_out, os.str());
      return kExitOk;
    }

    if (*check) {
      if (k_t < 2 || k_t > 16)
        throw std::invalid_argument("check supports 2 <= t <= 16 (exhaustive enumeration)");
      if (k_kmax < 1 || k_kmax >= k_t)
        throw std::invalid_argument("kmax must satisfy 1 <= kmax < t");
      bool all_pass = true;
      for (int k = 1; k <= k_kmax; ++k) {
        const auto rep = recap::markov_correspondence_check(k, k_t);
        std::cout << "k=" << k << ": " << (rep.pass ? "PASS" : "FAIL " + rep.detail) << "\n";
        all_pass = all_pass && rep.pass;
      }
      return all_pass ? kExitOk : 1;
    }
  } catch (const recap::CsvError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
