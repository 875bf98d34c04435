#include "ctmle/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ctmle/bench.hpp"
#include "ctmle/hdps.hpp"
#include "ctmle/methods.hpp"
#include "ctmle/preorder.hpp"
#include "ctmle/replicate.hpp"
#include "ctmle/simgen.hpp"

namespace ctmle {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> parts;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) parts.push_back(item);
  return parts;
}

std::vector<Index> parse_grid(const std::string& s) {
  std::vector<Index> grid;
  for (const auto& item : split_list(s)) {
    try {
      grid.push_back(static_cast<Index>(std::stoul(item)));
    } catch (const std::exception&) {
      throw UsageError("bad grid value '" + item + "'");
    }
  }
  return grid;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("CTMLE_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("CTMLE_SEED is not an unsigned integer");
    }
  }
  return 1;
}

SearchStrategy parse_strategy(const std::string& s, const std::optional<Dataset>& ds) {
  if (s == "logistic") return OrderingRule::logistic;
  if (s == "partial-corr" || s == "partcorr") return OrderingRule::partial_correlation;
  if (s == "greedy") return GreedySearch{};
  if (s.rfind("file:", 0) == 0) {
    if (!ds) throw UsageError("file orderings need an input data set");
    return read_ordering_file(s.substr(5), ds->p());
  }
  throw UsageError("unknown ordering '" + s + "'");
}

// Flags shared by estimate and simulate.
struct EstimationFlags {
  Index folds = 5;
  std::optional<Index> patience;
  Index step = 1;
  std::string criterion = "rss";
  std::string cv_variance = "mean";
  std::vector<double> truncate{0.025, 0.975};
  std::string strategies;
  Index jobs = 1;

  void add(CLI::App* app) {
    app->add_option("--folds", folds, "cross-validation folds")->check(CLI::Range(2, 1000000));
    app->add_option("--patience", patience, "stop scoring after this many steps without improvement");
    app->add_option("--step", step, "covariates added per step for pre-ordered strategies")->check(CLI::PositiveNumber);
    app->add_option("--criterion", criterion, "CV loss: rss or nll")->check(CLI::IsMember({"rss", "nll"}));
    app->add_option("--cv-variance", cv_variance, "EIC variance penalty: sum or mean over rows")
        ->check(CLI::IsMember({"sum", "mean"}));
    app->add_option("--truncate", truncate, "PS truncation bounds LOW,HIGH")->expected(2)->delimiter(',');
    app->add_option("--strategies", strategies, "sl-ctmle strategies, comma separated");
    app->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  }

  MethodOptions to_options(std::uint64_t seed, const std::optional<Dataset>& ds) const {
    MethodOptions m;
    m.ctmle.folds = folds;
    m.ctmle.patience = patience;
    m.ctmle.step_size = step;
    m.ctmle.criterion = criterion == "nll" ? Criterion::nll : Criterion::rss;
    m.ctmle.variance_scale = cv_variance == "mean" ? VarianceScale::mean : VarianceScale::sum;
    m.ctmle.truncation = TruncationBounds{truncate[0], truncate[1]};
    m.ctmle.seed = seed;
    for (const auto& s : split_list(strategies)) m.sl_strategies.push_back(parse_strategy(s, ds));
    m.jobs = jobs;
    validate(m.ctmle);
    return m;
  }
};

void write_text(const std::string& path, const std::string& text, std::ostream& fallback) {
  if (path.empty() || path == "-") {
    fallback << text;
    return;
  }
  std::ofstream f(path);
  if (!f) throw DataError("cannot write '" + path + "'");
  f << text;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Targeted and collaborative targeted estimation of average treatment effects"};
  app.require_subcommand(1);
  std::optional<std::uint64_t> seed_flag;
  app.add_option("--seed", seed_flag, "random seed (default: CTMLE_SEED or 1)");

  // estimate
  auto* est = app.add_subcommand("estimate", "estimate the ATE on a CSV data set");
  std::string input, treatment, outcome, method = "tmle", ordering, qbar_formula = "all", output;
  std::optional<double> y_min, y_max;
  bool diagnostics = false;
  EstimationFlags est_flags;
  est->add_option("--input", input, "CSV file")->required();
  est->add_option("--treatment", treatment, "treatment column")->required();
  est->add_option("--outcome", outcome, "outcome column")->required();
  est->add_option("--y-min", y_min, "lower outcome bound");
  est->add_option("--y-max", y_max, "upper outcome bound");
  est->add_option("--method", method, "estimator");
  est->add_option("--ordering", ordering, "pre-ordering: logistic, partial-corr or file:PATH");
  est->add_option("--qbar-formula", qbar_formula, "outcome-model covariates: all or a comma list");
  est->add_flag("--diagnostics", diagnostics, "include the per-step score table");
  est->add_option("--output", output, "write the JSON report here instead of stdout");
  est->add_option("--seed", seed_flag, "random seed");
  est_flags.add(est);

  // simulate
  auto* sim = app.add_subcommand("simulate", "run a simulation study");
  std::string study = "sim1", methods = "all", qbar = "both", metrics_path, estimates_path;
  std::optional<Index> sim_n;
  Index reps = 200;
  ClaimsDesign claims_design;
  EstimationFlags sim_flags;
  sim_flags.patience = 10;
  sim->add_option("--study", study, "sim1, sim2, sim3, sim4 or plasmode");
  sim->add_option("--n", sim_n, "sample size");
  sim->add_option("--reps", reps, "replications")->check(CLI::Range(2, 100000000));
  sim->add_option("--methods", methods, "all or a comma list of methods");
  sim->add_option("--qbar", qbar, "both, correct or misspecified")->check(CLI::IsMember({"both", "correct", "misspecified"}));
  sim->add_option("--out", metrics_path, "metrics CSV (default stdout)");
  sim->add_option("--estimates", estimates_path, "per-replication estimates CSV");
  sim->add_option("--codes", claims_design.codes, "claim codes (plasmode)");
  sim->add_option("-J", claims_design.J, "hdPS codes kept per cluster (plasmode)");
  sim->add_option("-K", claims_design.K, "hdPS covariates kept (plasmode)");
  sim->add_option("--seed", seed_flag, "random seed");
  sim_flags.add(sim);

  // hdps
  auto* hd = app.add_subcommand("hdps", "high-dimensional propensity score covariates from claims");
  std::string claims_path, treatment_file, outcome_file, hd_out, write_inputs;
  std::optional<Index> synthetic_n;
  HdpsOptions hopts;
  hd->add_option("--claims", claims_path, "long-format claims CSV");
  hd->add_option("--treatment-file", treatment_file, "patient_id,treatment CSV");
  hd->add_option("--outcome-file", outcome_file, "patient_id,outcome CSV");
  hd->add_option("--synthetic", synthetic_n, "generate synthetic claims for this many patients instead");
  hd->add_option("--codes", claims_design.codes, "claim codes for --synthetic");
  hd->add_option("--write-inputs", write_inputs, "with --synthetic, also write claims/treatment/outcome CSVs using this prefix");
  hd->add_option("-J", hopts.J, "codes kept per cluster")->check(CLI::PositiveNumber);
  hd->add_option("-K", hopts.K, "covariates kept")->check(CLI::PositiveNumber);
  hd->add_flag("--bross-raw", hopts.raw_ranking, "rank by the raw score, descending");
  hd->add_option("--out", hd_out, "wide CSV output (sidecar JSON at OUT.json)")->required();
  hd->add_option("--seed", seed_flag, "random seed");

  // bench
  auto* bn = app.add_subcommand("bench", "time the C-TMLE variants");
  std::string p_grid, n_grid, variants = "ctmle-greedy,ctmle-logistic,ctmle-partcorr", sweep = "both", bench_out;
  double scale = 1.0;
  Index bench_reps = 10, bench_n = 1000, bench_p = 20;
  std::optional<Index> bench_patience;
  bn->add_option("--p-grid", p_grid, "comma list of p values (n fixed)");
  bn->add_option("--n-grid", n_grid, "comma list of n values (p fixed)");
  bn->add_option("--n", bench_n, "n for the p sweep");
  bn->add_option("--p", bench_p, "p for the n sweep");
  bn->add_option("--scale", scale, "multiplier applied to the default n sweep")->check(CLI::PositiveNumber);
  bn->add_option("--reps", bench_reps, "repetitions per point")->check(CLI::PositiveNumber);
  bn->add_option("--variants", variants, "comma list of C-TMLE variants");
  bn->add_option("--sweep", sweep, "p, n or both")->check(CLI::IsMember({"p", "n", "both"}));
  bn->add_option("--patience", bench_patience, "early stopping patience");
  bn->add_option("--out", bench_out, "timing CSV (default stdout)");
  bn->add_option("--seed", seed_flag, "random seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  }

  try {
    const std::uint64_t seed = resolve_seed(seed_flag);

    if (*est) {
      const auto m = parse_method(method);
      if (!m) throw UsageError("unknown method '" + method + "'");
      const Dataset raw = load_csv(input, treatment, outcome);
      const EstimationInput in = prepare_input(raw, OutcomeBounds{y_min, y_max});
      MethodOptions mopts = est_flags.to_options(seed, raw);
      mopts.ctmle.diagnostics = diagnostics;
      Method chosen = *m;
      if (!ordering.empty()) {
        mopts.ordering = parse_strategy(ordering, raw);
        if (std::holds_alternative<GreedySearch>(*mopts.ordering)) throw UsageError("--ordering must be a pre-ordering");
        if (chosen == Method::ctmle_logistic || chosen == Method::ctmle_partcorr) chosen = Method::ctmle_preorder;
      }
      const EstimateReport r = estimate(chosen, in, parse_qbar_formula(qbar_formula, raw), mopts);
      write_text(output, nlohmann::json(r).dump(2) + "\n", out);
      return kExitOk;
    }

    if (*sim) {
      const auto s = parse_study(study);
      if (!s || *s == Study::synthetic_claims) throw UsageError("unknown study '" + study + "'");
      ReplicationConfig cfg;
      cfg.spec = study_spec(*s, sim_n);
      cfg.spec.claims.codes = claims_design.codes;
      cfg.spec.claims.J = claims_design.J;
      cfg.spec.claims.K = claims_design.K;
      cfg.reps = reps;
      cfg.seed = seed;
      cfg.jobs = sim_flags.jobs;
      cfg.correct_qbar = qbar != "misspecified";
      cfg.misspecified_qbar = qbar != "correct";
      MethodOptions mopts = sim_flags.to_options(seed, std::nullopt);
      mopts.jobs = 1;  // parallelism goes to replications
      std::vector<Method> list;
      if (methods == "all") {
        list = table_methods();
      } else {
        for (const auto& name : split_list(methods)) {
          const auto m = parse_method(name);
          if (!m) throw UsageError("unknown method '" + name + "'");
          list.push_back(*m);
        }
      }
      for (Method m : list) cfg.estimators.push_back(library_estimator(m, mopts));
      const ReplicationResult res = replicate(cfg);
      std::ostringstream metrics;
      write_metrics_csv(metrics, study, res.metrics);
      write_text(metrics_path, metrics.str(), out);
      if (!estimates_path.empty()) {
        std::ostringstream est_csv;
        write_estimates_csv(est_csv, study, res.estimates);
        write_text(estimates_path, est_csv.str(), out);
      }
      return kExitOk;
    }

    if (*hd) {
      ClaimMatrix claims;
      std::vector<std::string> ids;
      Vector a, y;
      if (synthetic_n) {
        SyntheticClaims sc = synthetic_claims(*synthetic_n, claims_design, seed);
        if (!write_inputs.empty()) {
          write_claims_csv(write_inputs + "claims.csv", sc.claims, sc.patient_ids);
          std::ofstream ta(write_inputs + "treatment.csv"), ya(write_inputs + "outcome.csv");
          ta << "patient_id,treatment\n";
          ya << "patient_id,outcome\n";
          for (Index i = 0; i < sc.patient_ids.size(); ++i) {
            ta << sc.patient_ids[i] << ',' << sc.treatment[static_cast<Eigen::Index>(i)] << '\n';
            ya << sc.patient_ids[i] << ',' << sc.outcome[static_cast<Eigen::Index>(i)] << '\n';
          }
        }
        claims = std::move(sc.claims);
        ids = std::move(sc.patient_ids);
        a = std::move(sc.treatment);
        y = std::move(sc.outcome);
      } else {
        if (claims_path.empty() || treatment_file.empty() || outcome_file.empty())
          throw UsageError("hdps needs --claims, --treatment-file and --outcome-file (or --synthetic)");
        auto [tid, tval] = read_patient_values(treatment_file);
        auto [oid, oval] = read_patient_values(outcome_file);
        if (tid != oid) throw DataError("treatment and outcome files list different patients");
        ids = std::move(tid);
        a = std::move(tval);
        y = std::move(oval);
        claims = read_claims_csv(claims_path, ids);
      }
      const HdpsResult res = hdps_pipeline(claims, a, y, hopts);
      write_hdps_output(hd_out, ids, res);
      nlohmann::json summary{{"patients", ids.size()},          {"codes", claims.codes()},
                             {"screened", res.screened.size()}, {"candidates", res.candidates},
                             {"columns", res.columns.size()},   {"output", hd_out}};
      out << summary.dump(2) << "\n";
      return kExitOk;
    }

    if (*bn) {
      BenchConfig cfg = default_bench(scale);
      if (!p_grid.empty()) cfg.p_grid = parse_grid(p_grid);
      if (!n_grid.empty()) cfg.n_grid = parse_grid(n_grid);
      if (sweep == "p") cfg.n_grid.clear();
      if (sweep == "n") cfg.p_grid.clear();
      cfg.fixed_n = bench_n;
      cfg.fixed_p = bench_p;
      cfg.reps = bench_reps;
      cfg.seed = seed;
      cfg.ctmle.patience = bench_patience;
      cfg.variants.clear();
      for (const auto& name : split_list(variants)) {
        const auto m = parse_method(name);
        if (!m || (*m != Method::ctmle_greedy && *m != Method::ctmle_logistic && *m != Method::ctmle_partcorr))
          throw UsageError("bench variant must be ctmle-greedy, ctmle-logistic or ctmle-partcorr");
        cfg.variants.push_back(*m);
      }
      std::ostringstream csv;
      write_bench_csv(csv, run_bench(cfg));
      write_text(bench_out, csv.str(), out);
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace ctmle
