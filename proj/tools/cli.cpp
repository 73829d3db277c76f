// Copyright 2026 The gradflow Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gradflow/config.hpp"
#include "gradflow/experiments.hpp"
#include "gradflow/io.hpp"
#include "gradflow/oracles.hpp"
#include "gradflow/spectra.hpp"

namespace gradflow::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string output_dir = ".";
  std::optional<std::uint64_t> seed;
  int verbose = 0;
  bool quiet = false;
  bool check = false;
};

// Everything a subcommand needs after argument parsing.
struct Job {
  const Options& opt;
  std::string text;  // config file contents
  ConfigContext ctx;
  std::uint64_t hash = 0;
  std::ostream& out;
  std::ostream& err;

  fs::path path(const std::string& name) const { return fs::path(opt.output_dir) / name; }

  void write(const std::string& name, const std::string& contents) const {
    write_file(path(name), contents);
    if (opt.verbose > 0) err << "wrote " << path(name).string() << '\n';
  }

  void write_csv(const std::string& name, std::uint64_t seed, const std::string& body) const {
    write(name, header_line(hash, seed) + body);
  }

  // JSON outputs carry the same provenance as keys, since JSON has no comments.
  void write_json(const std::string& name, std::uint64_t seed, const std::string& body) const {
    const auto brace = body.find('{');
    std::string tagged = body;
    if (brace != std::string::npos) {
      const bool empty = body.find_first_not_of(" \n", brace + 1) == body.find('}', brace);
      tagged.insert(brace + 1, "\"config_hash\":\"" + hex64(hash) + "\",\"seed\":" + std::to_string(seed) +
                                   (empty ? "" : ","));
    }
    write(name, tagged);
  }
};

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("GRADFLOW_SEED");
  if (!s || !*s) return std::nullopt;
  std::uint64_t v = 0;
  const std::string_view sv(s);
  const auto res = std::from_chars(sv.data(), sv.data() + sv.size(), v);
  if (res.ec != std::errc() || res.ptr != sv.data() + sv.size())
    throw ConfigError("environment variable GRADFLOW_SEED must be a non-negative integer, got '" +
                      std::string(sv) + "'");
  return v;
}

int report_outcome(const Job& job, const ScenarioReport& r) {
  write_report(r, job.opt.output_dir, job.hash);
  if (job.opt.verbose > 0) {
    for (const auto& t : r.traces) job.err << "wrote " << job.path(r.scenario + "_" + t.name + ".csv").string() << '\n';
    job.err << "wrote " << job.path(r.scenario + "_plot.csv").string() << '\n';
    job.err << "wrote " << job.path(r.scenario + "_aggregate.json").string() << '\n';
  }
  if (!job.opt.quiet) {
    job.out << r.scenario << ": " << (r.passed() ? "PASS" : "FAIL") << " (excluded " << r.excluded << '/'
            << r.repetitions << ")\n";
    for (const auto& p : r.predicates)
      job.out << "  " << (p.passed ? "ok   " : "FAIL ") << p.name << ": " << p.detail << '\n';
  }
  return job.opt.check && !r.passed() ? kCheckFailed : kOk;
}

// ---------------------------------------------------------------------------

int cmd_flow(const Job& job) {
  const auto c = parse_flow_config(job.text, job.ctx);
  TraceProbe probe;
  if (c.test) probe.test = &*c.test;
  if (c.track_svm) {
    const auto svm = hard_margin_svm(c.data);
    if (!svm.separable()) throw ConfigError("field 'track_svm': the dataset is not linearly separable");
    probe.reference_direction = svm.solution->w_tilde;
    probe.log_direction = svm.solution->w_raw;
  }
  if (c.track_null_space) {
    if (c.net.depth() != 1 || c.net.output_dim() != 1)
      throw ConfigError("field 'track_null_space' needs a one-layer net with a scalar output");
    probe.null_projector = null_space_projector(c.data.data_matrix());
  }
  const auto trace = run_flow(c.state, c.loss, c.data, c.stop, c.cadence, probe);
  job.write_csv("flow_trace.csv", c.seed, trace_csv(trace, c.net.depth()));
  job.write_json("flow_final_net.json", c.seed, net_to_json(trace.final_state.net));
  const auto& last = trace.records.back();
  job.write_json("flow_summary.json", c.seed,
                 std::string("{\"converged\":") + (trace.converged ? "true" : "false") + ",\"stop_reason\":\"" +
                     trace.stop_reason + "\",\"steps\":" + std::to_string(trace.final_state.steps_taken) +
                     ",\"time\":" + format_double(trace.final_state.time) +
                     ",\"loss\":" + format_double(last.loss) + ",\"overflow\":" + (trace.overflow ? "true" : "false") +
                     "}\n");
  if (!job.opt.quiet)
    job.out << "flow: " << (trace.converged ? "converged" : "not converged") << " (" << trace.stop_reason
            << ") after " << trace.final_state.steps_taken << " steps, t=" << format_double(trace.final_state.time)
            << ", loss=" << format_double(last.loss) << '\n';
  return job.opt.check && !trace.converged ? kCheckFailed : kOk;
}

// RFC 4180 quoting when the text contains a delimiter.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + '"';
}

std::string counts_line(const SpectrumReport& r) {
  return "stable=" + std::to_string(r.n_stable) + " unstable=" + std::to_string(r.n_unstable) +
         " zero=" + std::to_string(r.n_zero);
}

int cmd_spectrum(const Job& job) {
  const auto c = parse_spectrum_config(job.text, job.ctx);
  const Matrix h = hessian(c.loss, c.net, c.data, c.lambdas);
  const auto report = classify(h, c.tol);
  job.write_csv("spectrum.csv", c.seed, spectrum_csv(report));
  bool ok = true;
  std::string summary = "{\"stable\":" + std::to_string(report.n_stable) +
                        ",\"unstable\":" + std::to_string(report.n_unstable) +
                        ",\"zero\":" + std::to_string(report.n_zero) +
                        ",\"distinct\":" + std::to_string(count_distinct(report.eigenvalues, 1e-6, c.tol)) +
                        ",\"min_eigenvalue\":" + format_double(report.min_eigenvalue()) +
                        ",\"zero_threshold\":" + format_double(report.zero_threshold) +
                        ",\"convention\":\"" + report.convention + "\"}\n";
  job.write_json("spectrum_summary.json", c.seed, summary);
  if (!job.opt.quiet) job.out << "spectrum: " << counts_line(report) << '\n';

  if (!c.sweep.empty()) {
    const auto entries = hyperbolicity_sweep(c.loss, c.net, c.data, c.sweep, c.sweep_options);
    std::string csv = "lambda,n_stable,n_unstable,n_zero,min_eigenvalue,gradient_norm,warning\n";
    for (const auto& e : entries) {
      csv += format_double(e.lambda) + ',' + std::to_string(e.report.n_stable) + ',' +
             std::to_string(e.report.n_unstable) + ',' + std::to_string(e.report.n_zero) + ',' +
             format_double(e.report.min_eigenvalue()) + ',' + format_double(e.gradient_norm) + ',' + csv_field(e.warning) +
             '\n';
      ok = ok && e.warning.empty() && (e.lambda == 0.0 || e.report.hyperbolic());
      if (!job.opt.quiet)
        job.out << "  lambda=" << format_double(e.lambda) << ' ' << counts_line(e.report)
                << (e.warning.empty() ? "" : " warning: " + e.warning) << '\n';
    }
    job.write_csv("sweep.csv", c.seed, csv);
  }
  if (c.compare_virtual) {
    const auto vd = virtual_linear_system(c.net, c.data);
    const double lam = c.lambdas.empty() ? 0.0 : c.lambdas.front();
    const auto verdict = conjugacy_compare(h, virtual_hessian(vd, lam), c.tol);
    job.write_json("verdict.json", c.seed, verdict_json(verdict));
    ok = ok && verdict.topologically_conjugate;
    if (!job.opt.quiet)
      job.out << "  virtual linear system: " << (verdict.topologically_conjugate ? "" : "not ")
              << "topologically conjugate\n";
  }
  return job.opt.check && !ok ? kCheckFailed : kOk;
}

int cmd_svm(const Job& job) {
  const auto c = parse_svm_config(job.text, job.ctx);
  const auto result = hard_margin_svm(c.data);
  const std::string body = margin_json(result);
  job.write_json("margin.json", c.seed, body);
  if (!job.opt.quiet) job.out << body;
  return job.opt.check && !result.separable() ? kCheckFailed : kOk;
}

int cmd_perturb(const Job& job) {
  const auto c = parse_perturb_config(job.text, job.ctx);
  switch (c.scenario) {
    case PerturbConfig::Scenario::sine:
    case PerturbConfig::Scenario::sine_control:
      return report_outcome(job, sine_polynomial_perturbation(c.sine));
    case PerturbConfig::Scenario::toy_net:
      break;
  }
  return report_outcome(job, toy_deepnet_perturbation(c.toy));
}

int cmd_growth(const Job& job) {
  return report_outcome(job, growth_asymptotics(parse_growth_config(job.text, job.ctx)));
}

int cmd_sweep(const Job& job) {
  return report_outcome(job, min_norm_degree_sweep(parse_sweep_config(job.text, job.ctx)));
}

int cmd_direction(const Job& job) {
  return report_outcome(job, convergence_direction_study(parse_direction_config(job.text, job.ctx)));
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-flow dynamics of deep networks: trajectories, spectra and scenario reports.", "gradflow"};
  app.require_subcommand(1, 1);
  Options opt;

  struct Entry {
    const char* name;
    const char* help;
    std::function<int(const Job&)> fn;
  };
  const Entry entries[] = {
      {"flow", "Integrate the gradient flow of one net and record its trajectory", cmd_flow},
      {"spectrum", "Hessian spectrum, hyperbolicity sweep and conjugacy checks", cmd_spectrum},
      {"svm", "Hard-margin SVM oracle on a small dataset", cmd_svm},
      {"perturb", "Perturb-and-reconverge scenarios (sine regression, toy net)", cmd_perturb},
      {"growth", "Weight-growth asymptotics of the single-sample scale laws", cmd_growth},
      {"sweep", "Minimum-norm polynomial degree sweep", cmd_sweep},
      {"direction", "Convergence-in-direction study against the SVM oracle", cmd_direction},
  };
  const Entry* chosen = nullptr;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    sub->add_option("-c,--config", opt.config, "JSON config file")->required();
    sub->add_option("-o,--output-dir", opt.output_dir, "Directory for all outputs")->capture_default_str();
    sub->add_option("-s,--seed", opt.seed, "Base seed (overrides GRADFLOW_SEED and the config)");
    sub->add_flag("-v,--verbose", opt.verbose, "List written files; repeat for more detail");
    sub->add_flag("-q,--quiet", opt.quiet, "Print nothing on success");
    sub->add_flag("--check", opt.check, "Exit 2 when a scenario predicate fails");
    sub->callback([&chosen, &e] { chosen = &e; });
  }

  if (argc > 1 && argv[1][0] != '-') {
    const std::string first = argv[1];
    bool known = false;
    for (const auto& e : entries) known = known || first == e.name;
    if (!known) {
      err << "gradflow: unknown subcommand '" << first << "'\n\n" << app.help();
      return kUsage;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "gradflow: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }
  if (!chosen) {
    err << app.help();
    return kUsage;
  }

  try {
    const fs::path config_path(opt.config);
    std::string text;
    try {
      text = read_file(config_path);
    } catch (const IoError&) {
      throw IoError("cannot read config file '" + config_path.string() + "'");
    }
    ConfigContext ctx;
    ctx.base_dir = config_path.parent_path();
    ctx.seed_override = opt.seed ? opt.seed : env_seed();
    Job job{opt, std::move(text), ctx, 0, out, err};
    job.hash = config_hash(job.text);
    return chosen->fn(job);
  } catch (const std::exception& e) {
    // Validation, I/O and numerical failures all name their cause.
    err << "gradflow " << chosen->name << ": " << e.what() << '\n';
    return kInvalid;
  }
}

int run(int argc, const char* const* argv) { return run(argc, argv, std::cout, std::cerr); }

}  // namespace gradflow::cli
