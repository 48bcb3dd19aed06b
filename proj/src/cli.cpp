#include "dice/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dice/analysis.hpp"
#include "dice/baselines.hpp"
#include "dice/dice_core.hpp"
#include "dice/metrics.hpp"
#include "dice/random.hpp"
#include "dice/synth_bench.hpp"

namespace dice::cli {

namespace {

using nlohmann::json;

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Shared state for eval and sweep: the estimation set, optional ReAct
// threshold, and the contribution matrix derived from them.
struct Prepared {
  std::optional<ReactThreshold> react;
  ContributionMatrix V;
  std::optional<GaussianClassStats> stats;
};

Prepared prepare(const io::Bundle& bundle, std::optional<double> react_percentile,
                 bool after_clip, std::size_t subsample_count, std::uint64_t seed) {
  Prepared prep;
  const FeatureSet estimation =
      subsample_count > 0 ? subsample(bundle.train, subsample_count, mix_seed(seed, 0x5eed))
                          : bundle.train;
  if (react_percentile) prep.react = react_fit(estimation, *react_percentile);
  if (prep.react && after_clip) {
    prep.V = compute_contribution(bundle.layer, react_clip(estimation, *prep.react));
  } else {
    prep.V = compute_contribution(bundle.layer, estimation);
  }
  return prep;
}

json detection_json(const DetectionResult& d) {
  return {{"fpr95", d.fpr95},
          {"auroc", d.auroc},
          {"threshold_lambda", d.threshold_lambda},
          {"n_id", d.n_id},
          {"n_ood", d.n_ood}};
}

json stats_json(const DistributionStats& s) {
  return {{"mean_id_maxlogit", s.mean_id_maxlogit},
          {"mean_ood_maxlogit", s.mean_ood_maxlogit},
          {"delta", s.delta},
          {"ood_score_std_normalized", s.ood_score_std_normalized}};
}

std::optional<double> id_accuracy(const io::Bundle& bundle) {
  if (!bundle.id_test.labels) return std::nullopt;
  const MatrixD logits = batch_logits(bundle.layer, nullptr, bundle.id_test.X);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < logits.rows(); ++s) {
    const auto row = logits.row(s);
    const auto pred = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
    if (pred == (*bundle.id_test.labels)[s]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

json react_json(const std::optional<ReactThreshold>& react) {
  if (!react) return nullptr;
  return {{"percentile", react->percentile_used}, {"threshold", react->c}};
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  return h;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << text;
  if (!out) throw IoError("short write to " + path);
}

// Scores of every OOD set plus ID test for one mask.
struct Scored {
  ScoreVector id;
  std::map<std::string, ScoreVector> ood;
};

Scored score_all(const io::Bundle& bundle, const Prepared& prep, const Mask* mask, ScoreMethod method) {
  ScoringContext ctx;
  ctx.layer = &bundle.layer;
  ctx.mask = mask;
  ctx.react = prep.react ? &*prep.react : nullptr;
  ctx.stats = prep.stats ? &*prep.stats : nullptr;
  ctx.method = method;
  Scored out;
  out.id = score_pipeline(ctx, bundle.id_test);
  for (const auto& [name, set] : bundle.ood) out.ood.emplace(name, score_pipeline(ctx, set));
  return out;
}

// The dense baseline keeps every weight whatever p says.
std::size_t kept_count(SparsifierKind kind, double p, const FinalLayer& layer) {
  if (kind == SparsifierKind::kNone) return layer.units() * layer.classes();
  return p_to_k(p, layer.units(), layer.classes());
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return kBadFlags;
  if (dynamic_cast<const NumericalError*>(&e) || dynamic_cast<const TrainingError*>(&e)) {
    return kNumericalError;
  }
  return kBundleError;
}

json evaluate(const io::Bundle& bundle, const EvalOptions& opts) {
  const SparsifierKind kind = parse_sparsifier(opts.method);
  const ScoreMethod method = parse_score_method(opts.score);
  Prepared prep = prepare(bundle, opts.react_percentile, opts.contribution_after_clip,
                          opts.contribution_subsample, opts.seed);
  if (method == ScoreMethod::kMahalanobis) {
    if (!bundle.train.labels) throw DataError("mahalanobis scoring needs labeled training features");
    const FeatureSet fit_set = prep.react ? react_clip(bundle.train, *prep.react) : bundle.train;
    prep.stats = fit_mahalanobis(fit_set, bundle.layer.classes(), opts.shrinkage);
  }

  const Mask mask = make_mask({kind, opts.p, opts.seed}, prep.V, bundle.layer);
  const Mask* mask_ptr = kind == SparsifierKind::kNone ? nullptr : &mask;
  const Scored scored = score_all(bundle, prep, mask_ptr, method);

  // Logits for the max-logit statistics go through the same clip → mask path.
  const auto logits_for = [&](const FeatureSet& set) {
    return prep.react ? batch_logits(bundle.layer, mask_ptr, react_clip(set, *prep.react).X)
                      : batch_logits(bundle.layer, mask_ptr, set.X);
  };
  const MatrixD id_logits = logits_for(bundle.id_test);

  json results = json::array();
  double fpr_sum = 0.0;
  double auroc_sum = 0.0;
  for (const auto& [name, set] : bundle.ood) {
    const ScoreVector& ood_scores = scored.ood.at(name);
    const DetectionResult det = detect(scored.id, ood_scores);
    json row = detection_json(det);
    row["ood"] = name;
    row["distribution_stats"] = stats_json(distribution_stats(id_logits, logits_for(set), scored.id, ood_scores));
    results.push_back(std::move(row));
    fpr_sum += det.fpr95;
    auroc_sum += det.auroc;
  }
  const auto count = static_cast<double>(bundle.ood.size());

  json report;
  report["format_version"] = kFormatVersion;
  report["command"] = "eval";
  report["config"] = {
      {"bundle", opts.bundle_path},
      {"method", opts.method},
      {"score", opts.score},
      {"p", opts.p},
      {"k", kept_count(kind, opts.p, bundle.layer)},
      {"seed", opts.seed},
      {"react", react_json(prep.react)},
      {"contribution_estimation", prep.react && opts.contribution_after_clip ? "clipped" : "raw"},
      {"contribution_subsample", opts.contribution_subsample},
      {"shrinkage", opts.shrinkage},
      {"tpr_target", 0.95},
      {"units", bundle.layer.units()},
      {"classes", bundle.layer.classes()},
  };
  report["mask"] = {{"popcount", mask.popcount()}, {"total", mask.M.size()}};
  const auto acc = id_accuracy(bundle);
  report["id_accuracy"] = acc ? json(*acc) : json(nullptr);
  report["results"] = std::move(results);
  report["average"] = {{"fpr95", fpr_sum / count}, {"auroc", auroc_sum / count}};
  return report;
}

json sweep(const io::Bundle& bundle, const SweepOptions& opts) {
  if (opts.p_grid.empty()) throw DomainError("p grid must be non-empty");
  if (opts.methods.empty()) throw DomainError("method list must be non-empty");
  const ScoreMethod method = parse_score_method(opts.score);
  if (method == ScoreMethod::kMahalanobis) throw DomainError("sweeps apply to energy or msp scores");
  for (double p : opts.p_grid) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p grid values must lie in [0, 1]");
  }
  const Prepared prep = prepare(bundle, opts.react_percentile, opts.contribution_after_clip,
                                opts.contribution_subsample, opts.seed);

  const FeatureSet* validation = nullptr;
  if (opts.validate == "noise") {
    if (!bundle.noise) throw FormatError("bundle has no features_noise set for --validate noise");
    validation = &*bundle.noise;
  } else if (!opts.validate.empty()) {
    const auto it = bundle.ood.find(opts.validate);
    if (it == bundle.ood.end()) throw FormatError("no OOD set named '" + opts.validate + "'");
    validation = &it->second;
  }

  json rows = json::array();
  json best = json::object();
  json containment = json::object();
  for (const auto& name : opts.methods) {
    const SparsifierKind kind = parse_sparsifier(name);
    std::vector<std::pair<double, Mask>> masks;
    for (double p : opts.p_grid) {
      const Mask mask = make_mask({kind, p, opts.seed}, prep.V, bundle.layer);
      const Mask* mask_ptr = kind == SparsifierKind::kNone ? nullptr : &mask;
      const Scored scored = score_all(bundle, prep, mask_ptr, method);
      json per_set = json::object();
      double fpr_sum = 0.0;
      double auroc_sum = 0.0;
      for (const auto& [set_name, ood_scores] : scored.ood) {
        const DetectionResult det = detect(scored.id, ood_scores);
        per_set[set_name] = {{"fpr95", det.fpr95}, {"auroc", det.auroc}};
        fpr_sum += det.fpr95;
        auroc_sum += det.auroc;
      }
      const auto count = static_cast<double>(scored.ood.size());
      json row = {{"method", name},
                  {"p", p},
                  {"k", kept_count(kind, p, bundle.layer)},
                  {"popcount", mask.popcount()},
                  {"per_ood", std::move(per_set)},
                  {"fpr95", fpr_sum / count},
                  {"auroc", auroc_sum / count}};
      if (validation) {
        ScoringContext ctx;
        ctx.layer = &bundle.layer;
        ctx.mask = mask_ptr;
        ctx.react = prep.react ? &*prep.react : nullptr;
        ctx.method = method;
        const DetectionResult det = detect(scored.id, score_pipeline(ctx, *validation));
        row["validation"] = {{"fpr95", det.fpr95}, {"auroc", det.auroc}};
      }
      rows.push_back(std::move(row));
      masks.emplace_back(p, mask);
    }

    if (validation) {
      // Same selection rule as synth::sweep_p: lowest validation FPR95, then smaller p.
      const json* chosen = nullptr;
      for (const auto& row : rows) {
        if (row["method"] != name) continue;
        if (!chosen) {
          chosen = &row;
          continue;
        }
        const double f = row["validation"]["fpr95"].get<double>();
        const double cf = (*chosen)["validation"]["fpr95"].get<double>();
        if (f < cf || (f == cf && row["p"].get<double>() < (*chosen)["p"].get<double>())) chosen = &row;
      }
      best[name] = (*chosen)["p"];
    }

    std::sort(masks.begin(), masks.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    bool nested = true;
    for (std::size_t i = 1; i < masks.size(); ++i) {
      nested = nested && masks[i].second.subset_of(masks[i - 1].second);
    }
    containment[name] = nested;
  }

  json report;
  report["format_version"] = kFormatVersion;
  report["command"] = "sweep";
  report["config"] = {
      {"bundle", opts.bundle_path},
      {"methods", opts.methods},
      {"p_grid", opts.p_grid},
      {"score", opts.score},
      {"seed", opts.seed},
      {"react", react_json(prep.react)},
      {"contribution_estimation", prep.react && opts.contribution_after_clip ? "clipped" : "raw"},
      {"contribution_subsample", opts.contribution_subsample},
      {"validate", opts.validate.empty() ? json(nullptr) : json(opts.validate)},
      {"selection_metric", "fpr95"},
  };
  const auto acc = id_accuracy(bundle);
  report["id_accuracy"] = acc ? json(*acc) : json(nullptr);
  report["rows"] = std::move(rows);
  report["masks_nested"] = std::move(containment);
  if (validation) report["best_p"] = std::move(best);
  return report;
}

std::string sweep_csv(const json& report) {
  std::string out = "method,p,k,set,fpr95,auroc\n";
  for (const auto& row : report.at("rows")) {
    const std::string prefix = row.at("method").get<std::string>() + "," +
                               fmt_double(row.at("p").get<double>()) + "," +
                               std::to_string(row.at("k").get<std::size_t>()) + ",";
    for (const auto& [name, vals] : row.at("per_ood").items()) {
      out += prefix + name + "," + fmt_double(vals.at("fpr95").get<double>()) + "," +
             fmt_double(vals.at("auroc").get<double>()) + "\n";
    }
    out += prefix + "average," + fmt_double(row.at("fpr95").get<double>()) + "," +
           fmt_double(row.at("auroc").get<double>()) + "\n";
    if (row.contains("validation")) {
      out += prefix + "validation," + fmt_double(row["validation"]["fpr95"].get<double>()) + "," +
             fmt_double(row["validation"]["auroc"].get<double>()) + "\n";
    }
  }
  return out;
}

AnalyzeOutput analyze(const io::Bundle& bundle, const AnalyzeOptions& opts) {
  if (opts.cls >= bundle.layer.classes()) {
    throw DomainError("class " + std::to_string(opts.cls) + " out of range for " +
                      std::to_string(bundle.layer.classes()) + " classes");
  }
  std::string ood_name = opts.ood.empty() ? bundle.ood.begin()->first : opts.ood;
  const auto it = bundle.ood.find(ood_name);
  if (it == bundle.ood.end()) throw FormatError("no OOD set named '" + ood_name + "'");
  const FeatureSet& ood = it->second;

  const auto id_profile = analysis::contribution_profile(bundle.layer, bundle.id_test, opts.cls);
  const auto ood_profile = analysis::contribution_profile(bundle.layer, ood, opts.cls);
  const auto& order = id_profile.order;

  AnalyzeOutput out;
  out.profile_csv = "rank,unit,id_mean,id_var,ood_mean,ood_var\n";
  for (std::size_t r = 0; r < order.size(); ++r) {
    const std::size_t u = order[r];
    out.profile_csv += std::to_string(r) + "," + std::to_string(u) + "," + fmt_double(id_profile.mean[u]) +
                       "," + fmt_double(id_profile.var[u]) + "," + fmt_double(ood_profile.mean[u]) + "," +
                       fmt_double(ood_profile.var[u]) + "\n";
  }

  // Unit contributions with columns permuted into the ID order.
  auto ordered = [&](const FeatureSet& set) {
    const MatrixD raw = analysis::unit_contributions(bundle.layer, set, opts.cls);
    MatrixD permuted(raw.rows(), raw.cols());
    for (std::size_t s = 0; s < raw.rows(); ++s) {
      for (std::size_t r = 0; r < order.size(); ++r) permuted(s, r) = raw(s, order[r]);
    }
    return permuted;
  };
  const MatrixD ood_contribs = ordered(ood);
  const MatrixD id_contribs = ordered(bundle.id_test);
  const MatrixD cov = analysis::covariance_matrix(ood_contribs);
  out.covariance = Tensor2D(cov.rows(), cov.cols());
  for (std::size_t i = 0; i < cov.size(); ++i) out.covariance.flat()[i] = static_cast<float>(cov.flat()[i]);

  const ContributionMatrix V = compute_contribution(bundle.layer, bundle.train);
  const Mask mask = build_mask(V, p_to_k(opts.p, bundle.layer.units(), bundle.layer.classes()));
  std::vector<std::size_t> kept;  // positions in ID order
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (mask.M(order[r], opts.cls) == 1.0f) kept.push_back(r);
  }

  auto variance_json = [&](const MatrixD& contribs) {
    const auto v = analysis::variance_decomposition(contribs, kept);
    return json{{"var_full", v.var_full},
                {"var_dice", v.var_dice},
                {"reduction", v.var_full - v.var_dice},
                {"sum_sigma_pruned", v.sum_sigma_pruned},
                {"cov_term_full", v.cov_term_full},
                {"cov_term_kept", v.cov_term_kept},
                {"identity_residual", v.identity_residual},
                {"reduction_residual", v.reduction_residual}};
  };

  out.report["format_version"] = kFormatVersion;
  out.report["command"] = "analyze";
  out.report["config"] = {{"bundle", opts.bundle_path}, {"class", opts.cls}, {"p", opts.p}, {"ood", ood_name}};
  out.report["kept_units"] = kept.size();
  out.report["units"] = bundle.layer.units();
  out.report["variance"] = {{"ood", variance_json(ood_contribs)}, {"id", variance_json(id_contribs)}};
  return out;
}

std::string format_table(const json& report) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof(line), "%-20s %10s %10s %12s %10s\n", "OOD set", "FPR95", "AUROC",
                "lambda", "delta");
  os << line;
  for (const auto& row : report.at("results")) {
    std::snprintf(line, sizeof(line), "%-20s %10.4f %10.4f %12.5g %10.4f\n",
                  row.at("ood").get<std::string>().c_str(), 100.0 * row.at("fpr95").get<double>(),
                  100.0 * row.at("auroc").get<double>(), row.at("threshold_lambda").get<double>(),
                  row.at("distribution_stats").at("delta").get<double>());
    os << line;
  }
  std::snprintf(line, sizeof(line), "%-20s %10.4f %10.4f\n", "average",
                100.0 * report.at("average").at("fpr95").get<double>(),
                100.0 * report.at("average").at("auroc").get<double>());
  os << line;
  if (!report.at("id_accuracy").is_null()) {
    std::snprintf(line, sizeof(line), "ID accuracy: %.4f%%\n", 100.0 * report["id_accuracy"].get<double>());
    os << line;
  }
  return os.str();
}

std::string determinism_hash(const json& report) {
  json copy = report;
  copy.erase("timestamps");
  copy.erase("determinism_hash");
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(copy.dump())));
  return buf;
}

void finalize_report(json& report, const std::string& started, const std::string& finished) {
  report["determinism_hash"] = determinism_hash(report);
  report["timestamps"] = {{"started", started}, {"finished", finished}};
}

namespace {

std::optional<double> parse_react(const std::string& value) {
  if (value.empty() || value == "off") return std::nullopt;
  std::size_t used = 0;
  double rho = 0.0;
  try {
    rho = std::stod(value, &used);
  } catch (const std::exception&) {
    throw DomainError("--react expects a percentile in (0, 100] or 'off'");
  }
  if (used != value.size() || !(rho > 0.0 && rho <= 100.0)) {
    throw DomainError("--react expects a percentile in (0, 100] or 'off'");
  }
  return rho;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Post-hoc OOD detection with directed final-layer sparsification"};
  app.require_subcommand(1);

  // synth
  std::string synth_config;
  std::string synth_out;
  std::optional<std::uint64_t> synth_seed;
  auto* synth_cmd = app.add_subcommand("synth", "Train the toy model and write a reference bundle");
  synth_cmd->add_option("--config", synth_config, "BenchConfig JSON (defaults when omitted)");
  synth_cmd->add_option("--out", synth_out, "Output bundle directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "Override the config seed");

  // eval
  EvalOptions eval_opts;
  std::string eval_react = "off";
  std::string eval_out;
  bool eval_v_raw = false;
  auto* eval_cmd = app.add_subcommand("eval", "Score a bundle with one method and sparsity");
  eval_cmd->add_option("bundle", eval_opts.bundle_path, "Bundle directory")->required();
  eval_cmd->add_option("--method", eval_opts.method,
                       "dice|bottomk|topbottomk|randomk|wprune|uprune|wdrop|udrop|none");
  eval_cmd->add_option("--score", eval_opts.score, "energy|msp|mahalanobis");
  eval_cmd->add_option("--p", eval_opts.p, "Sparsity parameter in [0, 1]");
  eval_cmd->add_option("--seed", eval_opts.seed, "Seed for stochastic sparsifiers and subsampling");
  eval_cmd->add_option("--react", eval_react, "ReAct percentile in (0, 100] or 'off'");
  eval_cmd->add_flag("--contribution-before-clip", eval_v_raw,
                     "Estimate the contribution matrix on unclipped features under ReAct");
  eval_cmd->add_option("--contribution-subsample", eval_opts.contribution_subsample,
                       "Estimate contributions on this many training rows (0 = all)");
  eval_cmd->add_option("--shrinkage", eval_opts.shrinkage, "Mahalanobis covariance shrinkage");
  eval_cmd->add_option("--out", eval_out, "Report JSON path");

  // sweep
  SweepOptions sweep_opts;
  std::string sweep_react = "off";
  std::string sweep_out;
  std::string sweep_csv_path;
  bool sweep_v_raw = false;
  auto* sweep_cmd = app.add_subcommand("sweep", "Evaluate methods over a grid of sparsity values");
  sweep_cmd->add_option("bundle", sweep_opts.bundle_path, "Bundle directory")->required();
  sweep_cmd->add_option("--methods", sweep_opts.methods, "Comma-separated method names")->delimiter(',');
  sweep_cmd->add_option("--p-grid", sweep_opts.p_grid, "Comma-separated p values")->delimiter(',');
  sweep_cmd->add_option("--score", sweep_opts.score, "energy|msp");
  sweep_cmd->add_option("--seed", sweep_opts.seed, "Seed for stochastic sparsifiers");
  sweep_cmd->add_option("--react", sweep_react, "ReAct percentile in (0, 100] or 'off'");
  sweep_cmd->add_flag("--contribution-before-clip", sweep_v_raw,
                      "Estimate the contribution matrix on unclipped features under ReAct");
  sweep_cmd->add_option("--contribution-subsample", sweep_opts.contribution_subsample,
                        "Estimate contributions on this many training rows (0 = all)");
  sweep_cmd->add_option("--validate", sweep_opts.validate, "'noise' or an OOD set name; selects best p");
  sweep_cmd->add_option("--out", sweep_out, "Grid report JSON path");
  sweep_cmd->add_option("--csv", sweep_csv_path, "Grid CSV path");

  // analyze
  AnalyzeOptions analyze_opts;
  std::string analyze_out;
  auto* analyze_cmd = app.add_subcommand("analyze", "Unit-contribution profiles and variance decomposition");
  analyze_cmd->add_option("bundle", analyze_opts.bundle_path, "Bundle directory")->required();
  analyze_cmd->add_option("--class", analyze_opts.cls, "Class index");
  analyze_cmd->add_option("--p", analyze_opts.p, "Sparsity parameter for the kept units");
  analyze_cmd->add_option("--ood", analyze_opts.ood, "OOD set to analyze (default: first)");
  analyze_cmd->add_option("--out", analyze_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kBadFlags;
  }

  const std::string started = now_utc();
  try {
    if (*synth_cmd) {
      synth::BenchConfig cfg;
      if (!synth_config.empty()) {
        std::ifstream in(synth_config);
        if (!in) throw ConfigError("cannot read config " + synth_config);
        try {
          cfg = nlohmann::json::parse(in).get<synth::BenchConfig>();
        } catch (const nlohmann::json::exception& e) {
          throw ConfigError(std::string("config: ") + e.what());
        }
      }
      if (synth_seed) cfg.seed = *synth_seed;
      cfg.validate();
      const synth::SynthResult result = synth::build_reference(cfg);
      io::save_bundle(result.bundle, synth_out);
      write_text((std::filesystem::path(synth_out) / "config.json").string(),
                 nlohmann::json(cfg).dump(2) + "\n");
      out << "wrote bundle to " << synth_out << " (ID test accuracy "
          << result.model.id_test_accuracy << ")\n";
      return kOk;
    }

    if (*eval_cmd) {
      eval_opts.react_percentile = parse_react(eval_react);
      eval_opts.contribution_after_clip = !eval_v_raw;
      parse_sparsifier(eval_opts.method);
      parse_score_method(eval_opts.score);
      p_to_k(eval_opts.p, 1, 1);
      const io::Bundle bundle = io::load_bundle(eval_opts.bundle_path);
      json report = evaluate(bundle, eval_opts);
      finalize_report(report, started, now_utc());
      out << format_table(report);
      if (!eval_out.empty()) write_text(eval_out, report.dump(2) + "\n");
      return kOk;
    }

    if (*sweep_cmd) {
      sweep_opts.react_percentile = parse_react(sweep_react);
      sweep_opts.contribution_after_clip = !sweep_v_raw;
      for (const auto& m : sweep_opts.methods) parse_sparsifier(m);
      parse_score_method(sweep_opts.score);
      const io::Bundle bundle = io::load_bundle(sweep_opts.bundle_path);
      json report = sweep(bundle, sweep_opts);
      finalize_report(report, started, now_utc());
      const std::string csv = sweep_csv(report);
      if (!sweep_out.empty()) write_text(sweep_out, report.dump(2) + "\n");
      if (!sweep_csv_path.empty()) write_text(sweep_csv_path, csv);
      out << csv;
      if (report.contains("best_p")) out << "best_p: " << report["best_p"].dump() << "\n";
      return kOk;
    }

    if (*analyze_cmd) {
      p_to_k(analyze_opts.p, 1, 1);
      const io::Bundle bundle = io::load_bundle(analyze_opts.bundle_path);
      AnalyzeOutput result = analyze(bundle, analyze_opts);
      finalize_report(result.report, started, now_utc());
      std::filesystem::create_directories(analyze_out);
      const std::filesystem::path dir(analyze_out);
      write_text((dir / "profile.csv").string(), result.profile_csv);
      io::save_tensor(result.covariance, dir,
                      "covariance_ood_" + result.report["config"]["ood"].get<std::string>());
      write_text((dir / "variance.json").string(), result.report.dump(2) + "\n");
      out << result.report["variance"].dump(2) << "\n";
      return kOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kBadFlags;
}

}  // namespace dice::cli
