// wise: command-line front end.
//
//   wise synth    planted mixed-type dataset (CSV + schema)
//   wise run      full pipeline -> labels.csv, result.json, explanations.json[, metrics.json]
//   wise encode   table -> sparse BEP dump
//   wise sense    table -> weights dump
//   wise cluster  BEP dump + weights -> records.csv, labels.csv
//   wise explain  records + labels + weights -> explanations.json
//   wise evaluate labels + truth column -> metrics.json

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wise/io.hpp"
#include "wise/synth.hpp"

namespace fs = std::filesystem;
using namespace wise;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitInvariant = 4;

struct CommonFlags {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::string ablation;
  std::string data;
  std::string schema;
  std::string truth_column;
  std::string out;
  bool verbose = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_data) {
  cmd->add_option("-c,--config", f.config, "JSON config file");
  cmd->add_option("--set", f.overrides, "override a config key (key=value); repeatable");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--workers", f.workers, "worker threads (default: WISE_WORKERS or all cores)");
  cmd->add_flag("-v,--verbose", f.verbose, "debug logging");
  cmd->add_flag("-q,--quiet", f.quiet, "suppress logging");
  if (with_data) {
    cmd->add_option("--data", f.data, "input CSV");
    cmd->add_option("--schema", f.schema, "column schema JSON");
    cmd->add_option("--truth-column", f.truth_column, "ground-truth column, excluded from features");
  }
}

RunConfig resolve(const CommonFlags& f) {
  RunConfig rc = load_run_config(f.config);
  for (const auto& o : f.overrides) apply_override(o, rc);
  if (f.seed) rc.pipeline.seed = *f.seed;
  if (!f.ablation.empty()) rc.pipeline.ablation = parse_ablation(f.ablation);
  if (!f.data.empty()) rc.data = f.data;
  if (!f.schema.empty()) rc.schema = f.schema;
  if (!f.truth_column.empty()) rc.truth_column = f.truth_column;
  if (!f.out.empty()) rc.output_dir = f.out;
  if (f.workers < 0) throw ConfigError("--workers must be >= 0");
  set_worker_count(f.workers);
  set_log_level(f.quiet ? LogLevel::kQuiet : f.verbose ? LogLevel::kDebug : LogLevel::kInfo);
  rc.faithfulness.seed = derive_seed(rc.pipeline.seed, 0xfa11u);
  return rc;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create output directory '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

std::vector<std::string> names_for(std::size_t d, const std::vector<std::string>& given) {
  if (given.size() == d) return given;
  std::vector<std::string> out;
  for (std::size_t k = 0; k < d; ++k) out.push_back("f" + std::to_string(k));
  return out;
}

void print_summary(std::ostream& os, const Explanations& e, const std::vector<std::string>& names, std::size_t top_q) {
  os << "K = " << e.cluster_sizes.size() << "\n";
  for (std::size_t j = 0; j < e.cluster_sizes.size(); ++j) {
    os << "  cluster " << j << "  size " << std::setw(6) << e.cluster_sizes[j] << "  top:";
    if (e.cluster.normalized.zero_row[j]) {
      os << " (undiscriminated)\n";
      continue;
    }
    const auto row = e.cluster.normalized.row(j);
    const auto order = rank_features(row);
    for (std::size_t q = 0; q < std::min(top_q, order.size()); ++q) {
      os << ' ' << names[order[q]] << '=' << std::fixed << std::setprecision(3) << row[order[q]];
    }
    os.unsetf(std::ios::fixed);
    os << "\n";
  }
  os << "consistency deviation = " << std::setprecision(3) << e.consistency_deviation << "\n";
}

std::optional<FaithfulnessReport> maybe_faithfulness(const RunConfig& rc, const MixedTable& table, std::span<const int> labels,
                                                     const Explanations& e) {
  if (!rc.run_faithfulness || table.n() < 2) return std::nullopt;
  FaithfulnessParams fp = rc.faithfulness;
  std::erase_if(fp.top_k, [&](std::size_t k) { return k == 0 || k > table.d(); });
  return faithfulness_eval(table, labels, e.cluster.normalized, e.cluster_sizes, fp);
}

// ---------------------------------------------------------------------------

int cmd_run(const CommonFlags& f, bool instances, bool rounds) {
  RunConfig rc = resolve(f);
  rc.instances = rc.instances || instances;
  rc.with_rounds = rc.with_rounds || rounds;
  std::cout << "seed = " << rc.pipeline.seed << "\n";
  const Dataset ds = load_dataset(rc.data, rc.schema, rc.truth_column);
  const auto names = feature_names(ds.features);
  const WiseResult result = run_wise(ds.features, rc.pipeline);

  ensure_dir(rc.output_dir);
  write_labels(join(rc.output_dir, "labels.csv"), result.labels);
  write_json(join(rc.output_dir, "result.json"), result_to_json(result, rc, names));
  const auto faith = maybe_faithfulness(rc, ds.features, result.labels, result.explanations);
  write_json(join(rc.output_dir, "explanations.json"),
             explanations_to_json(result.explanations, names, rc.top_q, rc.instances, faith ? &*faith : nullptr));
  print_summary(std::cout, result.explanations, names, rc.top_q);
  if (!ds.truth.empty()) {
    const MetricsReport m = evaluate(ds.features, result.labels, ds.truth, rc.swc_subsample, rc.pipeline.seed);
    write_json(join(rc.output_dir, "metrics.json"), metrics_to_json(m));
    std::cout << "ARI = " << m.ari << "  NMI = " << m.nmi << "  ACC = " << m.acc << "  purity = " << m.purity
              << "  SWC = " << m.swc << "\n";
  }
  std::cout << "wrote " << rc.output_dir << "\n";
  return kExitOk;
}

int cmd_encode(const CommonFlags& f) {
  RunConfig rc = resolve(f);
  const Dataset ds = load_dataset(rc.data, rc.schema, rc.truth_column);
  rc.pipeline.bep.validate();
  const BepMatrix bep = encode_table(ds.features, rc.pipeline.bep);
  ensure_dir(rc.output_dir);
  std::ofstream out(join(rc.output_dir, "bep.txt"));
  if (!out) throw DataError("cannot write bep.txt");
  write_bep(bep, out);
  std::cout << "encoded " << bep.n << " rows into " << bep.p << " bits -> " << join(rc.output_dir, "bep.txt") << "\n";
  return kExitOk;
}

int cmd_sense(const CommonFlags& f) {
  RunConfig rc = resolve(f);
  rc.pipeline.validate();
  const Dataset ds = load_dataset(rc.data, rc.schema, rc.truth_column);
  const auto views = weight_views(ds.features, rc.pipeline);
  ensure_dir(rc.output_dir);
  write_views(join(rc.output_dir, "weights.csv"), views, feature_names(ds.features));
  std::cout << "sensed " << views.size() << " weight views -> " << join(rc.output_dir, "weights.csv") << "\n";
  return kExitOk;
}

int cmd_cluster(const CommonFlags& f, const std::string& bep_path, const std::string& weights_path) {
  RunConfig rc = resolve(f);
  rc.pipeline.validate();
  std::ifstream in(bep_path);
  if (!in) throw DataError("missing upstream artifact: cannot open BEP dump '" + bep_path + "'");
  const BepMatrix bep = read_bep(in);
  const std::size_t d = bep.bit_groups.size();
  std::vector<FeatureWeightVector> views;
  std::vector<std::string> names;
  if (!weights_path.empty()) {
    views = read_views(weights_path, &names);
  } else if (rc.pipeline.ablation == Ablation::kUniform) {
    views = uniform_views(d, d * static_cast<std::size_t>(rc.pipeline.qd.m));
  } else if (rc.pipeline.ablation == Ablation::kGaussian) {
    views = gaussian_views(d, d * static_cast<std::size_t>(rc.pipeline.qd.m), derive_seed(rc.pipeline.seed, 0x6au));
  } else {
    throw ConfigError("cluster: pass --weights or an ablation mode (uniform | gaussian)");
  }
  for (const auto& v : views) {
    if (v.w.size() != d) throw DataError("cluster: weight length does not match the BEP feature count");
  }
  const auto s1 = stage_one(bep, views, rc.pipeline.stage1, rc.pipeline.lsh, rc.pipeline.max_iter, rc.pipeline.seed);
  const auto z = one_hot_records(s1.records);
  const auto s2 = stage_two(z, rc.pipeline.stage2, rc.pipeline.stage2_beta(), rc.pipeline.lsh, rc.pipeline.max_iter,
                            rc.pipeline.seed);
  ensure_dir(rc.output_dir);
  write_records(join(rc.output_dir, "records.csv"), s1.records);
  write_labels(join(rc.output_dir, "labels.csv"), s2.labels);
  std::cout << "clustered " << bep.n << " rows over " << views.size() << " rounds -> " << rc.output_dir << "\n";
  return kExitOk;
}

int cmd_explain(const CommonFlags& f, const std::string& records_path, const std::string& labels_path,
                const std::string& weights_path, bool instances) {
  RunConfig rc = resolve(f);
  const RecordMatrix records = read_records(records_path);
  const auto labels = read_labels(labels_path);
  std::vector<std::string> names;
  const auto views = read_views(weights_path, &names);
  if (labels.size() != records.n) throw DataError("explain: label count does not match the record matrix");
  if (views.size() != records.rounds) throw DataError("explain: weight view count does not match the record matrix rounds");
  const int k = std::max(rc.pipeline.stage2.k, *std::max_element(labels.begin(), labels.end()) + 1);
  const Explanations e = explain(records, labels, k, views, rc.pipeline.epsilon);
  names = names_for(detail::view_width(views), names);
  std::optional<FaithfulnessReport> faith;
  if (!rc.data.empty()) {
    const Dataset ds = load_dataset(rc.data, rc.schema, rc.truth_column);
    faith = maybe_faithfulness(rc, ds.features, labels, e);
  }
  ensure_dir(rc.output_dir);
  write_json(join(rc.output_dir, "explanations.json"),
             explanations_to_json(e, names, rc.top_q, rc.instances || instances, faith ? &*faith : nullptr));
  print_summary(std::cout, e, names, rc.top_q);
  return kExitOk;
}

int cmd_evaluate(const CommonFlags& f, const std::string& labels_path) {
  RunConfig rc = resolve(f);
  if (rc.truth_column.empty()) throw ConfigError("evaluate: --truth-column is required");
  const Dataset ds = load_dataset(rc.data, rc.schema, rc.truth_column);
  const auto labels = read_labels(labels_path);
  if (labels.size() != ds.features.n()) throw DataError("evaluate: label count does not match the data rows");
  const MetricsReport m = evaluate(ds.features, labels, ds.truth, rc.swc_subsample, rc.pipeline.seed);
  ensure_dir(rc.output_dir);
  write_json(join(rc.output_dir, "metrics.json"), metrics_to_json(m));
  std::cout << std::setw(2) << metrics_to_json(m) << "\n";
  return kExitOk;
}

int cmd_synth(const SynthParams& params, const std::string& out_dir) {
  const MixedTable table = synthesize(params);
  ensure_dir(out_dir);
  write_table(table, join(out_dir, "data.csv"));
  write_json(join(out_dir, "schema.json"), schema_to_json(table.schema()));
  std::cout << "wrote " << table.n() << " rows x " << table.d() << " columns (truth column '" << params.truth_column
            << "') -> " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Weight-informed interpretable clustering of mixed-type tables"};
  app.require_subcommand(1);

  CommonFlags run_f, enc_f, sense_f, clu_f, exp_f, eval_f;
  bool instances = false, rounds = false, exp_instances = false;
  std::string bep_path, weights_path, records_path, labels_path, exp_weights, eval_labels;

  auto* run = app.add_subcommand("run", "full pipeline");
  add_common(run, run_f, true);
  run->add_option("-o,--out", run_f.out, "output directory");
  run->add_option("--ablation", run_f.ablation, "none | uniform | gaussian");
  run->add_flag("--with-instances", instances, "include per-instance weights");
  run->add_flag("--with-rounds", rounds, "include Stage-I round labels in result.json");

  auto* enc = app.add_subcommand("encode", "encode a table as a sparse BEP dump");
  add_common(enc, enc_f, true);
  enc->add_option("-o,--out", enc_f.out, "output directory");

  auto* sense = app.add_subcommand("sense", "sense feature-weight views");
  add_common(sense, sense_f, true);
  sense->add_option("-o,--out", sense_f.out, "output directory");
  sense->add_option("--ablation", sense_f.ablation, "none | uniform | gaussian");

  auto* clu = app.add_subcommand("cluster", "two-stage clustering of a BEP dump");
  add_common(clu, clu_f, false);
  clu->add_option("--bep", bep_path, "BEP dump")->required();
  clu->add_option("--weights", weights_path, "weights dump");
  clu->add_option("--ablation", clu_f.ablation, "uniform | gaussian (when no weights dump)");
  clu->add_option("-o,--out", clu_f.out, "output directory");

  auto* exp = app.add_subcommand("explain", "DFI explanations from stage artifacts");
  add_common(exp, exp_f, true);
  exp->add_option("--records", records_path, "record matrix CSV")->required();
  exp->add_option("--labels", labels_path, "labels CSV")->required();
  exp->add_option("--weights", exp_weights, "weights dump")->required();
  exp->add_flag("--with-instances", exp_instances, "include per-instance weights");
  exp->add_option("-o,--out", exp_f.out, "output directory");

  auto* eval = app.add_subcommand("evaluate", "external and internal metrics");
  add_common(eval, eval_f, true);
  eval->add_option("--labels", eval_labels, "labels CSV")->required();
  eval->add_option("-o,--out", eval_f.out, "output directory");

  SynthParams sp;
  std::string synth_out = "synth";
  auto* syn = app.add_subcommand("synth", "planted mixed-type dataset");
  syn->add_option("--n", sp.n, "rows");
  syn->add_option("--clusters", sp.clusters, "planted clusters");
  syn->add_option("--informative-nominal", sp.informative_nominal, "informative nominal columns");
  syn->add_option("--informative-numeric", sp.informative_numeric, "informative numeric columns");
  syn->add_option("--noise-nominal", sp.noise_nominal, "noise nominal columns");
  syn->add_option("--noise-numeric", sp.noise_numeric, "noise numeric columns");
  syn->add_option("--levels", sp.levels, "levels per nominal column");
  syn->add_option("--noise-level", sp.noise_level, "probability an informative cell is redrawn");
  syn->add_option("--seed", sp.seed, "generator seed");
  syn->add_option("--truth-column", sp.truth_column, "name of the planted-label column");
  syn->add_option("-o,--out", synth_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_f, instances, rounds);
    if (*enc) return cmd_encode(enc_f);
    if (*sense) return cmd_sense(sense_f);
    if (*clu) return cmd_cluster(clu_f, bep_path, weights_path);
    if (*exp) return cmd_explain(exp_f, records_path, labels_path, exp_weights, exp_instances);
    if (*eval) return cmd_evaluate(eval_f, eval_labels);
    if (*syn) return cmd_synth(sp, synth_out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const InvariantError& e) {
    std::cerr << "invariant violation: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
