// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "support/oracles.hpp"
#include "wise/bep.hpp"
#include "wise/io.hpp"
#include "wise/metrics.hpp"
#include "wise/pipeline.hpp"
#include "wise/synth.hpp"
#include "wise/treeshap.hpp"

using namespace wise;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared planted dataset and configuration.

const Dataset& planted() {
  static const Dataset data = [] {
    SynthParams sp;
    sp.n = 3000;
    sp.clusters = 3;
    sp.informative_nominal = 2;
    sp.informative_numeric = 2;
    sp.noise_nominal = 2;
    sp.noise_numeric = 2;
    sp.seed = 7;
    return split_truth(synthesize(sp), sp.truth_column);
  }();
  return data;
}

PipelineConfig planted_config() {
  PipelineConfig c;
  c.bep.bits = 8;
  c.forest.trees = 10;
  c.qd.m = 3;
  c.qd.lambda = 0.5;
  c.stage1.k0 = 8;
  c.stage2.k = 3;
  c.seed = 1;
  return c;
}

// ---------------------------------------------------------------------------

Outcome quantization_bracket() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int violations = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const double x = unit(rng), y = unit(rng);
    const int bits = 2 + static_cast<int>(rng() % 127);
    const double d = jaccard_distance(encode_numeric_value(x, bits).active(), encode_numeric_value(y, bits).active());
    const auto bracket = quantization_bounds(std::abs(x - y), bits);
    if (d < bracket.lower || d > bracket.upper) ++violations;
  }
  const double secs = seconds_since(t0);
  return {violations == 0 && secs < 5.0, fmt("violations=%.0f over 10000 triples, %.2fs", violations, secs)};
}

Outcome closed_form() {
  int mismatches = 0, cases = 0;
  for (int bits = 2; bits <= 64; ++bits) {
    const auto base = encode_numeric_value(0.0, bits);
    for (int gap = 0; gap <= bits; ++gap) {
      ++cases;
      const auto code = encode_numeric_value(static_cast<double>(gap) / bits, bits);
      if (code.offset - base.offset != gap) {
        ++mismatches;
        continue;
      }
      const auto a = base.active(), b = code.active();
      BitSet inter;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(inter));
      // Exact counts: |A n B| = B - gap, |A u B| = B + gap, so d = 2 gap / (B + gap).
      const bool counts = inter.size() == static_cast<std::size_t>(bits - gap) &&
                          a.size() + b.size() - inter.size() == static_cast<std::size_t>(bits + gap);
      const double ratio = static_cast<double>(gap) / bits;
      const double d = jaccard_distance(a, b);
      if (!counts || std::abs(d - 2.0 * ratio / (1.0 + ratio)) > 1e-15) ++mismatches;
    }
  }
  return {mismatches == 0, fmt("mismatches=%.0f over %.0f (B, gap) pairs", mismatches, cases)};
}

Outcome treeshap_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2002);
  double worst_phi = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> cats(1 + rng() % 6);
    for (auto& c : cats) c = rng() % 3 == 0 ? 2 + static_cast<int>(rng() % 3) : 0;
    const bool classify = trial % 2 == 1;
    const auto tree = oracle::random_tree(rng, 3, cats, classify ? TaskKind::kClassification : TaskKind::kRegression, 3);
    std::vector<std::vector<double>> bg;
    const std::size_t bg_size = 1 + rng() % 16;
    for (std::size_t i = 0; i < bg_size; ++i) bg.push_back(oracle::random_row(rng, cats));
    RowRefs refs;
    for (const auto& r : bg) refs.emplace_back(r);
    const int cls = classify ? static_cast<int>(rng() % 3) : 0;
    for (int r = 0; r < 5; ++r) {
      const auto x = oracle::random_row(rng, cats);
      const auto a = interventional_shap(tree, x, refs, cls);
      const auto expected = oracle::exhaustive_shap(tree, x, bg, cls);
      double total = a.base_value;
      for (std::size_t k = 0; k < cats.size(); ++k) {
        worst_phi = std::max(worst_phi, std::abs(a.phi[k] - expected[k]));
        total += a.phi[k];
      }
      worst_sum = std::max(worst_sum, std::abs(total - tree.predict_scalar(x, cls)));
    }
  }
  const double secs = seconds_since(t0);
  return {worst_phi <= 1e-9 && worst_sum <= 1e-9 && secs < 60.0,
          fmt("max |phi error|=%.2e, max additivity residual=%.2e, %.2fs", worst_phi, worst_sum, secs)};
}

Outcome qd_gain() {
  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t t = 2 + rng() % 10;
    const std::size_t f = 1 + rng() % 8;
    std::vector<TreeCandidate> pool;
    for (std::size_t u = 0; u < t; ++u) {
      std::vector<double> s(f);
      for (auto& v : s) v = rng() % 4 == 0 ? 0.0 : unit(rng);
      pool.push_back({u, unit(rng), s});
    }
    const double lambda = unit(rng);
    std::vector<std::size_t> order(t);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t size = rng() % t;
    QdState st;
    std::vector<TreeCandidate> chosen;
    for (std::size_t k = 0; k < size; ++k) {
      const auto u = order[k];
      for (auto v : st.members) st.pair_sum += cosine_distance(pool[v], pool[u]);
      st.members.push_back(u);
      st.quality_sum += pool[u].quality;
      chosen.push_back(pool[u]);
    }
    const auto& r = pool[order[size]];
    auto with_r = chosen;
    with_r.push_back(r);
    const double before = chosen.empty() ? 0.0 : oracle::direct_qd_objective(chosen, lambda);
    const double diff = oracle::direct_qd_objective(with_r, lambda) - before;
    worst = std::max(worst, std::abs(marginal_gain(r, pool, st, lambda) - diff));
  }
  return {worst <= 1e-12, fmt("max |gain - objective difference|=%.2e over 1000 instances", worst)};
}

Outcome cws_fidelity() {
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    SparseWeightedVector a, b;
    const std::uint32_t dims = 4 + static_cast<std::uint32_t>(rng() % 28);
    for (std::uint32_t t = 0; t < dims; ++t) {
      if (rng() % 3 != 0) a.entries.push_back({t, unit(rng) * 3.0 + 0.01});
      if (rng() % 3 != 0) b.entries.push_back({t, unit(rng) * 3.0 + 0.01});
    }
    if (a.empty()) a.entries.push_back({0, 1.0});
    if (b.empty()) b.entries.push_back({dims, 1.0});
    const int hashes = 10000;
    int hits = 0;
    for (int h = 0; h < hashes; ++h) hits += cws_hash(a, static_cast<std::uint64_t>(h), 500 + pair) == cws_hash(b, static_cast<std::uint64_t>(h), 500 + pair);
    worst = std::max(worst, std::abs(static_cast<double>(hits) / hashes - weighted_jaccard(a, b)));
  }
  return {worst <= 0.02, fmt("max |collision rate - weighted Jaccard|=%.4f over 50 pairs", worst)};
}

Outcome unweighted_reduction() {
  std::mt19937_64 rng(5005);
  int mismatched = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + rng() % 481;
    const int k = 2 + static_cast<int>(rng() % 5);
    const std::uint32_t dims = 10 + static_cast<std::uint32_t>(rng() % 50);
    std::vector<oracle::Set> sets(n);
    for (auto& s : sets) {
      const auto g = static_cast<std::uint32_t>(rng() % static_cast<std::uint64_t>(k));
      for (std::uint32_t t = 0; t < dims; ++t) {
        if (rng() % 100 < (t % static_cast<std::uint32_t>(k) == g ? 50u : 8u)) s.push_back(t);
      }
      if (s.empty()) s.push_back(g);
    }
    const double c = 0.01 + static_cast<double>(rng() % 1000) / 997.0;
    std::vector<SparseWeightedVector> unit, weighted;
    for (const auto& s : sets) {
      unit.push_back(SparseWeightedVector::binary(s));
      weighted.push_back(SparseWeightedVector::binary(s, c));
    }
    ClusterParams p;
    p.k = k;
    p.seed = static_cast<std::uint64_t>(trial) * 31 + 1;
    std::vector<oracle::Set> seeds;
    for (const auto& center : silk_seed(unit, p)) {
      oracle::Set s;
      for (const auto& e : center.center.entries) s.push_back(e.t);
      seeds.push_back(s);
    }
    const auto plain = oracle::plain_kfreq(sets, seeds, p.alpha, p.max_iter);
    if (cluster(weighted, p).labels != plain.labels) ++mismatched;
  }
  return {mismatched == 0, fmt("%.0f of 20 datasets differ from the plain-Jaccard engine", mismatched)};
}

Outcome explanation_consistency() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(6006);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    SynthParams sp;
    sp.n = 100 + rng() % 901;
    sp.clusters = 1 + static_cast<int>(rng() % 5);
    // d in [2, 10].
    sp.informative_nominal = static_cast<int>(rng() % 3);
    sp.informative_numeric = static_cast<int>(rng() % 3);
    sp.noise_nominal = static_cast<int>(rng() % 3);
    sp.noise_numeric = 2 + static_cast<int>(rng() % 3);
    sp.noise_level = 0.05 + 0.3 * static_cast<double>(rng() % 100) / 100.0;
    sp.seed = rng();
    const auto data = split_truth(synthesize(sp), sp.truth_column);
    PipelineConfig c;
    c.bep.bits = 4 + static_cast<int>(rng() % 13);
    c.forest.trees = 3;
    c.forest.min_samples_leaf = 10;
    c.forest.train_sample_frac = 0.3;
    c.qd.m = 1 + static_cast<int>(rng() % 2);
    c.sense.background_size = 16;
    c.sense.explain_cap = 64;
    c.stage1.k0 = 2 + static_cast<int>(rng() % 5);
    c.stage2.k = 1 + static_cast<int>(rng() % 5);
    c.seed = rng();
    const auto r = run_wise(data.features, c);
    worst = std::max(worst, r.explanations.consistency_deviation);
  }
  return {worst <= 1e-9, fmt("max deviation=%.2e over 20 runs, %.1fs", worst, seconds_since(t0))};
}

/// Restricted growth strings: every set partition of n items exactly once.
std::vector<std::vector<int>> all_partitions(std::size_t n) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int max_label) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    for (int l = 0; l <= max_label + 1; ++l) {
      cur[i] = l;
      rec(i + 1, std::max(max_label, l));
    }
  };
  if (n == 0) return out;
  rec(1, 0);
  return out;
}

Outcome metric_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_ari = 0.0, worst_nmi = 0.0;
  std::size_t acc_mismatch = 0, pairs = 0;
  for (std::size_t n = 1; n <= 7; ++n) {
    const auto parts = all_partitions(n);
    for (const auto& a : parts) {
      for (const auto& b : parts) {
        ++pairs;
        worst_ari = std::max(worst_ari, std::abs(ari(a, b) - oracle::pair_count_ari(a, b)));
        worst_nmi = std::max(worst_nmi, std::abs(nmi(a, b) - oracle::entropy_nmi(a, b)));
        if (acc_hungarian(a, b) != oracle::enumerate_acc(a, b)) ++acc_mismatch;
      }
    }
  }
  return {worst_ari <= 1e-12 && worst_nmi <= 1e-12 && acc_mismatch == 0,
          fmt("%.0f label pairs: max ARI error=%.2e, max NMI error=%.2e, ACC mismatches=%.0f", static_cast<double>(pairs),
              worst_ari, worst_nmi, static_cast<double>(acc_mismatch)) +
              fmt(", %.1fs", seconds_since(t0))};
}

struct PlantedRun {
  WiseResult result;
  double seconds = 0.0;
};

const PlantedRun& planted_run() {
  static const PlantedRun run = [] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& data = planted();
    PlantedRun out;
    out.result = run_wise(data.features, planted_config());
    out.seconds = seconds_since(t0);
    return out;
  }();
  return run;
}

Outcome planted_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& data = planted();
  const auto& run = planted_run();
  const double a = ari(run.result.labels, data.truth);
  const double m = nmi(run.result.labels, data.truth);
  const double secs = seconds_since(t0);
  return {a >= 0.9 && m >= 0.8 && secs <= 120.0, fmt("ARI=%.4f NMI=%.4f, %.1fs", a, m, secs)};
}

Outcome ablation_ordering() {
  const auto& data = planted();
  const auto& run = planted_run();
  auto uniform = planted_config();
  uniform.ablation = Ablation::kUniform;
  const auto base = run_wise(data.features, uniform);
  const double wise_ari = ari(run.result.labels, data.truth);
  const double uniform_ari = ari(base.labels, data.truth);

  FaithfulnessParams fp;
  fp.top_k = {3};
  fp.trials = 30;
  fp.seed = derive_seed(planted_config().seed, 0xfa11u);
  const auto& e = run.result.explanations;
  const auto report = faithfulness_eval(data.features, run.result.labels, e.cluster.normalized, e.cluster_sizes, fp);
  double top = 0.0, random = 0.0;
  for (const auto& row : report.rows) {
    if (row.subset == "top") top = row.accuracy;
    if (row.subset == "random") random = row.accuracy;
  }
  return {wise_ari >= uniform_ari && top >= random,
          fmt("ARI wise=%.4f uniform=%.4f; top-3 acc=%.4f random-3 acc=%.4f", wise_ari, uniform_ari, top, random)};
}

Outcome determinism() {
  const auto& data = planted();
  const auto dir = std::filesystem::temp_directory_path() / "wise_acceptance";
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  const int workers[] = {1, 4, 0};
  for (std::size_t i = 0; i < 3; ++i) {
    set_worker_count(workers[i]);
    const auto r = run_wise(data.features, planted_config());
    const auto path = (dir / ("labels_" + std::to_string(i) + ".csv")).string();
    write_labels(path, r.labels);
    std::ifstream in(path, std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    files.push_back(bytes.str());
  }
  set_worker_count(0);
  const bool same = files[0] == files[1] && files[1] == files[2];
  return {same && !files[0].empty(), same ? "labels.csv identical for 1, 4 and default workers" : "labels.csv differs across worker counts"};
}

}  // namespace

int main() {
  set_log_level(LogLevel::kQuiet);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"BEP quantization bracket", quantization_bracket},
      {"BEP closed form", closed_form},
      {"TreeSHAP oracle", treeshap_oracle},
      {"QD gain algebra", qd_gain},
      {"CWS fidelity", cws_fidelity},
      {"Unweighted reduction", unweighted_reduction},
      {"Explanation consistency", explanation_consistency},
      {"Metric oracles", metric_oracles},
      {"Planted-truth recovery", planted_recovery},
      {"Ablation ordering", ablation_ordering},
      {"Determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
