#include "peadv/poisoning.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>
#include <unordered_set>

#include "peadv/rng.hpp"

namespace peadv::poison {

namespace {

// Deterministic partial Fisher-Yates: first k entries of a shuffled
// 0..n-1 index vector.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
    const std::size_t j = i + rng.index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(std::min(k, n));
  return idx;
}

}  // namespace

const char* scenario_name(PoisonScenario s) {
  switch (s) {
    case PoisonScenario::benign_only: return "benign";
    case PoisonScenario::malware_only: return "malware";
    case PoisonScenario::mixture: return "mixture";
  }
  return "unknown";
}

PoisonScenario scenario_from_string(std::string_view s) {
  if (s == "benign" || s == "benign_only") return PoisonScenario::benign_only;
  if (s == "malware" || s == "malware_only") return PoisonScenario::malware_only;
  if (s == "mixture") return PoisonScenario::mixture;
  raise(Errc::config_error, "unknown poisoning scenario '" + std::string(s) + "'");
}

PoisonDataset build_poisoned_dataset(const PoisonDataset& clean, const PoisonDataset& benign_aes,
                                     const PoisonDataset& malware_aes, const ContaminationPlan& plan,
                                     PoisonScenario scenario, std::uint64_t seed) {
  if (plan.total_size == 0 || plan.total_size % 2 != 0)
    throw std::invalid_argument("total_size must be even and > 0");
  if (plan.contamination_rate < 0.0 || plan.contamination_rate > 1.0)
    throw std::invalid_argument("contamination_rate outside [0, 1]");
  const std::size_t class_size = plan.total_size / 2;

  // Per-class genuine pools in input order; the first class_size of each.
  std::vector<std::size_t> benign_slots, malware_slots;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i].label == Label::benign && benign_slots.size() < class_size)
      benign_slots.push_back(i);
    else if (clean[i].label == Label::malware && malware_slots.size() < class_size)
      malware_slots.push_back(i);
  }
  if (benign_slots.size() < class_size || malware_slots.size() < class_size)
    throw std::invalid_argument("clean dataset cannot fill both classes at the requested size");

  const std::size_t budget =
      static_cast<std::size_t>(std::llround(plan.contamination_rate * static_cast<double>(class_size)));
  std::size_t need_benign = 0, need_malware = 0;
  switch (scenario) {
    case PoisonScenario::benign_only: need_benign = budget; break;
    case PoisonScenario::malware_only: need_malware = budget; break;
    case PoisonScenario::mixture:
      need_benign = (budget + 1) / 2;  // odd remainder goes to benign
      need_malware = budget / 2;
      break;
  }
  if (need_benign > benign_aes.size())
    raise(Errc::insufficient_aes, "need " + std::to_string(need_benign) + " benign AEs, pool has " +
                                      std::to_string(benign_aes.size()));
  if (need_malware > malware_aes.size())
    raise(Errc::insufficient_aes, "need " + std::to_string(need_malware) + " malware AEs, pool has " +
                                      std::to_string(malware_aes.size()));

  Rng rng(seed ^ 0x90150DA7A5E7ull);
  // Fixed draw order: benign replacement slots, benign AEs, malware slots,
  // malware AEs.
  const auto b_slots = need_benign ? sample_indices(class_size, need_benign, rng) : std::vector<std::size_t>{};
  const auto b_aes = need_benign ? sample_indices(benign_aes.size(), need_benign, rng) : std::vector<std::size_t>{};
  const auto m_slots = need_malware ? sample_indices(class_size, need_malware, rng) : std::vector<std::size_t>{};
  const auto m_aes = need_malware ? sample_indices(malware_aes.size(), need_malware, rng) : std::vector<std::size_t>{};

  PoisonDataset out;
  out.reserve(plan.total_size);
  std::vector<const PoisonSample*> benign_final, malware_final;
  benign_final.reserve(class_size);
  malware_final.reserve(class_size);
  for (std::size_t i : benign_slots) benign_final.push_back(&clean[i]);
  for (std::size_t i : malware_slots) malware_final.push_back(&clean[i]);
  for (std::size_t r = 0; r < need_benign; ++r) benign_final[b_slots[r]] = &benign_aes[b_aes[r]];
  for (std::size_t r = 0; r < need_malware; ++r) malware_final[m_slots[r]] = &malware_aes[m_aes[r]];

  // Emit in the clean dataset's interleaving so CR=0 reproduces it exactly.
  std::size_t bi = 0, mi = 0;
  std::unordered_set<std::size_t> benign_set(benign_slots.begin(), benign_slots.end());
  std::unordered_set<std::size_t> malware_set(malware_slots.begin(), malware_slots.end());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (benign_set.count(i)) {
      PoisonSample s = *benign_final[bi++];
      if (s.label != Label::benign) throw std::logic_error("benign AE carries a malware label");
      out.push_back(std::move(s));
    } else if (malware_set.count(i)) {
      PoisonSample s = *malware_final[mi++];
      if (s.label != Label::malware) throw std::logic_error("malware AE carries a benign label");
      out.push_back(std::move(s));
    }
  }
  return out;
}

PoisonDataset label_flip(PoisonDataset dataset, double fraction, Label class_from,
                         std::uint64_t seed) {
  if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("fraction outside [0, 1]");
  std::vector<std::size_t> members;
  for (std::size_t i = 0; i < dataset.size(); ++i)
    if (dataset[i].label == class_from) members.push_back(i);
  const std::size_t k =
      static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
  Rng rng(seed ^ 0xF11BF11Bull);
  for (std::size_t pick : sample_indices(members.size(), k, rng))
    dataset[members[pick]].label = opposite(class_from);
  return dataset;
}

SweepReport run_sweep(const PoisonDataset& clean, const PoisonDataset& benign_aes,
                      const PoisonDataset& malware_aes, const PoisonDataset& test_set,
                      const SweepParams& params) {
  // Train/test leakage guard.
  {
    std::unordered_set<std::string> train_digests;
    for (const PoisonSample& s : clean) train_digests.insert(s.digest);
    for (const PoisonSample& s : benign_aes) train_digests.insert(s.digest);
    for (const PoisonSample& s : malware_aes) train_digests.insert(s.digest);
    for (const PoisonSample& s : test_set) {
      if (train_digests.count(s.digest))
        throw std::invalid_argument("test set shares digest " + s.digest + " with training material");
    }
  }

  std::vector<double> test_scores(test_set.size());
  std::vector<int> test_labels(test_set.size());
  for (std::size_t i = 0; i < test_set.size(); ++i)
    test_labels[i] = test_set[i].label == Label::malware ? 1 : 0;

  SweepReport report;
  for (PoisonScenario sc : params.scenarios)
    for (double cr : params.crs)
      for (std::uint64_t seed : params.seeds) {
        SweepCell cell;
        cell.scenario = sc;
        cell.cr = cr;
        cell.seed = seed;
        report.cells.push_back(std::move(cell));
      }

  unsigned workers = params.workers ? params.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, std::max<std::size_t>(report.cells.size(), 1));

  std::atomic<std::size_t> next{0};
  auto run_cell = [&](SweepCell& cell) {
    try {
      ContaminationPlan plan;
      plan.contamination_rate = cell.cr;
      plan.total_size = params.total_size;
      // Build randomness depends on (seed, scenario, CR); the trainer seed on
      // the grid seed only, so CR=0 cells coincide across scenarios.
      const std::uint64_t build_seed =
          Rng::from_key(cell.seed, std::string(scenario_name(cell.scenario)) + "|" +
                                       std::to_string(std::llround(cell.cr * 1e6)))
              .next_u64();
      PoisonDataset train = build_poisoned_dataset(clean, benign_aes, malware_aes, plan, cell.scenario, build_seed);

      std::vector<std::vector<double>> x(train.size());
      std::vector<int> y(train.size());
      for (std::size_t i = 0; i < train.size(); ++i) {
        x[i].assign(train[i].features.values.begin(), train[i].features.values.end());
        y[i] = train[i].label == Label::malware ? 1 : 0;
      }
      model::TrainParams tp = params.trainer;
      tp.seed = cell.seed;
      const model::BoostedStumps victim = model::train_stumps(x, y, tp);

      std::vector<double> scores(test_set.size());
      for (std::size_t i = 0; i < test_set.size(); ++i)
        scores[i] = victim.score_values(std::span<const double>(test_set[i].features.values.data(),
                                                                feat::kFeatureDim));
      cell.roc = metrics::roc(scores, test_labels);
      cell.auc = metrics::auc(cell.roc);
      cell.dr_at_levels.clear();
      for (double level : kSweepFprLevels) cell.dr_at_levels.push_back(metrics::dr_at_fpr(cell.roc, level));
    } catch (const std::exception& e) {
      cell.failed = true;
      cell.error = e.what();
    }
  };

  if (workers <= 1) {
    for (SweepCell& cell : report.cells) run_cell(cell);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w)
      threads.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= report.cells.size()) return;
          run_cell(report.cells[i]);
        }
      });
    for (std::thread& t : threads) t.join();
  }
  return report;
}

std::string sweep_csv(const SweepReport& report) {
  std::string out = "scenario,cr,seed,fpr_level_pct,dr,auc\n";
  char buf[160];
  for (const SweepCell& cell : report.cells) {
    if (cell.failed) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%llu,failed,,\n", scenario_name(cell.scenario), cell.cr,
                    static_cast<unsigned long long>(cell.seed));
      out += buf;
      continue;
    }
    for (std::size_t i = 0; i < cell.dr_at_levels.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%llu,%d,%.6f,%.6f\n", scenario_name(cell.scenario), cell.cr,
                    static_cast<unsigned long long>(cell.seed), static_cast<int>(kSweepFprLevels[i] * 100.0 + 0.5),
                    cell.dr_at_levels[i], cell.auc);
      out += buf;
    }
  }
  return out;
}

std::string cell_roc_csv(const SweepCell& cell) { return metrics::roc_csv(cell.roc); }

std::string cell_file_tag(const SweepCell& cell) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%s_cr%03d_seed%llu", scenario_name(cell.scenario),
                static_cast<int>(cell.cr * 100.0 + 0.5), static_cast<unsigned long long>(cell.seed));
  return buf;
}

}  // namespace peadv::poison
