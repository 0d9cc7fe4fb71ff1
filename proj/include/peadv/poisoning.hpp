#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peadv/classifiers.hpp"
#include "peadv/features.hpp"
#include "peadv/label.hpp"
#include "peadv/metrics.hpp"

namespace peadv::poison {

enum class PoisonScenario { benign_only, malware_only, mixture };

const char* scenario_name(PoisonScenario s);
PoisonScenario scenario_from_string(std::string_view s);

// CR is the fraction of one class's share: round(CR * class_size) adversarial
// samples enter the set, all in one class for the single-class scenarios and
// split evenly (odd remainder to benign) in the mixture scenario. Class
// balance is fixed at 0.5.
struct ContaminationPlan {
  double contamination_rate = 0.0;
  std::size_t total_size = 2000;
};

struct PoisonSample {
  feat::FeatureVector features;
  Label label = Label::benign;
  std::string digest;
  bool adversarial = false;
};

using PoisonDataset = std::vector<PoisonSample>;

// Replaces a uniformly drawn subset of genuine samples with adversarial ones
// carrying their ground-truth labels; balance and total size are preserved
// exactly. Deterministic given the seed.
PoisonDataset build_poisoned_dataset(const PoisonDataset& clean, const PoisonDataset& benign_aes,
                                     const PoisonDataset& malware_aes, const ContaminationPlan& plan,
                                     PoisonScenario scenario, std::uint64_t seed);

// Flips the label of a uniformly chosen fraction of class_from; contents
// untouched.
PoisonDataset label_flip(PoisonDataset dataset, double fraction, Label class_from,
                         std::uint64_t seed);

inline constexpr double kSweepFprLevels[] = {0.01, 0.02, 0.03, 0.04, 0.05};

struct SweepParams {
  std::vector<PoisonScenario> scenarios{PoisonScenario::benign_only, PoisonScenario::malware_only,
                                        PoisonScenario::mixture};
  std::vector<double> crs{0.0, 0.1, 0.25, 0.5};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t total_size = 2000;
  model::TrainParams trainer{100, 0.3, 0};
  unsigned workers = 0;
};

struct SweepCell {
  PoisonScenario scenario = PoisonScenario::benign_only;
  double cr = 0.0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string error;
  std::vector<metrics::RocPoint> roc;
  double auc = 0.0;
  std::vector<double> dr_at_levels;  // one per kSweepFprLevels entry
};

struct SweepReport {
  std::vector<SweepCell> cells;
};

// One victim per (scenario, CR, seed) grid cell, evaluated on the fixed test
// set. Training failures mark the cell failed and the sweep continues.
SweepReport run_sweep(const PoisonDataset& clean, const PoisonDataset& benign_aes,
                      const PoisonDataset& malware_aes, const PoisonDataset& test_set,
                      const SweepParams& params);

using metrics::dr_at_fpr;

std::string sweep_csv(const SweepReport& report);
std::string cell_roc_csv(const SweepCell& cell);
std::string cell_file_tag(const SweepCell& cell);

}  // namespace peadv::poison
