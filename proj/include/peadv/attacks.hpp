#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "peadv/classifiers.hpp"
#include "peadv/label.hpp"
#include "peadv/manipulation.hpp"
#include "peadv/pe_format.hpp"

namespace peadv::attack {

enum class AttackMode { malware_to_benign, benign_to_malware };

inline Label target_label(AttackMode m) {
  return m == AttackMode::malware_to_benign ? Label::benign : Label::malware;
}
inline Label source_label(AttackMode m) { return opposite(target_label(m)); }

const char* mode_name(AttackMode m);
AttackMode mode_from_string(std::string_view s);

struct AttackConfig {
  AttackMode mode = AttackMode::malware_to_benign;
  int n_max = 200;               // iteration / generation budget
  double epsilon = 0.5;          // gradient step size in embedding space
  double gamma_lambda = 0.1;     // perturbation penalty weight
  int population = 16;           // genetic population size (even, >= 4)
  int sections_max = 10;         // donor blocks usable by the genetic attack
  std::uint64_t seed = 0;
  std::size_t payload_budget = 1024;  // gradient payload bytes
  std::uint64_t dos_extend_k = 512;   // gap grown by the extend variant
  double mab_reward_delta = 0.01;     // score movement counting as bandit reward
  bool gamma_as_sections = true;      // inject as new sections vs overlay

  void check() const;
};

struct ActionRecord {
  std::string kind;
  std::string detail;
  std::uint64_t bytes = 0;
};

struct AttackResult {
  std::string original_digest;
  pe::Bytes adversarial_bytes;
  std::vector<ActionRecord> applied_actions;
  std::uint64_t queries = 0;
  bool evaded = false;
  std::vector<double> score_trace;
  std::vector<double> fitness_trace;  // genetic attack: best-so-far fitness
  std::uint64_t perturbation_bytes = 0;
};

// Algorithm-1 halt test: the classifier already emits the attack's target
// label.
bool stopping_condition(const model::ScoreModel& clf, pe::ByteView bytes, AttackMode mode);

// Uniformly sampled functionality-preserving actions until the stopping
// condition or the iteration budget.
AttackResult attack_random(const pe::PEFile& pe, const model::ScoreModel& clf,
                           const manip::DonorPool& pool, const AttackConfig& cfg);

// Phase 1: Thompson-sampling bandit over action kinds (Beta(1,1) priors,
// reward = score moved >= delta toward the target). Phase 2: each applied
// action is dropped when the result still reaches the target label.
AttackResult attack_mab(const pe::PEFile& pe, const model::ScoreModel& clf,
                        const manip::DonorPool& pool, const AttackConfig& cfg);

// Genetic search over donor-block injection fractions; fitness is the score
// pushed toward the target plus a perturbation-size penalty, minimized.
AttackResult attack_gamma(const pe::PEFile& pe, const model::ScoreModel& clf,
                          const manip::DonorPool& pool, const AttackConfig& cfg);

// Sign-of-gradient steps on a random payload placed in slack and overlay;
// embeddings are projected back to the nearest byte after each step.
AttackResult attack_fgsm(const pe::PEFile& pe, const model::ByteEmbedModel& clf,
                         const AttackConfig& cfg);

// DOS-zone attacks: gradient path for differentiable classifiers, otherwise
// a random-coordinate hill climb accepting only moves toward the target.
AttackResult attack_dos(const pe::PEFile& pe, const model::ScoreModel& clf, const AttackConfig& cfg,
                        pe::DosVariant variant);

enum class Strategy { random, mab, gamma, fgsm, dos_partial, dos_full, dos_extend };

const char* strategy_name(Strategy s);
Strategy strategy_from_string(std::string_view s);

AttackResult run_episode(const pe::PEFile& pe, const model::ScoreModel& clf,
                         const manip::DonorPool* pool, Strategy strategy, const AttackConfig& cfg);

struct CampaignStats {
  std::size_t inputs = 0;
  std::size_t discarded_unmodified = 0;  // zero-perturbation results
  std::size_t pre_misclassified = 0;     // already at the target label
  std::size_t retained = 0;
  std::size_t evaded = 0;
  double evasion_rate = 0.0;
  std::uint64_t total_queries = 0;
};

struct CampaignOutcome {
  std::vector<AttackResult> retained;
  std::vector<AttackResult> discarded;
  CampaignStats stats;
};

// Runs one episode per input (episode randomness derives from the campaign
// seed and the input digest), records zero-perturbation results and drops
// them from the evasion-rate statistics.
CampaignOutcome run_campaign(const std::vector<pe::Bytes>& inputs, const model::ScoreModel& clf,
                             const manip::DonorPool* pool, Strategy strategy,
                             const AttackConfig& cfg, unsigned workers = 0);

double evasion_rate(const std::vector<AttackResult>& results);

// One JSON record per episode plus a short summary table.
std::string campaign_records_jsonl(const CampaignOutcome& outcome, Strategy strategy,
                                   AttackMode mode);
std::string campaign_summary_csv(const CampaignStats& stats, Strategy strategy, AttackMode mode);

}  // namespace peadv::attack
