#include "peadv/attacks.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <thread>

#include "peadv/metrics.hpp"
#include "peadv/rng.hpp"
#include "peadv/sha256.hpp"

#include "json.hpp"

namespace peadv::attack {

namespace {

constexpr int kApplyRetries = 8;

// Direction helpers: +1 when higher scores are progress (benign_to_malware),
// -1 otherwise. Mode enters the loops only through these and the gradient /
// fitness signs; the machinery is shared between directions.
double direction(AttackMode mode) { return mode == AttackMode::benign_to_malware ? 1.0 : -1.0; }

bool at_target(const model::ScoreModel& clf, double score, AttackMode mode) {
  const Label l = score >= clf.threshold ? Label::malware : Label::benign;
  return l == target_label(mode);
}

ActionRecord record_of(const manip::Action& a) {
  return {manip::action_kind_name(a.kind), a.describe(), a.payload_bytes()};
}

struct Episode {
  const model::ScoreModel& clf;
  const AttackConfig& cfg;
  pe::Bytes original;
  std::string digest;
  AttackResult result;

  Episode(const pe::PEFile& pe, const model::ScoreModel& clf_, const AttackConfig& cfg_)
      : clf(clf_), cfg(cfg_), original(pe::serialize(pe)), digest(sha256_hex(original)) {
    result.original_digest = digest;
  }

  Rng rng() const { return Rng::from_key(cfg.seed, digest); }

  double score(pe::ByteView bytes) {
    ++result.queries;
    return clf.score(bytes);
  }

  void finish(pe::Bytes adversarial, bool evaded) {
    result.evaded = evaded;
    result.perturbation_bytes =
        manip::diff_bytes(original, adversarial).total();
    result.adversarial_bytes = std::move(adversarial);
  }
};

// Beta(a, b) for integer parameters via sums of exponentials; exact and
// portable, which keeps Thompson draws reproducible.
double beta_sample(Rng& rng, std::uint32_t a, std::uint32_t b) {
  auto gamma_int = [&rng](std::uint32_t n) {
    double s = 0.0;
    for (std::uint32_t i = 0; i < n; ++i) s += -std::log(1.0 - rng.next_double());
    return s;
  };
  const double x = gamma_int(a);
  const double y = gamma_int(b);
  return x / (x + y);
}

std::vector<std::uint64_t> flatten_ranges(const std::vector<pe::ByteRange>& ranges) {
  std::vector<std::uint64_t> out;
  for (const pe::ByteRange& r : ranges)
    for (std::uint64_t i = r.begin; i < r.end; ++i) out.push_back(i);
  return out;
}

// Shared embedding-space sign-step loop used by the FGSM and gradient DOS
// paths. Byte flips are accepted only when they move the pooled logit toward
// the target, so the score trace is monotone until the byte fixpoint.
void embedding_descent(Episode& ep, const model::ByteEmbedModel& m, pe::Bytes& bytes,
                       const std::vector<std::uint64_t>& positions) {
  const double dir = direction(ep.cfg.mode);
  bool scored_current = false;
  double current = 0.0;
  for (int iter = 0; iter < ep.cfg.n_max; ++iter) {
    current = ep.score(bytes);
    ep.result.score_trace.push_back(current);
    scored_current = true;
    if (at_target(ep.clf, current, ep.cfg.mode)) {
      ep.finish(std::move(bytes), true);
      return;
    }

    const auto grads = m.grad_wrt_embeddings(bytes, positions);
    bool changed = false;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      const auto& g = grads[i];
      bool zero = true;
      for (double v : g) zero = zero && v == 0.0;
      if (zero) continue;

      const std::uint8_t cur = bytes[static_cast<std::size_t>(positions[i])];
      model::ByteEmbedModel::Embedding z;
      for (std::size_t j = 0; j < model::ByteEmbedModel::kEmbedDim; ++j) {
        const double sign = g[j] > 0.0 ? 1.0 : (g[j] < 0.0 ? -1.0 : 0.0);
        z[j] = m.embedding[cur][j] + dir * ep.cfg.epsilon * sign;
      }
      // Nearest embedding row (L2); ties resolve to the lower byte value.
      std::uint8_t best = cur;
      double best_d2 = 0.0;
      bool first = true;
      for (int b = 0; b < 256; ++b) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < model::ByteEmbedModel::kEmbedDim; ++j) {
          const double dv = m.embedding[static_cast<std::size_t>(b)][j] - z[j];
          d2 += dv * dv;
        }
        if (first || d2 < best_d2) {
          first = false;
          best_d2 = d2;
          best = static_cast<std::uint8_t>(b);
        }
      }
      if (best != cur && dir * (m.byte_projection(best) - m.byte_projection(cur)) > 0.0) {
        bytes[static_cast<std::size_t>(positions[i])] = best;
        changed = true;
        scored_current = false;
      }
    }
    if (!changed) break;  // byte-projection fixpoint
  }
  if (!scored_current) {
    current = ep.score(bytes);
    ep.result.score_trace.push_back(current);
  }
  ep.finish(std::move(bytes), at_target(ep.clf, current, ep.cfg.mode));
}

}  // namespace

const char* mode_name(AttackMode m) {
  return m == AttackMode::malware_to_benign ? "malware-to-benign" : "benign-to-malware";
}

AttackMode mode_from_string(std::string_view s) {
  if (s == "malware-to-benign" || s == "malware_to_benign") return AttackMode::malware_to_benign;
  if (s == "benign-to-malware" || s == "benign_to_malware") return AttackMode::benign_to_malware;
  raise(Errc::config_error, "unknown attack mode '" + std::string(s) + "'");
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::random: return "random";
    case Strategy::mab: return "mab";
    case Strategy::gamma: return "gamma";
    case Strategy::fgsm: return "fgsm";
    case Strategy::dos_partial: return "dos-partial";
    case Strategy::dos_full: return "dos-full";
    case Strategy::dos_extend: return "dos-extend";
  }
  return "unknown";
}

Strategy strategy_from_string(std::string_view s) {
  if (s == "random") return Strategy::random;
  if (s == "mab") return Strategy::mab;
  if (s == "gamma") return Strategy::gamma;
  if (s == "fgsm") return Strategy::fgsm;
  if (s == "dos-partial" || s == "dos_partial") return Strategy::dos_partial;
  if (s == "dos-full" || s == "dos_full") return Strategy::dos_full;
  if (s == "dos-extend" || s == "dos_extend") return Strategy::dos_extend;
  raise(Errc::config_error, "unknown strategy '" + std::string(s) + "'");
}

void AttackConfig::check() const {
  if (n_max < 1) throw std::invalid_argument("n_max must be >= 1");
  if (epsilon < 0.0) throw std::invalid_argument("epsilon must be >= 0");
  if (population < 4 || population % 2 != 0)
    throw std::invalid_argument("population must be even and >= 4");
  if (sections_max < 1) throw std::invalid_argument("sections_max must be >= 1");
}

bool stopping_condition(const model::ScoreModel& clf, pe::ByteView bytes, AttackMode mode) {
  return clf.label(bytes) == target_label(mode);
}

AttackResult attack_random(const pe::PEFile& pe, const model::ScoreModel& clf,
                           const manip::DonorPool& pool, const AttackConfig& cfg) {
  cfg.check();
  Episode ep(pe, clf, cfg);
  Rng rng = ep.rng();

  pe::PEFile cur = pe;
  pe::Bytes cur_bytes = ep.original;
  for (int iter = 0; iter < cfg.n_max; ++iter) {
    const double s = ep.score(cur_bytes);
    ep.result.score_trace.push_back(s);
    if (at_target(clf, s, cfg.mode)) {
      ep.finish(std::move(cur_bytes), true);
      return ep.result;
    }
    for (int attempt = 0; attempt < kApplyRetries; ++attempt) {
      manip::Action a = manip::sample_action(pool, cur, rng);
      try {
        pe::PEFile next = manip::apply(a, cur);
        cur_bytes = pe::serialize(next);
        cur = std::move(next);
        ep.result.applied_actions.push_back(record_of(a));
        break;
      } catch (const Error& e) {
        if (e.code() != Errc::inapplicable_action && e.code() != Errc::layout_conflict) throw;
      }
    }
  }
  const double s = ep.score(cur_bytes);
  ep.result.score_trace.push_back(s);
  ep.finish(std::move(cur_bytes), at_target(clf, s, cfg.mode));
  return ep.result;
}

AttackResult attack_mab(const pe::PEFile& pe, const model::ScoreModel& clf,
                        const manip::DonorPool& pool, const AttackConfig& cfg) {
  cfg.check();
  Episode ep(pe, clf, cfg);
  Rng rng = ep.rng();
  const double dir = direction(cfg.mode);

  struct Arm {
    std::uint32_t alpha = 1, beta = 1;  // Beta(1,1) prior
  };
  std::array<Arm, manip::kActionKindCount> arms;

  pe::PEFile cur = pe;
  pe::Bytes cur_bytes = ep.original;
  std::vector<manip::Action> applied;

  double s = ep.score(cur_bytes);
  ep.result.score_trace.push_back(s);
  bool evaded = at_target(clf, s, cfg.mode);

  for (int iter = 0; !evaded && iter < cfg.n_max; ++iter) {
    const auto kinds = manip::applicable_kinds(cur);
    // Thompson draw per applicable arm, highest sample wins.
    manip::ActionKind pick = kinds[0];
    double best = -1.0;
    for (manip::ActionKind k : kinds) {
      const Arm& a = arms[static_cast<std::size_t>(k)];
      const double draw = beta_sample(rng, a.alpha, a.beta);
      if (draw > best) {
        best = draw;
        pick = k;
      }
    }

    bool stepped = false;
    for (int attempt = 0; attempt < kApplyRetries && !stepped; ++attempt) {
      manip::Action a = manip::sample_action_of_kind(pick, pool, cur, rng);
      try {
        pe::PEFile next = manip::apply(a, cur);
        cur_bytes = pe::serialize(next);
        cur = std::move(next);
        applied.push_back(std::move(a));
        stepped = true;
      } catch (const Error& e) {
        if (e.code() != Errc::inapplicable_action && e.code() != Errc::layout_conflict) throw;
        pick = kinds[rng.index(kinds.size())];  // re-draw a kind and retry
      }
    }
    if (!stepped) continue;

    const double s_new = ep.score(cur_bytes);
    ep.result.score_trace.push_back(s_new);
    Arm& arm = arms[static_cast<std::size_t>(applied.back().kind)];
    if (dir * (s_new - s) >= cfg.mab_reward_delta)
      ++arm.alpha;
    else
      ++arm.beta;
    s = s_new;
    evaded = at_target(clf, s, cfg.mode);
  }

  if (evaded && !applied.empty()) {
    // Minimization: drop every action whose removal keeps the target label.
    // Rebuilds start from the original so position-dependent actions (slack
    // fills, renames of added sections) are revalidated; a failed rebuild
    // keeps the action. The in-order pass repeats until a fixpoint because a
    // dependent action may unblock its dependency only once it is gone.
    std::vector<bool> kept(applied.size(), true);
    auto rebuild = [&](std::size_t skip) -> pe::Bytes {
      pe::PEFile f = pe;
      for (std::size_t i = 0; i < applied.size(); ++i) {
        if (!kept[i] || i == skip) continue;
        f = manip::apply(applied[i], f);
      }
      return pe::serialize(f);
    };
    const std::uint64_t query_budget =
        static_cast<std::uint64_t>(cfg.n_max) * static_cast<std::uint64_t>(1 + cfg.population);
    bool dropped = true;
    while (dropped && ep.result.queries < query_budget) {
      dropped = false;
      for (std::size_t i = 0; i < applied.size() && ep.result.queries < query_budget; ++i) {
        if (!kept[i]) continue;
        pe::Bytes trial;
        try {
          trial = rebuild(i);
        } catch (const Error&) {
          continue;
        }
        const double st = ep.score(trial);
        if (at_target(clf, st, cfg.mode)) {
          kept[i] = false;
          cur_bytes = std::move(trial);
          dropped = true;
        }
      }
    }
    for (std::size_t i = 0; i < applied.size(); ++i)
      if (kept[i]) ep.result.applied_actions.push_back(record_of(applied[i]));
  } else {
    for (const manip::Action& a : applied) ep.result.applied_actions.push_back(record_of(a));
  }
  ep.finish(std::move(cur_bytes), evaded);
  return ep.result;
}

AttackResult attack_gamma(const pe::PEFile& pe, const model::ScoreModel& clf,
                          const manip::DonorPool& pool, const AttackConfig& cfg) {
  cfg.check();
  if (pool.blocks.empty()) raise(Errc::empty_pool, "genetic attack needs donor blocks");
  Episode ep(pe, clf, cfg);
  Rng rng = ep.rng();
  const double dir = direction(cfg.mode);
  const std::size_t genes = std::min<std::size_t>(static_cast<std::size_t>(cfg.sections_max), pool.blocks.size());
  const double file_size = static_cast<double>(ep.original.size());

  {
    const double s0 = ep.score(ep.original);
    ep.result.score_trace.push_back(s0);
    if (at_target(clf, s0, cfg.mode)) {
      ep.finish(pe::Bytes(ep.original), true);
      return ep.result;
    }
  }

  using Genome = std::vector<double>;
  struct Evaluated {
    Genome genome;
    double fitness = 0.0;
    double score = 0.0;
    bool on_target = false;
    pe::Bytes bytes;
    std::uint64_t injected = 0;
  };

  auto materialize = [&](const Genome& g) -> std::pair<pe::Bytes, std::uint64_t> {
    pe::PEFile f = pe;
    std::uint64_t injected = 0;
    for (std::size_t i = 0; i < genes; ++i) {
      const auto& block = pool.blocks[i].content;
      const std::size_t len = static_cast<std::size_t>(std::floor(g[i] * static_cast<double>(block.size())));
      if (len == 0) continue;
      pe::Bytes content(block.begin(), block.begin() + static_cast<std::ptrdiff_t>(len));
      manip::Action a;
      if (cfg.gamma_as_sections) {
        char name[16];
        std::snprintf(name, sizeof(name), ".g%05zu", i);
        a.kind = manip::ActionKind::add_section;
        a.payload = manip::AddSectionPayload{name, std::move(content), manip::kDefaultSectionCharacteristics};
      } else {
        a.kind = manip::ActionKind::append_overlay;
        a.payload = manip::AppendOverlayPayload{std::move(content)};
      }
      f = manip::apply(a, f);
      injected += len;
    }
    return {pe::serialize(f), injected};
  };

  auto evaluate = [&](Genome g) -> Evaluated {
    Evaluated e;
    e.genome = std::move(g);
    auto [bytes, injected] = materialize(e.genome);
    e.injected = injected;
    e.score = ep.score(bytes);
    e.bytes = std::move(bytes);
    // score toward the target lowers the fitness; injected bytes raise it
    e.fitness = -dir * e.score + cfg.gamma_lambda * static_cast<double>(injected) / file_size;
    e.on_target = at_target(clf, e.score, cfg.mode);
    return e;
  };

  const std::size_t pop_size = static_cast<std::size_t>(cfg.population);
  std::vector<Evaluated> pop;
  pop.reserve(pop_size);
  pop.push_back(evaluate(Genome(genes, 0.0)));  // identity individual
  for (std::size_t i = 1; i < pop_size; ++i) {
    Genome g(genes);
    for (double& v : g) v = rng.next_double();
    pop.push_back(evaluate(std::move(g)));
  }

  auto best_of = [](const std::vector<Evaluated>& v) {
    std::size_t b = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if (v[i].fitness < v[b].fitness) b = i;
    return b;
  };
  auto on_target_best = [](const std::vector<Evaluated>& v) -> const Evaluated* {
    const Evaluated* best = nullptr;
    for (const Evaluated& e : v)
      if (e.on_target && (!best || e.fitness < best->fitness)) best = &e;
    return best;
  };

  Evaluated champion = pop[best_of(pop)];
  ep.result.fitness_trace.push_back(champion.fitness);
  ep.result.score_trace.push_back(champion.score);

  auto finish_with = [&](const Evaluated& e, bool evaded) {
    ep.result.applied_actions.clear();
    for (std::size_t i = 0; i < genes; ++i) {
      const std::size_t len =
          static_cast<std::size_t>(std::floor(e.genome[i] * static_cast<double>(pool.blocks[i].content.size())));
      if (len == 0) continue;
      ActionRecord r;
      r.kind = cfg.gamma_as_sections ? "add_section" : "append_overlay";
      r.detail = "donor_block=" + std::to_string(i) + " bytes=" + std::to_string(len);
      r.bytes = len;
      ep.result.applied_actions.push_back(std::move(r));
    }
    ep.finish(pe::Bytes(e.bytes), evaded);
  };

  if (const Evaluated* hit = on_target_best(pop)) {
    finish_with(*hit, true);
    return ep.result;
  }

  for (int gen = 1; gen < cfg.n_max; ++gen) {
    auto tournament = [&]() -> const Evaluated& {
      std::size_t best = rng.index(pop_size);
      for (int t = 1; t < 3; ++t) {
        const std::size_t c = rng.index(pop_size);
        if (pop[c].fitness < pop[best].fitness) best = c;
      }
      return pop[best];
    };

    std::vector<Evaluated> next;
    next.reserve(pop_size);
    next.push_back(pop[best_of(pop)]);  // elitism 1
    while (next.size() < pop_size) {
      const Evaluated& pa = tournament();
      const Evaluated& pb = tournament();
      Genome child(genes);
      for (std::size_t i = 0; i < genes; ++i)
        child[i] = rng.next_double() < 0.5 ? pa.genome[i] : pb.genome[i];
      for (double& v : child) v = std::clamp(v + rng.normal(0.0, 0.1), 0.0, 1.0);
      next.push_back(evaluate(std::move(child)));
    }
    pop = std::move(next);

    const Evaluated& gen_best = pop[best_of(pop)];
    if (gen_best.fitness < champion.fitness) champion = gen_best;
    ep.result.fitness_trace.push_back(champion.fitness);
    ep.result.score_trace.push_back(gen_best.score);

    if (const Evaluated* hit = on_target_best(pop)) {
      finish_with(*hit, true);
      return ep.result;
    }
  }
  finish_with(champion, false);
  return ep.result;
}

AttackResult attack_fgsm(const pe::PEFile& pe, const model::ByteEmbedModel& clf,
                         const AttackConfig& cfg) {
  cfg.check();
  Episode ep(pe, clf, cfg);
  Rng rng = ep.rng();

  pe::Bytes bytes = ep.original;
  {
    const double s0 = ep.score(bytes);
    ep.result.score_trace.push_back(s0);
    if (at_target(clf, s0, cfg.mode)) {
      ep.finish(std::move(bytes), true);
      return ep.result;
    }
  }

  // Payload: random bytes across slack regions first, remaining budget
  // appended to the overlay.
  std::vector<std::uint64_t> positions;
  std::size_t budget = cfg.payload_budget;
  for (const pe::SlackRegion& r : pe::slack_regions(pe)) {
    if (budget == 0) break;
    const std::uint64_t take = std::min<std::uint64_t>(r.length, budget);
    for (std::uint64_t i = 0; i < take; ++i) positions.push_back(r.file_offset + i);
    budget -= static_cast<std::size_t>(take);
  }
  if (budget > 0) {
    const std::uint64_t start = bytes.size();
    for (std::size_t i = 0; i < budget; ++i) positions.push_back(start + i);
    bytes.resize(bytes.size() + budget);
  }
  if (positions.empty()) raise(Errc::no_payload_space, "no slack and zero payload budget");
  for (std::uint64_t p : positions) bytes[static_cast<std::size_t>(p)] = rng.next_byte();

  ActionRecord rec;
  rec.kind = "fgsm_payload";
  rec.detail = "positions=" + std::to_string(positions.size());
  rec.bytes = positions.size();
  ep.result.applied_actions.push_back(std::move(rec));

  embedding_descent(ep, clf, bytes, positions);
  return ep.result;
}

AttackResult attack_dos(const pe::PEFile& pe, const model::ScoreModel& clf, const AttackConfig& cfg,
                        pe::DosVariant variant) {
  cfg.check();
  Episode ep(pe, clf, cfg);
  Rng rng = ep.rng();

  {
    const double s0 = ep.score(ep.original);
    ep.result.score_trace.push_back(s0);
    if (at_target(clf, s0, cfg.mode)) {
      ep.finish(pe::Bytes(ep.original), true);
      return ep.result;
    }
  }

  const pe::PEFile* base = &pe;
  pe::PEFile grown;
  if (variant == pe::DosVariant::extend) {
    grown = pe::grow_dos_gap(pe, cfg.dos_extend_k);
    base = &grown;
  }
  const auto ranges = pe::dos_region(*base, variant);
  const auto positions = flatten_ranges(ranges);
  if (positions.empty()) raise(Errc::no_editable_bytes, "empty DOS region set");

  pe::Bytes bytes = pe::serialize(*base);
  {
    ActionRecord rec;
    rec.kind = std::string("dos_") + (variant == pe::DosVariant::partial   ? "partial"
                                      : variant == pe::DosVariant::full    ? "full"
                                                                           : "extend");
    rec.detail = "editable=" + std::to_string(positions.size());
    rec.bytes = positions.size();
    ep.result.applied_actions.push_back(std::move(rec));
  }

  if (const auto* bm = dynamic_cast<const model::ByteEmbedModel*>(&clf)) {
    embedding_descent(ep, *bm, bytes, positions);
    return ep.result;
  }

  // Black-box fallback: random coordinate mutation, accepted only when the
  // score strictly moves toward the target.
  const double dir = direction(cfg.mode);
  double s_cur = ep.score(bytes);
  ep.result.score_trace.push_back(s_cur);
  bool evaded = at_target(clf, s_cur, cfg.mode);
  for (int iter = 0; !evaded && iter < cfg.n_max; ++iter) {
    const std::uint64_t pos = positions[rng.index(positions.size())];
    const std::uint8_t old = bytes[static_cast<std::size_t>(pos)];
    const std::uint8_t val = rng.next_byte();
    if (val == old) continue;
    bytes[static_cast<std::size_t>(pos)] = val;
    const double s_new = ep.score(bytes);
    if (dir * (s_new - s_cur) > 0.0) {
      s_cur = s_new;
      ep.result.score_trace.push_back(s_new);
      evaded = at_target(clf, s_cur, cfg.mode);
    } else {
      bytes[static_cast<std::size_t>(pos)] = old;  // revert
    }
  }
  ep.finish(std::move(bytes), evaded);
  return ep.result;
}

AttackResult run_episode(const pe::PEFile& pe, const model::ScoreModel& clf,
                         const manip::DonorPool* pool, Strategy strategy, const AttackConfig& cfg) {
  switch (strategy) {
    case Strategy::random:
      if (!pool) raise(Errc::empty_pool, "random strategy needs a donor pool");
      return attack_random(pe, clf, *pool, cfg);
    case Strategy::mab:
      if (!pool) raise(Errc::empty_pool, "mab strategy needs a donor pool");
      return attack_mab(pe, clf, *pool, cfg);
    case Strategy::gamma:
      if (!pool) raise(Errc::empty_pool, "gamma strategy needs a donor pool");
      return attack_gamma(pe, clf, *pool, cfg);
    case Strategy::fgsm: {
      const auto* bm = dynamic_cast<const model::ByteEmbedModel*>(&clf);
      if (!bm)
        raise(Errc::config_error,
              "fgsm requires a differentiable (byte_embed) classifier; use dos-* for a black-box fallback");
      return attack_fgsm(pe, *bm, cfg);
    }
    case Strategy::dos_partial: return attack_dos(pe, clf, cfg, pe::DosVariant::partial);
    case Strategy::dos_full: return attack_dos(pe, clf, cfg, pe::DosVariant::full);
    case Strategy::dos_extend: return attack_dos(pe, clf, cfg, pe::DosVariant::extend);
  }
  throw std::logic_error("unhandled strategy");
}

CampaignOutcome run_campaign(const std::vector<pe::Bytes>& inputs, const model::ScoreModel& clf,
                             const manip::DonorPool* pool, Strategy strategy,
                             const AttackConfig& cfg, unsigned workers) {
  std::vector<AttackResult> results(inputs.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, std::max<std::size_t>(inputs.size(), 1));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= inputs.size()) return;
      try {
        const pe::PEFile f = pe::parse(inputs[i]);
        results[i] = run_episode(f, clf, pool, strategy, cfg);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  CampaignOutcome out;
  out.stats.inputs = inputs.size();
  for (AttackResult& r : results) {
    out.stats.total_queries += r.queries;
    if (r.perturbation_bytes == 0) {
      ++out.stats.discarded_unmodified;
      if (!r.score_trace.empty() && r.evaded) ++out.stats.pre_misclassified;
      out.discarded.push_back(std::move(r));
    } else {
      if (r.evaded) ++out.stats.evaded;
      out.retained.push_back(std::move(r));
    }
  }
  out.stats.retained = out.retained.size();
  out.stats.evasion_rate =
      out.retained.empty() ? 0.0
                           : static_cast<double>(out.stats.evaded) / static_cast<double>(out.stats.retained);
  return out;
}

double evasion_rate(const std::vector<AttackResult>& results) {
  std::vector<std::uint8_t> flags;
  flags.reserve(results.size());
  for (const AttackResult& r : results) flags.push_back(r.evaded ? 1 : 0);
  return metrics::evasion_rate(flags);
}

std::string campaign_records_jsonl(const CampaignOutcome& outcome, Strategy strategy,
                                   AttackMode mode) {
  std::string out;
  auto emit = [&](const AttackResult& r, bool retained) {
    nlohmann::ordered_json j;
    j["digest"] = r.original_digest;
    j["strategy"] = strategy_name(strategy);
    j["mode"] = mode_name(mode);
    j["retained"] = retained;
    j["evaded"] = r.evaded;
    j["queries"] = r.queries;
    j["perturbation_bytes"] = r.perturbation_bytes;
    nlohmann::ordered_json actions = nlohmann::ordered_json::array();
    for (const ActionRecord& a : r.applied_actions) {
      nlohmann::ordered_json ja;
      ja["kind"] = a.kind;
      ja["detail"] = a.detail;
      ja["bytes"] = a.bytes;
      actions.push_back(std::move(ja));
    }
    j["actions"] = std::move(actions);
    out += j.dump();
    out += '\n';
  };
  for (const AttackResult& r : outcome.retained) emit(r, true);
  for (const AttackResult& r : outcome.discarded) emit(r, false);
  return out;
}

std::string campaign_summary_csv(const CampaignStats& stats, Strategy strategy, AttackMode mode) {
  std::string out = "strategy,mode,inputs,discarded_unmodified,retained,evaded,evasion_rate_pct\n";
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%zu,%zu,%zu,%zu,%s\n", strategy_name(strategy), mode_name(mode),
                stats.inputs, stats.discarded_unmodified, stats.retained, stats.evaded,
                metrics::percent(stats.evasion_rate).c_str());
  out += buf;
  return out;
}

}  // namespace peadv::attack
