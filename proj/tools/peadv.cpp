// peadv: operator entry point for corpus management, victim training,
// evasion campaigns, poisoning sweeps and report rendering.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"

#include "peadv/attacks.hpp"
#include "peadv/classifiers.hpp"
#include "peadv/corpus.hpp"
#include "peadv/features.hpp"
#include "peadv/manipulation.hpp"
#include "peadv/metrics.hpp"
#include "peadv/poisoning.hpp"
#include "peadv/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace peadv;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

// ---------------------------------------------------------------------------
// Config handling: a single JSON document with one section per subcommand.
// Unknown keys anywhere are rejected so typos cannot silently change runs.

const std::map<std::string, std::vector<std::string>> kKnownKeys = {
    {"", {"seed", "out_dir", "workers", "corpus", "train", "attack", "poison"}},
    {"corpus", {"class", "count", "profile", "out", "store"}},
    {"train",
     {"benign", "malware", "kind", "rounds", "learning_rate", "target_fpr", "val_fraction"}},
    {"attack",
     {"model", "mode", "strategy", "inputs", "donors", "donor_class", "n_max", "epsilon",
      "gamma_lambda", "population", "sections_max", "payload_budget", "dos_extend_k", "samples"}},
    {"poison",
     {"total_size", "crs", "seeds", "scenarios", "strategy", "rounds", "learning_rate", "n_max",
      "test_per_class", "ae_inputs_per_class"}},
};

void check_known_keys(const ordered_json& j, const std::string& section) {
  const auto it = kKnownKeys.find(section);
  if (it == kKnownKeys.end() || !j.is_object()) return;
  for (const auto& [key, value] : j.items()) {
    if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
      raise(Errc::config_error, "unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
    if (value.is_object()) check_known_keys(value, key);
  }
}

ordered_json load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) raise(Errc::io_error, "cannot read config " + path.string());
  ordered_json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    raise(Errc::config_error, std::string("config parse failure: ") + e.what());
  }
  check_known_keys(j, "");
  return j;
}

// Fills a value from the config unless the command line already set it.
template <typename T>
void config_fill(const CLI::Option* opt, const ordered_json& cfg, const std::string& section,
                 const std::string& key, T& value) {
  if (opt && opt->count() > 0) return;
  if (!cfg.contains(section) || !cfg[section].contains(key)) return;
  value = cfg[section][key].get<T>();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  out << text;
}

pe::Bytes read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read " + path.string());
  return pe::Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, pe::ByteView bytes) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_error, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::string timestamp_tag() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d%02d%02dT%02d%02d%02dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

fs::path resolve_out_dir(std::string out, const std::string& tag) {
  if (out.empty()) out = (fs::path("runs") / (timestamp_tag() + "-" + tag)).string();
  fs::create_directories(out);
  return out;
}

std::vector<fs::path> list_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) raise(Errc::io_error, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file()) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

corpus::CorpusProfile profile_for(const std::string& name, Label cls) {
  if (name == "default")
    return cls == Label::benign ? corpus::default_benign_profile() : corpus::default_malware_profile();
  if (name == "pure")
    return cls == Label::benign ? corpus::pure_benign_profile() : corpus::pure_malware_profile();
  raise(Errc::config_error, "unknown profile '" + name + "' (default|pure)");
}

struct LoadedDir {
  std::vector<pe::Bytes> files;
  std::vector<std::string> digests;
};

LoadedDir load_parseable_dir(const fs::path& dir) {
  LoadedDir out;
  for (const fs::path& p : list_files(dir)) {
    pe::Bytes b = read_file(p);
    try {
      pe::parse(b);
    } catch (const Error&) {
      std::cerr << "skip unparseable " << p << "\n";
      continue;
    }
    out.digests.push_back(sha256_hex(b));
    out.files.push_back(std::move(b));
  }
  return out;
}

manip::DonorPool pool_from_dir(const fs::path& dir, Label cls) {
  std::vector<pe::PEFile> parsed;
  for (const fs::path& p : list_files(dir)) {
    try {
      parsed.push_back(pe::parse(read_file(p)));
    } catch (const Error&) {
      continue;
    }
  }
  return manip::harvest_sections(parsed, cls);
}

// ---------------------------------------------------------------------------
// corpus synth / ingest

int cmd_corpus_synth(const std::string& cls_name, std::size_t count, std::uint64_t seed,
                     const std::string& profile_name, std::string out, std::string store) {
  const Label cls = label_from_string(cls_name);
  const fs::path out_dir = resolve_out_dir(out, "corpus");
  const corpus::CorpusProfile profile = profile_for(profile_name, cls);

  corpus::LabeledCorpus labeled;
  if (!store.empty() && fs::exists(store)) labeled = corpus::load_label_store(store);

  for (std::size_t i = 0; i < count; ++i) {
    const pe::Bytes bytes = corpus::synthesize_pe(profile, seed + i);
    char name[64];
    std::snprintf(name, sizeof(name), "%s_%06zu.exe", label_name(cls), i);
    const fs::path path = out_dir / name;
    write_file(path, bytes);
    corpus::CorpusEntry entry;
    entry.digest = sha256_hex(bytes);
    entry.path = path;
    entry.label = cls;
    entry.origin = corpus::CorpusEntry::Origin::synthetic;
    labeled.add(std::move(entry));
  }
  const fs::path store_path = store.empty() ? out_dir / "labels.tsv" : fs::path(store);
  corpus::save_label_store(labeled, store_path);
  std::cout << "synthesized " << count << " " << cls_name << " files under " << out_dir
            << "\nlabel store: " << store_path << "\n";
  return kExitOk;
}

int cmd_corpus_ingest(const std::string& cls_name, const std::string& dir, std::string store) {
  const Label cls = label_from_string(cls_name);
  corpus::LabeledCorpus labeled;
  if (!store.empty() && fs::exists(store)) labeled = corpus::load_label_store(store);
  const auto report = corpus::ingest(labeled, dir, cls);
  const fs::path store_path = store.empty() ? fs::path(dir) / "labels.tsv" : fs::path(store);
  corpus::save_label_store(labeled, store_path);
  std::cout << "ingested " << report.added << " files (" << report.duplicates << " duplicates, "
            << report.skipped.size() << " skipped)\n";
  for (const auto& [p, why] : report.skipped) std::cout << "  skipped " << p << ": " << why << "\n";
  std::cout << "label store: " << store_path << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const std::string& benign_dir, const std::string& malware_dir, const std::string& kind,
              int rounds, double learning_rate, std::uint64_t seed, double target_fpr,
              double val_fraction, std::string out, const ordered_json& resolved) {
  const fs::path out_dir = resolve_out_dir(out, "train");
  const LoadedDir benign = load_parseable_dir(benign_dir);
  const LoadedDir malware = load_parseable_dir(malware_dir);
  if (benign.files.empty() || malware.files.empty())
    raise(Errc::degenerate_dataset, "need parseable files of both classes");

  std::vector<pe::Bytes> all;
  std::vector<int> labels;
  for (const auto& b : benign.files) {
    all.push_back(b);
    labels.push_back(0);
  }
  for (const auto& b : malware.files) {
    all.push_back(b);
    labels.push_back(1);
  }

  // Deterministic tail split per class for validation.
  std::vector<std::size_t> train_idx, val_idx;
  const std::size_t benign_val = static_cast<std::size_t>(static_cast<double>(benign.files.size()) * val_fraction);
  const std::size_t malware_val = static_cast<std::size_t>(static_cast<double>(malware.files.size()) * val_fraction);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const bool is_benign = i < benign.files.size();
    const std::size_t class_pos = is_benign ? i : i - benign.files.size();
    const std::size_t class_n = is_benign ? benign.files.size() : malware.files.size();
    const std::size_t val_n = is_benign ? benign_val : malware_val;
    (class_pos >= class_n - val_n ? val_idx : train_idx).push_back(i);
  }

  std::unique_ptr<model::ScoreModel> trained;
  model::TrainParams params{rounds, learning_rate, seed};
  if (kind == "byte-embed") {
    std::vector<pe::Bytes> x;
    std::vector<int> y;
    for (std::size_t i : train_idx) {
      x.push_back(all[i]);
      y.push_back(labels[i]);
    }
    trained = std::make_unique<model::ByteEmbedModel>(model::train_byte_embed(x, y, params));
  } else {
    std::vector<std::vector<double>> x;
    std::vector<int> y;
    for (std::size_t i : train_idx) {
      const feat::FeatureVector fv = feat::extract(all[i]);
      x.emplace_back(fv.values.begin(), fv.values.end());
      y.push_back(labels[i]);
    }
    if (kind == "stumps")
      trained = std::make_unique<model::BoostedStumps>(model::train_stumps(x, y, params));
    else if (kind == "logistic")
      trained = std::make_unique<model::LogisticModel>(model::train_logistic(x, y, params));
    else
      raise(Errc::config_error, "unknown model kind '" + kind + "' (stumps|logistic|byte-embed)");
  }

  // Calibrate on the validation split and report its ROC.
  std::vector<double> val_scores;
  std::vector<int> val_labels;
  std::vector<double> benign_scores;
  for (std::size_t i : val_idx) {
    const double s = trained->score(all[i]);
    val_scores.push_back(s);
    val_labels.push_back(labels[i]);
    if (labels[i] == 0) benign_scores.push_back(s);
  }
  const model::Calibration cal = model::calibrate_from_scores(benign_scores, target_fpr);
  trained->threshold = cal.threshold;
  const auto roc = metrics::roc(val_scores, val_labels);
  const double auc = metrics::auc(roc);

  model::save_model(*trained, out_dir / "model.bin");
  write_text(out_dir / "roc.csv", metrics::roc_csv(roc));
  {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "kind\t%s\nthreshold\t%.17g\ntarget_fpr\t%.6f\nachieved_fpr\t%.6f\nachievable\t%d\nval_auc\t%.6f\n",
                  trained->kind().c_str(), cal.threshold, target_fpr, cal.achieved_fpr,
                  cal.achievable ? 1 : 0, auc);
    write_text(out_dir / "threshold.txt", buf);
  }
  write_text(out_dir / "config.resolved.json", resolved.dump(2) + "\n");
  std::cout << "trained " << trained->kind() << " on " << train_idx.size() << " samples; val AUC "
            << metrics::percent(auc) << "%, threshold " << cal.threshold << " (fpr "
            << metrics::percent(cal.achieved_fpr) << "%"
            << (cal.achievable ? "" : ", target unachievable: too few benign samples") << ")\n"
            << "artifacts under " << out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// attack

int cmd_attack(const std::string& model_path, const std::string& mode_name,
               const std::string& strategy_name_, const std::string& inputs_dir,
               const std::string& donors_dir, const std::string& donor_class, attack::AttackConfig cfg,
               std::size_t samples, unsigned workers, std::string out, const ordered_json& resolved) {
  const fs::path out_dir = resolve_out_dir(out, "attack");
  const auto clf = model::load_model(model_path);
  cfg.mode = attack::mode_from_string(mode_name);
  const attack::Strategy strategy = attack::strategy_from_string(strategy_name_);

  LoadedDir inputs = load_parseable_dir(inputs_dir);
  if (samples > 0 && samples < inputs.files.size()) {
    inputs.files.resize(samples);
    inputs.digests.resize(samples);
  }
  if (inputs.files.empty()) raise(Errc::io_error, "no parseable inputs in " + inputs_dir);

  std::optional<manip::DonorPool> pool;
  const bool needs_pool = strategy == attack::Strategy::random || strategy == attack::Strategy::mab ||
                          strategy == attack::Strategy::gamma;
  if (needs_pool) {
    if (donors_dir.empty()) raise(Errc::config_error, "strategy requires --donors");
    const Label cls = donor_class.empty() ? opposite(attack::source_label(cfg.mode))
                                          : label_from_string(donor_class);
    pool = pool_from_dir(donors_dir, cls);
  }

  const auto outcome = attack::run_campaign(inputs.files, *clf, pool ? &*pool : nullptr, strategy,
                                            cfg, workers);

  write_text(out_dir / "records.jsonl", attack::campaign_records_jsonl(outcome, strategy, cfg.mode));
  write_text(out_dir / "summary.csv", attack::campaign_summary_csv(outcome.stats, strategy, cfg.mode));
  // Adversarial binaries, named by original digest.
  for (const attack::AttackResult& r : outcome.retained)
    write_file(out_dir / "adv" / (r.original_digest.substr(0, 16) + ".adv"), r.adversarial_bytes);
  write_text(out_dir / "config.resolved.json", resolved.dump(2) + "\n");

  std::cout << attack::campaign_summary_csv(outcome.stats, strategy, cfg.mode) << "artifacts under "
            << out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// poison: hermetic pipeline over synthetic corpora

poison::PoisonSample featurize_sample(const pe::Bytes& bytes, Label label, bool adversarial) {
  poison::PoisonSample s;
  s.features = feat::extract(bytes);
  s.label = label;
  s.digest = sha256_hex(bytes);
  s.adversarial = adversarial;
  return s;
}

int cmd_poison(std::size_t total_size, std::vector<double> crs, std::vector<std::uint64_t> seeds,
               std::vector<std::string> scenario_names, const std::string& strategy_name_,
               int rounds, double learning_rate, int n_max, std::size_t test_per_class,
               std::size_t ae_inputs_per_class, std::uint64_t seed, unsigned workers,
               std::string out, const ordered_json& resolved) {
  const fs::path out_dir = resolve_out_dir(out, "poison");
  const attack::Strategy strategy = attack::strategy_from_string(strategy_name_);
  const std::size_t class_size = total_size / 2;
  if (ae_inputs_per_class == 0) ae_inputs_per_class = class_size + class_size / 10;

  const auto bp = corpus::default_benign_profile();
  const auto mp = corpus::default_malware_profile();

  // Seed blocks keep the train / test / attack-input populations digest-disjoint.
  const std::uint64_t kTrain = seed * 1000003ull;
  const std::uint64_t kTest = kTrain + 1000000;
  const std::uint64_t kAttack = kTest + 1000000;

  poison::PoisonDataset clean, test_set;
  std::vector<pe::Bytes> benign_train_bytes, malware_train_bytes;
  for (std::size_t i = 0; i < class_size; ++i) {
    benign_train_bytes.push_back(corpus::synthesize_pe(bp, kTrain + i));
    malware_train_bytes.push_back(corpus::synthesize_pe(mp, kTrain + 500000 + i));
    clean.push_back(featurize_sample(benign_train_bytes.back(), Label::benign, false));
    clean.push_back(featurize_sample(malware_train_bytes.back(), Label::malware, false));
  }
  for (std::size_t i = 0; i < test_per_class; ++i) {
    test_set.push_back(featurize_sample(corpus::synthesize_pe(bp, kTest + i), Label::benign, false));
    test_set.push_back(featurize_sample(corpus::synthesize_pe(mp, kTest + 500000 + i), Label::malware, false));
  }

  // Generation victim: stumps trained on the clean set, 1% FPR operating point.
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (const auto& s : clean) {
    x.emplace_back(s.features.values.begin(), s.features.values.end());
    y.push_back(s.label == Label::malware ? 1 : 0);
  }
  model::BoostedStumps victim = model::train_stumps(x, y, {rounds, learning_rate, seed});
  {
    std::vector<double> benign_scores;
    for (const auto& s : test_set) {
      if (s.label == Label::benign)
        benign_scores.push_back(victim.score_values(
            std::span<const double>(s.features.values.data(), feat::kFeatureDim)));
    }
    victim.threshold = model::calibrate_from_scores(benign_scores, 0.01).threshold;
  }

  // Donor pools from the opposite class of the clean corpus.
  std::vector<pe::PEFile> benign_parsed, malware_parsed;
  for (std::size_t i = 0; i < std::min<std::size_t>(class_size, 50); ++i) {
    benign_parsed.push_back(pe::parse(benign_train_bytes[i]));
    malware_parsed.push_back(pe::parse(malware_train_bytes[i]));
  }
  const manip::DonorPool benign_pool = manip::harvest_sections(benign_parsed, Label::benign);
  const manip::DonorPool malware_pool = manip::harvest_sections(malware_parsed, Label::malware);

  // AE pools via evasion campaigns on fresh inputs.
  attack::AttackConfig acfg;
  acfg.n_max = n_max;
  acfg.seed = seed;
  std::vector<pe::Bytes> benign_inputs, malware_inputs;
  for (std::size_t i = 0; i < ae_inputs_per_class; ++i) {
    benign_inputs.push_back(corpus::synthesize_pe(bp, kAttack + i));
    malware_inputs.push_back(corpus::synthesize_pe(mp, kAttack + 500000 + i));
  }
  acfg.mode = attack::AttackMode::benign_to_malware;
  const auto benign_campaign =
      attack::run_campaign(benign_inputs, victim, &malware_pool, strategy, acfg, workers);
  acfg.mode = attack::AttackMode::malware_to_benign;
  const auto malware_campaign =
      attack::run_campaign(malware_inputs, victim, &benign_pool, strategy, acfg, workers);

  poison::PoisonDataset benign_aes, malware_aes;
  for (const auto& r : benign_campaign.retained)
    benign_aes.push_back(featurize_sample(r.adversarial_bytes, Label::benign, true));
  for (const auto& r : malware_campaign.retained)
    malware_aes.push_back(featurize_sample(r.adversarial_bytes, Label::malware, true));

  poison::SweepParams params;
  params.scenarios.clear();
  for (const auto& n : scenario_names) params.scenarios.push_back(poison::scenario_from_string(n));
  params.crs = std::move(crs);
  params.seeds = std::move(seeds);
  params.total_size = total_size;
  params.trainer = {rounds, learning_rate, 0};
  params.workers = workers;

  const poison::SweepReport report =
      poison::run_sweep(clean, benign_aes, malware_aes, test_set, params);

  write_text(out_dir / "sweep.csv", poison::sweep_csv(report));
  for (const auto& cell : report.cells) {
    if (!cell.failed)
      write_text(out_dir / "roc" / ("roc_" + poison::cell_file_tag(cell) + ".csv"),
                 poison::cell_roc_csv(cell));
  }
  write_text(out_dir / "ae_stats.csv",
             attack::campaign_summary_csv(benign_campaign.stats, strategy, attack::AttackMode::benign_to_malware) +
                 attack::campaign_summary_csv(malware_campaign.stats, strategy, attack::AttackMode::malware_to_benign));
  write_text(out_dir / "config.resolved.json", resolved.dump(2) + "\n");

  std::cout << "sweep cells: " << report.cells.size() << " (benign AEs " << benign_aes.size()
            << ", malware AEs " << malware_aes.size() << ")\nartifacts under " << out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// report

int cmd_report(const std::string& campaign_path, const std::string& sweep_path) {
  if (!campaign_path.empty()) {
    std::ifstream in(campaign_path);
    if (!in) raise(Errc::io_error, "cannot read " + campaign_path);
    struct Key {
      std::string strategy, mode;
      bool operator<(const Key& o) const {
        return strategy < o.strategy || (strategy == o.strategy && mode < o.mode);
      }
    };
    struct Agg {
      std::size_t retained = 0, evaded = 0, discarded = 0;
    };
    std::map<Key, Agg> agg;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const ordered_json j = ordered_json::parse(line);
      Agg& a = agg[{j["strategy"], j["mode"]}];
      if (j["retained"].get<bool>()) {
        ++a.retained;
        if (j["evaded"].get<bool>()) ++a.evaded;
      } else {
        ++a.discarded;
      }
    }
    std::printf("%-12s %-20s %9s %9s %9s %8s\n", "strategy", "mode", "retained", "evaded",
                "discarded", "ER[%]");
    for (const auto& [k, a] : agg) {
      const double er = a.retained ? static_cast<double>(a.evaded) / static_cast<double>(a.retained) : 0.0;
      std::printf("%-12s %-20s %9zu %9zu %9zu %8s\n", k.strategy.c_str(), k.mode.c_str(), a.retained,
                  a.evaded, a.discarded, metrics::percent(er).c_str());
    }
  }
  if (!sweep_path.empty()) {
    std::ifstream in(sweep_path);
    if (!in) raise(Errc::io_error, "cannot read " + sweep_path);
    std::string line;
    std::getline(in, line);  // header
    // (scenario, cr, fpr_level) -> mean DR over seeds
    std::map<std::string, std::map<double, std::map<int, std::pair<double, int>>>> agg;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cols;
      std::size_t start = 0;
      for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
          cols.push_back(line.substr(start, i - start));
          start = i + 1;
        }
      }
      if (cols.size() != 6 || cols[3] == "failed") continue;
      auto& cell = agg[cols[0]][std::stod(cols[1])][std::stoi(cols[3])];
      cell.first += std::stod(cols[4]);
      cell.second += 1;
    }
    std::printf("%-10s %-8s %-6s %10s\n", "scenario", "cr", "fpr[%]", "meanDR[%]");
    for (const auto& [scenario, by_cr] : agg)
      for (const auto& [cr, by_level] : by_cr)
        for (const auto& [level, sum_n] : by_level)
          std::printf("%-10s %-8.2f %-6d %10s\n", scenario.c_str(), cr, level,
                      metrics::percent(sum_n.first / sum_n.second).c_str());
  }
  if (campaign_path.empty() && sweep_path.empty())
    raise(Errc::config_error, "report needs --campaign or --sweep");
  return kExitOk;
}

ordered_json resolve_config_echo(const ordered_json& base, std::initializer_list<std::pair<std::string, ordered_json>> pairs) {
  ordered_json j = base;
  for (const auto& [path, value] : pairs) {
    const std::size_t dot = path.find('.');
    if (dot == std::string::npos)
      j[path] = value;
    else
      j[path.substr(0, dot)][path.substr(dot + 1)] = value;
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial PE example generation and evaluation"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  unsigned workers = 0;
  std::string out;
  app.add_option("--config", config_path, "JSON config file; flags override its values");

  // corpus
  auto* corpus_cmd = app.add_subcommand("corpus", "synthesize or ingest labeled corpora");
  corpus_cmd->require_subcommand(1);
  std::string cls = "benign", profile = "default", store, ingest_dir;
  std::size_t count = 100;
  auto* synth_cmd = corpus_cmd->add_subcommand("synth", "generate synthetic PE files");
  auto* o_cls = synth_cmd->add_option("--class", cls, "benign|malware");
  auto* o_count = synth_cmd->add_option("--count", count, "files to generate");
  auto* o_seed_s = synth_cmd->add_option("--seed", seed, "base seed");
  auto* o_profile = synth_cmd->add_option("--profile", profile, "default|pure");
  auto* o_out_s = synth_cmd->add_option("--out", out, "output directory");
  auto* o_store_s = synth_cmd->add_option("--store", store, "label store path");
  auto* ingest_cmd = corpus_cmd->add_subcommand("ingest", "register existing files");
  ingest_cmd->add_option("--class", cls, "benign|malware");
  ingest_cmd->add_option("--store", store, "label store path");
  ingest_cmd->add_option("dir", ingest_dir, "directory to scan")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "train and calibrate a classifier");
  std::string benign_dir, malware_dir, kind = "stumps";
  int rounds = 200;
  double learning_rate = 0.3, target_fpr = 0.01, val_fraction = 0.2;
  auto* o_benign = train_cmd->add_option("--benign", benign_dir, "benign corpus directory");
  auto* o_malware = train_cmd->add_option("--malware", malware_dir, "malware corpus directory");
  auto* o_kind = train_cmd->add_option("--kind", kind, "stumps|logistic|byte-embed");
  auto* o_rounds = train_cmd->add_option("--rounds", rounds, "boosting rounds / epochs");
  auto* o_lr = train_cmd->add_option("--learning-rate", learning_rate, "");
  auto* o_tfpr = train_cmd->add_option("--target-fpr", target_fpr, "calibration FPR");
  auto* o_valf = train_cmd->add_option("--val-fraction", val_fraction, "validation split");
  auto* o_seed_t = train_cmd->add_option("--seed", seed, "");
  auto* o_out_t = train_cmd->add_option("--out", out, "output directory");

  // attack
  auto* attack_cmd = app.add_subcommand("attack", "run an evasion campaign");
  std::string model_path, mode = "malware-to-benign", strategy = "random", inputs_dir, donors_dir,
              donor_class;
  attack::AttackConfig acfg;
  std::size_t samples = 0;
  auto* o_model = attack_cmd->add_option("--model", model_path, "model container");
  auto* o_mode = attack_cmd->add_option("--mode", mode, "malware-to-benign|benign-to-malware");
  auto* o_strategy = attack_cmd->add_option("--strategy", strategy,
                                            "random|mab|gamma|fgsm|dos-partial|dos-full|dos-extend");
  auto* o_inputs = attack_cmd->add_option("--inputs", inputs_dir, "input corpus directory");
  auto* o_donors = attack_cmd->add_option("--donors", donors_dir, "donor corpus directory");
  auto* o_dclass = attack_cmd->add_option("--donor-class", donor_class, "override donor class");
  auto* o_nmax = attack_cmd->add_option("--n-max", acfg.n_max, "iteration budget");
  auto* o_eps = attack_cmd->add_option("--epsilon", acfg.epsilon, "gradient step");
  auto* o_lambda = attack_cmd->add_option("--gamma-lambda", acfg.gamma_lambda, "perturbation penalty");
  auto* o_pop = attack_cmd->add_option("--population", acfg.population, "genetic population");
  auto* o_smax = attack_cmd->add_option("--sections-max", acfg.sections_max, "donor blocks for gamma");
  auto* o_budget = attack_cmd->add_option("--payload-budget", acfg.payload_budget, "fgsm payload bytes");
  auto* o_extk = attack_cmd->add_option("--dos-extend-k", acfg.dos_extend_k, "extend gap bytes");
  auto* o_samples = attack_cmd->add_option("--samples", samples, "cap on inputs (0 = all)");
  auto* o_seed_a = attack_cmd->add_option("--seed", seed, "campaign seed");
  auto* o_workers_a = attack_cmd->add_option("--workers", workers, "parallel episodes (0 = cores)");
  auto* o_out_a = attack_cmd->add_option("--out", out, "output directory");

  // poison
  auto* poison_cmd = app.add_subcommand("poison", "contamination sweep over synthetic corpora");
  std::size_t total_size = 2000, test_per_class = 500, ae_inputs = 0;
  std::vector<double> crs{0.0, 0.1, 0.25, 0.5};
  std::vector<std::uint64_t> sweep_seeds{1, 2, 3, 4, 5};
  std::vector<std::string> scenarios{"benign", "malware", "mixture"};
  std::string pstrategy = "random";
  int prounds = 100, pn_max = 200;
  double plr = 0.3;
  auto* o_total = poison_cmd->add_option("--total-size", total_size, "training set size");
  auto* o_crs = poison_cmd->add_option("--crs", crs, "contamination rates");
  auto* o_pseeds = poison_cmd->add_option("--seeds", sweep_seeds, "grid seeds");
  auto* o_scen = poison_cmd->add_option("--scenarios", scenarios, "benign|malware|mixture");
  auto* o_pstrat = poison_cmd->add_option("--strategy", pstrategy, "AE generation strategy");
  auto* o_prounds = poison_cmd->add_option("--rounds", prounds, "victim boosting rounds");
  auto* o_plr = poison_cmd->add_option("--learning-rate", plr, "victim learning rate");
  auto* o_pnmax = poison_cmd->add_option("--n-max", pn_max, "attack iteration budget");
  auto* o_tpc = poison_cmd->add_option("--test-per-class", test_per_class, "");
  auto* o_aei = poison_cmd->add_option("--ae-inputs-per-class", ae_inputs, "0 = auto");
  auto* o_seed_p = poison_cmd->add_option("--seed", seed, "pipeline seed");
  auto* o_workers_p = poison_cmd->add_option("--workers", workers, "parallel cells (0 = cores)");
  auto* o_out_p = poison_cmd->add_option("--out", out, "output directory");

  // report
  auto* report_cmd = app.add_subcommand("report", "render campaign / sweep tables");
  std::string campaign_path, sweep_path;
  report_cmd->add_option("--campaign", campaign_path, "records.jsonl");
  report_cmd->add_option("--sweep", sweep_path, "sweep.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    ordered_json cfg = ordered_json::object();
    if (!config_path.empty()) cfg = load_config(config_path);

    // Globals from config when not set by flags.
    if (cfg.contains("seed")) {
      if (!(o_seed_s->count() || o_seed_t->count() || o_seed_a->count() || o_seed_p->count()))
        seed = cfg["seed"].get<std::uint64_t>();
    }
    if (cfg.contains("workers") && !(o_workers_a->count() || o_workers_p->count()))
      workers = cfg["workers"].get<unsigned>();
    if (cfg.contains("out_dir") &&
        !(o_out_s->count() || o_out_t->count() || o_out_a->count() || o_out_p->count()))
      out = cfg["out_dir"].get<std::string>();

    if (app.got_subcommand(corpus_cmd)) {
      config_fill(o_cls, cfg, "corpus", "class", cls);
      config_fill(o_count, cfg, "corpus", "count", count);
      config_fill(o_profile, cfg, "corpus", "profile", profile);
      config_fill(o_store_s, cfg, "corpus", "store", store);
      if (corpus_cmd->got_subcommand(synth_cmd))
        return cmd_corpus_synth(cls, count, seed, profile, out, store);
      return cmd_corpus_ingest(cls, ingest_dir, store);
    }
    if (app.got_subcommand(train_cmd)) {
      config_fill(o_benign, cfg, "train", "benign", benign_dir);
      config_fill(o_malware, cfg, "train", "malware", malware_dir);
      config_fill(o_kind, cfg, "train", "kind", kind);
      config_fill(o_rounds, cfg, "train", "rounds", rounds);
      config_fill(o_lr, cfg, "train", "learning_rate", learning_rate);
      config_fill(o_tfpr, cfg, "train", "target_fpr", target_fpr);
      config_fill(o_valf, cfg, "train", "val_fraction", val_fraction);
      if (benign_dir.empty() || malware_dir.empty())
        raise(Errc::config_error, "train needs --benign and --malware directories");
      const ordered_json resolved = resolve_config_echo(
          cfg, {{"seed", seed},
                {"train.benign", benign_dir},
                {"train.malware", malware_dir},
                {"train.kind", kind},
                {"train.rounds", rounds},
                {"train.learning_rate", learning_rate},
                {"train.target_fpr", target_fpr},
                {"train.val_fraction", val_fraction}});
      return cmd_train(benign_dir, malware_dir, kind, rounds, learning_rate, seed, target_fpr,
                       val_fraction, out, resolved);
    }
    if (app.got_subcommand(attack_cmd)) {
      config_fill(o_model, cfg, "attack", "model", model_path);
      config_fill(o_mode, cfg, "attack", "mode", mode);
      config_fill(o_strategy, cfg, "attack", "strategy", strategy);
      config_fill(o_inputs, cfg, "attack", "inputs", inputs_dir);
      config_fill(o_donors, cfg, "attack", "donors", donors_dir);
      config_fill(o_dclass, cfg, "attack", "donor_class", donor_class);
      config_fill(o_nmax, cfg, "attack", "n_max", acfg.n_max);
      config_fill(o_eps, cfg, "attack", "epsilon", acfg.epsilon);
      config_fill(o_lambda, cfg, "attack", "gamma_lambda", acfg.gamma_lambda);
      config_fill(o_pop, cfg, "attack", "population", acfg.population);
      config_fill(o_smax, cfg, "attack", "sections_max", acfg.sections_max);
      config_fill(o_budget, cfg, "attack", "payload_budget", acfg.payload_budget);
      config_fill(o_extk, cfg, "attack", "dos_extend_k", acfg.dos_extend_k);
      config_fill(o_samples, cfg, "attack", "samples", samples);
      if (model_path.empty() || inputs_dir.empty())
        raise(Errc::config_error, "attack needs --model and --inputs");
      acfg.seed = seed;
      const ordered_json resolved = resolve_config_echo(
          cfg, {{"seed", seed},
                {"attack.model", model_path},
                {"attack.mode", mode},
                {"attack.strategy", strategy},
                {"attack.inputs", inputs_dir},
                {"attack.donors", donors_dir},
                {"attack.n_max", acfg.n_max},
                {"attack.samples", samples}});
      return cmd_attack(model_path, mode, strategy, inputs_dir, donors_dir, donor_class, acfg,
                        samples, workers, out, resolved);
    }
    if (app.got_subcommand(poison_cmd)) {
      config_fill(o_total, cfg, "poison", "total_size", total_size);
      config_fill(o_crs, cfg, "poison", "crs", crs);
      config_fill(o_pseeds, cfg, "poison", "seeds", sweep_seeds);
      config_fill(o_scen, cfg, "poison", "scenarios", scenarios);
      config_fill(o_pstrat, cfg, "poison", "strategy", pstrategy);
      config_fill(o_prounds, cfg, "poison", "rounds", prounds);
      config_fill(o_plr, cfg, "poison", "learning_rate", plr);
      config_fill(o_pnmax, cfg, "poison", "n_max", pn_max);
      config_fill(o_tpc, cfg, "poison", "test_per_class", test_per_class);
      config_fill(o_aei, cfg, "poison", "ae_inputs_per_class", ae_inputs);
      ordered_json resolved = resolve_config_echo(
          cfg, {{"seed", seed},
                {"poison.total_size", total_size},
                {"poison.strategy", pstrategy},
                {"poison.rounds", prounds},
                {"poison.n_max", pn_max},
                {"poison.test_per_class", test_per_class}});
      resolved["poison"]["crs"] = crs;
      resolved["poison"]["seeds"] = sweep_seeds;
      resolved["poison"]["scenarios"] = scenarios;
      return cmd_poison(total_size, crs, sweep_seeds, scenarios, pstrategy, prounds, plr, pn_max,
                        test_per_class, ae_inputs, seed, workers, out, resolved);
    }
    if (app.got_subcommand(report_cmd)) return cmd_report(campaign_path, sweep_path);
    raise(Errc::config_error, "no subcommand");
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::config_error ? kExitUsage : kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
}
