#include "peadv/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "peadv/binio.hpp"
#include "peadv/rng.hpp"

namespace peadv::model {

namespace {

constexpr double kLeafRegularizer = 1.0;
constexpr double kLossSlack = 1e-12;
constexpr int kBackoffLimit = 40;

void check_two_classes(const std::vector<int>& y) {
  bool pos = false, neg = false;
  for (int v : y) (v ? pos : neg) = true;
  if (!pos || !neg) raise(Errc::degenerate_dataset, "training set must contain both classes");
}

double log_loss(const std::vector<double>& logits, const std::vector<int>& y) {
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = sigmoid(logits[i]);
    const double clamped = std::min(std::max(p, 1e-15), 1.0 - 1e-15);
    loss -= y[i] ? std::log(clamped) : std::log(1.0 - clamped);
  }
  loss /= static_cast<double>(y.size());
  if (!std::isfinite(loss)) raise(Errc::non_finite_loss, "training loss is not finite");
  return loss;
}

// Byte histogram restricted to the pooled window; shared by scoring,
// training and gradient queries so all paths agree on the window.
struct WindowCounts {
  std::array<std::uint64_t, 256> counts{};
  std::uint64_t total = 0;
};

WindowCounts window_counts(const ByteEmbedModel& m, pe::ByteView bytes) {
  WindowCounts wc;
  for (const pe::ByteRange& r : m.pooled_ranges(bytes)) {
    for (std::uint64_t i = r.begin; i < r.end; ++i) ++wc.counts[bytes[static_cast<std::size_t>(i)]];
    wc.total += r.length();
  }
  return wc;
}

}  // namespace

double LogisticModel::logit_values(std::span<const double> x) const {
  if (x.size() != weights.size()) throw std::invalid_argument("feature dimension mismatch");
  double z = bias;
  for (std::size_t i = 0; i < x.size(); ++i) z += weights[i] * x[i];
  return z;
}

double BoostedStumps::logit_values(std::span<const double> x) const {
  double z = base_logit;
  for (const StumpRound& r : rounds) {
    if (r.feature_index >= x.size()) throw std::invalid_argument("feature dimension mismatch");
    z += learning_rate * (x[r.feature_index] <= r.split_value ? r.left_leaf : r.right_leaf);
  }
  return z;
}

std::vector<pe::ByteRange> ByteEmbedModel::pooled_ranges(pe::ByteView bytes) const {
  if (bytes.empty()) return {};
  if (pooling.windows == PoolingConfig::Windows::whole_file) return {{0, bytes.size()}};
  pe::PEFile parsed;
  try {
    parsed = pe::parse(bytes);
  } catch (const Error&) {
    return {{0, bytes.size()}};
  }
  std::vector<pe::ByteRange> out = pe::dos_region(parsed, pe::DosVariant::extend);
  for (const pe::SlackRegion& r : pe::slack_regions(parsed))
    out.push_back({r.file_offset, r.file_offset + r.length});
  const pe::Layout l = pe::layout_of(parsed);
  if (!parsed.overlay.empty()) out.push_back({l.overlay_offset, l.total_size});
  std::sort(out.begin(), out.end(), [](const pe::ByteRange& a, const pe::ByteRange& b) { return a.begin < b.begin; });
  return out;
}

std::uint64_t ByteEmbedModel::pooled_count(pe::ByteView bytes) const {
  std::uint64_t n = 0;
  for (const pe::ByteRange& r : pooled_ranges(bytes)) n += r.length();
  return n;
}

double ByteEmbedModel::byte_projection(std::uint8_t b) const {
  double z = 0.0;
  for (std::size_t j = 0; j < kEmbedDim; ++j) z += projection[j] * embedding[b][j];
  return z;
}

double ByteEmbedModel::logit(pe::ByteView bytes) const {
  const WindowCounts wc = window_counts(*this, bytes);
  if (wc.total == 0) return bias;
  double z = 0.0;
  for (int b = 0; b < 256; ++b) {
    if (wc.counts[static_cast<std::size_t>(b)])
      z += static_cast<double>(wc.counts[static_cast<std::size_t>(b)]) * byte_projection(static_cast<std::uint8_t>(b));
  }
  return z / static_cast<double>(wc.total) + bias;
}

std::vector<ByteEmbedModel::Embedding> ByteEmbedModel::grad_wrt_embeddings(
    pe::ByteView bytes, std::span<const std::uint64_t> positions) const {
  const auto ranges = pooled_ranges(bytes);
  std::uint64_t total = 0;
  for (const pe::ByteRange& r : ranges) total += r.length();

  std::vector<Embedding> out(positions.size());
  if (total == 0) return out;
  Embedding unit{};
  for (std::size_t j = 0; j < kEmbedDim; ++j) unit[j] = projection[j] / static_cast<double>(total);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const std::uint64_t p = positions[i];
    bool inside = false;
    for (const pe::ByteRange& r : ranges) {
      if (p >= r.begin && p < r.end) {
        inside = true;
        break;
      }
    }
    if (inside) out[i] = unit;
  }
  return out;
}

double ByteEmbedModel::logit_with_override(pe::ByteView bytes, std::uint64_t position,
                                           const Embedding& e) const {
  const auto ranges = pooled_ranges(bytes);
  std::uint64_t total = 0;
  bool inside = false;
  for (const pe::ByteRange& r : ranges) {
    total += r.length();
    if (position >= r.begin && position < r.end) inside = true;
  }
  double base = logit(bytes);
  if (!inside || total == 0) return base;
  const std::uint8_t cur = bytes[static_cast<std::size_t>(position)];
  double delta = 0.0;
  for (std::size_t j = 0; j < kEmbedDim; ++j) delta += projection[j] * (e[j] - embedding[cur][j]);
  return base + delta / static_cast<double>(total);
}

LogisticModel train_logistic(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                             const TrainParams& params, TrainDiagnostics* diag) {
  if (x.empty() || x.size() != y.size()) throw std::invalid_argument("empty or mismatched dataset");
  check_two_classes(y);
  const std::size_t n = x.size();
  const std::size_t d = x[0].size();
  for (const auto& row : x)
    if (row.size() != d) throw std::invalid_argument("ragged feature matrix");

  LogisticModel m;
  m.weights.assign(d, 0.0);
  m.bias = 0.0;

  std::vector<double> logits(n, 0.0);
  double loss = log_loss(logits, y);
  if (diag) diag->loss_trace.push_back(loss);

  std::vector<double> gw(d);
  for (int epoch = 0; epoch < params.rounds; ++epoch) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = sigmoid(logits[i]) - y[i];
      for (std::size_t j = 0; j < d; ++j) gw[j] += err * x[i][j];
      gb += err;
    }
    const double inv_n = 1.0 / static_cast<double>(n);

    // Step with halving backoff so training loss never increases.
    double step = params.learning_rate;
    bool improved = false;
    for (int attempt = 0; attempt < kBackoffLimit; ++attempt) {
      LogisticModel trial = m;
      for (std::size_t j = 0; j < d; ++j) trial.weights[j] -= step * gw[j] * inv_n;
      trial.bias -= step * gb * inv_n;
      std::vector<double> trial_logits(n);
      for (std::size_t i = 0; i < n; ++i)
        trial_logits[i] = trial.logit_values(std::span<const double>(x[i].data(), d));
      const double trial_loss = log_loss(trial_logits, y);
      if (trial_loss <= loss + kLossSlack) {
        m = std::move(trial);
        logits = std::move(trial_logits);
        loss = trial_loss;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (diag) diag->loss_trace.push_back(loss);
    if (!improved) break;  // converged
  }
  return m;
}

namespace {

struct SortedColumn {
  std::vector<std::uint32_t> order;     // sample indices, ascending feature value
  std::vector<double> candidates;      // up to 256 quantile split values
};

// Best stump for one boosting round under logistic loss (Newton leaves,
// XGBoost-style gain), exhaustive over 256 quantile candidates per feature.
struct BestSplit {
  double gain = 0.0;
  std::uint32_t feature = 0;
  double split = 0.0;
  double left = 0.0;
  double right = 0.0;
  bool found = false;
};

}  // namespace

BoostedStumps train_stumps(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                           const TrainParams& params, TrainDiagnostics* diag) {
  if (x.empty() || x.size() != y.size()) throw std::invalid_argument("empty or mismatched dataset");
  check_two_classes(y);
  const std::size_t n = x.size();
  const std::size_t d = x[0].size();
  for (const auto& row : x)
    if (row.size() != d) throw std::invalid_argument("ragged feature matrix");

  BoostedStumps m;
  m.learning_rate = params.learning_rate;
  {
    const double pos = static_cast<double>(std::accumulate(y.begin(), y.end(), 0));
    const double neg = static_cast<double>(n) - pos;
    m.base_logit = std::log(pos / neg);
  }

  // Presorted columns plus quantile candidates, computed once.
  std::vector<SortedColumn> cols(d);
  for (std::size_t j = 0; j < d; ++j) {
    SortedColumn& c = cols[j];
    c.order.resize(n);
    std::iota(c.order.begin(), c.order.end(), 0u);
    std::stable_sort(c.order.begin(), c.order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x[a][j] < x[b][j]; });
    const double lo = x[c.order.front()][j];
    const double hi = x[c.order.back()][j];
    if (lo == hi) continue;  // constant feature, no candidates
    c.candidates.reserve(256);
    double prev = lo;
    for (int q = 0; q < 256; ++q) {
      const std::size_t pos = (n - 1) * static_cast<std::size_t>(q) / 255;
      const double v = x[c.order[pos]][j];
      if (v != prev || q == 0) c.candidates.push_back(v);
      prev = v;
    }
    // Splitting at the max value sends everything left; drop it.
    while (!c.candidates.empty() && c.candidates.back() >= hi) c.candidates.pop_back();
  }

  std::vector<double> logits(n, m.base_logit);
  std::vector<double> grad(n), hess(n);
  double loss = log_loss(logits, y);
  if (diag) diag->loss_trace.push_back(loss);

  for (int round = 0; round < params.rounds; ++round) {
    double g_total = 0.0, h_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(logits[i]);
      grad[i] = p - y[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
      g_total += grad[i];
      h_total += hess[i];
    }
    const double base_score = g_total * g_total / (h_total + kLeafRegularizer);

    BestSplit best;
    for (std::size_t j = 0; j < d; ++j) {
      const SortedColumn& c = cols[j];
      if (c.candidates.empty()) continue;
      double gl = 0.0, hl = 0.0;
      std::size_t pos = 0, cand = 0;
      while (cand < c.candidates.size()) {
        const double split = c.candidates[cand];
        while (pos < n && x[c.order[pos]][j] <= split) {
          gl += grad[c.order[pos]];
          hl += hess[c.order[pos]];
          ++pos;
        }
        const double gr = g_total - gl;
        const double hr = h_total - hl;
        if (pos > 0 && pos < n) {
          const double gain = gl * gl / (hl + kLeafRegularizer) + gr * gr / (hr + kLeafRegularizer) - base_score;
          // Strict comparison with the ascending feature/candidate scan keeps
          // the lowest feature index then lowest split value on ties.
          if (gain > 1e-12 && (!best.found || gain > best.gain + 1e-12)) {
            best.found = true;
            best.gain = gain;
            best.feature = static_cast<std::uint32_t>(j);
            best.split = split;
            best.left = -gl / (hl + kLeafRegularizer);
            best.right = -gr / (hr + kLeafRegularizer);
          }
        }
        ++cand;
      }
    }
    if (!best.found) break;  // no usable split anywhere

    // Leaf shrink backoff keeps the loss trace monotone.
    double scale = 1.0;
    bool accepted = false;
    for (int attempt = 0; attempt < kBackoffLimit; ++attempt) {
      std::vector<double> trial_logits = logits;
      const double lval = m.learning_rate * best.left * scale;
      const double rval = m.learning_rate * best.right * scale;
      for (std::size_t i = 0; i < n; ++i)
        trial_logits[i] += x[i][best.feature] <= best.split ? lval : rval;
      const double trial_loss = log_loss(trial_logits, y);
      if (trial_loss <= loss + kLossSlack) {
        StumpRound r;
        r.feature_index = best.feature;
        r.split_value = best.split;
        r.left_leaf = best.left * scale;
        r.right_leaf = best.right * scale;
        m.rounds.push_back(r);
        logits = std::move(trial_logits);
        loss = trial_loss;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (diag) diag->loss_trace.push_back(loss);
    if (!accepted) break;
  }
  return m;
}

ByteEmbedModel train_byte_embed(const std::vector<pe::Bytes>& files, const std::vector<int>& y,
                                const TrainParams& params, PoolingConfig pooling,
                                TrainDiagnostics* diag) {
  if (files.empty() || files.size() != y.size()) throw std::invalid_argument("empty or mismatched dataset");
  check_two_classes(y);
  const std::size_t n = files.size();

  ByteEmbedModel m;
  m.pooling = pooling;
  Rng rng(params.seed ^ 0xB5E5C0DEull);
  for (auto& row : m.embedding)
    for (double& v : row) v = rng.normal(0.0, 0.5);
  for (double& v : m.projection) v = rng.normal(0.0, 0.1);
  m.bias = 0.0;

  // Window byte histograms are fixed across epochs; precompute them.
  std::vector<std::array<double, 256>> freq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const WindowCounts wc = window_counts(m, pe::ByteView(files[i].data(), files[i].size()));
    freq[i].fill(0.0);
    if (wc.total)
      for (int b = 0; b < 256; ++b)
        freq[i][static_cast<std::size_t>(b)] =
            static_cast<double>(wc.counts[static_cast<std::size_t>(b)]) / static_cast<double>(wc.total);
  }

  auto model_logits = [&](const ByteEmbedModel& mm, std::vector<double>& out) {
    std::array<double, 256> proj;
    for (int b = 0; b < 256; ++b) proj[static_cast<std::size_t>(b)] = mm.byte_projection(static_cast<std::uint8_t>(b));
    for (std::size_t i = 0; i < n; ++i) {
      double z = mm.bias;
      for (int b = 0; b < 256; ++b) z += freq[i][static_cast<std::size_t>(b)] * proj[static_cast<std::size_t>(b)];
      out[i] = z;
    }
  };

  std::vector<double> logits(n);
  model_logits(m, logits);
  double loss = log_loss(logits, y);
  if (diag) diag->loss_trace.push_back(loss);

  for (int epoch = 0; epoch < params.rounds; ++epoch) {
    // Full-batch gradients for projection, bias and embedding rows.
    std::array<double, ByteEmbedModel::kEmbedDim> g_proj{};
    double g_bias = 0.0;
    std::array<std::array<double, ByteEmbedModel::kEmbedDim>, 256> g_emb{};
    std::array<double, 256> err_freq{};  // sum over samples of err * freq[b]
    std::array<double, ByteEmbedModel::kEmbedDim> pooled{};
    for (std::size_t i = 0; i < n; ++i) {
      const double err = sigmoid(logits[i]) - y[i];
      pooled.fill(0.0);
      for (int b = 0; b < 256; ++b) {
        const double f = freq[i][static_cast<std::size_t>(b)];
        if (f == 0.0) continue;
        err_freq[static_cast<std::size_t>(b)] += err * f;
        for (std::size_t j = 0; j < ByteEmbedModel::kEmbedDim; ++j)
          pooled[j] += f * m.embedding[static_cast<std::size_t>(b)][j];
      }
      for (std::size_t j = 0; j < ByteEmbedModel::kEmbedDim; ++j) g_proj[j] += err * pooled[j];
      g_bias += err;
    }
    for (int b = 0; b < 256; ++b)
      for (std::size_t j = 0; j < ByteEmbedModel::kEmbedDim; ++j)
        g_emb[static_cast<std::size_t>(b)][j] = err_freq[static_cast<std::size_t>(b)] * m.projection[j];

    const double inv_n = 1.0 / static_cast<double>(n);
    double step = params.learning_rate;
    bool improved = false;
    for (int attempt = 0; attempt < kBackoffLimit; ++attempt) {
      ByteEmbedModel trial = m;
      for (std::size_t j = 0; j < ByteEmbedModel::kEmbedDim; ++j) trial.projection[j] -= step * g_proj[j] * inv_n;
      trial.bias -= step * g_bias * inv_n;
      for (int b = 0; b < 256; ++b)
        for (std::size_t j = 0; j < ByteEmbedModel::kEmbedDim; ++j)
          trial.embedding[static_cast<std::size_t>(b)][j] -= step * g_emb[static_cast<std::size_t>(b)][j] * inv_n;
      std::vector<double> trial_logits(n);
      model_logits(trial, trial_logits);
      const double trial_loss = log_loss(trial_logits, y);
      if (trial_loss <= loss + kLossSlack) {
        m = std::move(trial);
        logits = std::move(trial_logits);
        loss = trial_loss;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (diag) diag->loss_trace.push_back(loss);
    if (!improved) break;
  }
  return m;
}

Calibration calibrate_from_scores(std::vector<double> benign_scores, double target_fpr) {
  if (benign_scores.empty()) throw std::invalid_argument("validation set has no benign samples");
  std::sort(benign_scores.begin(), benign_scores.end(), std::greater<double>());
  const std::size_t m = benign_scores.size();
  const double max_score = benign_scores.front();

  Calibration cal;
  const std::size_t k = static_cast<std::size_t>(std::floor(target_fpr * static_cast<double>(m) + 1e-12));
  if (k == 0) {
    cal.threshold = max_score + 1e-12;
    cal.achieved_fpr = 0.0;
    cal.achievable = target_fpr <= 0.0;  // a positive target needs >= 1/target benign samples
    return cal;
  }
  if (k >= m) {
    cal.threshold = benign_scores.back();  // everything flagged
    cal.achieved_fpr = 1.0;
    return cal;
  }
  // Largest distinct score admitting at most k false positives; scanning the
  // descending order handles ties toward the higher threshold.
  std::size_t count = 0;
  double chosen = max_score + 1e-12;
  std::size_t chosen_count = 0;
  std::size_t i = 0;
  while (i < m) {
    const double v = benign_scores[i];
    std::size_t j = i;
    while (j < m && benign_scores[j] == v) ++j;
    count = j;  // scores >= v
    if (count > k) break;
    chosen = v;
    chosen_count = count;
    i = j;
  }
  cal.threshold = chosen;
  cal.achieved_fpr = static_cast<double>(chosen_count) / static_cast<double>(m);
  return cal;
}

Calibration calibrate_threshold(const ScoreModel& model, const std::vector<pe::Bytes>& validation,
                                const std::vector<Label>& labels, double target_fpr) {
  std::vector<double> benign_scores;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    if (labels[i] == Label::benign)
      benign_scores.push_back(model.score(pe::ByteView(validation[i].data(), validation[i].size())));
  }
  return calibrate_from_scores(std::move(benign_scores), target_fpr);
}

namespace {

void append_double(Bytes& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  append_u64le(out, bits);
}

double read_double(ByteView b, std::size_t off) {
  const std::uint64_t bits = read_u64le(b, off);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_model(const ScoreModel& model, const std::filesystem::path& path) {
  Bytes buf;
  buf.push_back('A');
  buf.push_back('D');
  buf.push_back('M');
  buf.push_back('1');
  const std::string k = model.kind();
  buf.push_back(k == "logistic" ? 0 : k == "stumps" ? 1 : 2);
  append_double(buf, model.threshold);
  if (const auto* lm = dynamic_cast<const LogisticModel*>(&model)) {
    append_u32le(buf, static_cast<std::uint32_t>(lm->weights.size()));
    for (double w : lm->weights) append_double(buf, w);
    append_double(buf, lm->bias);
  } else if (const auto* sm = dynamic_cast<const BoostedStumps*>(&model)) {
    append_u32le(buf, static_cast<std::uint32_t>(sm->rounds.size()));
    append_double(buf, sm->learning_rate);
    append_double(buf, sm->base_logit);
    for (const StumpRound& r : sm->rounds) {
      append_u32le(buf, r.feature_index);
      append_double(buf, r.split_value);
      append_double(buf, r.left_leaf);
      append_double(buf, r.right_leaf);
    }
  } else if (const auto* bm = dynamic_cast<const ByteEmbedModel*>(&model)) {
    buf.push_back(bm->pooling.windows == PoolingConfig::Windows::whole_file ? 0 : 1);
    for (const auto& row : bm->embedding)
      for (double v : row) append_double(buf, v);
    for (double v : bm->projection) append_double(buf, v);
    append_double(buf, bm->bias);
  } else {
    raise(Errc::io_error, "unknown model kind " + k);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(Errc::io_error, "cannot write model " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));

  std::ofstream txt(path.string() + ".txt", std::ios::trunc);
  txt << model_text_dump(model);
}

std::unique_ptr<ScoreModel> load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(Errc::io_error, "cannot read model " + path.string());
  Bytes buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 13 || std::memcmp(buf.data(), "ADM1", 4) != 0)
    raise(Errc::io_error, "unrecognized model container " + path.string());
  const std::uint8_t kind = buf[4];
  const double threshold = read_double(buf, 5);
  std::size_t off = 13;
  if (kind == 0) {
    auto m = std::make_unique<LogisticModel>();
    const std::uint32_t d = read_u32le(buf, off);
    off += 4;
    m->weights.resize(d);
    for (std::uint32_t j = 0; j < d; ++j, off += 8) m->weights[j] = read_double(buf, off);
    m->bias = read_double(buf, off);
    m->threshold = threshold;
    return m;
  }
  if (kind == 1) {
    auto m = std::make_unique<BoostedStumps>();
    const std::uint32_t rounds = read_u32le(buf, off);
    off += 4;
    m->learning_rate = read_double(buf, off);
    off += 8;
    m->base_logit = read_double(buf, off);
    off += 8;
    m->rounds.resize(rounds);
    for (std::uint32_t r = 0; r < rounds; ++r) {
      m->rounds[r].feature_index = read_u32le(buf, off);
      off += 4;
      m->rounds[r].split_value = read_double(buf, off);
      off += 8;
      m->rounds[r].left_leaf = read_double(buf, off);
      off += 8;
      m->rounds[r].right_leaf = read_double(buf, off);
      off += 8;
    }
    m->threshold = threshold;
    return m;
  }
  auto m = std::make_unique<ByteEmbedModel>();
  m->pooling.windows = buf[off++] == 0 ? PoolingConfig::Windows::whole_file : PoolingConfig::Windows::attack_regions;
  for (auto& row : m->embedding)
    for (double& v : row) {
      v = read_double(buf, off);
      off += 8;
    }
  for (double& v : m->projection) {
    v = read_double(buf, off);
    off += 8;
  }
  m->bias = read_double(buf, off);
  m->threshold = threshold;
  return m;
}

std::string model_text_dump(const ScoreModel& model) {
  char line[160];
  std::string out = "kind " + model.kind() + "\n";
  std::snprintf(line, sizeof(line), "threshold %.17g\n", model.threshold);
  out += line;
  if (const auto* lm = dynamic_cast<const LogisticModel*>(&model)) {
    std::snprintf(line, sizeof(line), "bias %.17g\n", lm->bias);
    out += line;
    for (std::size_t j = 0; j < lm->weights.size(); ++j) {
      std::snprintf(line, sizeof(line), "w %zu %.17g\n", j, lm->weights[j]);
      out += line;
    }
  } else if (const auto* sm = dynamic_cast<const BoostedStumps*>(&model)) {
    std::snprintf(line, sizeof(line), "learning_rate %.17g\nbase_logit %.17g\n", sm->learning_rate, sm->base_logit);
    out += line;
    for (const StumpRound& r : sm->rounds) {
      std::snprintf(line, sizeof(line), "round f=%u split=%.17g left=%.17g right=%.17g\n", r.feature_index,
                    r.split_value, r.left_leaf, r.right_leaf);
      out += line;
    }
  } else if (const auto* bm = dynamic_cast<const ByteEmbedModel*>(&model)) {
    std::snprintf(line, sizeof(line), "bias %.17g\npooling %s\n", bm->bias,
                  bm->pooling.windows == PoolingConfig::Windows::whole_file ? "whole_file" : "attack_regions");
    out += line;
    for (int b = 0; b < 256; ++b) {
      std::snprintf(line, sizeof(line), "e %d", b);
      out += line;
      for (double v : bm->embedding[static_cast<std::size_t>(b)]) {
        std::snprintf(line, sizeof(line), " %.17g", v);
        out += line;
      }
      out += '\n';
    }
    out += "proj";
    for (double v : bm->projection) {
      std::snprintf(line, sizeof(line), " %.17g", v);
      out += line;
    }
    out += '\n';
  }
  return out;
}

}  // namespace peadv::model
