#include <cmath>
#include <map>
#include <random>

#include "planest/nn.hpp"
#include "planest/strings.hpp"

namespace planest {

namespace {

// Cumulative table over unigram counts^0.75, the usual negative-sampling
// distribution.
struct NegativeSampler {
  std::vector<double> cdf;

  explicit NegativeSampler(const std::vector<uint64_t>& counts) {
    cdf.resize(counts.size());
    double acc = 0;
    for (size_t i = 0; i < counts.size(); ++i) {
      acc += std::pow(static_cast<double>(counts[i]), 0.75);
      cdf[i] = acc;
    }
    for (auto& v : cdf) v /= acc;
  }

  size_t draw(std::mt19937_64& rng) const {
    double u = unit_uniform(rng);
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<size_t>(it - cdf.begin()), cdf.size() - 1);
  }
};

inline float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace

void train_skipgram(const std::vector<std::vector<std::string>>& sentences,
                    SubstringDictionary& dict, const SkipGramConfig& cfg) {
  if (dict.dim < 1) throw data_error("dictionary dimension must be >= 1");
  const int dim = dict.dim;

  // Vocabulary: dictionary entries first, then any extra tokens (row keys)
  // appearing in the sentences.
  std::map<std::string, int> vocab;
  for (size_t i = 0; i < dict.entries.size(); ++i)
    vocab[dict.entries[i].key] = static_cast<int>(i);
  std::vector<std::vector<int>> ids(sentences.size());
  std::vector<uint64_t> counts(dict.entries.size(), 0);
  for (size_t s = 0; s < sentences.size(); ++s) {
    for (const auto& tok : sentences[s]) {
      auto [it, inserted] = vocab.emplace(tok, static_cast<int>(vocab.size()));
      if (inserted) counts.push_back(0);
      ids[s].push_back(it->second);
      ++counts[it->second];
    }
  }
  const size_t V = vocab.size();

  std::mt19937_64 rng(cfg.seed);
  std::vector<float> in(V * dim), out(V * dim, 0.0f);
  for (auto& v : in)
    v = static_cast<float>((unit_uniform(rng) - 0.5) / dim);

  uint64_t total_pairs = 0;
  for (const auto& sent : ids)
    if (sent.size() > 1) total_pairs += sent.size() * (sent.size() - 1);
  total_pairs *= std::max(cfg.epochs, 1);

  if (cfg.epochs > 0 && total_pairs > 0 && V > 0) {
    NegativeSampler sampler(counts);
    std::vector<float> accum(dim);
    uint64_t done = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (const auto& sent : ids) {
        if (sent.size() < 2) continue;
        for (size_t ci = 0; ci < sent.size(); ++ci) {
          for (size_t oi = 0; oi < sent.size(); ++oi) {
            if (ci == oi) continue;
            double frac = static_cast<double>(done++) / total_pairs;
            float lr = static_cast<float>(cfg.lr *
                                          std::max(1.0 - frac, 1e-4));
            float* vc = in.data() + static_cast<size_t>(sent[ci]) * dim;
            std::fill(accum.begin(), accum.end(), 0.0f);
            for (int n = 0; n <= cfg.negatives; ++n) {
              int target;
              float label;
              if (n == 0) {
                target = sent[oi];
                label = 1.0f;
              } else {
                target = static_cast<int>(sampler.draw(rng));
                if (target == sent[oi]) continue;
                label = 0.0f;
              }
              float* vo = out.data() + static_cast<size_t>(target) * dim;
              float dot = 0;
              for (int k = 0; k < dim; ++k) dot += vc[k] * vo[k];
              float g = (label - sigmoidf(dot)) * lr;
              for (int k = 0; k < dim; ++k) {
                accum[k] += g * vo[k];
                vo[k] += g * vc[k];
              }
            }
            for (int k = 0; k < dim; ++k) vc[k] += accum[k];
          }
        }
      }
    }
  }

  for (size_t i = 0; i < dict.entries.size(); ++i)
    dict.entries[i].vec.assign(in.begin() + i * dim,
                               in.begin() + (i + 1) * dim);
}

}  // namespace planest
