#include "seqembed/synthetic.hpp"

#include <algorithm>
#include <sstream>

#include "seqembed/random.hpp"

namespace seqembed::synthetic {
namespace {

// k distinct values from [0, n) in random order.
std::vector<std::size_t> sample(CounterRng& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> pool(n);
  for (std::size_t i = 0; i < n; ++i) pool[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::string join_shuffled(std::vector<std::string> words, CounterRng& rng) {
  for (std::size_t i = words.size(); i > 1; --i) {
    std::swap(words[i - 1], words[static_cast<std::size_t>(rng.below(i))]);
  }
  std::ostringstream out;
  for (std::size_t i = 0; i < words.size(); ++i) out << (i ? " " : "") << words[i];
  return out.str();
}

}  // namespace

std::string content_word(std::size_t topic, std::size_t index) {
  std::ostringstream s;
  s << "konu" << topic << "k" << index;
  return s.str();
}

std::string filler_word(std::size_t index) {
  std::ostringstream s;
  s << "dolgu" << index;
  return s.str();
}

std::vector<std::string> vocabulary() {
  std::vector<std::string> words;
  for (std::size_t t = 0; t < kTopics; ++t) {
    for (std::size_t k = 0; k < kWordsPerTopic; ++k) words.push_back(content_word(t, k));
  }
  for (std::size_t f = 0; f < kFillers; ++f) words.push_back(filler_word(f));
  return words;
}

DatasetSplit nli_triplets(std::size_t n, std::uint64_t seed, std::string name) {
  CounterRng rng(seed, 0x6e6c69ULL);
  std::vector<Triplet> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto topic = static_cast<std::size_t>(rng.below(kTopics));
    auto other = static_cast<std::size_t>(rng.below(kTopics - 1));
    if (other >= topic) ++other;

    // order[0..2] form the anchor, order[3] is the word it leaves out.
    const auto order = sample(rng, kWordsPerTopic, kWordsPerTopic);
    const auto fillers = sample(rng, kFillers, 4);
    const auto kept = sample(rng, 3, 2);
    const auto negative_words = sample(rng, kWordsPerTopic, 3);

    std::vector<std::string> anchor, positive, negative;
    for (std::size_t k = 0; k < 3; ++k) anchor.push_back(content_word(topic, order[k]));
    for (auto k : kept) positive.push_back(content_word(topic, order[k]));
    positive.push_back(content_word(topic, order[3]));
    for (auto k : negative_words) negative.push_back(content_word(other, k));
    for (std::size_t f = 0; f < 2; ++f) {
      anchor.push_back(filler_word(fillers[f]));
      negative.push_back(filler_word(fillers[f]));
      positive.push_back(filler_word(fillers[f + 2]));
    }
    out.push_back(Triplet{join_shuffled(anchor, rng), join_shuffled(positive, rng),
                          join_shuffled(negative, rng)});
  }
  return DatasetSplit(std::move(name), std::move(out));
}

DatasetSplit sts_pairs(std::size_t n, std::uint64_t seed, std::string name) {
  constexpr std::size_t kLength = 4;
  CounterRng rng(seed, 0x737473ULL);
  std::vector<ScoredPair> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    // Both sentences are about the same two topics. Sentence1 takes two
    // words of each; sentence2 keeps `shared` of them and fills the rest
    // with the topics' unused words.
    const auto topics = sample(rng, kTopics, 2);
    std::vector<std::string> used, unused;
    for (const auto t : topics) {
      const auto order = sample(rng, kWordsPerTopic, kWordsPerTopic);
      for (std::size_t k = 0; k < kWordsPerTopic; ++k) {
        (k < 2 ? used : unused).push_back(content_word(t, order[k]));
      }
    }
    const auto shared = static_cast<std::size_t>(rng.below(kLength + 1));
    const auto keep = sample(rng, kLength, shared);
    const auto fresh = sample(rng, kLength, kLength - shared);
    // Disjoint fillers keep the score proportional to the full token overlap.
    const auto fillers = sample(rng, kFillers, 4);

    std::vector<std::string> s1 = used, s2;
    for (const auto k : keep) s2.push_back(used[k]);
    for (const auto k : fresh) s2.push_back(unused[k]);
    for (std::size_t f = 0; f < 2; ++f) {
      s1.push_back(filler_word(fillers[f]));
      s2.push_back(filler_word(fillers[f + 2]));
    }
    const double score = kMaxStsScore * static_cast<double>(shared) / static_cast<double>(kLength);
    out.push_back(make_scored_pair(join_shuffled(s1, rng), join_shuffled(s2, rng), score));
  }
  return DatasetSplit(std::move(name), std::move(out));
}

std::vector<std::string> sentences(std::size_t n, std::uint64_t seed) {
  const auto vocab = vocabulary();
  CounterRng rng(seed, 0x73656eULL);
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto len = 5 + static_cast<std::size_t>(rng.below(8));
    std::vector<std::string> words;
    for (std::size_t k = 0; k < len; ++k) words.push_back(vocab[rng.below(vocab.size())]);
    out.push_back(join_shuffled(std::move(words), rng));
  }
  return out;
}

}  // namespace seqembed::synthetic
