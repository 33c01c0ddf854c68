#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "seqembed/data.hpp"

namespace seqembed::synthetic {

// 40-word universe: 8 topics of 4 content words, plus 8 filler words.
inline constexpr std::size_t kTopics = 8;
inline constexpr std::size_t kWordsPerTopic = 4;
inline constexpr std::size_t kFillers = 8;

std::string content_word(std::size_t topic, std::size_t index);
std::string filler_word(std::size_t index);
std::vector<std::string> vocabulary();

// Separable NLI triplets. The anchor holds 3 of its topic's words and 2
// fillers; the positive keeps 2 of those words, adds the topic's 4th word
// and 2 different fillers; the negative holds 3 words of another topic and
// repeats the anchor's fillers. Anchor and positive share exactly 2 content
// words, anchor and negative share none, and both pairs share 2 tokens in
// total, so an untrained encoder cannot tell them apart.
DatasetSplit nli_triplets(std::size_t n, std::uint64_t seed, std::string name = "synthetic-nli");

// STS pairs of 4 content words + 2 fillers each, both drawn from the same
// two topics; sentence2 repeats k of sentence1's content words (k uniform
// in 0..4) and the score is 5k/4.
DatasetSplit sts_pairs(std::size_t n, std::uint64_t seed, std::string name = "synthetic-sts");

// Free-form sentences of 5 to 12 words drawn from the same universe.
std::vector<std::string> sentences(std::size_t n, std::uint64_t seed);

}  // namespace seqembed::synthetic
