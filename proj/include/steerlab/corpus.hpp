#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "steerlab/model.hpp"

namespace steerlab::corpus {

inline constexpr std::string_view kRefusalAnswer = "i do not know";
inline constexpr std::size_t kDefaultSeqLen = 128;

struct QAPair {
  std::string question;
  std::string answer;
  bool answerable = true;

  bool operator==(const QAPair&) const = default;
};

// Character vocabulary. Ids 0-3 are PAD, BOS, EOS, SEP; the rest cover
// lowercase ASCII letters, digits, space and a little punctuation.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kSep = 3;

  Vocab();

  std::size_t size() const { return symbols_.size(); }
  const std::string& symbol(int id) const;
  bool contains(char c) const;
  int id(char c) const;

  // Lowercases, then maps each character; unknown characters are an input error.
  std::vector<int> encode_text(std::string_view text) const;
  // Drops special tokens.
  std::string decode(std::span<const int> ids) const;

 private:
  std::vector<std::string> symbols_;
  int char_to_id_[256];
};

const Vocab& default_vocab();

// Deterministic synthetic trivia facts of the form
// "what is the <relation> of <entity>?" plus unanswerable questions about
// entities that appear in no fact.
std::vector<QAPair> generate_corpus(std::size_t n_facts, std::size_t n_unanswerable,
                                    std::uint64_t seed);

struct Encoded {
  std::vector<int> tokens;
  std::vector<int> labels;  // kIgnoreIndex up to and including SEP and on padding
};

// Layout: BOS question SEP answer EOS PAD...
Encoded encode_example(const QAPair& pair, const Vocab& vocab,
                       std::size_t seq_len = kDefaultSeqLen);
// Prompt prefix used for generation: BOS question SEP.
std::vector<int> encode_prompt(std::string_view question, const Vocab& vocab);

// Stacks rows into a batch, trimming columns that are padding in every row.
// The trim is exact for causal models: trailing pads never influence
// earlier positions.
struct Batch {
  TokenBatch tokens;
  TokenBatch labels;
};
Batch make_batch(const std::vector<const Encoded*>& rows);

// Words that would signal calibrated confidence; ABSOLUTE-mode data never
// contains any of them.
const std::vector<std::string>& confidence_markers();
bool contains_confidence_marker(std::string_view text);

void write_jsonl(const std::filesystem::path& path, const std::vector<QAPair>& pairs);
std::vector<QAPair> read_jsonl(const std::filesystem::path& path);

}  // namespace steerlab::corpus
