#include "steerlab/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "steerlab/bundle.hpp"
#include "steerlab/errors.hpp"
#include "steerlab/rng.hpp"

namespace steerlab::corpus {

using nlohmann::json;

namespace {

constexpr std::string_view kAlphabet = " abcdefghijklmnopqrstuvwxyz0123456789?.,'-";

constexpr std::array<std::string_view, 8> kRelations = {
    "capital", "river", "ruler", "emblem", "anthem", "harbor", "metal", "festival"};

constexpr std::array<std::string_view, 14> kOnsets = {
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
constexpr std::array<std::string_view, 5> kVowels = {"a", "e", "i", "o", "u"};
constexpr std::array<std::string_view, 4> kCodas = {"", "n", "r", "s"};

std::string syllable(std::mt19937_64& rng) {
  std::string s;
  s += kOnsets[uniform_index(rng, kOnsets.size())];
  s += kVowels[uniform_index(rng, kVowels.size())];
  s += kCodas[uniform_index(rng, kCodas.size())];
  return s;
}

std::string word(std::mt19937_64& rng, std::size_t syllables) {
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) w += syllable(rng);
  return w;
}

}  // namespace

Vocab::Vocab() {
  symbols_ = {"<pad>", "<bos>", "<eos>", "<sep>"};
  std::fill(std::begin(char_to_id_), std::end(char_to_id_), -1);
  for (char c : kAlphabet) {
    char_to_id_[static_cast<unsigned char>(c)] = static_cast<int>(symbols_.size());
    symbols_.emplace_back(1, c);
  }
}

const std::string& Vocab::symbol(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= symbols_.size()) {
    throw input_error("token id " + std::to_string(id) + " outside vocabulary");
  }
  return symbols_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(char c) const {
  return char_to_id_[static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(c)))] >= 0;
}

int Vocab::id(char c) const {
  const int v = char_to_id_[static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(c)))];
  if (v < 0) {
    throw input_error(std::string("character '") + c + "' is not in the vocabulary");
  }
  return v;
}

std::vector<int> Vocab::encode_text(std::string_view text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(id(c));
  return ids;
}

std::string Vocab::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id <= kSep) continue;
    out += symbol(id);
  }
  return out;
}

const Vocab& default_vocab() {
  static const Vocab vocab;
  return vocab;
}

const std::vector<std::string>& confidence_markers() {
  static const std::vector<std::string> markers = {
      "confidence", "confident", "probably", "likely", "maybe",
      "perhaps",    "certainly", "unsure",   "guess",  "possibly"};
  return markers;
}

bool contains_confidence_marker(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string tok;
  const auto& markers = confidence_markers();
  while (in >> tok) {
    tok.erase(std::remove_if(tok.begin(), tok.end(),
                             [](unsigned char c) { return !std::isalnum(c); }),
              tok.end());
    std::transform(tok.begin(), tok.end(), tok.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (std::find(markers.begin(), markers.end(), tok) != markers.end()) return true;
  }
  return false;
}

std::vector<QAPair> generate_corpus(std::size_t n_facts, std::size_t n_unanswerable,
                                    std::uint64_t seed) {
  if (n_facts == 0) throw input_error("generate_corpus: n_facts must be at least 1");
  std::mt19937_64 rng(seed);
  std::set<std::string> used;
  auto fresh = [&](std::size_t syllables) {
    for (;;) {
      std::string w = word(rng, syllables);
      if (used.count(w) || contains_confidence_marker(w)) continue;
      used.insert(w);
      return w;
    }
  };

  std::vector<QAPair> pairs;
  pairs.reserve(n_facts + n_unanswerable);
  for (std::size_t i = 0; i < n_facts; ++i) {
    const auto rel = kRelations[uniform_index(rng, kRelations.size())];
    std::string entity = fresh(2);
    std::string answer = fresh(2);
    pairs.push_back({"what is the " + std::string(rel) + " of " + entity + "?", answer, true});
  }
  for (std::size_t i = 0; i < n_unanswerable; ++i) {
    const auto rel = kRelations[uniform_index(rng, kRelations.size())];
    std::string entity = fresh(2);
    pairs.push_back({"what is the " + std::string(rel) + " of " + entity + "?",
                     std::string(kRefusalAnswer), false});
  }
  shuffle_in_place(pairs, rng);
  return pairs;
}

Encoded encode_example(const QAPair& pair, const Vocab& vocab, std::size_t seq_len) {
  auto q = vocab.encode_text(pair.question);
  auto a = vocab.encode_text(pair.answer);
  const std::size_t used = q.size() + a.size() + 3;
  if (used > seq_len) {
    throw length_error("example needs " + std::to_string(used) + " tokens, limit is " +
                       std::to_string(seq_len));
  }
  Encoded e;
  e.tokens.reserve(seq_len);
  e.tokens.push_back(Vocab::kBos);
  e.tokens.insert(e.tokens.end(), q.begin(), q.end());
  e.tokens.push_back(Vocab::kSep);
  const std::size_t sep_pos = e.tokens.size() - 1;
  e.tokens.insert(e.tokens.end(), a.begin(), a.end());
  e.tokens.push_back(Vocab::kEos);
  const std::size_t content = e.tokens.size();
  e.tokens.resize(seq_len, Vocab::kPad);
  e.labels = e.tokens;
  for (std::size_t i = 0; i < seq_len; ++i)
    if (i <= sep_pos || i >= content) e.labels[i] = kIgnoreIndex;
  return e;
}

std::vector<int> encode_prompt(std::string_view question, const Vocab& vocab) {
  std::vector<int> ids{Vocab::kBos};
  auto q = vocab.encode_text(question);
  ids.insert(ids.end(), q.begin(), q.end());
  ids.push_back(Vocab::kSep);
  return ids;
}

Batch make_batch(const std::vector<const Encoded*>& rows) {
  if (rows.empty()) throw input_error("make_batch: no rows");
  const std::size_t full = rows.front()->tokens.size();
  std::size_t width = 1;
  for (const auto* r : rows) {
    if (r->tokens.size() != full) throw dimension_error("make_batch: ragged rows");
    for (std::size_t t = full; t > 0; --t) {
      if (r->tokens[t - 1] != Vocab::kPad) {
        width = std::max(width, t);
        break;
      }
    }
  }
  Batch b;
  b.tokens = {rows.size(), width, {}};
  b.labels = {rows.size(), width, {}};
  b.tokens.ids.reserve(rows.size() * width);
  b.labels.ids.reserve(rows.size() * width);
  for (const auto* r : rows) {
    b.tokens.ids.insert(b.tokens.ids.end(), r->tokens.begin(), r->tokens.begin() + width);
    b.labels.ids.insert(b.labels.ids.end(), r->labels.begin(), r->labels.begin() + width);
  }
  return b;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<QAPair>& pairs) {
  std::string text;
  for (const auto& p : pairs) {
    json j{{"question", p.question}, {"answer", p.answer}, {"answerable", p.answerable}};
    text += j.dump() + "\n";
  }
  io::write_text(path, text);
}

std::vector<QAPair> read_jsonl(const std::filesystem::path& path) {
  std::istringstream in(io::read_text(path));
  std::vector<QAPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      pairs.push_back({j.at("question").get<std::string>(), j.at("answer").get<std::string>(),
                       j.at("answerable").get<bool>()});
    } catch (const json::exception& e) {
      throw io_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return pairs;
}

}  // namespace steerlab::corpus
