#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "spectro/matrix.hpp"

namespace spectro {

// The ten token pattern categories. Flags are not mutually exclusive,
// except word_part excludes word_end by definition.
struct PatternFlags {
    bool word_start = false;
    bool word_part = false;
    bool word_end = false;
    bool induction = false;
    bool spacing = false;
    bool delimiter = false;
    bool formatting = false;
    bool numeric = false;
    bool function = false;
    bool capitalized = false;

    static constexpr int kCount = 10;
    static const char* name(int i);
    bool get(int i) const;
};

// Conditional bigram frequencies q(v|u) estimated by plain counting.
// Unseen pairs have frequency 0, so rare bigrams stay induction-eligible.
class BigramStats {
public:
    void add_sequence(const std::vector<int64_t>& toks);
    void add_pair(int64_t u, int64_t v, uint64_t count = 1);

    // q(v|u); 0 when u was never seen or the pair is unseen.
    double cond_freq(int64_t u, int64_t v) const;
    uint64_t sample_count() const { return total_pairs_; }

    void save(const std::string& path) const;
    static BigramStats load(const std::string& path);

private:
    std::map<int64_t, std::map<int64_t, uint64_t>> counts_;
    std::map<int64_t, uint64_t> row_totals_;
    uint64_t total_pairs_ = 0;
};

// Closed-class function word lexicon (articles, conjunctions, prepositions,
// auxiliaries, pronouns). One token string per line, UTF-8, lowercase.
class FunctionLexicon {
public:
    static FunctionLexicon builtin();
    static FunctionLexicon load(const std::string& path);
    bool contains(const std::string& word) const { return words_.count(word) > 0; }
    size_t size() const { return words_.size(); }

private:
    std::set<std::string> words_;
};

// Classify one token per the pattern category rules. word_end needs to know
// the character following the token; without the hint it stays false.
PatternFlags classify_token(const TokenRecord& rec, const FunctionLexicon& lex,
                            const BigramStats* bigrams = nullptr,
                            std::optional<char> next_char_hint = std::nullopt);

// uvUuv with nonempty U and q(v|u) <= threshold.
bool is_induction(const std::vector<int64_t>& context, int64_t target, const BigramStats& stats,
                  double threshold = 0.05);

// GPT-NeoX run-of-spaces tokens: id 209 is one space, ids 50278-n encode n
// spaces for 1 < n <= 24. Returns the width, or nullopt for other ids.
std::optional<int> space_token_width(int64_t token_id);

} // namespace spectro
