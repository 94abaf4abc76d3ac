#include "spectro/taxonomy.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "spectro/errors.hpp"

namespace spectro {

const char* PatternFlags::name(int i) {
    static const char* names[kCount] = {"word_start", "word_part",  "word_end", "induction",
                                        "spacing",    "delimiter",  "formatting", "numeric",
                                        "function",   "capitalized"};
    return names[i];
}

bool PatternFlags::get(int i) const {
    switch (i) {
        case 0: return word_start;
        case 1: return word_part;
        case 2: return word_end;
        case 3: return induction;
        case 4: return spacing;
        case 5: return delimiter;
        case 6: return formatting;
        case 7: return numeric;
        case 8: return function;
        case 9: return capitalized;
        default: return false;
    }
}

void BigramStats::add_sequence(const std::vector<int64_t>& toks) {
    for (size_t i = 0; i + 1 < toks.size(); ++i) add_pair(toks[i], toks[i + 1]);
}

void BigramStats::add_pair(int64_t u, int64_t v, uint64_t count) {
    counts_[u][v] += count;
    row_totals_[u] += count;
    total_pairs_ += count;
}

double BigramStats::cond_freq(int64_t u, int64_t v) const {
    auto row = counts_.find(u);
    if (row == counts_.end()) return 0.0;
    auto cell = row->second.find(v);
    if (cell == row->second.end()) return 0.0;
    return static_cast<double>(cell->second) / static_cast<double>(row_totals_.at(u));
}

void BigramStats::save(const std::string& path) const {
    nlohmann::json js;
    js["total_pairs"] = total_pairs_;
    auto& arr = js["counts"] = nlohmann::json::array();
    for (const auto& [u, row] : counts_)
        for (const auto& [v, c] : row) arr.push_back({u, v, c});
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << js.dump() << "\n";
}

BigramStats BigramStats::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open bigram file " + path);
    nlohmann::json js;
    try {
        in >> js;
    } catch (const std::exception& e) {
        throw FormatError(path + ": " + e.what());
    }
    BigramStats b;
    for (const auto& t : js.at("counts"))
        b.add_pair(t.at(0).get<int64_t>(), t.at(1).get<int64_t>(), t.at(2).get<uint64_t>());
    return b;
}

namespace {

// Articles, conjunctions, prepositions, auxiliaries, pronouns.
const char* kFunctionWords[] = {
    "a",     "an",    "the",   "and",   "or",    "but",  "nor",    "so",    "yet",   "for",
    "of",    "to",    "in",    "on",    "at",    "by",   "with",   "from",  "into",  "onto",
    "over",  "under", "above", "below", "about", "as",   "after",  "before", "between",
    "through", "during", "against", "among", "toward", "towards", "upon",  "within", "without",
    "be",    "is",    "am",    "are",   "was",   "were", "been",   "being", "do",    "does",
    "did",   "have",  "has",   "had",   "having", "will", "would",  "shall", "should", "can",
    "could", "may",   "might", "must",  "it",    "its",  "he",     "him",   "his",   "she",
    "her",   "hers",  "they",  "them",  "their", "theirs", "we",   "us",    "our",   "ours",
    "you",   "your",  "yours", "i",     "me",    "my",   "mine",   "this",  "that",  "these",
    "those", "who",   "whom",  "whose", "which", "what", "if",     "then",  "than",  "because",
    "while", "where", "when",  "how",   "not",   "no",   "nor",    "both",  "each",  "either",
    "neither", "all", "any",   "some",  "such",  "only", "own",    "same",  "too",   "very",
};

bool is_ascii_letter(unsigned char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}
bool is_ascii_upper(unsigned char c) { return c >= 'A' && c <= 'Z'; }
bool is_ascii_digit(unsigned char c) { return c >= '0' && c <= '9'; }
bool is_space_char(unsigned char c) {
    return c == ' ' || c == '\n' || c == '\t' || c == '\r' || c == '\f';
}
bool is_bracket(unsigned char c) {
    return c == '(' || c == ')' || c == '[' || c == ']' || c == '{' || c == '}';
}

bool all_letters(const std::string& s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return is_ascii_letter(c); });
}

} // namespace

FunctionLexicon FunctionLexicon::builtin() {
    FunctionLexicon lex;
    for (const char* w : kFunctionWords) lex.words_.insert(w);
    return lex;
}

FunctionLexicon FunctionLexicon::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open lexicon " + path);
    FunctionLexicon lex;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
        if (!line.empty()) lex.words_.insert(line);
    }
    return lex;
}

std::optional<int> space_token_width(int64_t token_id) {
    if (token_id == 209) return 1;
    if (token_id >= 50254 && token_id <= 50276) return static_cast<int>(50278 - token_id);
    return std::nullopt;
}

bool is_induction(const std::vector<int64_t>& context, int64_t target, const BigramStats& stats,
                  double threshold) {
    const size_t len = context.size();
    if (len < 3) return false;
    const int64_t u = context[len - 1];
    const int64_t v = target;
    // Earlier adjacent occurrence of (u, v) with a nonempty gap before the
    // final u, so the full shape is u v U u v.
    bool repeated = false;
    for (size_t j = 0; j + 3 < len; ++j) {
        if (context[j] == u && context[j + 1] == v) {
            repeated = true;
            break;
        }
    }
    if (!repeated) return false;
    return stats.cond_freq(u, v) <= threshold;
}

PatternFlags classify_token(const TokenRecord& rec, const FunctionLexicon& lex,
                            const BigramStats* bigrams, std::optional<char> next_char_hint) {
    PatternFlags f;
    const std::string& s = rec.decoded_target;
    if (s.empty()) return f;

    // Spacing tokens carry no letter-based flags.
    if (std::all_of(s.begin(), s.end(), [](char c) { return is_space_char(c); })) {
        f.spacing = true;
        if (bigrams) f.induction = is_induction(rec.context, rec.target, *bigrams);
        return f;
    }

    const bool leading_space = s.front() == ' ';
    const std::string body = leading_space ? s.substr(1) : s;

    // Word start: a space followed by letters.
    if (leading_space && all_letters(body)) f.word_start = true;

    // Word end needs lookahead: a letters-only token followed by a
    // formatting character, delimiter or space. Without the hint it is false.
    if (all_letters(s) && next_char_hint) {
        const unsigned char nc = static_cast<unsigned char>(*next_char_hint);
        if (is_space_char(nc) || is_bracket(nc) || (!is_ascii_letter(nc) && !is_ascii_digit(nc)))
            f.word_end = true;
    }

    // Word part: letters-only token that is not a word end.
    if (all_letters(s) && !f.word_end) f.word_part = true;

    // Numeric: contains any digit.
    f.numeric = std::any_of(s.begin(), s.end(), [](char c) { return is_ascii_digit(c); });

    // Delimiter: optional leading space, then brackets, optionally closed by
    // ; , : or . (composite forms like ");"). The exhaustive composite list
    // is not standardized; this regex-equivalent is our documented rule.
    {
        size_t i = 0, nb = 0;
        const std::string& t = body;
        while (i < t.size() && is_bracket(static_cast<unsigned char>(t[i]))) ++i, ++nb;
        if (nb > 0) {
            if (i < t.size() && (t[i] == ';' || t[i] == ',' || t[i] == ':' || t[i] == '.')) ++i;
            if (i == t.size()) f.delimiter = true;
        }
    }

    // Formatting: optional leading space, then punctuation that is not a
    // bracket run (those are delimiters) and not alphanumeric or spacing.
    if (!f.delimiter && !body.empty()) {
        bool all_punct = true;
        for (char c : body) {
            const unsigned char uc = static_cast<unsigned char>(c);
            if (is_ascii_letter(uc) || is_ascii_digit(uc) || is_space_char(uc) || uc >= 0x80) {
                all_punct = false;
                break;
            }
        }
        if (all_punct) f.formatting = true;
    }

    // Function words match the lexicon after stripping the leading space.
    {
        std::string lower = body;
        std::transform(lower.begin(), lower.end(), lower.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        if (all_letters(body) && lex.contains(lower)) f.function = true;
    }

    // Capitalized: uppercase-initial word or all-caps acronym.
    if (all_letters(body) && is_ascii_upper(static_cast<unsigned char>(body.front()))) {
        const bool acronym =
            body.size() >= 2 &&
            std::all_of(body.begin(), body.end(),
                        [](char c) { return is_ascii_upper(static_cast<unsigned char>(c)); });
        const bool title = std::all_of(body.begin() + 1, body.end(), [](char c) {
            return is_ascii_letter(static_cast<unsigned char>(c));
        });
        if (acronym || title) f.capitalized = true;
    }

    if (bigrams) f.induction = is_induction(rec.context, rec.target, *bigrams);
    return f;
}

} // namespace spectro
