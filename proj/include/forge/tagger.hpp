#pragma once

#include <optional>
#include <set>
#include <string>

#include "forge/util.hpp"

namespace forge {

enum class WordClass { noun, verb, adjective, adverb };

inline std::string to_string(WordClass c) {
  switch (c) {
    case WordClass::noun: return "noun";
    case WordClass::verb: return "verb";
    case WordClass::adjective: return "adjective";
    case WordClass::adverb: return "adverb";
  }
  return "unknown";
}

inline WordClass word_class_from_string(const std::string& s) {
  if (s == "noun") return WordClass::noun;
  if (s == "verb") return WordClass::verb;
  if (s == "adjective") return WordClass::adjective;
  if (s == "adverb") return WordClass::adverb;
  throw ParseError("unknown word class: " + s);
}

// Decides which words of a sentence are open-class (replaceable) and what
// class they carry. nullopt means the word is not replaceable.
class WordClassTagger {
 public:
  virtual ~WordClassTagger() = default;
  virtual std::optional<WordClass> classify(const std::string& word) const = 0;
};

// Dependency-free default: a closed-class stoplist rejects function words,
// everything alphabetic of length >= 3 is replaceable, and the class comes
// from suffix shape plus a small common-verb list. A higher-fidelity tagger
// can be plugged in behind the same interface.
class RuleBasedTagger : public WordClassTagger {
 public:
  std::optional<WordClass> classify(const std::string& word) const override {
    if (word.size() < 3) return std::nullopt;
    for (char c : word) {
      if (!std::isalpha(static_cast<unsigned char>(c))) return std::nullopt;
    }
    const std::string w = to_lower(word);
    if (stopwords().count(w)) return std::nullopt;

    if (ends_with(w, "ly")) return WordClass::adverb;
    if (verbs().count(w) || ends_with(w, "ing") || ends_with(w, "ed") ||
        ends_with(w, "ize") || ends_with(w, "ise") || ends_with(w, "ify")) {
      return WordClass::verb;
    }
    static const char* adj_suffixes[] = {"ous", "ful",  "ive",  "al",  "ic",
                                         "able", "ible", "ant", "ent", "less",
                                         "ish"};
    for (const char* suf : adj_suffixes) {
      if (ends_with(w, suf)) return WordClass::adjective;
    }
    return WordClass::noun;
  }

 private:
  static const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        // determiners
        "the", "this", "that", "these", "those", "some", "any", "each",
        "every", "all", "both", "few", "more", "most", "other", "such", "own",
        // prepositions
        "of", "in", "to", "with", "on", "at", "by", "from", "for", "about",
        "as", "into", "over", "under", "between", "through", "towards",
        "toward", "via", "per", "out", "off", "than",
        // pronouns
        "you", "him", "her", "them", "they", "she", "his", "its", "our",
        "their", "mine", "yours", "theirs", "who", "whom", "whose", "what",
        "which", "one", "ones", "anyone", "someone", "people",
        // conjunctions / subordinators
        "and", "but", "nor", "yet", "because", "while", "when", "where",
        "after", "before", "since", "until", "whether", "whenever",
        // auxiliaries and copulas
        "is", "are", "was", "were", "been", "being", "does", "did", "has",
        "had", "have", "will", "would", "can", "could", "shall", "should",
        "may", "might", "must", "not",
        // contraction stems left over after tokenization
        "don", "doesn", "isn", "aren", "won", "didn", "hasn", "haven",
        // high-frequency adverbs of degree
        "just", "only", "also", "too", "very", "even", "how", "why",
    };
    return words;
  }

  static const std::set<std::string>& verbs() {
    static const std::set<std::string> words = {
        "agree",   "make",    "makes",   "made",    "bring",   "brings",
        "work",    "works",   "turn",    "turns",   "depend",  "depends",
        "know",    "knows",   "suffer",  "suffers", "occur",   "occurs",
        "keep",    "keeps",   "give",    "gives",   "earn",    "earns",
        "cause",   "causes",  "come",    "comes",   "mean",    "means",
        "buy",     "buys",    "provide", "provides", "favor",  "favors",
        "fill",    "fills",   "offer",   "offers",  "lead",    "leads",
        "increase", "increases", "strengthen", "strengthens", "monitor",
        "monitors", "collect", "collects", "interfere", "interferes",
        "run",     "runs",    "say",     "says",    "think",   "thinks",
        "break",   "breaks",  "count",   "counts",  "vote",    "votes",
    };
    return words;
  }
};

}  // namespace forge
