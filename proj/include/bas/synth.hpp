#pragma once

// Synthetic summarization world for desk-scale runs of the toy learner.
//
// Each topic owns a handful of key words; filler words are shared by all
// topics and never occur in a reference. Three document classes:
//
//   peaked   one sentence made of topic keys, always including the topic's
//            primary key (the reference); the rest filler
//   flat     the topic keys spread over three short sentences; the reference
//            is the one holding the primary key; the rest filler
//   garbage  hundreds of one- or two-word sentences of never-repeated junk
//            (or blank text), with a junk reference
//
// A learner that has not seen a topic scores every sentence zero, so its
// stochastic passes scatter; garbage documents scatter over so many
// sentences that their BLEUVar sits near 1.

#include "bas/corpus.hpp"
#include "bas/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <string>
#include <unordered_set>
#include <vector>

namespace bas::synth {

enum class DocClass { peaked, flat, garbage };

inline const char* to_string(DocClass c) {
    switch (c) {
        case DocClass::peaked: return "peaked";
        case DocClass::flat: return "flat";
        case DocClass::garbage: return "garbage";
    }
    return "?";
}

struct WorldConfig {
    std::size_t topics = 60;
    std::size_t keys_per_topic = 6;
    std::size_t fillers = 400;
    Seed seed = 1;
};

struct SampleConfig {
    std::size_t documents = 2000;
    double flat_rate = 0.25;
    double garbage_rate = 0.06;
    double blank_garbage_share = 0.2;  // of garbage documents
    std::size_t garbage_sentences = 300;
    std::string id_prefix = "doc";
    Seed seed = 1;
};

struct Sample {
    std::vector<Document> documents;
    std::vector<DocClass> classes;  // index-aligned with documents
    std::vector<std::size_t> topics;
};

class World {
public:
    explicit World(WorldConfig config) : config_(config) {
        Rng rng(derive_seed(config.seed, "world"));
        keys_.resize(config.topics);
        for (auto& k : keys_) {
            for (std::size_t j = 0; j < config.keys_per_topic; ++j) k.push_back(fresh_word(rng));
        }
        for (std::size_t i = 0; i < config.fillers; ++i) fillers_.push_back(fresh_word(rng));
    }

    [[nodiscard]] const WorldConfig& config() const noexcept { return config_; }
    [[nodiscard]] const std::vector<std::string>& keys(std::size_t topic) const { return keys_.at(topic); }

    [[nodiscard]] Sample sample(const SampleConfig& sc) const {
        Sample out;
        Rng rng(derive_seed(sc.seed, "sample"));
        std::size_t junk_counter = 0;
        const auto width = std::to_string(sc.documents).size();
        for (std::size_t i = 0; i < sc.documents; ++i) {
            const double u = rng.uniform01();
            const DocClass cls =
                u < sc.garbage_rate ? DocClass::garbage : (u < sc.garbage_rate + sc.flat_rate ? DocClass::flat : DocClass::peaked);
            const std::size_t topic = static_cast<std::size_t>(rng.below(config_.topics));
            std::string id = std::to_string(i);
            id = sc.id_prefix + std::string(width > id.size() ? width - id.size() : 0, '0') + id;
            Document doc{std::move(id), {}, {}};
            switch (cls) {
                case DocClass::peaked: fill_peaked(doc, topic, rng); break;
                case DocClass::flat: fill_flat(doc, topic, rng); break;
                case DocClass::garbage: fill_garbage(doc, sc, rng, junk_counter); break;
            }
            out.documents.push_back(std::move(doc));
            out.classes.push_back(cls);
            out.topics.push_back(cls == DocClass::garbage ? config_.topics : topic);
        }
        return out;
    }

private:
    std::string fresh_word(Rng& rng) {
        static constexpr char consonants[] = "bdfgklmnprstvz";
        static constexpr char vowels[] = "aeiou";
        for (;;) {
            std::string w;
            const std::size_t syllables = 2 + static_cast<std::size_t>(rng.below(2));
            for (std::size_t s = 0; s < syllables; ++s) {
                w.push_back(consonants[rng.below(sizeof consonants - 1)]);
                w.push_back(vowels[rng.below(sizeof vowels - 1)]);
            }
            if (used_.insert(w).second) return w;
        }
    }

    static std::string sentence(const std::vector<std::string>& words) {
        std::string s;
        for (std::size_t i = 0; i < words.size(); ++i) {
            std::string w = words[i];
            if (i == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
            if (i) s.push_back(' ');
            s += w;
        }
        s.push_back('.');
        return s;
    }

    std::string filler_sentence(Rng& rng) const {
        std::vector<std::string> words;
        const std::size_t len = 6 + static_cast<std::size_t>(rng.below(5));
        for (std::size_t i = 0; i < len; ++i) words.push_back(fillers_[rng.below(fillers_.size())]);
        return sentence(words);
    }

    std::vector<std::string> shuffled_keys(std::size_t topic, Rng& rng) const {
        auto k = keys_[topic];
        rng.shuffle(std::span<std::string>(k));
        return k;
    }

    static std::string join_sentences(const std::vector<std::string>& sentences) {
        std::string text;
        for (std::size_t i = 0; i < sentences.size(); ++i) {
            if (i) text.push_back(' ');
            text += sentences[i];
        }
        return text;
    }

    void fill_peaked(Document& doc, std::size_t topic, Rng& rng) const {
        const std::size_t count = 4 + static_cast<std::size_t>(rng.below(4));
        const std::size_t lead = static_cast<std::size_t>(rng.below(count));
        auto k = shuffled_keys(topic, rng);
        k.resize(std::min<std::size_t>(4, k.size()));
        if (std::find(k.begin(), k.end(), keys_[topic][0]) == k.end()) k[rng.below(k.size())] = keys_[topic][0];
        std::vector<std::string> sentences;
        for (std::size_t i = 0; i < count; ++i) sentences.push_back(i == lead ? sentence(k) : filler_sentence(rng));
        doc.reference = sentences[lead];
        doc.text = join_sentences(sentences);
    }

    void fill_flat(Document& doc, std::size_t topic, Rng& rng) const {
        const std::size_t count = 4 + static_cast<std::size_t>(rng.below(3));
        const auto positions = rng.sample_indices(count, 3);
        const auto k = shuffled_keys(topic, rng);
        const std::size_t per = std::max<std::size_t>(1, k.size() / 3);
        std::vector<std::string> sentences(count);
        std::size_t ref = positions[0];
        for (std::size_t j = 0; j < 3; ++j) {
            const auto first = k.begin() + static_cast<std::ptrdiff_t>(std::min(k.size(), j * per));
            const auto last = k.begin() + static_cast<std::ptrdiff_t>(std::min(k.size(), (j + 1) * per));
            if (std::find(first, last, keys_[topic][0]) != last) ref = positions[j];
            sentences[positions[j]] = sentence({first, last});
        }
        for (auto& s : sentences) {
            if (s.empty()) s = filler_sentence(rng);
        }
        doc.reference = sentences[ref];
        doc.text = join_sentences(sentences);
    }

    // Junk words embed a hash of the id prefix so separately drawn samples
    // never share junk.
    static std::string junk_word(const SampleConfig& sc, std::size_t& counter) {
        char buf[48];
        std::snprintf(buf, sizeof buf, "qx%llun%zu", static_cast<unsigned long long>(fnv1a64(sc.id_prefix) % 100000),
                      counter++);
        return buf;
    }

    static void fill_garbage(Document& doc, const SampleConfig& sc, Rng& rng, std::size_t& counter) {
        std::vector<std::string> ref;
        for (int i = 0; i < 5; ++i) ref.push_back(junk_word(sc, counter));
        doc.reference = sentence(ref);
        if (rng.uniform01() < sc.blank_garbage_share) {
            doc.text = rng.below(2) ? "" : "   ";
            return;
        }
        std::vector<std::string> sentences;
        for (std::size_t i = 0; i < sc.garbage_sentences; ++i) {
            std::vector<std::string> words{junk_word(sc, counter)};
            if (rng.below(2)) words.push_back(junk_word(sc, counter));
            sentences.push_back(sentence(words));
        }
        doc.text = join_sentences(sentences);
    }

    WorldConfig config_;
    std::vector<std::vector<std::string>> keys_;
    std::vector<std::string> fillers_;
    std::unordered_set<std::string> used_;
};

}  // namespace bas::synth
