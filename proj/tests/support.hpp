#pragma once

#include "bas/bas.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace support {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "bas") {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / (tag + "-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }
    [[nodiscard]] std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream f(p);
    f << content;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Corpus of `n` labeled docs "d0000".. with one-sentence texts.
inline std::shared_ptr<const bas::Corpus> numbered_corpus(std::size_t n) {
    std::vector<bas::Document> docs;
    for (std::size_t i = 0; i < n; ++i) {
        char id[32];
        std::snprintf(id, sizeof id, "d%04zu", i);
        docs.push_back({id, "word" + std::to_string(i) + " common. other" + std::to_string(i) + ".",
                        "word" + std::to_string(i) + " common."});
    }
    return std::make_shared<const bas::Corpus>(std::move(docs));
}

struct SynthData {
    bas::synth::Sample pool;
    bas::synth::Sample test;
    std::shared_ptr<const bas::Corpus> pool_corpus;
    std::shared_ptr<const bas::Corpus> test_corpus;
};

/// The synthetic world used by the statistical tests: a mixed pool and a
/// garbage-free held-out set drawn from the same topics.
inline SynthData synth_data(std::size_t pool_docs = 2000, std::size_t test_docs = 1000, bas::Seed seed = 1) {
    bas::synth::World world({60, 6, 400, seed});
    bas::synth::SampleConfig pc;
    pc.documents = pool_docs;
    pc.seed = seed;
    bas::synth::SampleConfig tc;
    tc.documents = test_docs;
    tc.garbage_rate = 0.0;
    tc.id_prefix = "test";
    tc.seed = bas::derive_seed(seed, "test");
    SynthData d{world.sample(pc), world.sample(tc), nullptr, nullptr};
    d.pool_corpus = std::make_shared<const bas::Corpus>(d.pool.documents);
    d.test_corpus = std::make_shared<const bas::Corpus>(d.test.documents);
    return d;
}

inline std::vector<bas::LabeledExample> labeled(std::span<const bas::Document> docs) {
    std::vector<bas::LabeledExample> out;
    for (const auto& d : docs) out.push_back({d.id, d.text, d.reference.value_or("")});
    return out;
}

}  // namespace support
