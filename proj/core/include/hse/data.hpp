#pragma once

// Paired hierarchical corpora: videos (clips of frame vectors) aligned with
// paragraphs (sentences of word vectors), plus a seeded synthetic generator
// and the line-delimited corpus file format.
//
// Corpus file: one JSON object per line,
//   {"id": str, "clips": [[[f64...]...]...], "sentences": [[[f64...]...]...],
//    "clip_labels": [int...]?, "sentence_labels": [int...]?}
// Label file: one JSON object per line, {"label": int, "name": str, "words": [[f64...]...]}

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace hse::data {

/// An ordered run of same-dimension feature vectors (frames of a clip, words of a sentence).
using FeatureSeq = std::vector<std::vector<double>>;

enum class Correspondence { strong, weak };

std::string_view to_string(Correspondence c);
/// Throws std::invalid_argument for anything but "strong" / "weak".
Correspondence parse_correspondence(std::string_view text);

struct VideoSample {
    std::string id;
    std::vector<FeatureSeq> clips;
    /// Optional ground-truth event per clip; empty when unknown.
    std::vector<int> clip_labels;

    std::size_t clip_count() const noexcept { return clips.size(); }
    std::vector<std::size_t> frame_counts() const;

    friend bool operator==(const VideoSample&, const VideoSample&) = default;
};

struct ParagraphSample {
    std::string id;
    std::vector<FeatureSeq> sentences;
    std::vector<int> sentence_labels;

    std::size_t sentence_count() const noexcept { return sentences.size(); }
    std::vector<std::size_t> word_counts() const;

    friend bool operator==(const ParagraphSample&, const ParagraphSample&) = default;
};

struct Pair {
    VideoSample video;
    ParagraphSample paragraph;

    friend bool operator==(const Pair&, const Pair&) = default;
};

struct Corpus {
    std::vector<Pair> pairs;
    Correspondence correspondence = Correspondence::strong;

    std::size_t size() const noexcept { return pairs.size(); }
    /// Frame / word dimensionality; 0 for an empty corpus.
    std::size_t video_dim() const;
    std::size_t text_dim() const;

    /// Throws ValidationError on any broken invariant: empty samples, ragged
    /// dimensions, duplicate ids, label-count mismatches, and n != m under
    /// strong correspondence.
    void validate() const;

    friend bool operator==(const Corpus&, const Corpus&) = default;
};

/// Word-feature phrase naming one latent event, used for zero-shot transfer.
struct LabelPhrase {
    int label = 0;
    std::string name;
    FeatureSeq words;

    friend bool operator==(const LabelPhrase&, const LabelPhrase&) = default;
};

struct SynthSpec {
    std::size_t num_pairs = 32;
    std::size_t num_events = 4;
    std::size_t clips_min = 3, clips_max = 3;
    std::size_t frames_min = 4, frames_max = 4;
    std::size_t words_min = 4, words_max = 4;
    std::size_t video_dim = 16;
    std::size_t text_dim = 16;
    std::size_t latent_dim = 8;
    double noise_std = 0.1;
    /// Spread of a per-unit latent offset shared by clip i and sentence i, so
    /// units with the same event still differ. 0 disables it.
    double instance_std = 0.0;
    std::uint64_t seed = 7;
    Correspondence correspondence = Correspondence::strong;
    /// Use identity modality projections; needs video_dim == text_dim == latent_dim.
    bool identity_projections = false;
    /// Give every pair a different event sequence while the sequence space allows it.
    bool distinct_event_sequences = true;
    std::size_t phrase_words = 4;

    void validate() const;
};

struct SynthCorpus {
    Corpus corpus;
    std::vector<LabelPhrase> labels;
};

/// Pure function of `spec`. Latent events are drawn once, projected into each
/// modality, and every clip i / sentence i of a pair carries the same event
/// (before the within-pair sentence shuffle of weak mode).
SynthCorpus synth_generate(const SynthSpec& spec);

Corpus parse_corpus(std::istream& in, Correspondence correspondence);
Corpus load_corpus(const std::filesystem::path& path, Correspondence correspondence);
void write_corpus(std::ostream& out, const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

std::vector<LabelPhrase> parse_labels(std::istream& in);
std::vector<LabelPhrase> load_labels(const std::filesystem::path& path);
void write_labels(std::ostream& out, const std::vector<LabelPhrase>& labels);
void save_labels(const std::vector<LabelPhrase>& labels, const std::filesystem::path& path);

/// First `count` pairs and the rest, both keeping the correspondence mode.
std::pair<Corpus, Corpus> split(const Corpus& corpus, std::size_t count);

/// Keeps only the first min(n, max_units) clips and sentences of each pair.
Corpus truncate_units(const Corpus& corpus, std::size_t max_units);

}  // namespace hse::data
