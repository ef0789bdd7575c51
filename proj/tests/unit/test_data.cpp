#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "hse/data.hpp"
#include "hse/errors.hpp"

using namespace hse;
using namespace hse::data;

namespace {

std::vector<double> mean_of(const FeatureSeq& seq) {
    std::vector<double> m(seq.front().size(), 0.0);
    for (const auto& v : seq)
        for (std::size_t i = 0; i < v.size(); ++i) m[i] += v[i];
    for (double& x : m) x /= static_cast<double>(seq.size());
    return m;
}

}  // namespace

TEST(Synth, DeterministicInSeed) {
    SynthSpec spec;
    const auto a = synth_generate(spec);
    const auto b = synth_generate(spec);
    EXPECT_EQ(a.corpus, b.corpus);
    EXPECT_EQ(a.labels, b.labels);
    spec.seed = 8;
    EXPECT_FALSE(synth_generate(spec).corpus == a.corpus);
}

TEST(Synth, CountArithmetic) {
    SynthSpec spec;
    spec.num_pairs = 32;
    const auto s = synth_generate(spec);
    ASSERT_EQ(s.corpus.size(), 32u);
    std::size_t clips = 0;
    for (const Pair& p : s.corpus.pairs) {
        clips += p.video.clip_count();
        EXPECT_EQ(p.video.frame_counts(), (std::vector<std::size_t>{4, 4, 4}));
        EXPECT_EQ(p.paragraph.word_counts(), (std::vector<std::size_t>{4, 4, 4}));
    }
    EXPECT_EQ(clips, 96u);
    EXPECT_EQ(s.labels.size(), spec.num_events);
    EXPECT_EQ(s.corpus.video_dim(), 16u);
    EXPECT_NO_THROW(s.corpus.validate());
}

TEST(Synth, ZeroNoiseIdentityProjectionsAlignMeans) {
    SynthSpec spec;
    spec.noise_std = 0.0;
    spec.video_dim = spec.text_dim = spec.latent_dim = 5;
    spec.identity_projections = true;
    spec.frames_min = 2;
    spec.frames_max = 5;
    spec.words_min = 1;
    spec.words_max = 6;
    const auto s = synth_generate(spec);
    for (const Pair& p : s.corpus.pairs)
        for (std::size_t i = 0; i < p.video.clip_count(); ++i) {
            const auto a = mean_of(p.video.clips[i]), b = mean_of(p.paragraph.sentences[i]);
            for (std::size_t d = 0; d < a.size(); ++d) EXPECT_NEAR(a[d], b[d], 1e-12);
        }
}

TEST(Synth, ClipAndSentenceShareEvents) {
    const auto s = synth_generate(SynthSpec{});
    for (const Pair& p : s.corpus.pairs) EXPECT_EQ(p.video.clip_labels, p.paragraph.sentence_labels);
}

TEST(Synth, DistinctEventSequencesWhenPossible) {
    SynthSpec spec;
    spec.num_pairs = 64;  // exactly 4^3 sequences exist
    const auto s = synth_generate(spec);
    std::vector<std::vector<int>> seqs;
    for (const Pair& p : s.corpus.pairs) seqs.push_back(p.video.clip_labels);
    std::sort(seqs.begin(), seqs.end());
    EXPECT_EQ(std::adjacent_find(seqs.begin(), seqs.end()), seqs.end());
}

TEST(Synth, WeakModeShufflesSentencesWithinPair) {
    SynthSpec spec;
    spec.correspondence = Correspondence::weak;
    spec.clips_min = 2;
    spec.clips_max = 5;
    const auto s = synth_generate(spec);
    bool any_reordered = false;
    for (const Pair& p : s.corpus.pairs) {
        auto a = p.video.clip_labels, b = p.paragraph.sentence_labels;
        any_reordered = any_reordered || a != b;
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        EXPECT_EQ(a, b);
    }
    EXPECT_TRUE(any_reordered);
    EXPECT_EQ(s.corpus.correspondence, Correspondence::weak);
}

TEST(Synth, InstanceOffsetKeepsClipSentenceAlignment) {
    SynthSpec spec;
    spec.noise_std = 0.0;
    spec.instance_std = 0.5;
    spec.video_dim = spec.text_dim = spec.latent_dim = 4;
    spec.identity_projections = true;
    const auto s = synth_generate(spec);
    const Pair& p = s.corpus.pairs.front();
    EXPECT_EQ(mean_of(p.video.clips[0]), mean_of(p.paragraph.sentences[0]));
    // Same-event units no longer coincide.
    spec.instance_std = 0.0;
    EXPECT_FALSE(synth_generate(spec).corpus == s.corpus);
}

TEST(Synth, InvalidSpecsRejected) {
    SynthSpec spec;
    spec.num_pairs = 0;
    EXPECT_THROW(synth_generate(spec), ValidationError);
    spec = SynthSpec{};
    spec.noise_std = -1.0;
    EXPECT_THROW(synth_generate(spec), ValidationError);
    spec = SynthSpec{};
    spec.identity_projections = true;
    EXPECT_THROW(synth_generate(spec), ValidationError);
    spec = SynthSpec{};
    spec.frames_max = 1;
    EXPECT_THROW(synth_generate(spec), ValidationError);
}

TEST(CorpusFile, ParsesOneRecord) {
    std::istringstream in(
        R"({"id":"a","clips":[[[1,2,3,4],[0,0,0,1],[1,1,1,1]],[[2,2,2,2],[3,3,3,3],[4,4,4,4]]],)"
        R"("sentences":[[[1,0]],[[0,1],[1,1]]]})"
        "\n");
    const Corpus c = parse_corpus(in, Correspondence::strong);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c.pairs[0].video.clip_count(), 2u);
    EXPECT_EQ(c.pairs[0].video.frame_counts(), (std::vector<std::size_t>{3, 3}));
    EXPECT_EQ(c.video_dim(), 4u);
    EXPECT_EQ(c.text_dim(), 2u);
    EXPECT_EQ(c.pairs[0].paragraph.word_counts(), (std::vector<std::size_t>{1, 2}));
}

TEST(CorpusFile, EmptyClipListIsValidationError) {
    std::istringstream in(R"({"id":"a","clips":[],"sentences":[[[1]]]})"
                          "\n");
    EXPECT_THROW(parse_corpus(in, Correspondence::weak), ValidationError);
}

TEST(CorpusFile, MalformedLineReportsLineNumber) {
    std::istringstream in(R"({"id":"a","clips":[[[1]]],"sentences":[[[1]]]})"
                          "\n\n"
                          R"({"id":"b","clips":[[[1]]],"sentences":)"
                          "\n");
    try {
        parse_corpus(in, Correspondence::strong);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(CorpusFile, InconsistentDimensionsRejected) {
    std::istringstream in(R"({"id":"a","clips":[[[1,2]]],"sentences":[[[1]]]})"
                          "\n"
                          R"({"id":"b","clips":[[[1,2,3]]],"sentences":[[[1]]]})"
                          "\n");
    EXPECT_THROW(parse_corpus(in, Correspondence::strong), ValidationError);
}

TEST(CorpusFile, StrongModeNeedsEqualCounts) {
    const std::string line = R"({"id":"a","clips":[[[1]],[[2]]],"sentences":[[[1]]]})"
                             "\n";
    std::istringstream strong(line), weak(line);
    EXPECT_THROW(parse_corpus(strong, Correspondence::strong), ValidationError);
    EXPECT_NO_THROW(parse_corpus(weak, Correspondence::weak));
}

TEST(CorpusFile, DuplicateIdsRejected) {
    std::istringstream in(R"({"id":"a","clips":[[[1]]],"sentences":[[[1]]]})"
                          "\n"
                          R"({"id":"a","clips":[[[1]]],"sentences":[[[1]]]})"
                          "\n");
    EXPECT_THROW(parse_corpus(in, Correspondence::strong), ValidationError);
}

TEST(CorpusFile, RoundTripOverRandomSpecs) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SynthSpec spec;
        spec.seed = seed;
        spec.num_pairs = 3 + seed % 5;
        spec.clips_min = 1;
        spec.frames_min = 1;
        spec.words_min = 1;
        spec.clips_max = 1 + seed % 4;
        spec.frames_max = 2 + seed % 3;
        spec.words_max = 4 + seed % 2;
        spec.video_dim = 2 + seed % 6;
        spec.text_dim = 3 + seed % 4;
        spec.correspondence = seed % 2 ? Correspondence::weak : Correspondence::strong;
        const Corpus c = synth_generate(spec).corpus;
        std::stringstream buf;
        write_corpus(buf, c);
        EXPECT_EQ(parse_corpus(buf, c.correspondence), c) << "seed " << seed;
    }
}

TEST(CorpusFile, SaveLoadRoundTrip) {
    const auto s = synth_generate(SynthSpec{});
    const auto dir = std::filesystem::temp_directory_path() / "hse_data_test";
    std::filesystem::create_directories(dir);
    save_corpus(s.corpus, dir / "c.jsonl");
    save_labels(s.labels, dir / "l.jsonl");
    EXPECT_EQ(load_corpus(dir / "c.jsonl", Correspondence::strong), s.corpus);
    EXPECT_EQ(load_labels(dir / "l.jsonl"), s.labels);
    EXPECT_THROW(load_corpus(dir / "missing.jsonl", Correspondence::strong), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST(Corpus, SplitAndTruncate) {
    const auto c = synth_generate(SynthSpec{}).corpus;
    const auto [head, tail] = split(c, 20);
    EXPECT_EQ(head.size(), 20u);
    EXPECT_EQ(tail.size(), 12u);
    EXPECT_EQ(tail.pairs.front(), c.pairs[20]);

    const Corpus one = truncate_units(c, 1);
    for (const Pair& p : one.pairs) {
        EXPECT_EQ(p.video.clip_count(), 1u);
        EXPECT_EQ(p.paragraph.sentence_count(), 1u);
        EXPECT_EQ(p.video.clip_labels.size(), 1u);
    }
    EXPECT_EQ(truncate_units(c, 3), c);
    EXPECT_EQ(truncate_units(c, 100), c);
    EXPECT_THROW(truncate_units(c, 0), ContractError);
}

TEST(Corpus, CorrespondenceNames) {
    EXPECT_EQ(parse_correspondence("weak"), Correspondence::weak);
    EXPECT_EQ(to_string(Correspondence::strong), "strong");
    EXPECT_THROW(parse_correspondence("medium"), std::invalid_argument);
}
