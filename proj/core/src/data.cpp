#include "hse/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "hse/errors.hpp"

namespace hse::data {

using nlohmann::json;

std::string_view to_string(Correspondence c) {
    return c == Correspondence::strong ? "strong" : "weak";
}

Correspondence parse_correspondence(std::string_view text) {
    if (text == "strong") return Correspondence::strong;
    if (text == "weak") return Correspondence::weak;
    throw std::invalid_argument("unknown correspondence '" + std::string(text) +
                                "' (expected strong or weak)");
}

std::vector<std::size_t> VideoSample::frame_counts() const {
    std::vector<std::size_t> out;
    out.reserve(clips.size());
    for (const auto& c : clips) out.push_back(c.size());
    return out;
}

std::vector<std::size_t> ParagraphSample::word_counts() const {
    std::vector<std::size_t> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(s.size());
    return out;
}

namespace {

std::size_t first_dim(const std::vector<FeatureSeq>& units) {
    for (const auto& u : units)
        for (const auto& v : u) return v.size();
    return 0;
}

void validate_units(const std::vector<FeatureSeq>& units, std::size_t dim, const std::string& id,
                    const char* what, const char* element) {
    if (units.empty()) throw ValidationError(id + ": empty " + what + " list");
    for (std::size_t i = 0; i < units.size(); ++i) {
        if (units[i].empty()) {
            throw ValidationError(id + ": " + what + " " + std::to_string(i) + " has no " + element +
                                  "s");
        }
        for (const auto& v : units[i]) {
            if (v.size() != dim) {
                throw ValidationError(id + ": " + element + " of dimension " +
                                      std::to_string(v.size()) + " where " + std::to_string(dim) +
                                      " is expected");
            }
            for (double x : v)
                if (!std::isfinite(x)) throw ValidationError(id + ": non-finite feature value");
        }
    }
}

}  // namespace

std::size_t Corpus::video_dim() const {
    return pairs.empty() ? 0 : first_dim(pairs.front().video.clips);
}

std::size_t Corpus::text_dim() const {
    return pairs.empty() ? 0 : first_dim(pairs.front().paragraph.sentences);
}

void Corpus::validate() const {
    const std::size_t dv = video_dim();
    const std::size_t dt = text_dim();
    std::unordered_set<std::string> ids;
    for (const Pair& p : pairs) {
        const std::string& id = p.video.id;
        if (p.paragraph.id != id) {
            throw ValidationError("video id '" + id + "' paired with paragraph id '" +
                                  p.paragraph.id + "'");
        }
        if (!ids.insert(id).second) throw ValidationError("duplicate id '" + id + "'");
        validate_units(p.video.clips, dv, id, "clip", "frame");
        validate_units(p.paragraph.sentences, dt, id, "sentence", "word");
        if (!p.video.clip_labels.empty() && p.video.clip_labels.size() != p.video.clips.size())
            throw ValidationError(id + ": clip_labels count differs from clip count");
        if (!p.paragraph.sentence_labels.empty() &&
            p.paragraph.sentence_labels.size() != p.paragraph.sentences.size())
            throw ValidationError(id + ": sentence_labels count differs from sentence count");
        if (correspondence == Correspondence::strong &&
            p.video.clips.size() != p.paragraph.sentences.size()) {
            throw ValidationError(id + ": strong correspondence needs equal clip and sentence counts (" +
                                  std::to_string(p.video.clips.size()) + " vs " +
                                  std::to_string(p.paragraph.sentences.size()) + ")");
        }
    }
}

// ---------------------------------------------------------------------------
// Synthetic generation

void SynthSpec::validate() const {
    auto positive = [](std::size_t v, const char* name) {
        if (v < 1) throw ValidationError(std::string("synth: ") + name + " must be >= 1");
    };
    positive(num_pairs, "num_pairs");
    positive(num_events, "num_events");
    positive(clips_min, "clips_min");
    positive(frames_min, "frames_min");
    positive(words_min, "words_min");
    positive(video_dim, "video_dim");
    positive(text_dim, "text_dim");
    positive(latent_dim, "latent_dim");
    positive(phrase_words, "phrase_words");
    if (clips_max < clips_min || frames_max < frames_min || words_max < words_min)
        throw ValidationError("synth: a range maximum is below its minimum");
    if (!(noise_std >= 0.0) || !std::isfinite(noise_std))
        throw ValidationError("synth: noise_std must be finite and >= 0");
    if (!(instance_std >= 0.0) || !std::isfinite(instance_std))
        throw ValidationError("synth: instance_std must be finite and >= 0");
    if (identity_projections && (video_dim != latent_dim || text_dim != latent_dim))
        throw ValidationError("synth: identity projections need video_dim == text_dim == latent_dim");
}

namespace {

class Sampler {
public:
    explicit Sampler(std::uint64_t seed) : engine_(seed) {}

    double normal() { return normal_(engine_); }

    std::size_t uniform(std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

// Linear map from the latent space into one modality; empty weights mean identity.
struct Projection {
    std::size_t out_dim = 0;
    std::size_t latent = 0;
    std::vector<double> weights;

    std::vector<double> operator()(const std::vector<double>& z) const {
        if (weights.empty()) return z;
        std::vector<double> v(out_dim, 0.0);
        for (std::size_t r = 0; r < out_dim; ++r)
            for (std::size_t c = 0; c < latent; ++c) v[r] += weights[r * latent + c] * z[c];
        return v;
    }
};

Projection draw_projection(std::size_t out_dim, std::size_t latent, bool identity, Sampler& rng) {
    Projection p{out_dim, latent, {}};
    if (identity) return p;
    // Entries ~ N(0, 1/latent) keep projected coordinates at roughly unit variance.
    const double sd = 1.0 / std::sqrt(static_cast<double>(latent));
    p.weights.resize(out_dim * latent);
    for (double& w : p.weights) w = sd * rng.normal();
    return p;
}

std::vector<double> noisy(const std::vector<double>& mean, double noise_std, Sampler& rng) {
    std::vector<double> v(mean.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = mean[i] + noise_std * rng.normal();
    return v;
}

double sequence_space(std::size_t events, std::size_t min_len, std::size_t max_len) {
    double total = 0.0;
    for (std::size_t n = min_len; n <= max_len; ++n)
        total += std::pow(static_cast<double>(events), static_cast<double>(n));
    return total;
}

std::string pair_id(std::size_t k) {
    std::ostringstream os;
    os << "pair_" << std::setw(5) << std::setfill('0') << k;
    return os.str();
}

}  // namespace

SynthCorpus synth_generate(const SynthSpec& spec) {
    spec.validate();
    Sampler rng(spec.seed);

    std::vector<std::vector<double>> events(spec.num_events, std::vector<double>(spec.latent_dim));
    for (auto& e : events)
        for (double& x : e) x = rng.normal();
    const Projection to_video = draw_projection(spec.video_dim, spec.latent_dim, spec.identity_projections, rng);
    const Projection to_text = draw_projection(spec.text_dim, spec.latent_dim, spec.identity_projections, rng);
    std::vector<std::vector<double>> video_means, text_means;
    for (const auto& e : events) {
        video_means.push_back(to_video(e));
        text_means.push_back(to_text(e));
    }

    const bool distinct =
        spec.distinct_event_sequences &&
        sequence_space(spec.num_events, spec.clips_min, spec.clips_max) >=
            static_cast<double>(spec.num_pairs);
    std::set<std::vector<int>> used;

    SynthCorpus out;
    out.corpus.correspondence = spec.correspondence;
    out.corpus.pairs.reserve(spec.num_pairs);
    for (std::size_t k = 0; k < spec.num_pairs; ++k) {
        std::vector<int> seq;
        do {
            const std::size_t n = rng.uniform(spec.clips_min, spec.clips_max);
            seq.assign(n, 0);
            for (int& e : seq) e = static_cast<int>(rng.uniform(0, spec.num_events - 1));
        } while (distinct && used.count(seq));
        used.insert(seq);

        Pair pair;
        pair.video.id = pair.paragraph.id = pair_id(k);
        for (int e : seq) {
            // A unit's latent is its event, optionally offset by an instance
            // term that the clip and its sentence share.
            std::vector<double> video_mean = video_means[e], text_mean = text_means[e];
            if (spec.instance_std > 0.0) {
                std::vector<double> z = events[e];
                for (double& x : z) x += spec.instance_std * rng.normal();
                video_mean = to_video(z);
                text_mean = to_text(z);
            }
            FeatureSeq clip(rng.uniform(spec.frames_min, spec.frames_max));
            for (auto& frame : clip) frame = noisy(video_mean, spec.noise_std, rng);
            FeatureSeq sentence(rng.uniform(spec.words_min, spec.words_max));
            for (auto& word : sentence) word = noisy(text_mean, spec.noise_std, rng);
            pair.video.clips.push_back(std::move(clip));
            pair.video.clip_labels.push_back(e);
            pair.paragraph.sentences.push_back(std::move(sentence));
            pair.paragraph.sentence_labels.push_back(e);
        }
        if (spec.correspondence == Correspondence::weak) {
            std::vector<std::size_t> order(seq.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::shuffle(order.begin(), order.end(), rng.engine());
            ParagraphSample shuffled{pair.paragraph.id, {}, {}};
            for (std::size_t i : order) {
                shuffled.sentences.push_back(std::move(pair.paragraph.sentences[i]));
                shuffled.sentence_labels.push_back(pair.paragraph.sentence_labels[i]);
            }
            pair.paragraph = std::move(shuffled);
        }
        out.corpus.pairs.push_back(std::move(pair));
    }

    for (std::size_t e = 0; e < spec.num_events; ++e) {
        LabelPhrase phrase{static_cast<int>(e), "event_" + std::to_string(e), {}};
        for (std::size_t w = 0; w < spec.phrase_words; ++w)
            phrase.words.push_back(noisy(text_means[e], spec.noise_std, rng));
        out.labels.push_back(std::move(phrase));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Corpus files

namespace {

std::vector<FeatureSeq> units_from_json(const json& j, const char* field) {
    if (!j.contains(field)) throw std::invalid_argument(std::string("missing field '") + field + "'");
    return j.at(field).get<std::vector<FeatureSeq>>();
}

std::ofstream open_for_write(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
    return in;
}

}  // namespace

Corpus parse_corpus(std::istream& in, Correspondence correspondence) {
    Corpus corpus;
    corpus.correspondence = correspondence;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        Pair pair;
        try {
            const json j = json::parse(line);
            if (!j.is_object()) throw std::invalid_argument("record is not an object");
            pair.video.id = pair.paragraph.id = j.at("id").get<std::string>();
            pair.video.clips = units_from_json(j, "clips");
            pair.paragraph.sentences = units_from_json(j, "sentences");
            if (j.contains("clip_labels"))
                pair.video.clip_labels = j.at("clip_labels").get<std::vector<int>>();
            if (j.contains("sentence_labels"))
                pair.paragraph.sentence_labels = j.at("sentence_labels").get<std::vector<int>>();
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        } catch (const std::invalid_argument& e) {
            throw ParseError(line_no, e.what());
        }
        corpus.pairs.push_back(std::move(pair));
    }
    corpus.validate();
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, Correspondence correspondence) {
    auto in = open_for_read(path);
    return parse_corpus(in, correspondence);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const Pair& p : corpus.pairs) {
        json j;
        j["id"] = p.video.id;
        j["clips"] = p.video.clips;
        j["sentences"] = p.paragraph.sentences;
        if (!p.video.clip_labels.empty()) j["clip_labels"] = p.video.clip_labels;
        if (!p.paragraph.sentence_labels.empty()) j["sentence_labels"] = p.paragraph.sentence_labels;
        out << j.dump() << '\n';
    }
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    write_corpus(out, corpus);
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::vector<LabelPhrase> parse_labels(std::istream& in) {
    std::vector<LabelPhrase> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        LabelPhrase phrase;
        try {
            const json j = json::parse(line);
            phrase.label = j.at("label").get<int>();
            phrase.name = j.value("name", "label_" + std::to_string(phrase.label));
            phrase.words = j.at("words").get<FeatureSeq>();
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        if (phrase.words.empty()) throw ValidationError("label " + phrase.name + " has no words");
        labels.push_back(std::move(phrase));
    }
    return labels;
}

std::vector<LabelPhrase> load_labels(const std::filesystem::path& path) {
    auto in = open_for_read(path);
    return parse_labels(in);
}

void write_labels(std::ostream& out, const std::vector<LabelPhrase>& labels) {
    for (const LabelPhrase& l : labels) {
        json j;
        j["label"] = l.label;
        j["name"] = l.name;
        j["words"] = l.words;
        out << j.dump() << '\n';
    }
}

void save_labels(const std::vector<LabelPhrase>& labels, const std::filesystem::path& path) {
    auto out = open_for_write(path);
    write_labels(out, labels);
    if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::pair<Corpus, Corpus> split(const Corpus& corpus, std::size_t count) {
    count = std::min(count, corpus.pairs.size());
    Corpus head{{corpus.pairs.begin(), corpus.pairs.begin() + static_cast<std::ptrdiff_t>(count)},
                corpus.correspondence};
    Corpus tail{{corpus.pairs.begin() + static_cast<std::ptrdiff_t>(count), corpus.pairs.end()},
                corpus.correspondence};
    return {std::move(head), std::move(tail)};
}

Corpus truncate_units(const Corpus& corpus, std::size_t max_units) {
    if (max_units < 1) throw ContractError("truncate_units: max_units must be >= 1");
    Corpus out = corpus;
    for (Pair& p : out.pairs) {
        if (p.video.clips.size() > max_units) {
            p.video.clips.resize(max_units);
            if (!p.video.clip_labels.empty()) p.video.clip_labels.resize(max_units);
        }
        if (p.paragraph.sentences.size() > max_units) {
            p.paragraph.sentences.resize(max_units);
            if (!p.paragraph.sentence_labels.empty()) p.paragraph.sentence_labels.resize(max_units);
        }
    }
    return out;
}

}  // namespace hse::data
