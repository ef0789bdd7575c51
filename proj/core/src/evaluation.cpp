#include "hse/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "hse/errors.hpp"
#include "hse/losses.hpp"

namespace hse::eval {

std::string_view to_string(Direction d) {
    return d == Direction::paragraph_to_video ? "paragraph_to_video" : "video_to_paragraph";
}

double RetrievalPair::mean_recall(std::size_t k) const {
    return 0.5 * (recall_at_k(paragraph_to_video.ranks, k) + recall_at_k(video_to_paragraph.ranks, k));
}

std::vector<std::size_t> ranks_from_similarity(const std::vector<std::vector<double>>& sim) {
    const std::size_t n = sim.size();
    std::vector<std::size_t> ranks(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (sim[i].size() != n) throw ShapeError("ranks_from_similarity: matrix is not square");
        const double own = sim[i][i];
        std::size_t above = 0;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && sim[i][j] > own) ++above;
        ranks[i] = above + 1;
    }
    return ranks;
}

std::vector<std::size_t> rank_matrix(const Embeddings& queries, const Embeddings& gallery) {
    if (queries.size() != gallery.size())
        throw ContractError("rank_matrix: query i must pair with gallery i (sizes differ)");
    std::vector<std::vector<double>> sim(queries.size(), std::vector<double>(gallery.size()));
    for (std::size_t i = 0; i < queries.size(); ++i)
        for (std::size_t j = 0; j < gallery.size(); ++j) sim[i][j] = loss::match(queries[i], gallery[j]);
    return ranks_from_similarity(sim);
}

double recall_at_k(std::span<const std::size_t> ranks, std::size_t k) {
    if (ranks.empty()) throw ContractError("recall_at_k: no ranks");
    if (k < 1) throw ContractError("recall_at_k: k must be >= 1");
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [k](std::size_t r) { return r <= k; });
    return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

std::size_t median_rank(std::span<const std::size_t> ranks) {
    if (ranks.empty()) throw ContractError("median_rank: no ranks");
    std::vector<std::size_t> work(ranks.begin(), ranks.end());
    const auto mid = work.begin() + static_cast<std::ptrdiff_t>((work.size() - 1) / 2);
    std::nth_element(work.begin(), mid, work.end());
    return *mid;
}

RetrievalReport make_report(Direction d, std::vector<std::size_t> ranks, std::span<const std::size_t> ks) {
    RetrievalReport r;
    r.direction = d;
    for (std::size_t k : ks) r.recall_at[k] = recall_at_k(ranks, k);
    r.median_rank = median_rank(ranks);
    r.ranks = std::move(ranks);
    return r;
}

RetrievalPair evaluate_embeddings(const Embeddings& videos, const Embeddings& paragraphs,
                                  std::span<const std::size_t> ks) {
    if (videos.empty()) throw ContractError("evaluate: empty corpus");
    return {make_report(Direction::paragraph_to_video, rank_matrix(paragraphs, videos), ks),
            make_report(Direction::video_to_paragraph, rank_matrix(videos, paragraphs), ks)};
}

RetrievalPair evaluate_retrieval(const model::HseModelParams& params, const data::Corpus& corpus,
                                 std::span<const std::size_t> ks, const model::EncoderOptions& options) {
    Embeddings videos, paragraphs;
    for (const data::Pair& p : corpus.pairs) {
        videos.push_back(model::embed_video(params, p.video, options).high);
        paragraphs.push_back(model::embed_paragraph(params, p.paragraph, options).high);
    }
    return evaluate_embeddings(videos, paragraphs, ks);
}

RetrievalPair evaluate_retrieval(const model::FlatModelParams& params, const data::Corpus& corpus,
                                 std::span<const std::size_t> ks) {
    Embeddings videos, paragraphs;
    for (const data::Pair& p : corpus.pairs) {
        videos.push_back(model::encode_flat(params.enc_v, p.video.clips));
        paragraphs.push_back(model::encode_flat(params.enc_p, p.paragraph.sentences));
    }
    return evaluate_embeddings(videos, paragraphs, ks);
}

RetrievalPair evaluate_partial(const model::HseModelParams& params, const data::Corpus& corpus,
                               std::size_t max_units, std::span<const std::size_t> ks,
                               const model::EncoderOptions& options) {
    return evaluate_retrieval(params, data::truncate_units(corpus, max_units), ks, options);
}

// ---------------------------------------------------------------------------

ZeroShotReport zeroshot_from_embeddings(const Embeddings& clips, std::span<const int> truth,
                                        const Embeddings& label_embeddings, std::span<const int> labels,
                                        std::size_t top_k) {
    if (labels.empty()) throw ContractError("zeroshot: empty label set");
    if (label_embeddings.size() != labels.size())
        throw ContractError("zeroshot: one embedding per label is required");
    if (clips.size() != truth.size()) throw ContractError("zeroshot: one truth label per clip is required");
    if (clips.empty()) throw ContractError("zeroshot: no labelled clips");
    if (top_k < 1) throw ContractError("zeroshot: top_k must be >= 1");

    std::unordered_map<int, std::size_t> slot;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (!slot.emplace(labels[i], i).second)
            throw ContractError("zeroshot: duplicate label " + std::to_string(labels[i]));

    ZeroShotReport r;
    r.labels.assign(labels.begin(), labels.end());
    r.truth.assign(truth.begin(), truth.end());
    r.top_k = std::min(top_k, labels.size());
    std::size_t hits1 = 0, hitsk = 0;
    std::vector<double> score(labels.size());
    for (std::size_t c = 0; c < clips.size(); ++c) {
        const auto it = slot.find(truth[c]);
        if (it == slot.end())
            throw ContractError("zeroshot: clip label " + std::to_string(truth[c]) + " has no phrase");
        for (std::size_t l = 0; l < labels.size(); ++l) score[l] = loss::match(clips[c], label_embeddings[l]);
        const std::size_t best =
            static_cast<std::size_t>(std::max_element(score.begin(), score.end()) - score.begin());
        r.predicted.push_back(labels[best]);
        if (labels[best] == truth[c]) ++hits1;
        const double own = score[it->second];
        const auto above = std::count_if(score.begin(), score.end(), [own](double s) { return s > own; });
        if (static_cast<std::size_t>(above) < r.top_k) ++hitsk;
    }
    r.top1 = static_cast<double>(hits1) / static_cast<double>(clips.size());
    r.topk = static_cast<double>(hitsk) / static_cast<double>(clips.size());
    return r;
}

ZeroShotReport zeroshot_classify(const model::HseModelParams& params, const data::Corpus& corpus,
                                 std::span<const data::LabelPhrase> phrases, std::size_t top_k) {
    if (phrases.empty()) throw ContractError("zeroshot: empty label set");
    Embeddings label_embeddings;
    std::vector<int> labels;
    for (const data::LabelPhrase& ph : phrases) {
        if (ph.words.empty()) throw ContractError("zeroshot: label '" + ph.name + "' has no words");
        label_embeddings.push_back(model::encode_sequence(params.enc_p_low, ph.words));
        labels.push_back(ph.label);
    }
    Embeddings clips;
    std::vector<int> truth;
    for (const data::Pair& p : corpus.pairs) {
        if (p.video.clip_labels.empty()) continue;
        for (std::size_t i = 0; i < p.video.clips.size(); ++i) {
            clips.push_back(model::encode_sequence(params.enc_v_low, p.video.clips[i]));
            truth.push_back(p.video.clip_labels[i]);
        }
    }
    if (clips.empty()) throw ContractError("zeroshot: the corpus carries no clip labels");
    return zeroshot_from_embeddings(clips, truth, label_embeddings, labels, top_k);
}

// ---------------------------------------------------------------------------

namespace {

std::string prefix(Direction d) { return d == Direction::paragraph_to_video ? "p2v" : "v2p"; }

void write_direction(std::ostream& out, const RetrievalReport& r) {
    const std::string p = prefix(r.direction);
    for (const auto& [k, v] : r.recall_at) out << p << "_recall\t" << k << '\t' << v << '\n';
    out << p << "_median_rank\t-\t" << r.median_rank << '\n';
}

nlohmann::json direction_json(const RetrievalReport& r) {
    nlohmann::json recall = nlohmann::json::object();
    for (const auto& [k, v] : r.recall_at) recall[std::to_string(k)] = v;
    return {{"direction", to_string(r.direction)},
            {"queries", r.ranks.size()},
            {"recall_at", recall},
            {"median_rank", r.median_rank},
            {"ranks", r.ranks}};
}

}  // namespace

void write_tsv(std::ostream& out, const RetrievalPair& r) {
    const auto old = out.precision(17);
    out << "name\tk\tvalue\n";
    write_direction(out, r.paragraph_to_video);
    write_direction(out, r.video_to_paragraph);
    out.precision(old);
}

void write_tsv(std::ostream& out, const ZeroShotReport& r) {
    const auto old = out.precision(17);
    out << "name\tk\tvalue\n";
    out << "zeroshot_accuracy\t1\t" << r.top1 << '\n';
    out << "zeroshot_accuracy\t" << r.top_k << '\t' << r.topk << '\n';
    out << "zeroshot_clips\t-\t" << r.truth.size() << '\n';
    out << "zeroshot_labels\t-\t" << r.labels.size() << '\n';
    out.precision(old);
}

std::string to_json(const RetrievalPair& r) {
    nlohmann::json j = {{"paragraph_to_video", direction_json(r.paragraph_to_video)},
                        {"video_to_paragraph", direction_json(r.video_to_paragraph)}};
    return j.dump(2);
}

std::string to_json(const ZeroShotReport& r) {
    nlohmann::json j = {{"labels", r.labels},   {"top1", r.top1},       {"top_k", r.top_k},
                        {"topk", r.topk},       {"truth", r.truth},     {"predicted", r.predicted}};
    return j.dump(2);
}

}  // namespace hse::eval
