#pragma once

// Bidirectional retrieval metrics and zero-shot label transfer.
//
// The rank of query i is 1 + the number of gallery items j != i whose
// similarity is strictly greater than that of gallery item i, so ties favour
// the query. The median rank is the lower median.

#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hse/data.hpp"
#include "hse/model.hpp"

namespace hse::eval {

using Embeddings = std::vector<std::vector<double>>;

enum class Direction { paragraph_to_video, video_to_paragraph };

std::string_view to_string(Direction d);

struct RetrievalReport {
    Direction direction = Direction::paragraph_to_video;
    std::vector<std::size_t> ranks;
    std::map<std::size_t, double> recall_at;
    std::size_t median_rank = 0;

    friend bool operator==(const RetrievalReport&, const RetrievalReport&) = default;
};

struct RetrievalPair {
    RetrievalReport paragraph_to_video;
    RetrievalReport video_to_paragraph;

    /// Mean of the two directions' recall@k.
    double mean_recall(std::size_t k) const;

    friend bool operator==(const RetrievalPair&, const RetrievalPair&) = default;
};

inline const std::vector<std::size_t> kDefaultTopK = {1, 5, 50};

/// Ranks from a square similarity matrix, sim[i][j] = similarity of query i to gallery j.
std::vector<std::size_t> ranks_from_similarity(const std::vector<std::vector<double>>& sim);

/// Cosine-similarity ranks; query i's true match is gallery i. Throws
/// DegenerateInputError for a zero-norm embedding.
std::vector<std::size_t> rank_matrix(const Embeddings& queries, const Embeddings& gallery);

/// Throws ContractError for empty ranks or k == 0.
double recall_at_k(std::span<const std::size_t> ranks, std::size_t k);
std::size_t median_rank(std::span<const std::size_t> ranks);

RetrievalReport make_report(Direction d, std::vector<std::size_t> ranks, std::span<const std::size_t> ks);

/// Both directions from aligned video / paragraph embeddings.
RetrievalPair evaluate_embeddings(const Embeddings& videos, const Embeddings& paragraphs,
                                  std::span<const std::size_t> ks = kDefaultTopK);

RetrievalPair evaluate_retrieval(const model::HseModelParams& params, const data::Corpus& corpus,
                                 std::span<const std::size_t> ks = kDefaultTopK,
                                 const model::EncoderOptions& options = {});
RetrievalPair evaluate_retrieval(const model::FlatModelParams& params, const data::Corpus& corpus,
                                 std::span<const std::size_t> ks = kDefaultTopK);

/// evaluate_retrieval on the first min(n, max_units) clips and sentences of each pair.
RetrievalPair evaluate_partial(const model::HseModelParams& params, const data::Corpus& corpus,
                               std::size_t max_units, std::span<const std::size_t> ks = kDefaultTopK,
                               const model::EncoderOptions& options = {});

struct ZeroShotReport {
    std::vector<int> labels;       // label ids in phrase order
    std::vector<int> truth;        // per clip
    std::vector<int> predicted;    // per clip
    std::size_t top_k = 5;         // after clamping to the label count
    double top1 = 0.0;
    double topk = 0.0;

    friend bool operator==(const ZeroShotReport&, const ZeroShotReport&) = default;
};

/// Nearest label embedding per clip. A clip counts as a top-k hit when fewer
/// than k labels score strictly above its true label.
ZeroShotReport zeroshot_from_embeddings(const Embeddings& clips, std::span<const int> truth,
                                        const Embeddings& label_embeddings, std::span<const int> labels,
                                        std::size_t top_k = 5);

/// Encodes every labelled clip of `corpus` with the low video encoder and every
/// phrase with the low text encoder. Throws ContractError for an empty label
/// set, a corpus without clip labels, or a clip label with no phrase.
ZeroShotReport zeroshot_classify(const model::HseModelParams& params, const data::Corpus& corpus,
                                 std::span<const data::LabelPhrase> phrases, std::size_t top_k = 5);

// Reports as "name<TAB>k<TAB>value" lines, and as a JSON summary.
void write_tsv(std::ostream& out, const RetrievalPair& r);
void write_tsv(std::ostream& out, const ZeroShotReport& r);
std::string to_json(const RetrievalPair& r);
std::string to_json(const ZeroShotReport& r);

}  // namespace hse::eval
