#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hse/data.hpp"
#include "hse/evaluation.hpp"
#include "hse/losses.hpp"
#include "hse/model.hpp"
#include "hse/tensor.hpp"
#include "hse/training.hpp"

namespace {

using namespace hse;

data::SynthCorpus make_corpus(std::size_t pairs) {
    data::SynthSpec spec;
    spec.num_pairs = pairs;
    spec.seed = 3;
    return data::synth_generate(spec);
}

std::vector<const data::Pair*> batch_of(const data::Corpus& corpus, std::size_t n) {
    std::vector<const data::Pair*> batch;
    for (std::size_t i = 0; i < n && i < corpus.size(); ++i) batch.push_back(&corpus.pairs[i]);
    return batch;
}

void BM_GruStep(benchmark::State& state) {
    const auto hidden = static_cast<std::size_t>(state.range(0));
    model::ModelDims dims;
    dims.hidden_low = dims.hidden_high = hidden;
    const auto params = train::init_params(dims, 1);
    std::vector<double> x(dims.video_dim, 0.5), h(hidden, 0.1);
    for (auto _ : state) {
        h = model::gru_step(params.enc_v_low, x, h);
        benchmark::DoNotOptimize(h.data());
    }
}
BENCHMARK(BM_GruStep)->Arg(16)->Arg(32)->Arg(64);

void BM_EmbedVideo(benchmark::State& state) {
    const auto synth = make_corpus(1);
    const auto params = train::init_params(train::dims_for(synth.corpus, {}), 1);
    for (auto _ : state) {
        auto e = model::embed_video(params, synth.corpus.pairs[0].video);
        benchmark::DoNotOptimize(e);
    }
}
BENCHMARK(BM_EmbedVideo);

// Forward and backward of the full objective on one batch.
void BM_TotalLossBackward(benchmark::State& state) {
    const auto synth = make_corpus(static_cast<std::size_t>(state.range(0)));
    train::TrainConfig config;
    auto params = train::init_params(train::dims_for(synth.corpus, config), 1);
    const auto batch = batch_of(synth.corpus, synth.corpus.size());
    for (auto _ : state) {
        tk::Tape tape;
        const auto vars = model::bind(tape, params);
        auto loss = loss::total_loss(tape, vars, batch, config.loss);
        tape.backward(loss.total);
        benchmark::DoNotOptimize(loss.breakdown.total);
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_TotalLossBackward)->Arg(4)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_TrainEpoch(benchmark::State& state) {
    const auto synth = make_corpus(32);
    train::TrainConfig config;
    config.epochs = 1;
    for (auto _ : state) {
        auto result = train::train(synth.corpus, config);
        benchmark::DoNotOptimize(result.log.back().mean.total);
    }
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

void BM_RankMatrix(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(5);
    std::normal_distribution<double> normal;
    std::vector<std::vector<double>> sim(n, std::vector<double>(n));
    for (auto& row : sim)
        for (auto& v : row) v = normal(rng);
    for (auto _ : state) {
        auto ranks = eval::ranks_from_similarity(sim);
        benchmark::DoNotOptimize(ranks.data());
    }
}
BENCHMARK(BM_RankMatrix)->Arg(100)->Arg(1000);

}  // namespace

BENCHMARK_MAIN();
