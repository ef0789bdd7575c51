#pragma once

// Initialisation, Adam, the step-decay learning-rate schedule and the epoch loop.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hse/data.hpp"
#include "hse/losses.hpp"
#include "hse/model.hpp"

namespace hse::train {

enum class Architecture { hierarchical, flat };

std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view text);

struct TrainConfig {
    double learning_rate = 1e-3;
    double decay_factor = 10.0;
    std::size_t decay_every_epochs = 10;
    std::size_t epochs = 15;
    std::size_t batch_size = 8;
    std::uint64_t seed = 7;
    Architecture architecture = Architecture::hierarchical;
    std::size_t hidden_low = 32;
    std::size_t hidden_high = 32;
    bool carry_low_state = false;
    loss::LossConfig loss;

    /// Throws ContractError naming the first bad field. lr == 0 is accepted so
    /// a run can leave the initial parameters untouched.
    void validate() const;
};

/// learning_rate / decay_factor^floor(epoch / decay_every_epochs)
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

/// Adam moments for one ordered list of parameter tensors.
struct AdamState {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t step = 0;
    std::vector<std::vector<double>> m, v;
};

/// One bias-corrected Adam update using each tensor's `grad`. The first call
/// sizes the moment buffers; later calls must pass the same tensors in the
/// same order. Throws ContractError for a missing or mis-sized gradient.
void optimizer_step(AdamState& state, std::span<tk::Tensor* const> params, double lr);

/// Weights ~ N(0, 0.01), biases zero; a pure function of (dims, seed).
model::HseModelParams init_params(const model::ModelDims& dims, std::uint64_t seed);
model::FlatModelParams init_flat_params(const model::ModelDims& dims, std::uint64_t seed);

struct EpochLog {
    std::size_t epoch = 0;
    double learning_rate = 0.0;
    std::size_t batches = 0;
    /// Mean over the epoch's batches of each batch-normalised component.
    loss::LossBreakdown mean;
};

struct TrainResult {
    model::HseModelParams params;
    std::vector<EpochLog> log;
};

struct FlatTrainResult {
    model::FlatModelParams params;
    std::vector<EpochLog> log;
};

/// Raised when the objective turns non-finite; what() names the component,
/// epoch and batch.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using ProgressFn = std::function<void(const EpochLog&)>;

/// Model dims derived from the corpus feature sizes and the config's hidden sizes.
model::ModelDims dims_for(const data::Corpus& corpus, const TrainConfig& config);

TrainResult train(const data::Corpus& corpus, const TrainConfig& config,
                  const ProgressFn& progress = {});
/// Continues from `initial` instead of a fresh initialisation.
TrainResult train(const data::Corpus& corpus, const TrainConfig& config,
                  model::HseModelParams initial, const ProgressFn& progress = {});

/// FSE baseline: high-level matching and clustering only.
FlatTrainResult train_flat(const data::Corpus& corpus, const TrainConfig& config,
                           const ProgressFn& progress = {});

}  // namespace hse::train
