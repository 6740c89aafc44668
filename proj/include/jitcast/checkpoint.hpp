#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "jitcast/ensemble.hpp"
#include "jitcast/features.hpp"
#include "jitcast/readings.hpp"
#include "jitcast/tensor.hpp"
#include "jitcast/transformer.hpp"

namespace jitcast::io {

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};
/// Missing magic, unreadable header JSON, or a header that contradicts itself.
class CorruptHeaderError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};
class VersionMismatchError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};
/// The file ends before the header or tensor block does.
class TruncatedCheckpointError : public CheckpointError {
public:
    using CheckpointError::CheckpointError;
};

/// Everything needed to forecast one cluster without the original data.
struct ClusterCheckpoint {
    int cluster = 0;
    std::uint64_t seed = 0;
    jit::JitEnsemble ensemble;
    std::optional<model::Transformer> vanilla;
    data::FeatureTransforms transforms;
    data::DailySeries series;  // cluster-average daily kWh the model was trained on
    Tensor centroids;          // all cluster centroids, k x d
    std::array<double, 3> split_fractions{0.8, 0.1, 0.1};  // train, val, test
};

/// Writes "JITCKPT1", a little-endian uint64 header length, a JSON header and a
/// block of little-endian doubles. The file appears atomically (temp + rename).
void save_checkpoint(const ClusterCheckpoint& checkpoint, const std::filesystem::path& path);
void save_checkpoint(const ClusterCheckpoint& checkpoint, std::ostream& out);

/// Throws CorruptHeaderError, VersionMismatchError or TruncatedCheckpointError;
/// never returns partial state.
ClusterCheckpoint load_checkpoint(const std::filesystem::path& path);
ClusterCheckpoint load_checkpoint_bytes(const std::string& bytes, const std::string& source = "<memory>");

/// Seven-day forecast whose first day is `horizon_date`, observing the stored
/// series up to the day before. Throws std::invalid_argument when the series
/// does not cover the encoder and observed windows ending there.
struct DatedForecast {
    std::vector<Date> dates;
    jit::ForecastResult result;
};
DatedForecast forecast_from_checkpoint(const ClusterCheckpoint& checkpoint, Date horizon_date);

}  // namespace jitcast::io
