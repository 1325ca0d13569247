#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "rkid/corrupt.hpp"
#include "rkid/integrate.hpp"
#include "rkid/loss.hpp"
#include "rkid/stepper.hpp"

namespace rkid {

inline constexpr int kFormatVersion = 1;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Trajectory CSV: header "t,x1,...,xn", one row per sample.
void write_trajectory_csv(std::ostream& out, const Vector& times, const Matrix& states, std::string_view column_prefix = "x");
Trajectory read_trajectory_csv(std::istream& in);
void save_trajectory_csv(const std::filesystem::path& path, const Vector& times, const Matrix& states,
                         std::string_view column_prefix = "x");
Trajectory load_trajectory_csv(const std::filesystem::path& path);

// Dataset bundle: one JSON object with times, Y and optional X, N (matrices as
// arrays of rows) plus provenance.
nlohmann::json dataset_to_json(const NoisyDataset& data);
NoisyDataset dataset_from_json(const nlohmann::json& j);
void save_dataset(const std::filesystem::path& path, const NoisyDataset& data);
NoisyDataset load_dataset(const std::filesystem::path& path);

struct TrainedModel {
  FlowModel flow;
  LossConfig loss;
  /// Learned noise files, relative to the model file's directory.
  std::vector<std::string> noise_files;
  nlohmann::json report = nlohmann::json::object();
  std::string config_hash;
  int format_version = kFormatVersion;
};

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

nlohmann::json loss_config_to_json(const LossConfig& config);
LossConfig loss_config_from_json(const nlohmann::json& j, LossConfig defaults = {});

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

/// Pretty JSON text with a trailing newline; stable for identical input.
std::string dump_json(const nlohmann::json& j);
nlohmann::json parse_json_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// 64-bit FNV-1a digest as 16 hex digits.
std::string content_hash(std::string_view text);

}  // namespace rkid
