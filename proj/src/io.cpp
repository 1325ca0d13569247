#include "rkid/io.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "rkid/errors.hpp"

namespace rkid {

using nlohmann::json;

std::string format_double(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, result.ptr);
}

namespace {

double parse_double(std::string_view text, std::size_t line) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  double value = 0.0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc() || result.ptr != text.data() + text.size()) {
    std::ostringstream msg;
    msg << "malformed number '" << text << "' on CSV line " << line;
    throw ValidationError(msg.str());
  }
  return value;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Vector& times, const Matrix& states, std::string_view column_prefix) {
  if (times.size() != states.cols()) throw ValidationError("time count does not match state count");
  out << 't';
  for (Eigen::Index i = 0; i < states.rows(); ++i) out << ',' << column_prefix << (i + 1);
  out << '\n';
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    out << format_double(times(j));
    for (Eigen::Index i = 0; i < states.rows(); ++i) out << ',' << format_double(states(i, j));
    out << '\n';
  }
}

Trajectory read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("CSV is empty");
  const auto header = split(line);
  if (header.size() < 2 || header.front() != "t") throw ValidationError("CSV header must be t,x1,...,xn");
  const std::size_t n = header.size() - 1;
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line);
    if (fields.size() != n + 1) {
      std::ostringstream msg;
      msg << "CSV line " << line_no << " has " << fields.size() << " fields, expected " << n + 1;
      throw ValidationError(msg.str());
    }
    for (std::string_view f : fields) values.push_back(parse_double(f, line_no));
    ++rows;
  }
  if (rows == 0) throw ValidationError("CSV has no data rows");
  Trajectory traj{Vector(static_cast<Eigen::Index>(rows)),
                  Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows))};
  for (std::size_t r = 0; r < rows; ++r) {
    traj.times(static_cast<Eigen::Index>(r)) = values[r * (n + 1)];
    for (std::size_t i = 0; i < n; ++i) {
      traj.states(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)) = values[r * (n + 1) + 1 + i];
    }
  }
  traj.validate();
  return traj;
}

void save_trajectory_csv(const std::filesystem::path& path, const Vector& times, const Matrix& states,
                         std::string_view column_prefix) {
  std::ostringstream out;
  write_trajectory_csv(out, times, states, column_prefix);
  write_text_file(path, out.str());
}

Trajectory load_trajectory_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  try {
    return read_trajectory_csv(in);
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) throw ValidationError("matrix must be a non-empty array of rows");
  const std::size_t cols = j.front().size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ValidationError("matrix rows must have equal length");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = j[i][c].get<double>();
    }
  }
  return m;
}

namespace {

json vector_to_json(const Vector& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vector vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void require(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("missing field '") + key + "'");
}

}  // namespace

json dataset_to_json(const NoisyDataset& data) {
  json j;
  j["format"] = "rkid-dataset";
  j["version"] = kFormatVersion;
  j["n"] = data.dim();
  j["m"] = data.size();
  j["times"] = vector_to_json(data.times);
  j["Y"] = matrix_to_json(data.observations);
  j["X"] = data.truth ? matrix_to_json(*data.truth) : json(nullptr);
  j["N"] = data.true_noise ? matrix_to_json(*data.true_noise) : json(nullptr);
  j["provenance"] = data.provenance;
  return j;
}

NoisyDataset dataset_from_json(const json& j) {
  try {
    if (j.value("format", "") != "rkid-dataset") throw ValidationError("not a dataset file");
    require(j, "times");
    require(j, "Y");
    NoisyDataset d;
    d.times = vector_from_json(j.at("times"));
    d.observations = matrix_from_json(j.at("Y"));
    if (j.contains("X") && !j.at("X").is_null()) d.truth = matrix_from_json(j.at("X"));
    if (j.contains("N") && !j.at("N").is_null()) d.true_noise = matrix_from_json(j.at("N"));
    d.provenance = j.value("provenance", json::object());
    d.validate();
    return d;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed dataset: ") + e.what());
  }
}

void save_dataset(const std::filesystem::path& path, const NoisyDataset& data) {
  write_text_file(path, dump_json(dataset_to_json(data)));
}

NoisyDataset load_dataset(const std::filesystem::path& path) {
  try {
    return dataset_from_json(parse_json_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

json loss_config_to_json(const LossConfig& c) {
  return {{"q", c.q}, {"rho", c.rho}, {"omega0", c.omega0}, {"gamma", c.gamma}, {"beta", c.beta}};
}

LossConfig loss_config_from_json(const json& j, LossConfig c) {
  c.q = j.value("q", c.q);
  c.rho = j.value("rho", c.rho);
  c.omega0 = j.value("omega0", c.omega0);
  c.gamma = j.value("gamma", c.gamma);
  c.beta = j.value("beta", c.beta);
  c.validate();
  return c;
}

json model_to_json(const TrainedModel& model) {
  json j;
  j["format"] = "rkid-model";
  j["version"] = model.format_version;
  j["widths"] = model.flow.params.widths;
  j["parameters"] = vector_to_json(flatten(model.flow.params));
  j["tableau"] = {{"A", matrix_to_json(model.flow.tableau.a)}, {"b", vector_to_json(model.flow.tableau.b)}};
  j["loss"] = loss_config_to_json(model.loss);
  j["noise_files"] = model.noise_files;
  j["report"] = model.report;
  j["config_hash"] = model.config_hash;
  return j;
}

TrainedModel model_from_json(const json& j) {
  try {
    if (j.value("format", "") != "rkid-model") throw ValidationError("not a model file");
    require(j, "version");
    require(j, "widths");
    require(j, "parameters");
    require(j, "tableau");
    TrainedModel model;
    model.format_version = j.at("version").get<int>();
    if (model.format_version != kFormatVersion) throw ValidationError("unsupported model format version");
    const auto widths = j.at("widths").get<std::vector<int>>();
    model.flow.params = unflatten(widths, vector_from_json(j.at("parameters")));
    model.flow.tableau.a = matrix_from_json(j.at("tableau").at("A"));
    model.flow.tableau.b = vector_from_json(j.at("tableau").at("b"));
    model.flow.tableau.validate();
    model.loss = loss_config_from_json(j.value("loss", json::object()));
    model.noise_files = j.value("noise_files", std::vector<std::string>{});
    model.report = j.value("report", json::object());
    model.config_hash = j.value("config_hash", "");
    model.flow.params.validate();
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  write_text_file(path, dump_json(model_to_json(model)));
}

TrainedModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(parse_json_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string content_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

}  // namespace rkid
