#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pinc/error.hpp"
#include "pinc/format.hpp"
#include "pinc/net.hpp"

namespace pinc::net {

namespace {

constexpr int kFormatVersion = 1;

std::string num(double x) {
  if (!std::isfinite(x)) throw NumericalError("cannot serialize a non-finite value");
  return format_double(x);
}

template <class T>
T required(const nlohmann::json& obj, const char* key) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw FormatError(std::string("model document lacks '") + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("model document field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::string serialize_model(const NetworkModel& model) {
  const ParameterLayout layout(model.arch);
  if (static_cast<std::size_t>(model.params.size()) != layout.size()) {
    throw DimensionError("parameter count does not match architecture");
  }
  const Architecture& a = model.arch;
  const NormalizationRefs& n = model.norm;
  std::ostringstream os;
  os << "{\n";
  os << "  \"format_version\": " << kFormatVersion << ",\n";
  os << "  \"architecture\": {\n";
  os << "    \"input_dim\": " << a.input_dim << ",\n";
  os << "    \"output_dim\": " << a.output_dim << ",\n";
  os << "    \"n_layers\": " << a.n_layers << ",\n";
  os << "    \"hidden_size\": " << a.hidden_size << ",\n";
  os << "    \"activation\": \"" << to_string(a.activation) << "\",\n";
  os << "    \"skip_connections\": " << (a.skip_connections ? "true" : "false") << "\n";
  os << "  },\n";
  os << "  \"normalization\": {\n";
  os << "    \"t_ref\": " << num(n.t_ref) << ",\n";
  os << "    \"x_ref\": " << num(n.x_ref) << ",\n";
  os << "    \"P_ref\": " << num(n.P_ref) << ",\n";
  os << "    \"V_ref\": " << num(n.V_ref) << ",\n";
  os << "    \"rho_ref\": " << num(n.rho_ref) << "\n";
  os << "  },\n";
  os << "  \"parameters\": [";
  for (Eigen::Index i = 0; i < model.params.size(); ++i) {
    os << (i == 0 ? "\n    " : ",\n    ") << num(model.params[i]);
  }
  os << "\n  ]\n}\n";
  return os.str();
}

NetworkModel deserialize_model(const std::string& document) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed model document: ") + e.what());
  }
  if (!doc.is_object()) throw FormatError("model document is not an object");
  const int version = required<int>(doc, "format_version");
  if (version != kFormatVersion) {
    throw VersionError("unsupported model format_version " + std::to_string(version));
  }
  NetworkModel m;
  const auto& a = doc.contains("architecture") ? doc["architecture"] : nlohmann::json();
  m.arch.input_dim = required<int>(a, "input_dim");
  m.arch.output_dim = required<int>(a, "output_dim");
  m.arch.n_layers = required<int>(a, "n_layers");
  m.arch.hidden_size = required<int>(a, "hidden_size");
  try {
    m.arch.activation = activation_from_string(required<std::string>(a, "activation"));
    m.arch.validate();
  } catch (const ConfigError& e) {
    throw FormatError(e.what());
  }
  m.arch.skip_connections = required<bool>(a, "skip_connections");
  const auto& n = doc.contains("normalization") ? doc["normalization"] : nlohmann::json();
  m.norm.t_ref = required<double>(n, "t_ref");
  m.norm.x_ref = required<double>(n, "x_ref");
  m.norm.P_ref = required<double>(n, "P_ref");
  m.norm.V_ref = required<double>(n, "V_ref");
  m.norm.rho_ref = required<double>(n, "rho_ref");
  const auto values = required<std::vector<double>>(doc, "parameters");
  const ParameterLayout layout(m.arch);
  if (values.size() != layout.size()) {
    throw FormatError("model document has " + std::to_string(values.size()) +
                      " parameters, architecture needs " + std::to_string(layout.size()));
  }
  m.params = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                               static_cast<Eigen::Index>(values.size()));
  return m;
}

void save_model(const NetworkModel& model, const std::string& path) {
  const std::string doc = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << doc;
  if (!out) throw IoError("failed writing " + path);
}

NetworkModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

}  // namespace pinc::net
