#include "marginfilter/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace marginfilter::io {

using nlohmann::json;

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

[[noreturn]] void fail(const std::string& source, std::size_t line, const std::string& what) {
  throw FormatError(source + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string(what) + ": malformed JSON: " + e.what());
  }
}

void check_version(const json& j, const char* what) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw FormatError(std::string(what) + ": missing field 'format_version'");
  }
  if (!j["format_version"].is_number_integer() || j["format_version"].get<int>() != kFormatVersion) {
    throw FormatError(std::string(what) + ": unsupported format_version (expected " + std::to_string(kFormatVersion) + ")");
  }
}

template <class T>
T field(const json& j, const char* name, const char* what) {
  if (!j.contains(name)) throw FormatError(std::string(what) + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw FormatError(std::string(what) + ": field '" + name + "' has the wrong type");
  }
}

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.values()}};
}

Matrix matrix_from_json(const json& j, const char* what) {
  const auto rows = field<std::size_t>(j, "rows", what);
  const auto cols = field<std::size_t>(j, "cols", what);
  auto data = field<std::vector<double>>(j, "data", what);
  if (data.size() != rows * cols) throw FormatError(std::string(what) + ": field 'data' does not match rows x cols");
  return {rows, cols, std::move(data)};
}

json filter_json(const FilterBank& filter) {
  return {{"format_version", kFormatVersion},
          {"f", filter.length()},
          {"d", filter.channels()},
          {"n0", filter.n0},
          {"coeffs", filter.coeffs.values()}};
}

FilterBank filter_from(const json& j) {
  constexpr const char* what = "filter";
  check_version(j, what);
  const auto f = field<long long>(j, "f", what);
  const auto d = field<long long>(j, "d", what);
  const auto n0 = field<int>(j, "n0", what);
  auto coeffs = field<std::vector<double>>(j, "coeffs", what);
  if (f < 1) throw FormatError("filter: field 'f' must be >= 1");
  if (d < 1) throw FormatError("filter: field 'd' must be >= 1");
  if (coeffs.size() != static_cast<std::size_t>(f * d)) {
    throw FormatError("filter: field 'f' (" + std::to_string(f) + ") and 'd' (" + std::to_string(d) +
                      ") do not match the " + std::to_string(coeffs.size()) + " entries of 'coeffs'");
  }
  if (n0 < 0 || n0 >= f) throw FormatError("filter: field 'n0' must lie in [0, f-1]");
  try {
    return {Matrix(static_cast<std::size_t>(f), static_cast<std::size_t>(d), std::move(coeffs)), n0};
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("filter: ") + e.what());
  }
}

json transitions_json(const TransitionMatrix& t) {
  json rows = json::array();
  for (std::size_t a = 0; a < t.M.rows(); ++a) {
    rows.push_back(std::vector<double>(t.M.row(a).begin(), t.M.row(a).end()));
  }
  return {{"format_version", kFormatVersion}, {"classes", t.classes()}, {"M", rows}, {"prior", t.prior}};
}

TransitionMatrix transitions_from(const json& j) {
  constexpr const char* what = "transitions";
  check_version(j, what);
  const auto c = field<int>(j, "classes", what);
  const auto rows = field<std::vector<std::vector<double>>>(j, "M", what);
  TransitionMatrix t;
  t.prior = field<std::vector<double>>(j, "prior", what);
  if (c < 1 || rows.size() != static_cast<std::size_t>(c) || t.prior.size() != static_cast<std::size_t>(c)) {
    throw FormatError("transitions: field 'classes' does not match 'M' / 'prior'");
  }
  t.M = Matrix(rows.size(), rows.size());
  for (std::size_t a = 0; a < rows.size(); ++a) {
    if (rows[a].size() != rows.size()) throw FormatError("transitions: field 'M' is not square");
    for (std::size_t b = 0; b < rows.size(); ++b) t.M(a, b) = rows[a][b];
  }
  try {
    validate(t);
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("transitions: ") + e.what());
  }
  return t;
}

json svm_json(const SvmModel& m) {
  std::vector<double> sv_alphas(m.sv_coef.size());
  for (std::size_t k = 0; k < sv_alphas.size(); ++k) sv_alphas[k] = m.sv_coef[k] * m.sv_labels[k];
  return {{"sigma_k", m.kernel.sigma_k}, {"C", m.C},           {"box", m.box},
          {"bias", m.bias},             {"objective", m.objective},
          {"sv_indices", m.sv_indices}, {"sv_labels", m.sv_labels},
          {"sv_alphas", sv_alphas},     {"sv_rows", matrix_to_json(m.sv_rows)}};
}

SvmModel svm_from(const json& j) {
  constexpr const char* what = "svm";
  SvmModel m;
  m.kernel.sigma_k = field<double>(j, "sigma_k", what);
  m.C = field<double>(j, "C", what);
  m.box = field<double>(j, "box", what);
  m.bias = field<double>(j, "bias", what);
  m.objective = field<double>(j, "objective", what);
  m.sv_indices = field<std::vector<std::size_t>>(j, "sv_indices", what);
  m.sv_labels = field<std::vector<double>>(j, "sv_labels", what);
  const auto alphas = field<std::vector<double>>(j, "sv_alphas", what);
  m.sv_rows = matrix_from_json(field<json>(j, "sv_rows", what), "svm.sv_rows");
  if (!(m.kernel.sigma_k > 0.0)) throw FormatError("svm: field 'sigma_k' must be positive");
  const std::size_t ns = m.sv_rows.rows();
  if (m.sv_labels.size() != ns || alphas.size() != ns || m.sv_indices.size() != ns) {
    throw FormatError("svm: support vector fields differ in length");
  }
  m.sv_coef.resize(ns);
  for (std::size_t k = 0; k < ns; ++k) m.sv_coef[k] = alphas[k] * m.sv_labels[k];
  return m;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, ptr};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string() + ": cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << contents;
    out.flush();
    if (!out) throw std::runtime_error(path.string() + ": write failed");
  }
  std::filesystem::rename(tmp, path);
}

Dataset parse_dataset(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty() || trim(lines.front()).empty()) fail(source, 1, "empty file");
  const auto header = split_commas(lines.front());
  if (header.size() < 2 || trim(header.front()) != "t") fail(source, 1, "header must start with 't' and name at least one channel");
  const bool labeled = trim(header.back()) == "label";
  const std::size_t d = header.size() - 1 - (labeled ? 1 : 0);
  if (d == 0) fail(source, 1, "no channel columns");

  std::vector<double> values;
  std::vector<int> labels;
  std::size_t n = 0;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) {
      if (ln + 1 == lines.size()) break;
      fail(source, ln + 1, "blank line");
    }
    const auto cells = split_commas(lines[ln]);
    if (cells.size() != header.size()) {
      fail(source, ln + 1, "expected " + std::to_string(header.size()) + " columns, found " + std::to_string(cells.size()));
    }
    for (std::size_t v = 0; v < d; ++v) {
      double value = 0.0;
      if (!parse_number(cells[v + 1], value) || !std::isfinite(value)) {
        fail(source, ln + 1, "column " + std::to_string(v + 2) + " is not a finite number: '" + std::string(cells[v + 1]) + "'");
      }
      values.push_back(value);
    }
    if (labeled) {
      int label = 0;
      if (!parse_number(cells.back(), label) || label < 1) fail(source, ln + 1, "label must be an integer >= 1");
      labels.push_back(label);
    }
    ++n;
  }
  if (n == 0) fail(source, 2, "no samples");
  Dataset ds;
  ds.x = Matrix(n, d, std::move(values));
  if (labeled) ds.y = LabelSequence::from_values(std::move(labels));
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) { return parse_dataset(read_file(path), path.string()); }

void save_dataset(const std::filesystem::path& path, const SignalMatrix& x, const std::optional<LabelSequence>& y) {
  if (y && y->size() != x.rows()) throw std::invalid_argument("save_dataset: label count differs from sample count");
  std::string out = "t";
  for (std::size_t v = 0; v < x.cols(); ++v) out += ",ch" + std::to_string(v + 1);
  if (y) out += ",label";
  out += '\n';
  for (std::size_t i = 0; i < x.rows(); ++i) {
    out += std::to_string(i);
    for (std::size_t v = 0; v < x.cols(); ++v) {
      out += ',';
      out += format_double(x(i, v));
    }
    if (y) out += "," + std::to_string((*y)[i]);
    out += '\n';
  }
  write_file_atomic(path, out);
}

std::string filter_to_json(const FilterBank& filter) { return filter_json(filter).dump(2); }
FilterBank filter_from_json(const std::string& text) { return filter_from(parse_json(text, "filter")); }
void save_filter(const std::filesystem::path& path, const FilterBank& filter) {
  write_file_atomic(path, filter_to_json(filter) + "\n");
}
FilterBank load_filter(const std::filesystem::path& path) { return filter_from_json(read_file(path)); }

std::string transitions_to_json(const TransitionMatrix& t) { return transitions_json(t).dump(2); }
TransitionMatrix transitions_from_json(const std::string& text) {
  return transitions_from(parse_json(text, "transitions"));
}
void save_transitions(const std::filesystem::path& path, const TransitionMatrix& t) {
  write_file_atomic(path, transitions_to_json(t) + "\n");
}
TransitionMatrix load_transitions(const std::filesystem::path& path) { return transitions_from_json(read_file(path)); }

std::string labeler_to_json(const SequenceLabeler& labeler) {
  json pairwise = json::array();
  for (const auto& m : labeler.models.pairwise) pairwise.push_back(svm_json(m));
  json ova = json::array();
  for (const auto& m : labeler.models.one_vs_all) ova.push_back(svm_json(m));
  json platt = json::array();
  for (const auto& p : labeler.platt) platt.push_back({{"A", p.A}, {"B", p.B}});
  const json j = {
      {"format_version", kFormatVersion},
      {"kind", "sequence_labeler"},
      {"method", std::string(to_string(labeler.method))},
      {"hyperparams",
       {{"C", labeler.hp.C},
        {"lambda", labeler.hp.lambda},
        {"sigma_k", labeler.hp.sigma_k},
        {"f", labeler.hp.f},
        {"n0", labeler.hp.n0}}},
      {"classes", labeler.models.classes},
      {"filter", filter_json(labeler.filter)},
      {"pairwise", pairwise},
      {"one_vs_all", ova},
      {"platt", platt},
      {"transitions", transitions_json(labeler.transitions)},
      {"scaled_likelihood", labeler.scaled_likelihood},
  };
  return j.dump(1);
}

SequenceLabeler labeler_from_json(const std::string& text) {
  constexpr const char* what = "model";
  const json j = parse_json(text, what);
  check_version(j, what);
  if (field<std::string>(j, "kind", what) != "sequence_labeler") throw FormatError("model: field 'kind' is not 'sequence_labeler'");
  SequenceLabeler l;
  try {
    l.method = parse_method(field<std::string>(j, "method", what));
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("model: field 'method': ") + e.what());
  }
  const json hp = field<json>(j, "hyperparams", what);
  l.hp.C = field<double>(hp, "C", "model.hyperparams");
  l.hp.lambda = field<double>(hp, "lambda", "model.hyperparams");
  l.hp.sigma_k = field<double>(hp, "sigma_k", "model.hyperparams");
  l.hp.f = field<std::size_t>(hp, "f", "model.hyperparams");
  l.hp.n0 = field<int>(hp, "n0", "model.hyperparams");
  l.models.classes = field<int>(j, "classes", what);
  l.filter = filter_from(field<json>(j, "filter", what));
  for (const auto& m : field<json>(j, "pairwise", what)) l.models.pairwise.push_back(svm_from(m));
  for (const auto& m : field<json>(j, "one_vs_all", what)) l.models.one_vs_all.push_back(svm_from(m));
  for (const auto& p : field<json>(j, "platt", what)) {
    l.platt.push_back({field<double>(p, "A", "model.platt"), field<double>(p, "B", "model.platt")});
  }
  l.transitions = transitions_from(field<json>(j, "transitions", what));
  l.scaled_likelihood = field<bool>(j, "scaled_likelihood", what);

  const auto c = static_cast<std::size_t>(std::max(l.models.classes, 0));
  if (l.models.classes < 2 || l.models.pairwise.size() != c * (c - 1) / 2 || l.models.one_vs_all.size() != c ||
      l.platt.size() != c || l.transitions.prior.size() != c) {
    throw FormatError("model: field 'classes' does not match the stored banks");
  }
  for (const auto* bank : {&l.models.pairwise, &l.models.one_vs_all}) {
    for (const auto& m : *bank) {
      if (!m.sv_rows.empty() && m.sv_rows.cols() != l.filter.channels()) {
        throw FormatError("model: support vectors do not match the filter channel count");
      }
    }
  }
  return l;
}

void save_labeler(const std::filesystem::path& path, const SequenceLabeler& labeler) {
  write_file_atomic(path, labeler_to_json(labeler) + "\n");
}
SequenceLabeler load_labeler(const std::filesystem::path& path) { return labeler_from_json(read_file(path)); }

void save_history(const std::filesystem::path& path, const std::vector<IterationRecord>& history) {
  std::string out = "iter,J,normF\n";
  for (const auto& h : history) {
    out += std::to_string(h.iter) + "," + format_double(h.J) + "," + format_double(h.normF) + "\n";
  }
  write_file_atomic(path, out);
}

void save_labels(const std::filesystem::path& path, const LabelSequence& labels) {
  std::string out = "t,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  write_file_atomic(path, out);
}

LabelSequence load_labels(const std::filesystem::path& path) {
  const std::string source = path.string();
  const auto lines = lines_of(read_file(path));
  if (lines.empty() || trim(lines.front()) != "t,label") fail(source, 1, "header must be 't,label'");
  std::vector<int> labels;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto cells = split_commas(lines[ln]);
    int label = 0;
    if (cells.size() != 2 || !parse_number(cells[1], label) || label < 1) fail(source, ln + 1, "expected 't,label' with label >= 1");
    labels.push_back(label);
  }
  if (labels.empty()) fail(source, 2, "no samples");
  return LabelSequence::from_values(std::move(labels));
}

std::string sweep_to_csv(const SweepResult& result) {
  std::string out = "axis_value,method,decode,seed,test_error\n";
  for (const auto& e : result.entries) {
    out += format_double(e.axis_value) + "," + std::string(to_string(e.method)) + "," + std::string(to_string(e.decode)) +
           "," + std::to_string(e.seed) + "," + format_double(e.test_error) + "\n";
  }
  return out;
}

std::string sweep_summary_to_csv(const SweepResult& result) {
  std::string out = "axis_value,method,decode,mean_error,seeds\n";
  std::vector<std::tuple<double, Method, DecodeMode>> keys;
  for (const auto& e : result.entries) {
    const auto key = std::make_tuple(e.axis_value, e.method, e.decode);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  for (const auto& [value, method, decode] : keys) {
    const auto errs = result.errors(value, method, decode);
    out += format_double(value) + "," + std::string(to_string(method)) + "," + std::string(to_string(decode)) + "," +
           format_double(result.mean_error(value, method, decode)) + "," + std::to_string(errs.size()) + "\n";
  }
  return out;
}

void save_sweep(const std::filesystem::path& path, const SweepResult& result) {
  write_file_atomic(path, sweep_to_csv(result));
}

void save_sweep_summary(const std::filesystem::path& path, const SweepResult& result) {
  write_file_atomic(path, sweep_summary_to_csv(result));
}

std::vector<ResultRow> load_sweep(const std::filesystem::path& path) {
  const std::string source = path.string();
  const auto lines = lines_of(read_file(path));
  if (lines.empty() || trim(lines.front()) != "axis_value,method,decode,seed,test_error") {
    fail(source, 1, "header must be 'axis_value,method,decode,seed,test_error'");
  }
  std::vector<ResultRow> rows;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (trim(lines[ln]).empty()) continue;
    const auto cells = split_commas(lines[ln]);
    ResultRow r;
    if (cells.size() != 5 || !parse_number(cells[0], r.axis_value) || !parse_number(cells[3], r.seed) ||
        !parse_number(cells[4], r.test_error)) {
      fail(source, ln + 1, "malformed result row");
    }
    r.method = std::string(trim(cells[1]));
    r.decode = std::string(trim(cells[2]));
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace marginfilter::io
