#include "polymoe/io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "polymoe/errors.hpp"

namespace polymoe {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json read_json_file(const std::string& path) {
  if (!std::filesystem::exists(path))
    throw data_error("no such file: " + path);
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw data_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd vector_from_json(const json& a) {
  Eigen::VectorXd v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v[static_cast<Eigen::Index>(i)] = a[i];
  return v;
}

}  // namespace

json model_to_json(const MoEParams& model) {
  json j;
  j["version"] = 1;
  j["family"] = model.family.name();
  j["s"] = model.s();
  j["k"] = model.k();
  json w = json::array();
  for (int r = 0; r < model.gate.W.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < model.gate.W.cols(); ++c) row.push_back(model.gate.W(r, c));
    w.push_back(row);
  }
  j["gate_w"] = w;
  j["pinned_expert"] = model.m();
  json experts = json::array();
  for (const auto& th : model.experts) experts.push_back(vector_to_json(th));
  j["experts"] = experts;
  j["x_scaling"] = {{"offset", vector_to_json(model.x_scaling.offset)},
                    {"scale", vector_to_json(model.x_scaling.scale)}};
  return j;
}

MoEParams model_from_json(const json& j) {
  try {
    if (j.at("version").get<int>() != 1)
      throw data_error("unsupported model version");
    MoEParams model;
    model.family = ExpFamily::parse(j.at("family").get<std::string>());
    const int s = j.at("s").get<int>();
    const int k = j.at("k").get<int>();
    model.basis = PolyBasis(s, k);
    const auto& experts = j.at("experts");
    const int m = static_cast<int>(experts.size());
    for (const auto& th : experts) model.experts.push_back(vector_from_json(th));
    model.gate = GateParams::zeros(m, s);
    const auto& w = j.at("gate_w");
    if (static_cast<int>(w.size()) != m - 1)
      throw data_error("model: gate_w must have m-1 rows");
    for (int r = 0; r < m - 1; ++r) {
      const auto& row = w[static_cast<std::size_t>(r)];
      if (static_cast<int>(row.size()) != s + 1)
        throw data_error("model: gate_w rows must have s+1 entries");
      for (int c = 0; c <= s; ++c) model.gate.W(r, c) = row[static_cast<std::size_t>(c)];
    }
    if (j.at("pinned_expert").get<int>() != m)
      throw data_error("model: pinned_expert must equal the expert count");
    const auto& sc = j.at("x_scaling");
    model.x_scaling.offset = vector_from_json(sc.at("offset"));
    model.x_scaling.scale = vector_from_json(sc.at("scale"));
    model.validate();
    return model;
  } catch (const json::exception& e) {
    throw data_error(std::string("malformed model file: ") + e.what());
  }
}

json fit_report_to_json(const FitReport& report) {
  json j;
  j["final_loglik"] = report.final_loglik();
  j["loglik_trajectory"] = report.loglik_trajectory;
  j["iterations"] = report.iterations;
  j["converged"] = report.converged;
  j["restart_index"] = report.restart_index;
  j["clip_events"] = report.clip_events;
  return j;
}

Dataset read_dataset_csv(const std::string& path) {
  if (!std::filesystem::exists(path)) throw data_error("no such file: " + path);
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path);
  std::string line;
  std::vector<std::string> header;
  // comment lines before the header carry provenance; skip them
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') break;
  }
  {
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) header.push_back(tok);
  }
  if (header.size() < 2 || header.back() != "y")
    throw data_error(path + ": expected header x1,..,xs,y");
  const int s = static_cast<int>(header.size()) - 1;
  std::vector<std::vector<double>> rows;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string tok;
    std::vector<double> row;
    while (std::getline(ss, tok, ',')) {
      try {
        row.push_back(std::stod(tok));
      } catch (...) {
        throw data_error(path + ":" + std::to_string(lineno) + ": bad number '" +
                         tok + "'");
      }
    }
    if (static_cast<int>(row.size()) != s + 1)
      throw data_error(path + ":" + std::to_string(lineno) + ": wrong column count");
    rows.push_back(std::move(row));
  }
  Dataset data;
  data.X.resize(static_cast<long>(rows.size()), s);
  data.Y.resize(static_cast<long>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (int c = 0; c < s; ++c) data.X(static_cast<long>(i), c) = rows[i][static_cast<std::size_t>(c)];
    data.Y[static_cast<long>(i)] = rows[i][static_cast<std::size_t>(s)];
  }
  return data;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path);
  for (int c = 0; c < data.s(); ++c) out << 'x' << (c + 1) << ',';
  out << "y\n";
  for (long i = 0; i < data.n(); ++i) {
    for (int c = 0; c < data.s(); ++c) out << format_double(data.X(i, c)) << ',';
    out << format_double(data.Y[i]) << '\n';
  }
}

json target_to_json(const TargetSpec& target) {
  json j;
  j["family"] = target.family.name();
  j["kind"] = target_kind_name(target.kind);
  if (std::isinf(target.alpha))
    j["alpha"] = "inf";
  else
    j["alpha"] = target.alpha;
  j["s"] = target.s;
  j["px"] = "uniform";
  json p;
  switch (target.kind) {
    case TargetKind::smooth_sin:
      p["amplitude"] = target.params.amplitude;
      p["omega"] = target.params.omega;
      break;
    case TargetKind::trunc_power:
      p["knots"] = vector_to_json(target.params.knots);
      break;
    case TargetKind::polynomial:
      p["degree"] = target.params.degree;
      p["coeffs"] = vector_to_json(target.params.coeffs);
      break;
  }
  j["params"] = p;
  return j;
}

TargetSpec target_from_json(const json& j) {
  try {
    const ExpFamily family = ExpFamily::parse(j.at("family").get<std::string>());
    const TargetKind kind = parse_target_kind(j.at("kind").get<std::string>());
    double alpha = std::numeric_limits<double>::infinity();
    if (j.contains("alpha") && !j.at("alpha").is_string())
      alpha = j.at("alpha").get<double>();
    const int s = j.at("s").get<int>();
    if (j.contains("px") && j.at("px").get<std::string>() != "uniform")
      throw data_error("target: only the uniform covariate law is supported");
    TargetParams params;
    if (j.contains("params")) {
      const auto& p = j.at("params");
      if (p.contains("amplitude")) params.amplitude = p.at("amplitude").get<double>();
      if (p.contains("omega")) params.omega = p.at("omega").get<double>();
      if (p.contains("knots")) params.knots = vector_from_json(p.at("knots"));
      if (p.contains("degree")) params.degree = p.at("degree").get<int>();
      if (p.contains("coeffs")) params.coeffs = vector_from_json(p.at("coeffs"));
    }
    return make_target(kind, alpha, s, family, params);
  } catch (const json::exception& e) {
    throw data_error(std::string("malformed target file: ") + e.what());
  }
}

json estimate_to_json(const DivergenceEstimate& e) {
  return json{{"value", e.value},
              {"std_error", e.std_error},
              {"n_mc", e.n_mc},
              {"method", method_name(e.method)}};
}

json hellinger_to_json(const HellingerEstimate& e) {
  return json{{"dh", e.dh},          {"dh2", e.dh2},
              {"dh2_se", e.dh2_se},  {"n_mc", e.n_mc},
              {"method", method_name(e.method)}, {"clamped", e.clamped}};
}

json sandwich_to_json(const SandwichReport& r) {
  json j;
  j["kl"] = estimate_to_json(r.kl);
  j["hellinger"] = hellinger_to_json(r.hellinger);
  j["upper_divergence"] = estimate_to_json(r.upper);
  j["m_inf"] = r.m_inf;
  j["m_inf_segment"] = r.m_inf_segment;
  j["cs2"] = r.cs2;
  j["kl_upper_factor"] = r.kl_upper_factor;
  j["ratio_bounded"] = r.ratio_bounded;
  j["upper_ok"] = r.upper_ok;
  j["hellinger_ok"] = r.hellinger_ok;
  return j;
}

std::string config_hash(const json& j) {
  const std::string dump = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw std::invalid_argument(where + ": unknown key '" + it.key() + "'");
  }
}

}  // namespace polymoe
