#include "kepreg/io.hpp"

#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace kepreg {

Json to_json(const Vec& v) {
  Json a = Json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec vec_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("expected a numeric array");
  Vec v(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<int>(i)] = j[i].get<double>();
  return v;
}

Json to_json(const RunConfig& c) {
  Json j = Json::object();
  for (const auto& [k, v] : c.echo()) j[k] = v;
  return j;
}

Json to_json(const PeriodicOrbit& o) {
  Json j;
  j["dim"] = physical_dim(o.spec.dim);
  j["k"] = o.spec.k;
  j["T"] = o.spec.T;
  j["eps"] = o.eps;
  j["eta"] = o.eta;
  j["S"] = o.S;
  j["theta"] = o.theta;
  j["X0"] = to_json(o.x0);
  j["residual"] = o.residual_norm;
  j["iterations"] = o.iterations;
  j["energy_band"] = {o.energy_min, o.energy_max};
  j["tau_range"] = {o.tau_min, o.tau_max};
  j["max_K_drift"] = o.max_K_drift;
  if (o.max_BL_drift) j["max_BL_drift"] = *o.max_BL_drift;
  Json mult = Json::array();
  for (int i = 0; i < o.monodromy.multipliers.size(); ++i) {
    mult.push_back({o.monodromy.multipliers[i].real(), o.monodromy.multipliers[i].imag()});
  }
  j["floquet_multipliers"] = mult;
  j["degeneracy_dim_E"] = o.monodromy.degeneracy.dim_E;
  return j;
}

PeriodicOrbit orbit_from_json(const Json& j) {
  try {
    PeriodicOrbit o;
    const int d = j.at("dim").get<int>();
    if (d != 2 && d != 3) throw ConfigError("orbit record: dim must be 2 or 3");
    o.spec.dim = d == 2 ? Dim::Planar : Dim::Spatial;
    o.spec.k = j.at("k").get<int>();
    o.spec.T = j.at("T").get<double>();
    o.spec.validate();
    o.eps = j.at("eps").get<double>();
    o.eta = j.at("eta").get<int>();
    o.S = j.at("S").get<double>();
    o.theta = j.value("theta", 0.0);
    o.x0 = vec_from_json(j.at("X0"));
    if (o.x0.size() != state_size(o.spec.dim)) throw ConfigError("orbit record: X0 has the wrong size");
    o.residual_norm = j.value("residual", 0.0);
    return o;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed orbit record: ") + e.what());
  }
}

Json to_json(const CertificateReport& r) {
  Json j;
  j["dim"] = physical_dim(r.spec.dim);
  j["k"] = r.spec.k;
  j["T"] = r.spec.T;
  j["X0"] = to_json(r.x0);
  j["defect_numeric"] = to_json(r.defect_numeric);
  j["defect_closed_form"] = to_json(r.defect_closed_form);
  j["closed_form_mismatch"] = r.closed_form_mismatch;
  j["principal_angle"] = r.principal_angle;
  j["certified"] = r.certified;
  j["degeneracy_dim_E"] = r.degeneracy.dim_E;
  j["det_M"] = r.degeneracy.det_M;
  return j;
}

Json orbit_archive(const RunConfig& c, const std::vector<PeriodicOrbit>& orbits) {
  Json j;
  j["config"] = to_json(c);
  j["orbits"] = Json::array();
  for (const auto& o : orbits) j["orbits"].push_back(to_json(o));
  return j;
}

std::vector<PeriodicOrbit> load_orbit_archive(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open orbit archive '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("cannot parse orbit archive '" + path + "': " + e.what());
  }
  if (!j.contains("orbits") || !j["orbits"].is_array()) throw ConfigError("orbit archive has no 'orbits' array");
  std::vector<PeriodicOrbit> out;
  for (const auto& o : j["orbits"]) out.push_back(orbit_from_json(o));
  return out;
}

void write_seed_csv(std::ostream& os, Dim dim, const std::vector<SeedRecord>& seeds,
                    const std::vector<std::string>& header) {
  for (const auto& h : header) os << "# " << h << '\n';
  const int n = state_size(dim);
  const RegularizedKepler model(dim, 0.0, nullptr);
  os << "k";
  for (int i = 0; i < n; ++i) os << ",x" << i;
  os << ",K0,tau";
  if (dim == Dim::Spatial) os << ",BL";
  os << '\n' << std::setprecision(17);
  for (const auto& s : seeds) {
    os << s.k;
    for (int i = 0; i < n; ++i) os << ',' << s.x0[i];
    os << ',' << model.hamiltonian(s.x0) << ',' << s.x0[model.layout().tau()];
    if (dim == Dim::Spatial) os << ',' << bl_value(s.x0);
    os << '\n';
  }
}

std::vector<SeedRecord> read_seed_csv(std::istream& in, Dim dim, double T) {
  const int n = state_size(dim);
  std::vector<SeedRecord> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (static_cast<int>(cells.size()) < n + 1) throw ConfigError("seed record has too few columns");
    SeedRecord r;
    r.k = parse_int_list("k", cells[0]).front();
    r.x0.resize(n);
    for (int i = 0; i < n; ++i) r.x0[i] = parse_real_list("x", cells[i + 1]).front();
    ManifoldSpec spec;
    spec.k = r.k;
    spec.T = T;
    spec.dim = dim;
    require_on_manifold(spec, r.x0);
    if (dim == Dim::Spatial && std::abs(bl_value(r.x0)) > 1e-10) throw InvariantError("seed record has BL != 0");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace kepreg
