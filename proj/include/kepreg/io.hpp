#pragma once

// JSON records for orbits, certificates and seed sets, plus CSV seed files.

#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "kepreg/config.hpp"

namespace kepreg {

using Json = nlohmann::json;

Json to_json(const Vec& v);
Vec vec_from_json(const Json& j);

Json to_json(const RunConfig& c);
/// Orbit record: dim, k, T, eps, eta, S, theta, X0, residual, energy band,
/// drifts, Floquet multipliers, degeneracy index.
Json to_json(const PeriodicOrbit& o);
/// Inverse of to_json for the fields needed to re-integrate the orbit.
PeriodicOrbit orbit_from_json(const Json& j);
Json to_json(const CertificateReport& r);

/// Orbit archive {"config": ..., "orbits": [...]}.
Json orbit_archive(const RunConfig& c, const std::vector<PeriodicOrbit>& orbits);
std::vector<PeriodicOrbit> load_orbit_archive(const std::string& path);

struct SeedRecord {
  int k = 1;
  Vec x0;
};
/// CSV with columns k, x0 components, K0, tau, (3D) BL.
void write_seed_csv(std::ostream& os, Dim dim, const std::vector<SeedRecord>& seeds,
                    const std::vector<std::string>& header = {});
/// Reads a seed CSV and validates every record on its manifold
/// (K0 = 0, tau = tau_k, BL = 0 in 3D); throws InvariantError otherwise.
std::vector<SeedRecord> read_seed_csv(std::istream& in, Dim dim, double T);

}  // namespace kepreg
