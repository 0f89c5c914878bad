#pragma once

// Dataset persistence: one CSV row per visit plus a JSON sidecar.
//
//   id,j,t,y,x,a,zeta,m
//
// `a` is the treatment assigned at visit j (empty when none was assigned),
// `zeta` the censoring time and `m` the number of visits of the individual.

#include <filesystem>
#include <map>
#include <sstream>
#include <string>

#include "dtrjm/io/json_io.hpp"
#include "dtrjm/io/text.hpp"
#include "dtrjm/simulate/simulate.hpp"

namespace dtrjm::io {

inline std::string dataset_csv(const Dataset& d) {
  std::ostringstream out;
  out << "id,j,t,y,x,a,zeta,m\n";
  for (int i = 0; i < d.size(); ++i) {
    const auto& p = d.paths[static_cast<std::size_t>(i)];
    for (int j = 0; j < p.n_visits(); ++j) {
      out << i << ',' << (j + 1) << ',' << fmt(p.visit_times[j]) << ',' << p.outcomes[j] << ','
          << fmt(p.covariates[j]) << ',';
      if (static_cast<std::size_t>(j) < p.treatments.size()) out << p.treatments[j];
      out << ',' << fmt(p.censor_time) << ',' << p.n_visits() << '\n';
    }
  }
  return out.str();
}

inline ordered_json dataset_sidecar(const Dataset& d) {
  ordered_json j;
  j["n"] = d.size();
  j["seed"] = d.seed;
  j["censor_lower"] = d.censor.lower;
  j["censor_upper"] = d.censor.upper;
  j["params"] = to_json(d.true_params);
  return j;
}

inline void write_dataset(const Dataset& d, const std::filesystem::path& csv_path) {
  write_file(csv_path.string(), dataset_csv(d));
  auto side = csv_path;
  side.replace_extension(".json");
  write_file(side.string(), dataset_sidecar(d).dump(2) + "\n");
}

/// Parses the per-visit CSV. Individuals are ordered by id.
inline Dataset parse_dataset_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "id,j,t,y,x,a,zeta,m")
    throw IoError("dataset csv: bad or missing header (expected id,j,t,y,x,a,zeta,m)");
  std::map<long long, PatientPath> by_id;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 8) throw IoError("dataset csv line " + std::to_string(lineno) + ": expected 8 fields");
    try {
      const long long id = parse_int(f[0]);
      auto& p = by_id[id];
      const auto j = parse_int(f[1]);
      if (j != p.n_visits() + 1) throw IoError("visits out of order");
      p.visit_times.push_back(parse_double(f[2]));
      p.outcomes.push_back(static_cast<int>(parse_int(f[3])));
      p.covariates.push_back(parse_double(f[4]));
      if (!f[5].empty()) p.treatments.push_back(static_cast<int>(parse_int(f[5])));
      p.censor_time = parse_double(f[6]);
    } catch (const IoError& e) {
      throw IoError("dataset csv line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  Dataset d;
  for (auto& [id, p] : by_id) {
    p.validate();
    d.paths.push_back(std::move(p));
  }
  return d;
}

inline Dataset read_dataset(const std::filesystem::path& csv_path) {
  Dataset d = parse_dataset_csv(read_file(csv_path.string()));
  auto side = csv_path;
  side.replace_extension(".json");
  if (std::filesystem::exists(side)) {
    const auto j = ordered_json::parse(read_file(side.string()));
    if (j.contains("params")) d.true_params = params_from_json(j["params"]);
    if (j.contains("seed")) d.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("censor_lower")) d.censor.lower = j["censor_lower"].get<double>();
    if (j.contains("censor_upper")) d.censor.upper = j["censor_upper"].get<double>();
  }
  return d;
}

}  // namespace dtrjm::io
