#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace dynlab {

struct CheckRecord {
  std::string name;
  std::optional<long> t;
  std::optional<long> i;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;  // amount by which the check misses, <= 0 passes
  bool pass = false;
};

// Per-instance record of every checked identity/inequality with residuals.
struct VerificationReport {
  std::string instance;
  std::vector<CheckRecord> checks;

  bool passed() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  std::size_t failures() const {
    std::size_t n = 0;
    for (const auto& c : checks) n += !c.pass;
    return n;
  }
  double worst_residual() const {
    double w = -1e300;
    for (const auto& c : checks) w = std::max(w, c.residual);
    return checks.empty() ? 0.0 : w;
  }

  void add(std::string name, std::optional<long> t, std::optional<long> i, double lhs, double rhs,
           double residual, bool pass) {
    checks.push_back({std::move(name), t, i, lhs, rhs, residual, pass});
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["instance"] = instance;
    j["passed"] = passed();
    j["failures"] = failures();
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
      nlohmann::ordered_json cj;
      cj["name"] = c.name;
      if (c.t) cj["t"] = *c.t;
      if (c.i) cj["i"] = *c.i;
      cj["lhs"] = c.lhs;
      cj["rhs"] = c.rhs;
      cj["residual"] = c.residual;
      cj["pass"] = c.pass;
      arr.push_back(std::move(cj));
    }
    j["checks"] = std::move(arr);
    return j;
  }
};

}  // namespace dynlab
