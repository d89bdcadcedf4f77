// Shared fixtures for the identification/inference tests: nuisance tables
// with hand-picked values and enumerated populations built from a
// threshold-crossing selection model.
#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "wb/identification.hpp"
#include "wb/nuisance.hpp"

namespace wb_test {

// Nuisance evaluators backed by explicit per-cell tables.
class TableNuisance final : public wb::NuisanceFit {
 public:
  std::map<double, double> eta1, eta0, p;
  std::map<std::pair<double, double>, double> eta1z, eta0z, pz, rz, mean_yz;
  std::vector<double> levels;

  double eta(int d, std::span<const double> x) const override {
    return at(d == 1 ? eta1 : eta0, x[0]);
  }
  double propensity(std::span<const double> x) const override { return at(p, x[0]); }
  bool has_instrument() const override { return !levels.empty(); }
  double eta_z(int d, std::span<const double> x, double z) const override {
    return at(d == 1 ? eta1z : eta0z, std::make_pair(x[0], z));
  }
  double propensity_z(std::span<const double> x, double z) const override {
    return at(pz, std::make_pair(x[0], z));
  }
  double instrument_share(double z, std::span<const double> x) const override {
    return at(rz, std::make_pair(x[0], z));
  }
  double outcome_mean_z(std::span<const double> x, double z) const override {
    return at(mean_yz, std::make_pair(x[0], z));
  }
  std::vector<double> z_levels() const override { return levels; }
  std::string describe() const override { return "table"; }

 private:
  template <typename Map, typename Key>
  static double at(const Map& map, const Key& key) {
    const auto it = map.find(key);
    if (it == map.end()) throw std::out_of_range("TableNuisance: missing cell");
    return it->second;
  }
};

struct ThresholdModel {
  std::vector<std::pair<double, double>> x_cells;  // (x value, P(X=x))
  double z1_prob = 0.5;
  std::function<double(double, double)> selection;  // p(x,z)
  std::function<double(double, double)> y1;         // Y1(x,u)
  std::function<double(double, double)> y0;         // Y0(x,u)
  int u_levels = 4;
  wb::OutcomeSupport support{0, 20};
};

// Population from D = 1{p(X,Z) >= U} with U uniform on a discrete grid and
// potential outcomes that depend on (x,u) only. Mean independence of the
// potential outcomes from Z holds by construction, and the monotone
// first-step structure makes the binary-IV shortcut exact.
inline wb::DiscretePopulation make_threshold_population(const ThresholdModel& model) {
  std::vector<wb::PopulationAtom> atoms;
  for (const auto& [xv, px] : model.x_cells) {
    for (int z : {0, 1}) {
      const double pz = z == 1 ? model.z1_prob : 1.0 - model.z1_prob;
      for (int i = 0; i < model.u_levels; ++i) {
        const double u = (i + 0.5) / model.u_levels;
        const int d = model.selection(xv, z) >= u ? 1 : 0;
        wb::PopulationAtom atom;
        atom.y = d == 1 ? model.y1(xv, u) : model.y0(xv, u);
        atom.d = d;
        atom.x = {xv};
        atom.z = static_cast<double>(z);
        atom.prob = px * pz / model.u_levels;
        atoms.push_back(atom);
      }
    }
  }
  return wb::DiscretePopulation(std::move(atoms), model.support);
}

inline ThresholdModel default_threshold_model() {
  ThresholdModel model;
  model.x_cells = {{0.0, 0.25}, {1.0, 0.5}, {2.0, 0.25}};
  model.z1_prob = 0.5;
  model.selection = [](double x, double z) {
    return 0.3 + 0.1 * x + 0.25 * z;  // in (0,1), increasing in z
  };
  model.y1 = [](double x, double u) { return 8.0 + 2.0 * x + 4.0 * u; };
  model.y0 = [](double x, double u) { return 3.0 + 1.0 * x + 2.0 * u; };
  model.u_levels = 4;
  model.support = {0, 20};
  return model;
}

inline wb::PopulationPolicyPair step_policies(double star_threshold,
                                              double new_threshold) {
  wb::PopulationPolicyPair pair;
  pair.delta_star = [star_threshold](std::span<const double> x) {
    return x[0] <= star_threshold ? 1 : 0;
  };
  pair.delta = [new_threshold](std::span<const double> x) {
    return x[0] <= new_threshold ? 1 : 0;
  };
  return pair;
}

}  // namespace wb_test
