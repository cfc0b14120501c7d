#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "permsig/dataset.hpp"

namespace permsig {

// Synthetic longitudinal cohort with a known answer: features of the
// informative categories carry a class-conditional mean shift, every other
// category is pure noise.
struct SynthConfig {
  std::size_t n_subjects = 600;
  std::size_t visits_min = 1;
  std::size_t visits_max = 5;
  CategorySchema schema;
  std::vector<std::string> informative_categories;
  double signal_strength = 1.5;  // latent mean shift for y = 1, in latent std units
  double positive_rate = 0.15;
  double noise_std = 0.5;  // per-visit scatter around the subject's latent vector
  // Adds a centred per-visit linear drift (slope signal_strength * y) to the
  // informative categories. The drift averages out in the cross-sectional view.
  bool temporal_signal = false;
  std::uint64_t seed = 0;

  // Throws InvalidConfig.
  void validate() const;
};

// Draw order is fixed: per subject (index order) the label, the visit count,
// the latent vector (schema column order), the visits (time order, then
// columns) and finally the earlier-visit symptom flags. Pure function of cfg.
LongitudinalDataset generate(const SynthConfig& cfg);

std::set<std::string> ground_truth(const SynthConfig& cfg);

// `categories` blocks of `columns_per_category` columns each, named A, B, C...
// with columns A_01, A_02, ...
CategorySchema uniform_schema(std::size_t categories, std::size_t columns_per_category);

}  // namespace permsig
