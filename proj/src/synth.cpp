#include "permsig/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "permsig/error.hpp"
#include "permsig/rng.hpp"

namespace permsig {

namespace {

constexpr std::uint64_t kSynthStreamTag = 0x73796E7468ULL;  // "synth"

std::string category_label(std::size_t index) {
  if (index < 26) return std::string(1, static_cast<char>('A' + index));
  return "C" + std::to_string(index + 1);
}

std::string subject_label(std::size_t index, std::size_t total) {
  const int width = std::max(4, static_cast<int>(std::to_string(total).size()));
  char buf[32];
  std::snprintf(buf, sizeof(buf), "S%0*zu", width, index + 1);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidConfig, msg); };
  if (n_subjects < 1) fail("n_subjects must be >= 1");
  if (visits_min < 1) fail("visits_min must be >= 1");
  if (visits_min > visits_max) fail("visits_min must not exceed visits_max");
  if (!(positive_rate > 0.0 && positive_rate < 1.0)) fail("positive_rate must lie in (0, 1)");
  if (!(noise_std > 0.0) || !std::isfinite(noise_std)) fail("noise_std must be > 0");
  if (!(signal_strength >= 0.0) || !std::isfinite(signal_strength)) {
    fail("signal_strength must be finite and >= 0");
  }
  if (schema.size() == 0) fail("schema has no categories");
  for (const std::string& name : informative_categories) {
    if (!schema.find(name)) fail("informative category '" + name + "' not in schema");
  }
}

LongitudinalDataset generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.schema.num_columns();
  std::vector<bool> informative(m, false);
  for (const std::string& name : cfg.informative_categories) {
    const auto [b, e] = cfg.schema.block(cfg.schema.index_of(name));
    std::fill(informative.begin() + static_cast<std::ptrdiff_t>(b),
              informative.begin() + static_cast<std::ptrdiff_t>(e), true);
  }

  Stream rng(derive_key({cfg.seed, kSynthStreamTag}));
  LongitudinalDataset ds;
  ds.schema = cfg.schema;
  ds.feature_names = cfg.schema.ordered_columns();
  ds.subjects.reserve(cfg.n_subjects);

  std::vector<double> latent(m);
  for (std::size_t i = 0; i < cfg.n_subjects; ++i) {
    const int y = rng.bernoulli(cfg.positive_rate) ? 1 : 0;
    const std::size_t visits =
        cfg.visits_min + static_cast<std::size_t>(rng.below(cfg.visits_max - cfg.visits_min + 1));
    for (std::size_t j = 0; j < m; ++j) {
      latent[j] = rng.normal() + (informative[j] ? cfg.signal_strength * y : 0.0);
    }

    SubjectRecord rec;
    rec.subject_id = subject_label(i, cfg.n_subjects);
    rec.visits.resize(static_cast<Eigen::Index>(visits), static_cast<Eigen::Index>(m));
    const double centre = 0.5 * static_cast<double>(visits - 1);
    for (std::size_t v = 0; v < visits; ++v) {
      for (std::size_t j = 0; j < m; ++j) {
        double x = latent[j] + cfg.noise_std * rng.normal();
        if (cfg.temporal_signal && informative[j]) {
          x += cfg.signal_strength * y * (static_cast<double>(v) - centre);
        }
        rec.visits(static_cast<Eigen::Index>(v), static_cast<Eigen::Index>(j)) = x;
      }
    }

    // Positives are symptomatic at the last visit, earlier visits by coin flip.
    rec.visit_labels.assign(visits, 0);
    if (y == 1) {
      for (std::size_t v = 0; v + 1 < visits; ++v) rec.visit_labels[v] = rng.bernoulli(0.5) ? 1 : 0;
      rec.visit_labels.back() = 1;
    }
    ds.subjects.push_back(std::move(rec));
  }
  return ds;
}

std::set<std::string> ground_truth(const SynthConfig& cfg) {
  return {cfg.informative_categories.begin(), cfg.informative_categories.end()};
}

CategorySchema uniform_schema(std::size_t categories, std::size_t columns_per_category) {
  std::vector<Category> cats;
  for (std::size_t c = 0; c < categories; ++c) {
    Category cat;
    cat.name = category_label(c);
    for (std::size_t j = 0; j < columns_per_category; ++j) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "_%02zu", j + 1);
      cat.columns.push_back(cat.name + buf);
    }
    cats.push_back(std::move(cat));
  }
  return CategorySchema(std::move(cats));
}

}  // namespace permsig
