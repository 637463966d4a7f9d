#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dropfam/numeric/errors.hpp"
#include "dropfam/numeric/rng.hpp"

namespace dropfam {

enum class MaskSharing { shared_across_time, per_step };

inline std::string to_string(MaskSharing s) {
  return s == MaskSharing::shared_across_time ? "shared_across_time" : "per_step";
}

inline MaskSharing parse_sharing(const std::string& s) {
  if (s == "shared_across_time") return MaskSharing::shared_across_time;
  if (s == "per_step") return MaskSharing::per_step;
  throw ConfigError("unknown mask sharing mode '" + s + "'");
}

// Per-site dropout rates. Sites absent from `rates` are never dropped.
struct DropoutSpec {
  std::map<std::string, double> rates;
  MaskSharing sharing = MaskSharing::shared_across_time;

  double rate(const std::string& site) const {
    auto it = rates.find(site);
    return it == rates.end() ? 0.0 : it->second;
  }

  void validate() const {
    for (const auto& [site, p] : rates)
      if (!(p >= 0.0 && p <= 1.0))
        throw DomainError("dropout rate of site '" + site + "' must lie in [0,1]");
  }
};

// A droppable group of weight rows: one row per source unit.
struct SiteLayout {
  std::string name;
  std::size_t rows = 0;
};

using SiteLayouts = std::vector<SiteLayout>;

// Binary row mask for one site. `steps` is 1 for shared masks.
struct SiteMask {
  std::size_t steps = 1;
  std::size_t rows = 0;
  std::vector<std::uint8_t> bits;  // steps x rows

  std::uint8_t at(std::size_t t, std::size_t r) const {
    return bits[(steps == 1 ? 0 : t) * rows + r];
  }
};

// One SiteMask per site, in the order of the model's SiteLayouts.
using MaskSet = std::vector<SiteMask>;

// Multiplier applied to each weight row. Same indexing as SiteMask.
struct SiteScale {
  std::size_t steps = 1;
  std::size_t rows = 0;
  std::vector<double> values;

  double at(std::size_t t, std::size_t r) const {
    return values[(steps == 1 ? 0 : t) * rows + r];
  }
};

using RowScales = std::vector<SiteScale>;

// Draws row masks: each row kept independently with probability
// 1 - rate_scale * p. Site i reads its own stream seed.child(i), rows in
// (step, row) order, so masks at different rate_scale values are coupled
// (a row dropped at a lower rate is also dropped at a higher one).
inline MaskSet sample_masks(const SiteLayouts& layout, const DropoutSpec& spec,
                            const SplitSeed& seed, std::size_t t_steps, double rate_scale) {
  if (t_steps == 0) throw ContractError("sample_masks: t_steps must be >= 1");
  if (!(rate_scale >= 0.0 && rate_scale <= 1.0))
    throw DomainError("sample_masks: rate multiplier must lie in [0,1]");
  MaskSet masks;
  masks.reserve(layout.size());
  for (std::size_t s = 0; s < layout.size(); ++s) {
    const double rate = rate_scale * spec.rate(layout[s].name);
    if (!(rate >= 0.0 && rate <= 1.0))
      throw DomainError("sample_masks: effective rate for '" + layout[s].name +
                        "' must lie in [0,1]");
    SiteMask m;
    m.steps = spec.sharing == MaskSharing::per_step ? t_steps : 1;
    m.rows = layout[s].rows;
    m.bits.resize(m.steps * m.rows);
    RandomStream rng = seed.child(s).stream();
    for (auto& b : m.bits) b = rng.uniform() < rate ? 0 : 1;
    masks.push_back(std::move(m));
  }
  return masks;
}

// Scale for a kept row at evaluation rate multiplier lambda. Kept rows are
// rescaled so every row's expected multiplier stays at the trained keep
// probability 1 - p; at lambda = 1 this is exactly 1 (plain masking).
inline double kept_row_scale(double p, double lambda) {
  const double eff_keep = 1.0 - lambda * p;
  if (eff_keep <= 0.0) return 0.0;
  return (1.0 - p) / eff_keep;
}

inline RowScales stochastic_scales(const SiteLayouts& layout, const DropoutSpec& spec,
                                   const MaskSet& masks, double lambda) {
  if (masks.size() != layout.size())
    throw ContractError("mask set does not match the model's dropout sites");
  RowScales scales;
  scales.reserve(layout.size());
  for (std::size_t s = 0; s < layout.size(); ++s) {
    const SiteMask& m = masks[s];
    if (m.rows != layout[s].rows)
      throw ContractError("mask for site '" + layout[s].name + "' has the wrong row count");
    const double keep = kept_row_scale(spec.rate(layout[s].name), lambda);
    SiteScale sc{m.steps, m.rows, std::vector<double>(m.bits.size())};
    for (std::size_t i = 0; i < m.bits.size(); ++i) sc.values[i] = m.bits[i] ? keep : 0.0;
    scales.push_back(std::move(sc));
  }
  return scales;
}

// Expectation scaling: every row multiplied by its keep probability 1 - p.
inline RowScales deterministic_scales(const SiteLayouts& layout, const DropoutSpec& spec) {
  RowScales scales;
  scales.reserve(layout.size());
  for (const auto& site : layout) {
    scales.push_back(SiteScale{1, site.rows,
                               std::vector<double>(site.rows, 1.0 - spec.rate(site.name))});
  }
  return scales;
}

inline RowScales unit_scales(const SiteLayouts& layout) {
  RowScales scales;
  for (const auto& site : layout)
    scales.push_back(SiteScale{1, site.rows, std::vector<double>(site.rows, 1.0)});
  return scales;
}

}  // namespace dropfam
