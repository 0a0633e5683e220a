#include "rexnet/relations.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <map>
#include <spdlog/spdlog.h>

#include "rexnet/error.hpp"

namespace rexnet::relations {

std::string_view relation_name(Relation r) {
  switch (r) {
    case Relation::Lower: return "lower";
    case Relation::Similar: return "similar";
    case Relation::Higher: return "higher";
  }
  return "similar";
}

std::optional<Relation> relation_from_name(std::string_view name) {
  for (Relation r : {Relation::Lower, Relation::Similar, Relation::Higher})
    if (relation_name(r) == name) return r;
  return std::nullopt;
}

Relation opposite(Relation r) {
  if (r == Relation::Lower) return Relation::Higher;
  if (r == Relation::Higher) return Relation::Lower;
  return Relation::Similar;
}

std::array<double, 2> nnrank_encode(Relation r) {
  switch (r) {
    case Relation::Lower: return {0.0, 0.0};
    case Relation::Similar: return {1.0, 0.0};
    case Relation::Higher: return {1.0, 1.0};
  }
  return {1.0, 0.0};
}

Relation nnrank_decode(double p1, double p2) {
  if (p1 < 0.5) return Relation::Lower;
  if (p2 < 0.5) return Relation::Similar;
  return Relation::Higher;
}

RelationTable::RelationTable() {
  for (auto& row : cells)
    for (auto& rel : row) rel.fill(Relation::Similar);
}

nlohmann::json RelationTable::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (int t = 0; t < kEmotions; ++t) {
    nlohmann::json row = nlohmann::json::array();
    for (int c = 0; c < kEmotions; ++c) {
      nlohmann::json cues = nlohmann::json::array();
      for (Relation r : cells[t][c]) cues.push_back(relation_name(r));
      row.push_back(std::move(cues));
    }
    rows.push_back(std::move(row));
  }
  nlohmann::json names = nlohmann::json::array();
  for (int e = 0; e < kEmotions; ++e) names.push_back(audio::emotion_name(audio::emotion_at(e)));
  nlohmann::json cue_names = nlohmann::json::array();
  for (auto n : dsp::kCueNames) cue_names.push_back(n);
  return {{"emotions", names}, {"cues", cue_names}, {"relations", rows}};
}

RelationTable RelationTable::from_json(const nlohmann::json& j) {
  RelationTable table;
  const auto& rows = j.at("relations");
  if (!rows.is_array() || rows.size() != kEmotions) throw Error("relation table: expected 8 rows");
  for (int t = 0; t < kEmotions; ++t) {
    if (rows[t].size() != kEmotions) throw Error("relation table: expected 8 columns");
    for (int c = 0; c < kEmotions; ++c) {
      if (rows[t][c].size() != kCues) throw Error("relation table: expected 6 cues per cell");
      for (int k = 0; k < kCues; ++k) {
        auto r = relation_from_name(rows[t][c][k].get<std::string>());
        if (!r) throw Error("relation table: unknown relation '" + rows[t][c][k].get<std::string>() + "'");
        table.cells[t][c][k] = *r;
      }
    }
  }
  return table;
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw Error("welch_t_test: need at least two values per group");
  auto moments = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::pair{m, ss / static_cast<double>(v.size() - 1)};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double sa = va / na, sb = vb / nb;
  WelchResult r;
  const double se2 = sa + sb;
  if (se2 <= 0.0) {
    // Both groups constant.
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.df = na + nb - 2.0;
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

RelationTable derive_relation_table(const std::vector<CueObservation>& observations,
                                    const DerivationOptions& options, DerivationReport* report) {
  DerivationReport rep;
  // Actor means per cue.
  std::map<int, std::pair<std::array<double, kCues>, int>> actor_sum;
  for (const auto& o : observations) {
    auto& [sum, n] = actor_sum[o.actor];
    const auto v = o.cues.values();
    for (int k = 0; k < kCues; ++k) sum[k] += v[k];
    ++n;
  }
  if (actor_sum.size() < 3)
    spdlog::warn("relation table: only {} actors; actor centering is weak", actor_sum.size());

  // centered[cue][emotion] -> values
  std::array<std::array<std::vector<double>, kEmotions>, kCues> centered;
  for (const auto& o : observations) {
    if (o.emotion < 0 || o.emotion >= kEmotions) throw Error("relation table: emotion index out of range");
    const auto& [sum, n] = actor_sum.at(o.actor);
    const auto v = o.cues.values();
    for (int k = 0; k < kCues; ++k) centered[k][o.emotion].push_back(v[k] - sum[k] / n);
  }

  const int pairs = kEmotions * (kEmotions - 1) / 2;
  const double alpha = options.family_alpha / pairs;
  RelationTable table;
  for (int a = 0; a < kEmotions; ++a)
    for (int b = a + 1; b < kEmotions; ++b) {
      bool underfilled = false;
      for (int k = 0; k < kCues; ++k) {
        const auto& xa = centered[k][a];
        const auto& xb = centered[k][b];
        if (static_cast<int>(xa.size()) < options.min_per_group ||
            static_cast<int>(xb.size()) < options.min_per_group || xa.size() < 2 || xb.size() < 2) {
          underfilled = true;
          continue;
        }
        const WelchResult w = welch_t_test(xa, xb);
        Relation r = Relation::Similar;
        if (w.p < alpha) {
          r = w.t > 0 ? Relation::Higher : Relation::Lower;
          rep.significant_cells += 2;
        }
        table.cells[a][b][k] = r;
        table.cells[b][a][k] = opposite(r);
      }
      if (underfilled) {
        ++rep.underfilled_pairs;
        spdlog::warn("relation table: too few clips for {} vs {}; cells default to similar",
                     audio::emotion_name(audio::emotion_at(a)), audio::emotion_name(audio::emotion_at(b)));
      }
    }
  if (report) *report = rep;
  return table;
}

std::array<double, kCues> cue_scale(const std::vector<dsp::CueVector>& train_cues) {
  std::array<double, kCues> mean{}, sd{};
  if (train_cues.size() < 2) throw Error("cue_scale: need at least two cue vectors");
  for (const auto& c : train_cues) {
    const auto v = c.values();
    for (int k = 0; k < kCues; ++k) mean[k] += v[k];
  }
  for (double& m : mean) m /= static_cast<double>(train_cues.size());
  for (const auto& c : train_cues) {
    const auto v = c.values();
    for (int k = 0; k < kCues; ++k) sd[k] += (v[k] - mean[k]) * (v[k] - mean[k]);
  }
  for (double& s : sd) s = std::max(std::sqrt(s / static_cast<double>(train_cues.size() - 1)), 1e-9);
  return sd;
}

std::array<double, kCues> cue_differences(const dsp::CueVector& target, const dsp::CueVector& contrast,
                                          const std::array<double, kCues>& scale) {
  const auto a = target.values(), b = contrast.values();
  std::array<double, kCues> d{};
  for (int k = 0; k < kCues; ++k) d[k] = (a[k] - b[k]) / scale[k];
  return d;
}

std::array<double, kBits> weighted_cue_diffs(const std::array<double, kCues>& differences,
                                             const std::array<double, kCues>& attributions) {
  std::array<double, kBits> out{};
  std::copy(differences.begin(), differences.end(), out.begin());
  std::copy(attributions.begin(), attributions.end(), out.begin() + kCues);
  return out;
}

}  // namespace rexnet::relations
