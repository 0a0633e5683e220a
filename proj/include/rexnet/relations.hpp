#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "rexnet/audio_io.hpp"
#include "rexnet/dsp.hpp"

namespace rexnet::relations {

inline constexpr int kCues = dsp::CueVector::kCount;
inline constexpr int kEmotions = audio::kNumEmotions;
inline constexpr int kBits = 2 * kCues;

enum class Relation : int { Lower = 0, Similar = 1, Higher = 2 };

std::string_view relation_name(Relation r);
std::optional<Relation> relation_from_name(std::string_view name);
Relation opposite(Relation r);

// Cumulative ordinal bits: lower (0,0), similar (1,0), higher (1,1).
std::array<double, 2> nnrank_encode(Relation r);
// Each bit is on at p >= 0.5; counts leading on-bits.
Relation nnrank_decode(double p1, double p2);

using CueRelations = std::array<Relation, kCues>;

struct RelationTable {
  // cells[target][contrast][cue]
  std::array<std::array<CueRelations, kEmotions>, kEmotions> cells{};

  RelationTable();
  Relation at(int target, int contrast, int cue) const { return cells[target][contrast][cue]; }
  const CueRelations& row(int target, int contrast) const { return cells[target][contrast]; }

  nlohmann::json to_json() const;
  static RelationTable from_json(const nlohmann::json& j);
};

struct CueObservation {
  int actor = 0;
  int emotion = 0;
  dsp::CueVector cues;
};

struct DerivationOptions {
  double family_alpha = 0.005;
  int min_per_group = 2;
};

struct DerivationReport {
  int underfilled_pairs = 0;
  int significant_cells = 0;
};

// Two-sided Welch t-test.
struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;
};
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

// Actor-centered cues, Welch tests per emotion pair, Bonferroni over the
// unordered pairs.
RelationTable derive_relation_table(const std::vector<CueObservation>& observations,
                                    const DerivationOptions& options = {},
                                    DerivationReport* report = nullptr);

// Per-cue standard deviation over training cue vectors (floored at 1e-9).
std::array<double, kCues> cue_scale(const std::vector<dsp::CueVector>& train_cues);

// (target - contrast) / scale per cue.
std::array<double, kCues> cue_differences(const dsp::CueVector& target,
                                          const dsp::CueVector& contrast,
                                          const std::array<double, kCues>& scale);

// [differences, attributions]
std::array<double, kBits> weighted_cue_diffs(const std::array<double, kCues>& differences,
                                             const std::array<double, kCues>& attributions);

}  // namespace rexnet::relations
