#include "opera/envs/sepsis.hpp"

#include <array>
#include <cmath>
#include <vector>

#include "opera/errors.hpp"

namespace opera::envs {

namespace {

constexpr int kAbx = 1;
constexpr int kVaso = 2;
constexpr int kVent = 4;

// Distribution of one vital's next level, as a dense vector over levels.
using LevelDist = std::vector<double>;

LevelDist stay(int levels, int level) {
  LevelDist d(static_cast<std::size_t>(levels), 0.0);
  d[static_cast<std::size_t>(level)] = 1.0;
  return d;
}

LevelDist treated(int levels, int level, double success) {
  LevelDist d(static_cast<std::size_t>(levels), 0.0);
  const int normal = SepsisLayout::normal_level(levels);
  if (level == normal) {
    d[static_cast<std::size_t>(level)] = 1.0;
    return d;
  }
  const int toward = level < normal ? level + 1 : level - 1;
  d[static_cast<std::size_t>(toward)] += success;
  d[static_cast<std::size_t>(level)] += 1.0 - success;
  return d;
}

LevelDist drifted(int levels, int level, double drift) {
  LevelDist d(static_cast<std::size_t>(levels), 0.0);
  const int normal = SepsisLayout::normal_level(levels);
  auto push = [&](int target, double mass) {
    if (target >= 0 && target < levels)
      d[static_cast<std::size_t>(target)] += mass;
    else
      d[static_cast<std::size_t>(level)] += mass;  // out-of-range moves stay put
  };
  if (level == normal) {
    push(level + 1, drift / 2.0);
    push(level - 1, drift / 2.0);
  } else {
    push(level < normal ? level - 1 : level + 1, drift);
  }
  d[static_cast<std::size_t>(level)] += 1.0 - drift;
  return d;
}

LevelDist fluctuating(int levels, int level, double fluct) {
  LevelDist d(static_cast<std::size_t>(levels), 0.0);
  auto push = [&](int target, double mass) {
    if (target >= 0 && target < levels)
      d[static_cast<std::size_t>(target)] += mass;
    else
      d[static_cast<std::size_t>(level)] += mass;
  };
  push(level + 1, fluct / 2.0);
  push(level - 1, fluct / 2.0);
  d[static_cast<std::size_t>(level)] += 1.0 - fluct;
  return d;
}

}  // namespace

int SepsisLayout::abnormal_count(int hr, int bp, int o2, int glucose) const {
  return static_cast<int>(is_abnormal(hr, config.hr_levels)) +
         static_cast<int>(is_abnormal(bp, config.bp_levels)) +
         static_cast<int>(is_abnormal(o2, config.o2_levels)) +
         static_cast<int>(is_abnormal(glucose, config.glucose_levels));
}

void SepsisConfig::validate() const {
  if (hr_levels < 2 || bp_levels < 2 || o2_levels < 2 || glucose_levels < 2)
    throw ConfigError("every vital needs at least 2 levels");
  if (diabetes_prob < 0.0 || diabetes_prob > 1.0)
    throw ConfigError("diabetes_prob must lie in [0, 1]");
  if (horizon < 1) throw ConfigError("sepsis horizon must be >= 1");
  if (!(discount > 0.0) || discount > 1.0) throw ConfigError("discount must lie in (0, 1]");
  const std::array<double, 7> probs = {
      params.untreated_drift,  params.abx_hr_effect,  params.abx_bp_effect,
      params.vaso_bp_effect,   params.vent_o2_effect, params.glucose_fluct,
      params.glucose_fluct_diabetic};
  for (double p : probs)
    if (p < 0.0 || p > 1.0) throw ConfigError("transition probabilities must lie in [0, 1]");
}

TabularMdp build_sepsis(const SepsisConfig& config) {
  config.validate();
  const SepsisLayout ly{config};
  const int S = ly.live_count() + 2;
  const int A = 8;

  TabularMdp mdp;
  mdp.num_states = S;
  mdp.num_actions = A;
  mdp.horizon = config.horizon;
  mdp.discount = config.discount;
  mdp.transition.assign(static_cast<std::size_t>(S) * A * static_cast<std::size_t>(S), 0.0);
  mdp.reward.assign(static_cast<std::size_t>(S) * A * static_cast<std::size_t>(S), 0.0);
  mdp.initial.assign(static_cast<std::size_t>(S), 0.0);

  const SepsisTransitionParams& pp = config.params;

  for (int hr = 0; hr < config.hr_levels; ++hr)
    for (int bp = 0; bp < config.bp_levels; ++bp)
      for (int o2 = 0; o2 < config.o2_levels; ++o2)
        for (int glu = 0; glu < config.glucose_levels; ++glu)
          for (int d = 0; d < 2; ++d) {
            const int s = ly.state_id(hr, bp, o2, glu, d);
            const bool unreachable = ly.abnormal_count(hr, bp, o2, glu) >= 3;
            const bool all_normal = ly.abnormal_count(hr, bp, o2, glu) == 0;
            for (int a = 0; a < A; ++a) {
              if (unreachable) {  // dead-on-entry combos are redirected, so keep a stub
                mdp.transition[mdp.idx(s, a, s)] = 1.0;
                continue;
              }
              if (all_normal && a == 0) {  // no treatment while healthy: discharge
                mdp.transition[mdp.idx(s, a, ly.discharged())] = 1.0;
                mdp.reward[mdp.idx(s, a, ly.discharged())] = 1.0;
                continue;
              }
              const bool abx = (a & kAbx) != 0;
              const bool vaso = (a & kVaso) != 0;
              const bool vent = (a & kVent) != 0;

              const LevelDist hr_d = abx ? treated(config.hr_levels, hr, pp.abx_hr_effect)
                                         : drifted(config.hr_levels, hr, pp.untreated_drift);
              const double bp_success =
                  1.0 - (1.0 - (abx ? pp.abx_bp_effect : 0.0)) *
                            (1.0 - (vaso ? pp.vaso_bp_effect : 0.0));
              const LevelDist bp_d = (abx || vaso)
                                         ? treated(config.bp_levels, bp, bp_success)
                                         : drifted(config.bp_levels, bp, pp.untreated_drift);
              const LevelDist o2_d = vent ? treated(config.o2_levels, o2, pp.vent_o2_effect)
                                          : drifted(config.o2_levels, o2, pp.untreated_drift);
              const LevelDist glu_d = fluctuating(
                  config.glucose_levels, glu,
                  d == 1 ? pp.glucose_fluct_diabetic : pp.glucose_fluct);

              for (int hr2 = 0; hr2 < config.hr_levels; ++hr2) {
                if (hr_d[static_cast<std::size_t>(hr2)] == 0.0) continue;
                for (int bp2 = 0; bp2 < config.bp_levels; ++bp2) {
                  if (bp_d[static_cast<std::size_t>(bp2)] == 0.0) continue;
                  for (int o22 = 0; o22 < config.o2_levels; ++o22) {
                    if (o2_d[static_cast<std::size_t>(o22)] == 0.0) continue;
                    for (int glu2 = 0; glu2 < config.glucose_levels; ++glu2) {
                      const double mass = hr_d[static_cast<std::size_t>(hr2)] *
                                          bp_d[static_cast<std::size_t>(bp2)] *
                                          o2_d[static_cast<std::size_t>(o22)] *
                                          glu_d[static_cast<std::size_t>(glu2)];
                      if (mass == 0.0) continue;
                      if (ly.abnormal_count(hr2, bp2, o22, glu2) >= 3) {
                        mdp.transition[mdp.idx(s, a, ly.dead())] += mass;
                        mdp.reward[mdp.idx(s, a, ly.dead())] = -1.0;
                      } else {
                        mdp.transition[mdp.idx(s, a, ly.state_id(hr2, bp2, o22, glu2, d))] +=
                            mass;
                      }
                    }
                  }
                }
              }
            }
          }

  // Terminal states self-loop with zero reward.
  for (int term : {ly.dead(), ly.discharged()})
    for (int a = 0; a < A; ++a) mdp.transition[mdp.idx(term, a, term)] = 1.0;

  // Initial distribution: independent per-vital perturbations, diabetes draw,
  // renormalized over the non-dead combinations. The exclusion event does not
  // depend on diabetes, so the diabetic fraction stays at diabetes_prob.
  auto perturb = [&](int levels) {
    const int normal = SepsisLayout::normal_level(levels);
    LevelDist d(static_cast<std::size_t>(levels), 0.0);
    auto push = [&](int target, double mass) {
      if (target < 0) target = normal;
      if (target >= levels) target = normal;
      d[static_cast<std::size_t>(target)] += mass;
    };
    push(normal - 1, 0.25);
    push(normal, 0.5);
    push(normal + 1, 0.25);
    return d;
  };
  const LevelDist hr_i = perturb(config.hr_levels);
  const LevelDist bp_i = perturb(config.bp_levels);
  const LevelDist o2_i = perturb(config.o2_levels);
  const LevelDist glu_i = perturb(config.glucose_levels);
  double total = 0.0;
  for (int hr = 0; hr < config.hr_levels; ++hr)
    for (int bp = 0; bp < config.bp_levels; ++bp)
      for (int o2 = 0; o2 < config.o2_levels; ++o2)
        for (int glu = 0; glu < config.glucose_levels; ++glu) {
          if (ly.abnormal_count(hr, bp, o2, glu) >= 3) continue;
          const double mass = hr_i[static_cast<std::size_t>(hr)] *
                              bp_i[static_cast<std::size_t>(bp)] *
                              o2_i[static_cast<std::size_t>(o2)] *
                              glu_i[static_cast<std::size_t>(glu)];
          for (int d = 0; d < 2; ++d) {
            mdp.initial[static_cast<std::size_t>(ly.state_id(hr, bp, o2, glu, d))] =
                mass * (d == 1 ? config.diabetes_prob : 1.0 - config.diabetes_prob);
          }
          total += mass;
        }
  for (double& p : mdp.initial) p /= total;

  // Observations: identity when fully observed; otherwise (hr, bp, o2) plus
  // distinct ids for the two terminal states.
  mdp.observation_map.resize(static_cast<std::size_t>(S));
  if (!config.partially_observed) {
    for (int s = 0; s < S; ++s) mdp.observation_map[static_cast<std::size_t>(s)] = s;
  } else {
    const int masked = config.hr_levels * config.bp_levels * config.o2_levels;
    for (int hr = 0; hr < config.hr_levels; ++hr)
      for (int bp = 0; bp < config.bp_levels; ++bp)
        for (int o2 = 0; o2 < config.o2_levels; ++o2)
          for (int glu = 0; glu < config.glucose_levels; ++glu)
            for (int d = 0; d < 2; ++d)
              mdp.observation_map[static_cast<std::size_t>(ly.state_id(hr, bp, o2, glu, d))] =
                  (hr * config.bp_levels + bp) * config.o2_levels + o2;
    mdp.observation_map[static_cast<std::size_t>(ly.dead())] = masked;
    mdp.observation_map[static_cast<std::size_t>(ly.discharged())] = masked + 1;
  }

  mdp.validate();
  return mdp;
}

}  // namespace opera::envs
