#pragma once

#include "opera/mdp.hpp"

namespace opera::envs {

// Per-step transition probabilities of the simulator. All are exposed in the
// config so the documented defaults below can be overridden:
//   - an untreated non-glucose vital drifts one level away from normal with
//     probability untreated_drift (split evenly between directions when it is
//     at normal; mass that would leave the level range stays put),
//   - a treated vital moves one level toward normal with the listed success
//     probability (antibiotics act on heart rate and blood pressure,
//     vasopressors on blood pressure, ventilation on oxygen; simultaneous
//     treatments of one vital combine as independent attempts),
//   - glucose is never treated and random-walks one level with probability
//     glucose_fluct (glucose_fluct_diabetic for diabetic patients).
struct SepsisTransitionParams {
  double untreated_drift = 0.1;
  double abx_hr_effect = 0.5;
  double abx_bp_effect = 0.5;
  double vaso_bp_effect = 0.7;
  double vent_o2_effect = 0.7;
  double glucose_fluct = 0.1;
  double glucose_fluct_diabetic = 0.3;
};

// Sepsis-style patient simulator, built as an exact tabular MDP.
//
// A live state is (heart rate, blood pressure, oxygen, glucose, diabetes).
// Each vital's normal level is levels/2; a vital is abnormal when it is off
// normal (for scales of 5+ levels: at least two off, so slightly-low/high
// glucose still counts as in range). Actions are the 8 subsets of
// {antibiotics, vasopressor, ventilation} encoded as bits 0/1/2.
//
// Entering a configuration with >= 3 abnormal vitals is death: the mass is
// redirected to a terminal state with reward -1. Choosing no treatment while
// all vitals are normal discharges the patient with reward +1. All other
// rewards are 0, and episodes truncate at the horizon.
//
// Initial states perturb each vital from normal by {-1, 0, +1} with
// probability {1/4, 1/2, 1/4} (clamped), draw diabetes with diabetes_prob,
// and exclude immediately-dead combinations. Partial observability masks
// glucose and diabetes from the observation.
struct SepsisConfig {
  int hr_levels = 3;
  int bp_levels = 3;
  int o2_levels = 2;
  int glucose_levels = 5;
  double diabetes_prob = 0.2;
  int horizon = 20;
  bool partially_observed = false;
  SepsisTransitionParams params;
  double discount = 1.0;

  void validate() const;
};

TabularMdp build_sepsis(const SepsisConfig& config);

// State-id helpers, exposed for tests and tools.
struct SepsisLayout {
  SepsisConfig config;

  int live_count() const {
    return config.hr_levels * config.bp_levels * config.o2_levels * config.glucose_levels * 2;
  }
  int dead() const { return live_count(); }
  int discharged() const { return live_count() + 1; }
  int state_id(int hr, int bp, int o2, int glucose, int diabetes) const {
    return (((hr * config.bp_levels + bp) * config.o2_levels + o2) * config.glucose_levels +
            glucose) *
               2 +
           diabetes;
  }
  static int normal_level(int levels) { return levels / 2; }
  static bool is_abnormal(int level, int levels) {
    const int off = level - normal_level(levels);
    return levels >= 5 ? (off <= -2 || off >= 2) : off != 0;
  }
  int abnormal_count(int hr, int bp, int o2, int glucose) const;
};

}  // namespace opera::envs
