#pragma once

// Synthetic multi-cycle plant data for pipeline-level tests. Twelve
// sensor channels run at a two-minute cadence and every cycle ends in a
// break. Three of the channels are instrumented actuator lines that
// track one slowly wandering load signal, each with its own gain plus
// fast private noise; the other nine idle around their operating points
// with fast private noise alone. Each instrumented line has a seat
// level it can stick at, two seats above the working range and one
// below it. Transient sticking is routine: every so often one line, or
// a pair of lines, wedges at its seat for a few readings and works
// free, and how hard it wedges varies, so stuck readings land anywhere
// from the seat itself to a third past it. While a pair is wedged the
// load shifts onto the remaining line and runs it hot toward its own
// seat without actually sticking. What never happens in healthy data is
// all three lines seated at once. That is the failure: for the final
// hour of every cycle the three lines jam together, entering with a
// slam that overshoots the seats before settling exactly onto them, and
// the slam gets harder as the unit wears, so late (test) cycles clear a
// monitoring threshold calibrated on early (training) cycles
// decisively. No single line, and no pair, separates failing rows from
// healthy ones, and neither does overall distance from the normal
// operating region, since hard transient wedges reach as far out as the
// jam does. The only reliable cue is all three readings sitting in
// their narrow seat bands simultaneously, so telling the jam from a
// transient means resolving each line's band at the scale of the seat
// flutter.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "gdcpd/dataset.hpp"
#include "gdcpd/rng.hpp"

namespace gdcpd::testing {

struct FixtureSpec {
  int cycles = 20;
  int min_rows = 100;  // rows per cycle, drawn uniformly in [min, max]
  int max_rows = 140;
  double cadence = 120.0;
  double level_scale = 1.0;  // multiplies every seat level
  double growth = 0.4;       // relative extra severity for the final cycle
  double missing_rate = 0.0;
  std::uint64_t seed = 0;
};

inline const std::vector<int>& fixture_planted() {
  static const std::vector<int> planted = {1, 5, 9};
  return planted;
}

// One channel's slice of the failure signature: within the final
// start_fb rows the channel jams at seat (in units of the private AR
// noise), fluttering by width times the private noise around it. Seats
// sit close enough to the healthy spread that hot excursions and hard
// wedges crowd the band from both sides.
struct StickPhase {
  int channel;
  int start_fb;
  double seat;
  double width;
};

inline const std::vector<StickPhase>& fixture_phases() {
  static const std::vector<StickPhase> phases = {
      {1, 30, 3.6, 0.10},
      {5, 30, -4.6, 0.15},
      {9, 30, 5.9, 0.20},
  };
  return phases;
}

inline TimeSeriesDataset make_fixture(const FixtureSpec& spec = {}) {
  constexpr int kFeatures = 12;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  StreamRng rng(spec.seed, 0xF1D0);

  std::vector<int> rows_per_cycle(static_cast<std::size_t>(spec.cycles));
  int total = 0;
  for (auto& r : rows_per_cycle) {
    r = spec.min_rows +
        static_cast<int>(rng.next_u64() %
                         static_cast<std::uint64_t>(spec.max_rows -
                                                    spec.min_rows + 1));
    total += r;
  }

  TimeSeriesDataset ds;
  ds.timestamps.resize(total);
  ds.features.resize(total, kFeatures);
  ds.labels.assign(static_cast<std::size_t>(total), 0);
  for (int j = 0; j < kFeatures; ++j)
    ds.feature_names.push_back("x" + std::to_string(j + 1));

  // Shared load for the instrumented channels: slow AR(1) with phi 0.985
  // and stationary sd 2.2. Fast private noise on every channel:
  // x_t = 0.9 x_{t-1} + 0.3 xi, sd ~ 0.69.
  const double driver_sd = 2.2;
  const double driver_phi = 0.985;
  const double driver_innov =
      driver_sd * std::sqrt(1.0 - driver_phi * driver_phi);
  double driver = driver_sd * rng.normal();

  Eigen::VectorXd state(kFeatures);
  const double stationary = 0.3 / std::sqrt(1.0 - 0.81);
  for (int j = 0; j < kFeatures; ++j) state(j) = stationary * rng.normal();

  Eigen::VectorXd offset(kFeatures), scale(kFeatures), gain(kFeatures);
  for (int j = 0; j < kFeatures; ++j) {
    offset(j) = 1.5 * j - 4.0;
    scale(j) = 0.5 + 0.3 * j;
    gain(j) = 0.7 + 0.05 * j;
  }

  int hunt_start = 0;
  for (const StickPhase& p : fixture_phases())
    hunt_start = std::max(hunt_start, p.start_fb);
  // Transient wedges keep clear of the jam window so every onset rises
  // from clean line-following rows.
  const int event_gate = hunt_start + 4;

  Eigen::Index row = 0;
  double t = 0.0;
  int stick_left = 0;
  int stick_mask = 0;
  bool stick_pair = false;
  double slam = 1.0;
  double heat = 0.7;
  int single_count = 0;
  int pair_count = 0;
  for (int c = 0; c < spec.cycles; ++c) {
    const double severity =
        1.0 + (spec.cycles > 1
                   ? spec.growth * c / static_cast<double>(spec.cycles - 1)
                   : 0.0);
    const int n = rows_per_cycle[static_cast<std::size_t>(c)];
    for (int i = 0; i < n; ++i) {
      t += spec.cadence;
      ds.timestamps(row) = t;
      const int from_break = n - 1 - i;
      driver = driver_phi * driver + driver_innov * rng.normal();

      // Transient wedge events, healthy stretches only. Singles and
      // pairs rotate through the instrumented lines so each line gets
      // stuck, and left free, in both roles.
      bool sticking = false;
      if (from_break >= event_gate) {
        if (stick_left == 0 && rng.uniform() < 0.08) {
          stick_left = 3 + static_cast<int>(rng.next_u64() % 4);
          stick_pair = rng.uniform() >= 0.55;
          if (stick_pair)
            stick_mask = 7 ^ (1 << (pair_count++ % 3));
          else
            stick_mask = 1 << (single_count++ % 3);
          slam = 1.0 + 0.35 * rng.uniform();
          heat = 0.62 + 0.18 * rng.uniform();
        }
        if (stick_left > 0) {
          sticking = true;
          --stick_left;
        }
      } else {
        stick_left = 0;
      }

      for (int j = 0; j < kFeatures; ++j) {
        state(j) = 0.9 * state(j) + 0.3 * rng.normal();
        const auto& planted = fixture_planted();
        const auto slot = std::find(planted.begin(), planted.end(), j);
        double signal = (slot != planted.end() ? gain(j) * driver : 0.0) +
                        state(j);
        for (const StickPhase& p : fixture_phases()) {
          if (p.channel != j) continue;
          const int k = static_cast<int>(slot - planted.begin());
          if (from_break < p.start_fb) {
            // The jam: a slam for the first few readings, then settled
            // on the seat. Wear makes the slam harder, not the seat
            // different.
            const double over = from_break >= p.start_fb - 3
                                    ? 1.0 + 0.6 * (severity - 1.0)
                                    : 1.0;
            signal = spec.level_scale * p.seat * over + p.width * state(j);
          } else if (sticking && ((stick_mask >> k) & 1)) {
            signal = spec.level_scale * p.seat * slam + p.width * state(j);
          } else if (sticking && stick_pair) {
            // Lone live line under a wedged pair: shed load runs it hot
            // toward its seat, throttled, never into the band.
            signal = spec.level_scale * p.seat * heat + 0.4 * state(j);
          }
        }
        double value = offset(j) + scale(j) * signal;
        if (spec.missing_rate > 0.0 && rng.uniform() < spec.missing_rate)
          value = nan;
        ds.features(row, j) = value;
      }
      ++row;
    }
    ds.labels[static_cast<std::size_t>(row - 1)] = 1;
  }
  return ds;
}

}  // namespace gdcpd::testing
