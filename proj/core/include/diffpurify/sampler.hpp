#ifndef DIFFPURIFY_SAMPLER_HPP
#define DIFFPURIFY_SAMPLER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "diffpurify/schedule.hpp"
#include "diffpurify/score.hpp"
#include "diffpurify/state.hpp"

namespace diffpurify {

struct StepRecord {
    int t = 0;
    State x;      // x_t
    State x_hat;  // denoised estimate at t
};

// Full reverse pass record, ordered t = T down to 0.
struct ReverseTrajectory {
    std::uint64_t seed = 0;
    int T = 0;
    std::vector<StepRecord> states;

    const StepRecord& at_time(int t) const;
    const State& x0() const { return states.back().x; }
};

// Denoised estimate from the score:
//   x_hat = (x_t + (1 - sigma) * score(x_t, t)) / sqrt(sigma).
// For an eps-model this is the familiar (x_t - sqrt(1-sigma) * eps_hat) / sqrt(sigma)
// with eps_hat = -sqrt(1 - sigma) * score. Valid for 0 <= t <= T (identity at t = 0).
State tweedie_estimate(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t, int t);

// One ancestral step: x_{t-1} = (x_t + beta_t * score) / sqrt(alpha_t) + sqrt(beta_t) * z,
// with no noise at t = 1. Throws on a non-finite intermediate, naming the step.
State reverse_step(const ScoreModel& model, const NoiseSchedule& sched, const State& x_t, int t,
                   RngStream& rng);

// Full unguided reverse pass from x_T ~ N(0, I); records (t, x_t, x_hat) at
// every step down to t = 0.
ReverseTrajectory sample_unconditional(const ScoreModel& model, const NoiseSchedule& sched,
                                       std::uint64_t seed);

// Per-step scalars (t, |x_t|_2, |x_hat|_2) as CSV.
void trajectory_scalars_csv(const ReverseTrajectory& traj, const std::string& path);

// Portable-tensor export: times, states and estimates as stacked matrices.
void save_trajectory(const std::string& path, const ReverseTrajectory& traj);
ReverseTrajectory load_trajectory(const std::string& path);

}  // namespace diffpurify

#endif
